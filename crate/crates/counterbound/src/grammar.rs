//! Grammars over integer counter actions, parse trees, yields, membership,
//! productivity and derivability.
//!
//! A GVAS is a context-free grammar whose terminals are integer counter
//! deltas, together with an initial counter value. Words derived from the
//! start symbol drive a one-dimensional VAS: a run adds the deltas left to
//! right and must keep the counter nonnegative.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

/// Index of a nonterminal inside its grammar. Dense, assigned in
/// declaration order.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct NtId(pub u32);

impl NtId {
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

/// Right-hand-side symbol: nonterminal or integer counter action.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Sym {
    Nt(NtId),
    Act(i64),
}

/// Production rule. Rules keep their index in `Grammar::rules`; all
/// iteration orders are rule-index order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub lhs: NtId,
    pub rhs: Vec<Sym>,
}

/// Context-free grammar over integer actions.
#[derive(Clone, Debug)]
pub struct Grammar {
    names: Vec<String>,
    by_name: HashMap<String, NtId>,
    pub rules: Vec<Rule>,
    pub start: NtId,
}

/// Grammar-controlled VAS: a grammar plus the initial counter value.
#[derive(Clone, Debug)]
pub struct Gvas {
    pub grammar: Grammar,
    pub c_init: u64,
}

/// A [`Gvas`] whose rules all have shape `X -> Y Z`, `X -> a` with
/// `a` in {-1,0,1}, or `X -> ε`, and whose nonterminals are all
/// productive. Constructed via [`NormalizedGvas::new`] or
/// [`crate::normalize::normalize`].
#[derive(Clone, Debug)]
pub struct NormalizedGvas {
    inner: Gvas,
}

/// Terminal word: a sequence of counter deltas.
pub type Word = Vec<i64>;

#[derive(Debug, Error)]
pub enum GrammarError {
    #[error("empty language: start symbol '{0}' is not productive")]
    EmptyLanguage(String),
    #[error("grammar is not in normalized form: {0}")]
    NotNormalized(String),
    #[error("unknown nonterminal '{0}'")]
    UnknownNonterminal(String),
    #[error("incomplete tree: nonterminal leaf '{0}' at node {1}")]
    IncompleteTree(String, String),
    #[error("rule {0} references undeclared nonterminal")]
    BadRule(usize),
}

impl Grammar {
    pub fn new() -> Self {
        Grammar {
            names: Vec::new(),
            by_name: HashMap::new(),
            rules: Vec::new(),
            start: NtId(0),
        }
    }

    /// Adds (or finds) a nonterminal by name.
    pub fn intern(&mut self, name: &str) -> NtId {
        if let Some(&id) = self.by_name.get(name) {
            return id;
        }
        let id = NtId(self.names.len() as u32);
        self.names.push(name.to_string());
        self.by_name.insert(name.to_string(), id);
        id
    }

    pub fn lookup(&self, name: &str) -> Option<NtId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: NtId) -> &str {
        &self.names[id.idx()]
    }

    pub fn nt_count(&self) -> usize {
        self.names.len()
    }

    pub fn nt_ids(&self) -> impl Iterator<Item = NtId> {
        (0..self.names.len() as u32).map(NtId)
    }

    /// The set of actions occurring in rule right-hand sides.
    pub fn actions(&self) -> BTreeSet<i64> {
        let mut acts = BTreeSet::new();
        for r in &self.rules {
            for s in &r.rhs {
                if let Sym::Act(a) = s {
                    acts.insert(*a);
                }
            }
        }
        acts
    }

    pub fn rules_of(&self, x: NtId) -> impl Iterator<Item = (usize, &Rule)> {
        self.rules
            .iter()
            .enumerate()
            .filter(move |(_, r)| r.lhs == x)
    }

    /// Rule indices grouped by left-hand side, for hot loops.
    pub fn rules_by_lhs(&self) -> Vec<Vec<usize>> {
        let mut by_lhs = vec![Vec::new(); self.nt_count()];
        for (ri, r) in self.rules.iter().enumerate() {
            by_lhs[r.lhs.idx()].push(ri);
        }
        by_lhs
    }

    /// Least fixpoint of "derives some terminal word".
    pub fn productive_set(&self) -> BTreeSet<NtId> {
        let mut prod = vec![false; self.nt_count()];
        let mut changed = true;
        while changed {
            changed = false;
            for r in &self.rules {
                if prod[r.lhs.idx()] {
                    continue;
                }
                let ok = r.rhs.iter().all(|s| match s {
                    Sym::Act(_) => true,
                    Sym::Nt(y) => prod[y.idx()],
                });
                if ok {
                    prod[r.lhs.idx()] = true;
                    changed = true;
                }
            }
        }
        self.nt_ids().filter(|x| prod[x.idx()]).collect()
    }

    /// Forward closure from the start symbol: contains `start`, and for
    /// every rule whose lhs is in the set, every rhs nonterminal is too.
    pub fn derivable_set(&self) -> BTreeSet<NtId> {
        self.derivable_from(self.start)
    }

    /// Forward closure from an arbitrary root symbol.
    pub fn derivable_from(&self, root: NtId) -> BTreeSet<NtId> {
        let mut seen = vec![false; self.nt_count()];
        let mut queue = VecDeque::new();
        seen[root.idx()] = true;
        queue.push_back(root);
        while let Some(x) = queue.pop_front() {
            for (_, r) in self.rules_of(x) {
                for s in &r.rhs {
                    if let Sym::Nt(y) = s {
                        if !seen[y.idx()] {
                            seen[y.idx()] = true;
                            queue.push_back(*y);
                        }
                    }
                }
            }
        }
        self.nt_ids().filter(|x| seen[x.idx()]).collect()
    }

    /// Checks the normalized rule shapes without checking productivity.
    pub fn check_normalized_shapes(&self) -> Result<(), GrammarError> {
        for (i, r) in self.rules.iter().enumerate() {
            let ok = match r.rhs.as_slice() {
                [] => true,
                [Sym::Act(a)] => (-1..=1).contains(a),
                [Sym::Nt(_), Sym::Nt(_)] => true,
                _ => false,
            };
            if !ok {
                return Err(GrammarError::NotNormalized(format!(
                    "rule {} ('{}' -> ...) is not of shape YZ, a, or ε",
                    i,
                    self.name(r.lhs)
                )));
            }
        }
        Ok(())
    }

    /// Tabular recognition of `word ∈ L(G[x])` for grammars in normalized
    /// shape. Spans are saturated to a fixpoint so that nullable sides of
    /// binary rules are handled.
    pub fn member(&self, x: NtId, word: &[i64]) -> Result<bool, GrammarError> {
        Ok(self.spans(word)?.holds(x, 0, word.len()))
    }

    /// A parse tree for `word` from `x`, reconstructed from the
    /// recognition table, or `None` when the word is not in the language.
    pub fn derive_tree(&self, x: NtId, word: &[i64]) -> Result<Option<ParseTree>, GrammarError> {
        let table = self.spans(word)?;
        if !table.holds(x, 0, word.len()) {
            return Ok(None);
        }
        Ok(Some(table.rebuild(self, word, x, 0, word.len())))
    }

    fn spans(&self, word: &[i64]) -> Result<SpanTable, GrammarError> {
        self.check_normalized_shapes()?;
        let n = word.len();
        let v = self.nt_count();
        // nullable fixpoint doubles as the diagonal of the span table
        let mut nullable = vec![false; v];
        let mut nullable_bp: Vec<Option<usize>> = vec![None; v];
        let mut changed = true;
        while changed {
            changed = false;
            for (ri, r) in self.rules.iter().enumerate() {
                if nullable[r.lhs.idx()] {
                    continue;
                }
                let ok = match r.rhs.as_slice() {
                    [] => true,
                    [Sym::Nt(y), Sym::Nt(z)] => nullable[y.idx()] && nullable[z.idx()],
                    _ => false,
                };
                if ok {
                    nullable[r.lhs.idx()] = true;
                    nullable_bp[r.lhs.idx()] = Some(ri);
                    changed = true;
                }
            }
        }
        let mut table = SpanTable {
            n,
            v,
            span: vec![false; (n + 1) * (n + 1) * v],
            bp: HashMap::new(),
            nullable_bp,
        };
        for i in 0..=n {
            for y in 0..v {
                let idx = table.at(i, i, y);
                table.span[idx] = nullable[y];
            }
        }
        for len in 1..=n {
            for i in 0..=(n - len) {
                let j = i + len;
                // within-span fixpoint: binary rules with a nullable side
                // can chain inside one span
                let mut dirty = true;
                while dirty {
                    dirty = false;
                    for (ri, r) in self.rules.iter().enumerate() {
                        if table.span[table.at(i, j, r.lhs.idx())] {
                            continue;
                        }
                        let just = match r.rhs.as_slice() {
                            [Sym::Act(a)] if len == 1 && word[i] == *a => Some(i),
                            [Sym::Nt(y), Sym::Nt(z)] => (i..=j).find(|&k| {
                                table.span[table.at(i, k, y.idx())]
                                    && table.span[table.at(k, j, z.idx())]
                            }),
                            _ => None,
                        };
                        if let Some(k) = just {
                            let idx = table.at(i, j, r.lhs.idx());
                            table.span[idx] = true;
                            table.bp.insert((r.lhs, i, j), (ri, k));
                            dirty = true;
                        }
                    }
                }
            }
        }
        Ok(table)
    }

    /// Minimal-height complete parse tree per nonterminal, or `None` for
    /// non-productive symbols. Ties break toward the lowest rule index.
    pub fn min_height_trees(&self) -> Vec<Option<ParseTree>> {
        let v = self.nt_count();
        // height in edges of the best known tree
        let mut height = vec![usize::MAX; v];
        let mut pick: Vec<Option<usize>> = vec![None; v];
        let mut changed = true;
        while changed {
            changed = false;
            for (ri, r) in self.rules.iter().enumerate() {
                let h = match r.rhs.as_slice() {
                    rhs if rhs.is_empty() => Some(1),
                    rhs => {
                        let mut worst = 0usize;
                        let mut ok = true;
                        for s in rhs {
                            match s {
                                Sym::Act(_) => worst = worst.max(1),
                                Sym::Nt(y) => {
                                    if height[y.idx()] == usize::MAX {
                                        ok = false;
                                        break;
                                    }
                                    worst = worst.max(height[y.idx()] + 1);
                                }
                            }
                        }
                        if ok {
                            Some(worst)
                        } else {
                            None
                        }
                    }
                };
                if let Some(h) = h {
                    if h < height[r.lhs.idx()] {
                        height[r.lhs.idx()] = h;
                        pick[r.lhs.idx()] = Some(ri);
                        changed = true;
                    }
                }
            }
        }
        fn build(g: &Grammar, pick: &[Option<usize>], x: NtId) -> Option<ParseTree> {
            let ri = pick[x.idx()]?;
            let r = &g.rules[ri];
            if r.rhs.is_empty() {
                return Some(ParseTree::Node(x, vec![ParseTree::Eps]));
            }
            let mut children = Vec::with_capacity(r.rhs.len());
            for s in &r.rhs {
                match s {
                    Sym::Act(a) => children.push(ParseTree::Act(*a)),
                    Sym::Nt(y) => children.push(build(g, pick, *y)?),
                }
            }
            Some(ParseTree::Node(x, children))
        }
        self.nt_ids().map(|x| build(self, &pick, x)).collect()
    }
}

impl Default for Grammar {
    fn default() -> Self {
        Self::new()
    }
}

/// Recognition table with backpointers. Justifying facts are always
/// recorded before the facts they justify, so rebuilding terminates.
struct SpanTable {
    n: usize,
    v: usize,
    span: Vec<bool>,
    // (lhs, i, j) -> (rule, split point)
    bp: HashMap<(NtId, usize, usize), (usize, usize)>,
    nullable_bp: Vec<Option<usize>>,
}

impl SpanTable {
    fn at(&self, i: usize, j: usize, y: usize) -> usize {
        (i * (self.n + 1) + j) * self.v + y
    }

    fn holds(&self, x: NtId, i: usize, j: usize) -> bool {
        self.span[self.at(i, j, x.idx())]
    }

    fn rebuild_null(&self, g: &Grammar, x: NtId) -> ParseTree {
        let ri = self.nullable_bp[x.idx()].expect("nullable symbol");
        match g.rules[ri].rhs.as_slice() {
            [] => ParseTree::Node(x, vec![ParseTree::Eps]),
            [Sym::Nt(y), Sym::Nt(z)] => ParseTree::Node(
                x,
                vec![self.rebuild_null(g, *y), self.rebuild_null(g, *z)],
            ),
            _ => unreachable!(),
        }
    }

    fn rebuild(&self, g: &Grammar, word: &[i64], x: NtId, i: usize, j: usize) -> ParseTree {
        if i == j {
            return self.rebuild_null(g, x);
        }
        let (ri, k) = self.bp[&(x, i, j)];
        match g.rules[ri].rhs.as_slice() {
            [Sym::Act(a)] => ParseTree::Node(x, vec![ParseTree::Act(*a)]),
            [Sym::Nt(y), Sym::Nt(z)] => ParseTree::Node(
                x,
                vec![
                    self.rebuild(g, word, *y, i, k),
                    self.rebuild(g, word, *z, k, j),
                ],
            ),
            _ => unreachable!(),
        }
    }
}

impl Gvas {
    /// Removes non-productive nonterminals and every rule mentioning them.
    /// Fails with an empty-language error when the start symbol itself is
    /// not productive.
    pub fn prune_nonproductive(&self) -> Result<Gvas, GrammarError> {
        let prod = self.grammar.productive_set();
        if !prod.contains(&self.grammar.start) {
            return Err(GrammarError::EmptyLanguage(
                self.grammar.name(self.grammar.start).to_string(),
            ));
        }
        let mut g = Grammar::new();
        // keep declaration order for surviving symbols
        for x in self.grammar.nt_ids() {
            if prod.contains(&x) {
                g.intern(self.grammar.name(x));
            }
        }
        g.start = g.lookup(self.grammar.name(self.grammar.start)).unwrap();
        for r in &self.grammar.rules {
            if !prod.contains(&r.lhs) {
                continue;
            }
            let keep = r.rhs.iter().all(|s| match s {
                Sym::Act(_) => true,
                Sym::Nt(y) => prod.contains(y),
            });
            if keep {
                let lhs = g.lookup(self.grammar.name(r.lhs)).unwrap();
                let rhs = r
                    .rhs
                    .iter()
                    .map(|s| match s {
                        Sym::Act(a) => Sym::Act(*a),
                        Sym::Nt(y) => Sym::Nt(g.lookup(self.grammar.name(*y)).unwrap()),
                    })
                    .collect();
                g.rules.push(Rule { lhs, rhs });
            }
        }
        Ok(Gvas {
            grammar: g,
            c_init: self.c_init,
        })
    }

    pub fn derivable_set(&self) -> BTreeSet<NtId> {
        self.grammar.derivable_set()
    }
}

impl NormalizedGvas {
    /// Validates the normalized-shape and all-productive invariants.
    pub fn new(gvas: Gvas) -> Result<Self, GrammarError> {
        gvas.grammar.check_normalized_shapes()?;
        let prod = gvas.grammar.productive_set();
        if !prod.contains(&gvas.grammar.start) {
            return Err(GrammarError::EmptyLanguage(
                gvas.grammar.name(gvas.grammar.start).to_string(),
            ));
        }
        if prod.len() != gvas.grammar.nt_count() {
            let bad = gvas
                .grammar
                .nt_ids()
                .find(|x| !prod.contains(x))
                .unwrap();
            return Err(GrammarError::NotNormalized(format!(
                "nonterminal '{}' is not productive",
                gvas.grammar.name(bad)
            )));
        }
        Ok(NormalizedGvas { inner: gvas })
    }

    pub fn gvas(&self) -> &Gvas {
        &self.inner
    }

    pub fn grammar(&self) -> &Grammar {
        &self.inner.grammar
    }

    pub fn c_init(&self) -> u64 {
        self.inner.c_init
    }

    pub fn into_gvas(self) -> Gvas {
        self.inner
    }

    pub fn member(&self, x: NtId, word: &[i64]) -> bool {
        self.grammar().member(x, word).expect("normalized by construction")
    }
}

impl std::ops::Deref for NormalizedGvas {
    type Target = Gvas;
    fn deref(&self) -> &Gvas {
        &self.inner
    }
}

/// Parse tree node. A tree is *complete* when it has no `Hole` leaves.
/// A rule `X -> ε` is represented as a node with a single `Eps` child,
/// so that the empty word shows up as a leaf of its own.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParseTree {
    /// Expanded nonterminal; children follow one of its rules.
    Node(NtId, Vec<ParseTree>),
    /// Unexpanded nonterminal leaf (the hole of a context or pump tree).
    Hole(NtId),
    /// Action leaf.
    Act(i64),
    /// Empty-word leaf.
    Eps,
}

impl ParseTree {
    pub fn is_complete(&self) -> bool {
        match self {
            ParseTree::Hole(_) => false,
            ParseTree::Act(_) | ParseTree::Eps => true,
            ParseTree::Node(_, cs) => cs.iter().all(|c| c.is_complete()),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            ParseTree::Node(_, cs) => 1 + cs.iter().map(|c| c.node_count()).sum::<usize>(),
            _ => 1,
        }
    }

    /// Root symbol if this is a nonterminal node or hole.
    pub fn root_nt(&self) -> Option<NtId> {
        match self {
            ParseTree::Node(x, _) | ParseTree::Hole(x) => Some(*x),
            _ => None,
        }
    }

    /// Paths of all `Hole` leaves, in left-to-right order.
    pub fn hole_paths(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        fn walk(t: &ParseTree, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            match t {
                ParseTree::Hole(_) => out.push(path.clone()),
                ParseTree::Node(_, cs) => {
                    for (i, c) in cs.iter().enumerate() {
                        path.push(i);
                        walk(c, path, out);
                        path.pop();
                    }
                }
                _ => {}
            }
        }
        walk(self, &mut Vec::new(), &mut out);
        out
    }

    /// Replaces the single hole with `filler`. Panics if the hole count
    /// differs from one.
    pub fn fill_hole(&self, filler: &ParseTree) -> ParseTree {
        assert_eq!(self.hole_paths().len(), 1, "tree must have exactly one hole");
        fn go(t: &ParseTree, filler: &ParseTree) -> ParseTree {
            match t {
                ParseTree::Hole(_) => filler.clone(),
                ParseTree::Node(x, cs) => {
                    ParseTree::Node(*x, cs.iter().map(|c| go(c, filler)).collect())
                }
                other => other.clone(),
            }
        }
        go(self, filler)
    }

    pub fn subtree(&self, path: &[usize]) -> Option<&ParseTree> {
        let mut cur = self;
        for &i in path {
            match cur {
                ParseTree::Node(_, cs) => cur = cs.get(i)?,
                _ => return None,
            }
        }
        Some(cur)
    }

    /// Replaces the subtree at `path` (root path replaces the whole tree).
    pub fn with_subtree(&self, path: &[usize], sub: ParseTree) -> ParseTree {
        if path.is_empty() {
            return sub;
        }
        match self {
            ParseTree::Node(x, cs) => {
                let mut cs = cs.clone();
                cs[path[0]] = cs[path[0]].with_subtree(&path[1..], sub);
                ParseTree::Node(*x, cs)
            }
            _ => panic!("path leads through a leaf"),
        }
    }

    /// Terminal yield split around the unique hole: actions to its left
    /// and to its right.
    pub fn yield_around_hole(&self) -> (Word, Word) {
        let mut left = Vec::new();
        let mut right = Vec::new();
        let mut seen_hole = false;
        fn walk(t: &ParseTree, left: &mut Word, right: &mut Word, seen: &mut bool) {
            match t {
                ParseTree::Hole(_) => *seen = true,
                ParseTree::Act(a) => {
                    if *seen {
                        right.push(*a)
                    } else {
                        left.push(*a)
                    }
                }
                ParseTree::Eps => {}
                ParseTree::Node(_, cs) => {
                    for c in cs {
                        walk(c, left, right, seen);
                    }
                }
            }
        }
        walk(self, &mut left, &mut right, &mut seen_hole);
        (left, right)
    }
}

/// Concatenated action leaves in left-to-right order. ε leaves contribute
/// nothing. Errors on the first nonterminal leaf.
pub fn yield_of(tree: &ParseTree) -> Result<Word, GrammarError> {
    fn walk(t: &ParseTree, path: &mut Vec<usize>, out: &mut Word) -> Result<(), (String, String)> {
        match t {
            ParseTree::Act(a) => out.push(*a),
            ParseTree::Eps => {}
            ParseTree::Hole(x) => {
                let p = if path.is_empty() {
                    "ε".to_string()
                } else {
                    path.iter()
                        .map(|i| i.to_string())
                        .collect::<Vec<_>>()
                        .join(".")
                };
                return Err((format!("{:?}", x), p));
            }
            ParseTree::Node(_, cs) => {
                for (i, c) in cs.iter().enumerate() {
                    path.push(i);
                    walk(c, path, out)?;
                    path.pop();
                }
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(tree, &mut Vec::new(), &mut out)
        .map_err(|(sym, path)| GrammarError::IncompleteTree(sym, path))?;
    Ok(out)
}

/// Sum of the action values of a word.
pub fn sum_of(word: &[i64]) -> i64 {
    word.iter().sum()
}

impl fmt::Display for Grammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            write!(f, "{} ->", self.name(r.lhs))?;
            for s in &r.rhs {
                match s {
                    Sym::Act(a) => write!(f, " {}", a)?,
                    Sym::Nt(y) => write!(f, " {}", self.name(*y))?,
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
