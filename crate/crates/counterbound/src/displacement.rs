//! Displacements (best achievable yield sums), infinite-displacement
//! detection, and the constructive small witnesses: positive pumps,
//! derivability contexts, and sign-constrained complete-tree families.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use crate::grammar::{sum_of, yield_of, NormalizedGvas, NtId, ParseTree, Sym};

/// Displacement value: -∞, a finite integer, or +∞.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum ExtValue {
    NegInf,
    Fin(i64),
    PosInf,
}

impl fmt::Display for ExtValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtValue::NegInf => write!(f, "-inf"),
            ExtValue::Fin(v) => write!(f, "{}", v),
            ExtValue::PosInf => write!(f, "+inf"),
        }
    }
}

/// Per-nonterminal displacement of the sub-grammar rooted there.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DisplacementTable {
    vals: Vec<ExtValue>,
}

impl DisplacementTable {
    pub fn get(&self, x: NtId) -> ExtValue {
        self.vals[x.idx()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (NtId, ExtValue)> + '_ {
        self.vals
            .iter()
            .enumerate()
            .map(|(i, v)| (NtId(i as u32), *v))
    }
}

/// A pumpable growing pattern: a parse tree at `anchor` with a single
/// `anchor`-labeled hole whose surrounding yield has positive sum, plus a
/// context tree from the start symbol down to `anchor`.
#[derive(Clone, Debug)]
pub struct PumpWitness {
    pub anchor: NtId,
    pub pump_tree: ParseTree,
    pub context_tree: ParseTree,
}

#[derive(Debug, Error)]
pub enum DisplacementError {
    #[error("displacement of '{0}' is +inf; use find_positive_pump for a growing pattern")]
    InfiniteDisplacement(String),
    #[error("nonterminal '{0}' is not derivable from the start symbol")]
    NotDerivable(String),
}

/// Best yield sums achievable by complete trees of height at most
/// `nt_count`, with rule picks for realizing the trees. Finite
/// displacements coincide with these values.
struct BoundedBest {
    height: usize,
    // val[h][x]: best sum over complete trees of height (edges) <= h
    val: Vec<Vec<Option<i64>>>,
    pick: Vec<Vec<Option<usize>>>,
}

impl BoundedBest {
    fn compute(g: &NormalizedGvas) -> BoundedBest {
        let gr = g.grammar();
        let v = gr.nt_count();
        let height = v.max(1);
        let mut val: Vec<Vec<Option<i64>>> = vec![vec![None; v]; height + 1];
        let mut pick = vec![vec![None; v]; height + 1];
        for h in 1..=height {
            for (ri, r) in gr.rules.iter().enumerate() {
                let cand = match r.rhs.as_slice() {
                    [] => Some(0),
                    [Sym::Act(a)] => Some(*a),
                    [Sym::Nt(y), Sym::Nt(z)] => {
                        match (val[h - 1][y.idx()], val[h - 1][z.idx()]) {
                            // saturating: values grow like 2^|V| on wide grammars
                            (Some(a), Some(b)) => Some(a.saturating_add(b)),
                            _ => None,
                        }
                    }
                    _ => unreachable!("normalized shapes"),
                };
                if let Some(c) = cand {
                    if val[h][r.lhs.idx()].map_or(true, |old| c > old) {
                        val[h][r.lhs.idx()] = Some(c);
                        pick[h][r.lhs.idx()] = Some(ri);
                    }
                }
            }
        }
        BoundedBest { height, val, pick }
    }

    /// All nonterminals are productive, so the top row is fully defined.
    fn best(&self, x: NtId) -> i64 {
        self.val[self.height][x.idx()].expect("productive nonterminal")
    }

    fn realize_at(&self, g: &NormalizedGvas, x: NtId, h: usize) -> ParseTree {
        let ri = self.pick[h][x.idx()].expect("value realized at this height");
        let r = &g.grammar().rules[ri];
        match r.rhs.as_slice() {
            [] => ParseTree::Node(x, vec![ParseTree::Eps]),
            [Sym::Act(a)] => ParseTree::Node(x, vec![ParseTree::Act(*a)]),
            [Sym::Nt(y), Sym::Nt(z)] => ParseTree::Node(
                x,
                vec![self.realize_at(g, *y, h - 1), self.realize_at(g, *z, h - 1)],
            ),
            _ => unreachable!(),
        }
    }

    /// Complete tree realizing `best(x)`, height <= nt_count.
    fn realize(&self, g: &NormalizedGvas, x: NtId) -> ParseTree {
        self.realize_at(g, x, self.height)
    }
}

/// Context-graph edge for rule `rule: src -> Y Z`: descends into one
/// child, the other child is completed with its best bounded tree.
#[derive(Clone, Copy, Debug)]
struct CtxEdge {
    src: NtId,
    dst: NtId,
    rule: usize,
    // true: descend into the left child (the right sibling is completed)
    left: bool,
    weight: i64,
}

fn context_edges(g: &NormalizedGvas, bb: &BoundedBest, nodes: &[bool]) -> Vec<CtxEdge> {
    let mut edges = Vec::new();
    for (ri, r) in g.grammar().rules.iter().enumerate() {
        if !nodes[r.lhs.idx()] {
            continue;
        }
        if let [Sym::Nt(y), Sym::Nt(z)] = r.rhs.as_slice() {
            edges.push(CtxEdge {
                src: r.lhs,
                dst: *y,
                rule: ri,
                left: true,
                weight: bb.best(*z),
            });
            edges.push(CtxEdge {
                src: r.lhs,
                dst: *z,
                rule: ri,
                left: false,
                weight: bb.best(*y),
            });
        }
    }
    edges
}

/// Max-plus Bellman-Ford positive cycle detection over the given edges.
/// Returns a positive-weight simple cycle in edge order, or None.
fn positive_cycle(nt_count: usize, edges: &[CtxEdge]) -> Option<Vec<CtxEdge>> {
    let mut dist = vec![0i64; nt_count];
    let mut pred: Vec<Option<usize>> = vec![None; nt_count];
    let mut improved_node = None;
    for round in 0..=nt_count {
        let mut improved = false;
        for (ei, e) in edges.iter().enumerate() {
            let cand = dist[e.src.idx()].saturating_add(e.weight);
            if cand > dist[e.dst.idx()] {
                dist[e.dst.idx()] = cand;
                pred[e.dst.idx()] = Some(ei);
                improved = true;
                improved_node = Some(e.dst);
            }
        }
        if !improved {
            return None;
        }
        let _ = round;
    }
    // walk predecessors to land inside a cycle of the pred graph
    let mut cur = improved_node.expect("improvement seen");
    for _ in 0..nt_count {
        cur = edges[pred[cur.idx()].expect("on an improving chain")].src;
    }
    let mut cycle_edges = Vec::new();
    let anchor = cur;
    loop {
        let e = edges[pred[cur.idx()].expect("cycle node has a predecessor")];
        cycle_edges.push(e);
        cur = e.src;
        if cur == anchor {
            break;
        }
    }
    cycle_edges.reverse(); // graph direction: anchor -> ... -> anchor
    let weight: i64 = cycle_edges.iter().map(|e| e.weight).sum();
    assert!(weight > 0, "extracted cycle must have positive weight");
    // rotate so the cycle starts at its least nonterminal
    let min_pos = cycle_edges
        .iter()
        .enumerate()
        .min_by_key(|(_, e)| e.src)
        .map(|(i, _)| i)
        .unwrap();
    cycle_edges.rotate_left(min_pos);
    Some(cycle_edges)
}

fn induced(nodes: &std::collections::BTreeSet<NtId>, n: usize) -> Vec<bool> {
    let mut mask = vec![false; n];
    for x in nodes {
        mask[x.idx()] = true;
    }
    mask
}

/// Exact displacement per nonterminal. Finite values are realized by
/// bounded-height trees; +∞ holds exactly when a positive-weight context
/// cycle is reachable through the rules.
pub fn displacement_table(g: &NormalizedGvas) -> DisplacementTable {
    let gr = g.grammar();
    let n = gr.nt_count();
    let bb = BoundedBest::compute(g);
    let all = vec![true; n];
    let mut edges = context_edges(g, &bb, &all);
    // mark every node lying on some positive cycle, peeling one cycle at
    // a time; a broken cycle always passes through a marked node
    let mut marked = vec![false; n];
    loop {
        match positive_cycle(n, &edges) {
            None => break,
            Some(cycle) => {
                for e in &cycle {
                    marked[e.src.idx()] = true;
                }
                edges.retain(|e| !marked[e.src.idx()] && !marked[e.dst.idx()]);
            }
        }
    }
    // +∞ propagates to everything that reaches a marked node
    let full_edges = context_edges(g, &bb, &all);
    let mut infinite = marked;
    let mut changed = true;
    while changed {
        changed = false;
        for e in &full_edges {
            if infinite[e.dst.idx()] && !infinite[e.src.idx()] {
                infinite[e.src.idx()] = true;
                changed = true;
            }
        }
    }
    let vals = (0..n)
        .map(|i| {
            if infinite[i] {
                ExtValue::PosInf
            } else {
                ExtValue::Fin(bb.best(NtId(i as u32)))
            }
        })
        .collect();
    DisplacementTable { vals }
}

/// Contracts repeated nonterminals along root-to-leaf paths by splicing
/// the lower occurrence over the upper one.
fn contract_to_elementary(mut t: ParseTree) -> ParseTree {
    fn find_repeat(
        t: &ParseTree,
        path: &mut Vec<usize>,
        on_path: &mut Vec<(NtId, Vec<usize>)>,
    ) -> Option<(Vec<usize>, Vec<usize>)> {
        if let ParseTree::Node(x, cs) = t {
            if let Some((_, upper)) = on_path.iter().find(|(y, _)| y == x) {
                return Some((upper.clone(), path.clone()));
            }
            on_path.push((*x, path.clone()));
            for (i, c) in cs.iter().enumerate() {
                path.push(i);
                if let Some(found) = find_repeat(c, path, on_path) {
                    return Some(found);
                }
                path.pop();
            }
            on_path.pop();
        }
        None
    }
    loop {
        match find_repeat(&t, &mut Vec::new(), &mut Vec::new()) {
            None => return t,
            Some((upper, lower)) => {
                let sub = t.subtree(&lower).unwrap().clone();
                t = t.with_subtree(&upper, sub);
            }
        }
    }
}

/// A complete elementary parse tree achieving the (finite) displacement
/// of `x`. Errors when the displacement is +∞.
pub fn elementary_tree(g: &NormalizedGvas, x: NtId) -> Result<ParseTree, DisplacementError> {
    let table = displacement_table(g);
    match table.get(x) {
        ExtValue::PosInf => Err(DisplacementError::InfiniteDisplacement(
            g.grammar().name(x).to_string(),
        )),
        _ => {
            let bb = BoundedBest::compute(g);
            Ok(contract_to_elementary(bb.realize(g, x)))
        }
    }
}

/// Shortest derivation context from `root` down to `x`: a parse tree with
/// exactly one nonterminal leaf, labeled `x`. Side branches are completed
/// with best bounded trees.
fn context_from(
    g: &NormalizedGvas,
    bb: &BoundedBest,
    root: NtId,
    x: NtId,
) -> Result<ParseTree, DisplacementError> {
    if root == x {
        return Ok(ParseTree::Hole(root));
    }
    let gr = g.grammar();
    let n = gr.nt_count();
    let all = vec![true; n];
    let edges = context_edges(g, bb, &all);
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut seen = vec![false; n];
    seen[root.idx()] = true;
    let mut queue = VecDeque::new();
    queue.push_back(root);
    while let Some(u) = queue.pop_front() {
        if u == x {
            break;
        }
        for (ei, e) in edges.iter().enumerate() {
            if e.src == u && !seen[e.dst.idx()] {
                seen[e.dst.idx()] = true;
                pred[e.dst.idx()] = Some(ei);
                queue.push_back(e.dst);
            }
        }
    }
    if !seen[x.idx()] {
        return Err(DisplacementError::NotDerivable(gr.name(x).to_string()));
    }
    // rebuild the path top-down
    let mut path_edges = Vec::new();
    let mut cur = x;
    while cur != root {
        let e = edges[pred[cur.idx()].expect("reached via BFS")];
        path_edges.push(e);
        cur = e.src;
    }
    path_edges.reverse();
    let mut tree = ParseTree::Hole(x);
    for e in path_edges.iter().rev() {
        let r = &gr.rules[e.rule];
        let [Sym::Nt(y), Sym::Nt(z)] = r.rhs.as_slice() else {
            unreachable!()
        };
        tree = if e.left {
            ParseTree::Node(e.src, vec![tree, bb.realize(g, *z)])
        } else {
            ParseTree::Node(e.src, vec![bb.realize(g, *y), tree])
        };
    }
    Ok(tree)
}

/// Parse tree from the start symbol with exactly one nonterminal leaf,
/// labeled `x`.
pub fn derivability_witness(
    g: &NormalizedGvas,
    x: NtId,
) -> Result<ParseTree, DisplacementError> {
    let bb = BoundedBest::compute(g);
    context_from(g, &bb, g.grammar().start, x)
}

fn build_pump(g: &NormalizedGvas, bb: &BoundedBest, cycle: &[CtxEdge]) -> ParseTree {
    let gr = g.grammar();
    let anchor = cycle[0].src;
    let mut tree = ParseTree::Hole(anchor);
    for e in cycle.iter().rev() {
        let r = &gr.rules[e.rule];
        let [Sym::Nt(y), Sym::Nt(z)] = r.rhs.as_slice() else {
            unreachable!()
        };
        tree = if e.left {
            ParseTree::Node(e.src, vec![tree, bb.realize(g, *z)])
        } else {
            ParseTree::Node(e.src, vec![bb.realize(g, *y), tree])
        };
    }
    tree
}

fn find_positive_pump_from(g: &NormalizedGvas, root: NtId) -> Option<PumpWitness> {
    let gr = g.grammar();
    let bb = BoundedBest::compute(g);
    let derivable = gr.derivable_from(root);
    let mask = induced(&derivable, gr.nt_count());
    let edges = context_edges(g, &bb, &mask);
    let cycle = positive_cycle(gr.nt_count(), &edges)?;
    let anchor = cycle[0].src;
    let pump_tree = build_pump(g, &bb, &cycle);
    let context_tree = context_from(g, &bb, root, anchor).expect("cycle nodes are derivable");
    let (u, v) = pump_tree.yield_around_hole();
    debug_assert!(sum_of(&u) + sum_of(&v) > 0);
    Some(PumpWitness {
        anchor,
        pump_tree,
        context_tree,
    })
}

/// A positive pump at a derivable nonterminal, present exactly when the
/// displacement of the start symbol is +∞.
pub fn find_positive_pump(g: &NormalizedGvas) -> Option<PumpWitness> {
    find_positive_pump_from(g, g.grammar().start)
}

/// Complete parse trees `T_1..T_k` for the given start symbols whose total
/// yield sum is positive when the displacement sum is positive, and zero
/// when it is zero. The total node count stays within the small-witness
/// bound `3k·4^(|V|+1)`.
pub fn derive_witness(g: &NormalizedGvas, starts: &[NtId]) -> Vec<ParseTree> {
    assert!(!starts.is_empty(), "at least one start symbol required");
    let table = displacement_table(g);
    let bb = BoundedBest::compute(g);
    let infinite_at = starts
        .iter()
        .position(|&s| table.get(s) == ExtValue::PosInf);
    let Some(p) = infinite_at else {
        // all finite: elementary trees achieve the displacements exactly
        return starts
            .iter()
            .map(|&s| contract_to_elementary(bb.realize(g, s)))
            .collect();
    };
    let pump = find_positive_pump_from(g, starts[p])
        .expect("infinite displacement yields a pump");
    let (u, v) = pump.pump_tree.yield_around_hole();
    let pump_gain = sum_of(&u) + sum_of(&v);
    let completion = bb.realize(g, pump.anchor);

    let mut trees: Vec<ParseTree> = Vec::with_capacity(starts.len());
    let mut base: i64 = 0;
    for (j, &s) in starts.iter().enumerate() {
        if j == p {
            continue;
        }
        let t = bb.realize(g, s);
        base += sum_of(&yield_of(&t).unwrap());
        trees.push(t);
    }
    let (cu, cv) = pump.context_tree.yield_around_hole();
    base += sum_of(&cu) + sum_of(&cv);
    base += sum_of(&yield_of(&completion).unwrap());
    // smallest pump count making the total positive
    let copies = if base > 0 {
        0
    } else {
        (1 - base + pump_gain - 1) / pump_gain
    };
    let mut spliced = completion;
    for _ in 0..copies {
        spliced = pump.pump_tree.fill_hole(&spliced);
    }
    let t_p = pump.context_tree.fill_hole(&spliced);
    trees.insert(p, t_p);
    trees
}
