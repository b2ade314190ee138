//! Exact (non-lossy) GVAS reachability under a value budget.
//!
//! The table holds, for each needed pair `(X, c)`, the exact set of
//! outputs `d` with `c ⇒^X d` through runs whose every intermediate value
//! stays within the budget. The `capped` flag is set the moment any
//! terminal step wants to exceed the budget, so an uncapped run's table
//! entry for `(start, c_init)` is the exact reachability set.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use crate::grammar::{GrammarError, Gvas, NormalizedGvas, NtId, Sym, Word};

/// Justification for a fact `(X, c, d)`, recorded at first discovery.
/// Facts referenced by a justification were discovered strictly earlier,
/// so reconstruction terminates.
#[derive(Clone, Copy, Debug)]
enum Justif {
    Leaf { rule: usize },
    EpsRule { rule: usize },
    Bin { rule: usize, mid: u64 },
}

#[derive(Clone, Debug)]
pub struct ReachTable {
    budget: u64,
    entries: HashMap<(NtId, u64), BTreeSet<u64>>,
    just: HashMap<(NtId, u64, u64), Justif>,
    capped: bool,
}

/// Result of a budgeted reachability computation for the start symbol.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OracleResult {
    /// No step ever attempted to exceed the budget; the set is exact.
    Closed(BTreeSet<u64>),
    /// The budget was hit somewhere; the set is a lower approximation.
    Capped {
        values: BTreeSet<u64>,
        max_observed: Option<u64>,
    },
}

/// Public view of a fact's justification, for exact-tree reconstruction.
#[derive(Clone, Copy, Debug)]
pub enum JustifView {
    Leaf { rule: usize },
    EpsRule { rule: usize },
    Bin { rule: usize, mid: u64 },
}

/// Outcome of a per-nonterminal max query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MaxReachable {
    Max(u64),
    /// Empty output set (no valid run).
    Bottom,
    /// The table was capped; only a lower bound on the max is known.
    Capped { partial_max: Option<u64> },
}

/// Least fixpoint of the exact step semantics, seeded on demand from
/// `(start, c_init)`. Output sets are bitsets over `[0, budget]`;
/// binary-rule contexts process each split value once and then watch it
/// for growth.
pub fn reach_table(g: &NormalizedGvas, budget: u64) -> ReachTable {
    let gr = g.grammar();
    let by_lhs = gr.rules_by_lhs();
    let words = (budget as usize + 64) / 64;
    let empty = vec![0u64; words];

    struct Ctx {
        rule: usize,
        lhs: NtId,
        input: u64,
        right: NtId,
        processed: Vec<u64>,
    }

    let mut sets: HashMap<(NtId, u64), Vec<u64>> = HashMap::new();
    let mut just: HashMap<(NtId, u64, u64), Justif> = HashMap::new();
    let mut capped = false;
    let mut ctxs: Vec<Ctx> = Vec::new();
    let mut left_watch: HashMap<(NtId, u64), Vec<usize>> = HashMap::new();
    let mut right_watch: HashMap<(NtId, u64), Vec<usize>> = HashMap::new();

    let mut needed: HashSet<(NtId, u64)> = HashSet::new();
    let mut need_queue: VecDeque<(NtId, u64)> = VecDeque::new();
    let mut dirty: HashSet<(NtId, u64)> = HashSet::new();
    let mut dirty_queue: VecDeque<(NtId, u64)> = VecDeque::new();

    let seed = (gr.start, g.c_init());
    needed.insert(seed);
    need_queue.push_back(seed);

    fn set_bit(
        sets: &mut HashMap<(NtId, u64), Vec<u64>>,
        just: &mut HashMap<(NtId, u64, u64), Justif>,
        dirty: &mut HashSet<(NtId, u64)>,
        dirty_queue: &mut VecDeque<(NtId, u64)>,
        pair: (NtId, u64),
        d: u64,
        j: Justif,
    ) {
        let bits = sets.get_mut(&pair).expect("pair allocated at need time");
        let (w, m) = (d as usize / 64, 1u64 << (d % 64));
        if bits[w] & m == 0 {
            bits[w] |= m;
            just.insert((pair.0, pair.1, d), j);
            if dirty.insert(pair) {
                dirty_queue.push_back(pair);
            }
        }
    }

    // unions src (outputs of the right child at split `mid`) into the
    // context's own pair
    fn absorb(
        sets: &mut HashMap<(NtId, u64), Vec<u64>>,
        just: &mut HashMap<(NtId, u64, u64), Justif>,
        dirty: &mut HashSet<(NtId, u64)>,
        dirty_queue: &mut VecDeque<(NtId, u64)>,
        target: (NtId, u64),
        src_pair: (NtId, u64),
        rule: usize,
        mid: u64,
    ) {
        let src = sets.get(&src_pair).expect("needed").clone();
        let bits = sets.get_mut(&target).expect("needed");
        let mut fresh: Vec<u64> = Vec::new();
        for (w, s_word) in src.iter().enumerate() {
            let new = s_word & !bits[w];
            if new != 0 {
                bits[w] |= new;
                for b in 0..64 {
                    if new & (1 << b) != 0 {
                        fresh.push((w * 64 + b) as u64);
                    }
                }
            }
        }
        if !fresh.is_empty() {
            for d in fresh {
                just.entry((target.0, target.1, d))
                    .or_insert(Justif::Bin { rule, mid });
            }
            if dirty.insert(target) {
                dirty_queue.push_back(target);
            }
        }
    }

    loop {
        if let Some((x, c)) = need_queue.pop_front() {
            sets.entry((x, c)).or_insert_with(|| empty.clone());
            if c > budget {
                // the pair is outside the table's domain entirely
                capped = true;
                continue;
            }
            for &ri in &by_lhs[x.idx()] {
                match gr.rules[ri].rhs.as_slice() {
                    [Sym::Act(a)] => {
                        let d = c as i128 + *a as i128;
                        if d < 0 {
                            continue;
                        }
                        if d as u64 > budget {
                            capped = true;
                            continue;
                        }
                        set_bit(
                            &mut sets,
                            &mut just,
                            &mut dirty,
                            &mut dirty_queue,
                            (x, c),
                            d as u64,
                            Justif::Leaf { rule: ri },
                        );
                    }
                    [] => {
                        set_bit(
                            &mut sets,
                            &mut just,
                            &mut dirty,
                            &mut dirty_queue,
                            (x, c),
                            c,
                            Justif::EpsRule { rule: ri },
                        );
                    }
                    [Sym::Nt(y), Sym::Nt(z)] => {
                        let ctx_id = ctxs.len();
                        ctxs.push(Ctx {
                            rule: ri,
                            lhs: x,
                            input: c,
                            right: *z,
                            processed: empty.clone(),
                        });
                        left_watch.entry((*y, c)).or_default().push(ctx_id);
                        if needed.insert((*y, c)) {
                            need_queue.push_back((*y, c));
                        } else if sets.contains_key(&(*y, c)) {
                            // replay what the left pair already produced
                            if dirty.insert((*y, c)) {
                                dirty_queue.push_back((*y, c));
                            }
                        }
                    }
                    _ => unreachable!("normalized shapes"),
                }
            }
            continue;
        }
        let Some(pair) = dirty_queue.pop_front() else {
            break;
        };
        dirty.remove(&pair);
        // contexts reading this pair as their left part: new split values
        for ctx_id in left_watch.get(&pair).cloned().unwrap_or_default() {
            let (lhs, input, right, rule) = {
                let ctx = &ctxs[ctx_id];
                (ctx.lhs, ctx.input, ctx.right, ctx.rule)
            };
            let mut fresh_mids: Vec<u64> = Vec::new();
            {
                let src = &sets[&pair];
                let ctx = &mut ctxs[ctx_id];
                for (w, s_word) in src.iter().enumerate() {
                    let new = s_word & !ctx.processed[w];
                    if new != 0 {
                        ctx.processed[w] |= new;
                        for b in 0..64 {
                            if new & (1 << b) != 0 {
                                fresh_mids.push((w * 64 + b) as u64);
                            }
                        }
                    }
                }
            }
            for mid in fresh_mids {
                right_watch.entry((right, mid)).or_default().push(ctx_id);
                sets.entry((right, mid)).or_insert_with(|| empty.clone());
                if needed.insert((right, mid)) {
                    need_queue.push_back((right, mid));
                }
                absorb(
                    &mut sets,
                    &mut just,
                    &mut dirty,
                    &mut dirty_queue,
                    (lhs, input),
                    (right, mid),
                    rule,
                    mid,
                );
            }
        }
        // contexts reading this pair as a right part at some split
        for ctx_id in right_watch.get(&pair).cloned().unwrap_or_default() {
            let (lhs, input, rule) = {
                let ctx = &ctxs[ctx_id];
                (ctx.lhs, ctx.input, ctx.rule)
            };
            absorb(
                &mut sets,
                &mut just,
                &mut dirty,
                &mut dirty_queue,
                (lhs, input),
                pair,
                rule,
                pair.1,
            );
        }
    }

    let entries = sets
        .into_iter()
        .map(|(pair, bits)| {
            let mut out = BTreeSet::new();
            for (w, word) in bits.iter().enumerate() {
                let mut word = *word;
                while word != 0 {
                    let b = word.trailing_zeros() as usize;
                    out.insert((w * 64 + b) as u64);
                    word &= word - 1;
                }
            }
            (pair, out)
        })
        .collect();
    let table = ReachTable {
        budget,
        entries,
        just,
        capped,
    };
    debug_assert!(table.verify_fixpoint(g));
    table
}

impl ReachTable {
    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn capped(&self) -> bool {
        self.capped
    }

    pub fn outputs(&self, x: NtId, c: u64) -> BTreeSet<u64> {
        self.entries.get(&(x, c)).cloned().unwrap_or_default()
    }

    pub fn max_observed(&self) -> Option<u64> {
        self.entries.values().flat_map(|s| s.iter().copied()).max()
    }

    pub fn justification(&self, x: NtId, c: u64, d: u64) -> Option<JustifView> {
        self.just.get(&(x, c, d)).map(|j| match *j {
            Justif::Leaf { rule } => JustifView::Leaf { rule },
            Justif::EpsRule { rule } => JustifView::EpsRule { rule },
            Justif::Bin { rule, mid } => JustifView::Bin { rule, mid },
        })
    }

    /// Re-applies every rule to every needed pair; a closed table must not
    /// gain anything.
    pub fn verify_fixpoint(&self, g: &NormalizedGvas) -> bool {
        let gr = g.grammar();
        for (&(x, c), outs) in &self.entries {
            if c > self.budget {
                // out-of-domain pair, recorded as capped
                continue;
            }
            for (_, r) in gr.rules_of(x) {
                match r.rhs.as_slice() {
                    [Sym::Act(a)] => {
                        let d = c as i128 + *a as i128;
                        if d >= 0 && d as u64 <= self.budget && !outs.contains(&(d as u64)) {
                            return false;
                        }
                    }
                    [] => {
                        if !outs.contains(&c) {
                            return false;
                        }
                    }
                    [Sym::Nt(y), Sym::Nt(z)] => {
                        if let Some(mids) = self.entries.get(&(*y, c)) {
                            for &d in mids {
                                if let Some(ends) = self.entries.get(&(*z, d)) {
                                    if !ends.is_subset(outs) {
                                        return false;
                                    }
                                }
                            }
                        }
                    }
                    _ => return false,
                }
            }
        }
        true
    }

    /// Reconstructs one witness word for `c ⇒^X d` from the justification
    /// log. The word replays exactly: every prefix sum stays in `[0, budget]`.
    pub fn witness_word(&self, g: &NormalizedGvas, x: NtId, c: u64, d: u64) -> Option<Word> {
        let gr = g.grammar();
        if !self.entries.get(&(x, c))?.contains(&d) {
            return None;
        }
        let mut word = Vec::new();
        fn go(
            t: &ReachTable,
            gr: &crate::grammar::Grammar,
            x: NtId,
            c: u64,
            d: u64,
            out: &mut Word,
        ) {
            match *t.just.get(&(x, c, d)).expect("fact has a justification") {
                Justif::Leaf { rule } => {
                    let Sym::Act(a) = gr.rules[rule].rhs[0] else { unreachable!() };
                    out.push(a);
                }
                Justif::EpsRule { .. } => {}
                Justif::Bin { rule, mid } => {
                    let [Sym::Nt(y), Sym::Nt(z)] = gr.rules[rule].rhs.as_slice() else {
                        unreachable!()
                    };
                    go(t, gr, *y, c, mid, out);
                    go(t, gr, *z, mid, d, out);
                }
            }
        }
        go(self, gr, x, c, d, &mut word);
        Some(word)
    }
}

/// Reachability set of the GVAS under a budget, normalizing internally.
/// An empty-language grammar has the empty reachability set.
pub fn reachability_set(g: &Gvas, budget: u64) -> Result<OracleResult, GrammarError> {
    let norm = match crate::normalize::normalize(g) {
        Ok(n) => n,
        Err(GrammarError::EmptyLanguage(_)) => return Ok(OracleResult::Closed(BTreeSet::new())),
        Err(e) => return Err(e),
    };
    let t = reach_table(&norm, budget);
    let values = t.outputs(norm.grammar().start, norm.c_init());
    if t.capped() {
        Ok(OracleResult::Capped {
            max_observed: t.max_observed(),
            values,
        })
    } else {
        Ok(OracleResult::Closed(values))
    }
}

/// Maximum exact output of `(x, c)` under the budget.
pub fn max_reachable(g: &NormalizedGvas, x: NtId, c: u64, budget: u64) -> MaxReachable {
    // seed the fixpoint at the queried pair rather than the start symbol
    let mut alt = g.gvas().clone();
    alt.grammar.start = x;
    alt.c_init = c;
    let alt = NormalizedGvas::new(alt).expect("restart preserves normalization");
    let t = reach_table(&alt, budget);
    let outs = t.outputs(x, c);
    if t.capped() {
        MaxReachable::Capped {
            partial_max: outs.last().copied(),
        }
    } else {
        match outs.last() {
            Some(&m) => MaxReachable::Max(m),
            None => MaxReachable::Bottom,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normalize::normalize;
    use crate::textfmt::parse_gvas;

    fn ackermann(m: usize, c_init: u64) -> NormalizedGvas {
        let mut text = format!("gvas\ncounter_init {}\nstart X{}\nX0 -> 1\n", c_init, m);
        for i in 1..=m {
            text.push_str(&format!("X{} -> -1 X{} X{}\n", i, i, i - 1));
            text.push_str(&format!("X{} -> 1 X{}\n", i, i - 1));
        }
        normalize(&parse_gvas(&text).unwrap()).unwrap()
    }

    #[test]
    fn blocked_run_has_empty_entry() {
        let g = parse_gvas("gvas\ncounter_init 0\nstart S\nS -> M\nM -> -1\n").unwrap();
        let r = reachability_set(&g, 8).unwrap();
        assert_eq!(r, OracleResult::Closed(BTreeSet::new()));
    }

    #[test]
    fn ackermann_m1_max_from_5() {
        let g = ackermann(1, 5);
        let x1 = g.grammar().lookup("X1").unwrap();
        assert_eq!(max_reachable(&g, x1, 5, 64), MaxReachable::Max(7));
    }

    #[test]
    fn pump_grammar_caps() {
        let g = parse_gvas("gvas\ncounter_init 0\nstart S\nS -> 1 S\nS ->\n").unwrap();
        let r = reachability_set(&g, 10).unwrap();
        match r {
            OracleResult::Capped { values, .. } => {
                assert_eq!(values, (0..=10).collect::<BTreeSet<u64>>());
            }
            other => panic!("expected capped, got {:?}", other),
        }
    }

    #[test]
    fn decreasing_grammar_closes() {
        let g = parse_gvas("gvas\ncounter_init 5\nstart S\nS -> M S\nS ->\nM -> -1\n").unwrap();
        let r = reachability_set(&g, 8).unwrap();
        assert_eq!(r, OracleResult::Closed((0..=5).collect()));
    }

    #[test]
    fn ackermann_m2_values() {
        let g = ackermann(2, 1);
        let x2 = g.grammar().lookup("X2").unwrap();
        assert_eq!(max_reachable(&g, x2, 2, 64), MaxReachable::Max(7));
        assert_eq!(max_reachable(&g, x2, 3, 64), MaxReachable::Max(9));
    }

    #[test]
    fn witness_words_replay_exactly() {
        let g = ackermann(1, 5);
        let x1 = g.grammar().lookup("X1").unwrap();
        let t = reach_table(&g, 64);
        for &d in t.outputs(x1, 5).iter() {
            let w = t.witness_word(&g, x1, 5, d).unwrap();
            let mut v: i128 = 5;
            for a in &w {
                v += *a as i128;
                assert!(v >= 0 && v <= 64, "intermediate {} out of range", v);
            }
            assert_eq!(v as u64, d);
            assert!(g.member(x1, &w), "witness must be in the language");
        }
    }

    #[test]
    fn monotone_in_budget() {
        let g = ackermann(1, 5);
        let s = g.grammar().start;
        let t1 = reach_table(&g, 16);
        let t2 = reach_table(&g, 64);
        assert!(t1.outputs(s, 5).is_subset(&t2.outputs(s, 5)));
        if !t1.capped() {
            assert_eq!(t1.outputs(s, 5), t2.outputs(s, 5));
        }
    }
}
