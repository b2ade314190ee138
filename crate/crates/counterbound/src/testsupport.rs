//! Independent reference computations used by the test suites. These
//! deliberately avoid the production algorithms: language sets come from
//! a length-indexed fixpoint, best sums from a direct recursion, and the
//! good-tree check from a full ancestor-pair scan.

#![doc(hidden)]

use std::collections::{BTreeSet, HashMap};

use crate::flowtree::FlowTree;
use crate::grammar::{NormalizedGvas, NtId, Sym, Word};

/// All words over the given alphabet with length up to `max_len`.
pub fn words_up_to(alphabet: &[i64], max_len: usize) -> Vec<Word> {
    let mut out: Vec<Word> = vec![vec![]];
    let mut layer: Vec<Word> = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &layer {
            for &a in alphabet {
                let mut w2 = w.clone();
                w2.push(a);
                next.push(w2);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Exact language restricted to words of length at most `max_len`,
/// computed by a length-indexed fixpoint over the rules.
pub fn language_up_to(g: &NormalizedGvas, x: NtId, max_len: usize) -> BTreeSet<Word> {
    let gr = g.grammar();
    let v = gr.nt_count();
    // sets[n][x]: words of length exactly n derivable from x
    let mut sets: Vec<Vec<BTreeSet<Word>>> = vec![vec![BTreeSet::new(); v]; max_len + 1];
    let mut changed = true;
    while changed {
        changed = false;
        for r in &gr.rules {
            match r.rhs.as_slice() {
                [] => {
                    changed |= sets[0][r.lhs.idx()].insert(vec![]);
                }
                [Sym::Act(a)] => {
                    if max_len >= 1 {
                        changed |= sets[1][r.lhs.idx()].insert(vec![*a]);
                    }
                }
                [Sym::Nt(y), Sym::Nt(z)] => {
                    for n in 0..=max_len {
                        let mut fresh: Vec<Word> = Vec::new();
                        for k in 0..=n {
                            for wy in &sets[k][y.idx()] {
                                for wz in &sets[n - k][z.idx()] {
                                    let mut w = wy.clone();
                                    w.extend(wz);
                                    fresh.push(w);
                                }
                            }
                        }
                        for w in fresh {
                            changed |= sets[n][r.lhs.idx()].insert(w);
                        }
                    }
                }
                _ => panic!("normalized shapes only"),
            }
        }
    }
    let mut out = BTreeSet::new();
    for n in 0..=max_len {
        out.extend(sets[n][x.idx()].iter().cloned());
    }
    out
}

/// Best yield sum over complete parse trees of height (edges) at most
/// `h`, by direct recursion with memoization.
pub fn max_sum_by_height(g: &NormalizedGvas, x: NtId, h: usize) -> Option<i64> {
    fn go(
        g: &NormalizedGvas,
        x: NtId,
        h: usize,
        memo: &mut HashMap<(NtId, usize), Option<i64>>,
    ) -> Option<i64> {
        if h == 0 {
            return None;
        }
        if let Some(v) = memo.get(&(x, h)) {
            return *v;
        }
        let mut best: Option<i64> = None;
        for (_, r) in g.grammar().rules_of(x) {
            let cand = match r.rhs.as_slice() {
                [] => Some(0),
                [Sym::Act(a)] => Some(*a),
                [Sym::Nt(y), Sym::Nt(z)] => {
                    match (go(g, *y, h - 1, memo), go(g, *z, h - 1, memo)) {
                        (Some(a), Some(b)) => Some(a + b),
                        _ => None,
                    }
                }
                _ => panic!("normalized shapes only"),
            };
            if let Some(c) = cand {
                best = Some(best.map_or(c, |b| b.max(c)));
            }
        }
        memo.insert((x, h), best);
        best
    }
    go(g, x, h, &mut HashMap::new())
}

/// Ackermann function family used by the fixtures: A_0(n) = n + 1 and
/// A_m(n) = A_{m-1}^{n+1}(1).
pub fn ackermann(m: usize, n: u64) -> u64 {
    if m == 0 {
        return n + 1;
    }
    let mut v = 1;
    for _ in 0..=n {
        v = ackermann(m - 1, v);
    }
    v
}

/// Quadratic reference for the good-tree check: collect every node with
/// its path, test all ancestor pairs.
pub fn is_good_reference(tree: &FlowTree) -> bool {
    let mut nodes: Vec<(Vec<usize>, crate::flowtree::SymLabel, crate::flowtree::ExtNat)> =
        Vec::new();
    tree.visit(&mut |p, n| nodes.push((p.clone(), n.sym, n.input)));
    for (ps, sym_s, in_s) in &nodes {
        for (pt, sym_t, in_t) in &nodes {
            let proper_ancestor = ps.len() < pt.len() && pt.starts_with(ps);
            if proper_ancestor && sym_s == sym_t && in_s <= in_t {
                return true;
            }
        }
    }
    false
}

/// Node-elementarity check: no nonterminal repeats on any root-to-leaf
/// path.
pub fn is_elementary(tree: &crate::grammar::ParseTree) -> bool {
    fn walk(t: &crate::grammar::ParseTree, stack: &mut Vec<NtId>) -> bool {
        match t {
            crate::grammar::ParseTree::Node(x, cs) => {
                if stack.contains(x) {
                    return false;
                }
                stack.push(*x);
                let ok = cs.iter().all(|c| walk(c, stack));
                stack.pop();
                ok
            }
            _ => true,
        }
    }
    walk(tree, &mut Vec::new())
}
