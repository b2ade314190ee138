//! The decision engine: lossy max-output tables, capped certificate
//! search, the theoretical completeness cap, and the top-level
//! boundedness verdict.
//!
//! The search works over a down-step relation on (symbol, input) pairs.
//! Flow inequalities are upper bounds composed of monotone maps, so a
//! path can always be explored at the componentwise-maximal values, and
//! the return constraint of a subtree reduces to a single threshold.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::flowtree::{
    all_bottom, validate_certificate, Certificate, ExtNat, FlowTree, NodePath, SymLabel,
};
use crate::grammar::{GrammarError, Gvas, NormalizedGvas, NtId, ParseTree, Sym};

/// Uniform bound on flow-tree annotations considered by the search.
/// Never below the initial counter value, which annotates every root.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cap {
    value: u64,
}

impl Cap {
    pub fn new(requested: u64, c_init: u64) -> Cap {
        Cap {
            value: requested.max(c_init),
        }
    }

    pub fn value(self) -> u64 {
        self.value
    }
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error(
        "theoretical cap overflows the host integer width for {0} nonterminals; pass an explicit --cap instead"
    )]
    CapOverflow(usize),
    #[error("cap {cap} needs a table of {entries} entries, beyond the tabulation limit; pass a smaller --cap")]
    CapTooLarge { cap: u64, entries: u128 },
    #[error("brute-force guard: {0}")]
    BruteForceGuard(String),
}

const TABLE_ENTRY_LIMIT: u128 = 1 << 28;
const MO_BOTTOM: u32 = u32::MAX;

#[derive(Clone, Copy)]
struct MoLog {
    value: u32,
    rule: u32,
    // left child's output for binary rules, MO_BOTTOM otherwise
    left_out: u32,
}

/// Maximal lossy outputs: `get(X, c)` is the largest `d` such that some
/// valid flow tree rooted at `X` has input `c`, output `d`, and every
/// annotation at most the cap. Improvement logs are kept per entry so a
/// realizing tree can be rebuilt for any intermediate target.
pub struct MaxOutTable {
    cap: u64,
    vals: Vec<u32>,
    logs: HashMap<u32, Vec<MoLog>>,
    nt_count: usize,
}

impl MaxOutTable {
    fn index(&self, x: NtId, c: u64) -> usize {
        x.idx() * (self.cap as usize + 1) + c as usize
    }

    pub fn cap(&self) -> u64 {
        self.cap
    }

    pub fn get(&self, x: NtId, c: u64) -> Option<u64> {
        if c > self.cap {
            return None;
        }
        match self.vals[self.index(x, c)] {
            MO_BOTTOM => None,
            v => Some(v as u64),
        }
    }

    /// Largest output over all inputs, a cheap prefilter for t-candidates.
    pub fn max_over_inputs(&self, x: NtId) -> Option<u64> {
        (0..=self.cap)
            .filter_map(|c| self.get(x, c))
            .max()
    }

    /// A valid flow tree rooted at `x` with input `c` and output exactly
    /// `target`, where `target <= get(x, c)`. Justifications in the log
    /// reference strictly earlier facts, so the recursion terminates.
    pub fn materialize(&self, g: &NormalizedGvas, x: NtId, c: u64, target: u64) -> FlowTree {
        debug_assert!(self.get(x, c).is_some_and(|v| v >= target));
        let entry = self.index(x, c) as u32;
        let log = &self.logs[&entry];
        let hit = log
            .iter()
            .find(|l| l.value as u64 >= target)
            .expect("target within the recorded maximum");
        let rule = &g.grammar().rules[hit.rule as usize];
        let children = match rule.rhs.as_slice() {
            [Sym::Act(a)] => vec![FlowTree::leaf(
                SymLabel::Act(*a),
                ExtNat::Fin(c),
                ExtNat::Fin(target),
            )],
            [] => vec![FlowTree::leaf(
                SymLabel::Eps,
                ExtNat::Fin(c),
                ExtNat::Fin(target),
            )],
            [Sym::Nt(y), Sym::Nt(z)] => {
                let w = hit.left_out as u64;
                // the Z side must reach at least the original logged value;
                // lower its root output to the requested target
                let left = self.materialize(g, *y, c, w);
                let right = self.materialize(g, *z, w, target.min(hit.value as u64));
                vec![left, right]
            }
            _ => unreachable!("normalized shapes"),
        };
        FlowTree {
            sym: SymLabel::Nt(x),
            input: ExtNat::Fin(c),
            output: ExtNat::Fin(target),
            children,
        }
    }
}

/// Kleene fixpoint of the lossy max-output equations over the finite
/// value lattice `{-∞} ∪ [0, cap]`.
pub fn maxout_table(g: &NormalizedGvas, cap: Cap) -> Result<MaxOutTable, SearchError> {
    let gr = g.grammar();
    let cap_v = cap.value();
    let entries = (gr.nt_count() as u128) * (cap_v as u128 + 1);
    if entries > TABLE_ENTRY_LIMIT || cap_v >= MO_BOTTOM as u64 {
        return Err(SearchError::CapTooLarge {
            cap: cap_v,
            entries,
        });
    }
    let mut table = MaxOutTable {
        cap: cap_v,
        vals: vec![MO_BOTTOM; entries as usize],
        logs: HashMap::new(),
        nt_count: gr.nt_count(),
    };
    let mut changed = true;
    while changed {
        changed = false;
        for (ri, r) in gr.rules.iter().enumerate() {
            match r.rhs.as_slice() {
                [Sym::Act(a)] => {
                    for c in 0..=cap_v {
                        let d = c as i128 + *a as i128;
                        if d < 0 {
                            continue;
                        }
                        let v = (d as u64).min(cap_v);
                        changed |= table.raise(r.lhs, c, v, ri, MO_BOTTOM);
                    }
                }
                [] => {
                    for c in 0..=cap_v {
                        changed |= table.raise(r.lhs, c, c, ri, MO_BOTTOM);
                    }
                }
                [Sym::Nt(y), Sym::Nt(z)] => {
                    for c in 0..=cap_v {
                        let Some(w) = table.get(*y, c) else { continue };
                        let Some(v) = table.get(*z, w) else { continue };
                        changed |= table.raise(r.lhs, c, v, ri, w as u32);
                    }
                }
                _ => unreachable!("normalized shapes"),
            }
        }
    }
    debug_assert!(table.is_monotone());
    Ok(table)
}

impl MaxOutTable {
    fn raise(&mut self, x: NtId, c: u64, v: u64, rule: usize, left_out: u32) -> bool {
        let i = self.index(x, c);
        let cur = self.vals[i];
        if cur != MO_BOTTOM && cur as u64 >= v {
            return false;
        }
        self.vals[i] = v as u32;
        self.logs.entry(i as u32).or_default().push(MoLog {
            value: v as u32,
            rule: rule as u32,
            left_out,
        });
        true
    }

    fn is_monotone(&self) -> bool {
        for x in 0..self.nt_count {
            let mut prev = None;
            for c in 0..=self.cap {
                let v = self.get(NtId(x as u32), c);
                if v < prev {
                    return false;
                }
                prev = prev.max(v);
            }
        }
        true
    }
}

/// Per-symbol inverse of the max-output map: least input whose output
/// reaches each threshold. Step functions over `[0, cap]`.
struct InverseMo {
    cap: u64,
    // inv[x][b] = least c with MO(x, c) >= b, MO_BOTTOM if none
    inv: Vec<Vec<u32>>,
}

impl InverseMo {
    fn build(mo: &MaxOutTable) -> InverseMo {
        let cap = mo.cap;
        let mut inv = Vec::with_capacity(mo.nt_count);
        for x in 0..mo.nt_count {
            let mut col = vec![MO_BOTTOM; cap as usize + 1];
            let mut next_b: u64 = 0;
            for c in 0..=cap {
                if let Some(v) = mo.get(NtId(x as u32), c) {
                    while next_b <= v {
                        col[next_b as usize] = c as u32;
                        next_b += 1;
                    }
                }
                if next_b > cap {
                    break;
                }
            }
            inv.push(col);
        }
        InverseMo { cap, inv }
    }

    /// Least input making the symbol's output reach `b`.
    fn least_input(&self, x: NtId, b: u64) -> Option<u64> {
        if b > self.cap {
            return None;
        }
        match self.inv[x.idx()][b as usize] {
            MO_BOTTOM => None,
            c => Some(c as u64),
        }
    }
}

/// `c_init + 4^(4(|V|+1))`: annotations and height of a minimal
/// certificate never exceed this, so a search capped here is complete.
pub fn theoretical_cap(g: &NormalizedGvas) -> Result<u64, SearchError> {
    let v = g.grammar().nt_count();
    let shift = match 8u32.checked_mul(v as u32 + 1) {
        Some(s) if s <= 63 => s,
        _ => return Err(SearchError::CapOverflow(v)),
    };
    g.c_init()
        .checked_add(1u64 << shift)
        .ok_or(SearchError::CapOverflow(v))
}

/// Value bounds a minimal certificate satisfies; the depth limits below
/// are complete only for caps at least this large.
fn facts_value_cap(g: &NormalizedGvas) -> u64 {
    let v = g.grammar().nt_count() as u64;
    let pow = 1u64
        .checked_shl((2 * (v as u32 + 1)).min(62))
        .unwrap_or(u64::MAX); // 2^(2(|V|+1)) = 4^(|V|+1)
    let a = 7u64.saturating_mul(v).saturating_mul(pow);
    let b = pow.saturating_mul(pow); // 4^(2(|V|+1))
    g.c_init().saturating_add(a.max(b))
}

#[derive(Clone, Copy, Debug)]
enum P1Bp {
    Root,
    Left {
        parent: (NtId, u64),
        rule: usize,
    },
    Right {
        parent: (NtId, u64),
        rule: usize,
        left_out: u64,
    },
    Lower {
        parent: (NtId, u64),
    },
}

struct Phase1 {
    bp: HashMap<(NtId, u64), P1Bp>,
    order: Vec<(NtId, u64)>,
}

/// Down-step closure from (start, c_init) at maximal values, closed
/// under lossy lowering of non-root pairs. Discovery order is the
/// deterministic candidate order for the certificate search.
fn phase1(
    g: &NormalizedGvas,
    mo: &MaxOutTable,
    by_lhs: &[Vec<usize>],
    depth_limit: Option<usize>,
) -> Phase1 {
    let gr = g.grammar();
    let mut bp: HashMap<(NtId, u64), P1Bp> = HashMap::new();
    let mut order = Vec::new();
    let root = (gr.start, g.c_init());
    bp.insert(root, P1Bp::Root);
    order.push(root);
    let mut layer = vec![root];
    let mut depth = 0usize;
    while !layer.is_empty() && depth_limit.map_or(true, |l| depth < l) {
        let mut next = Vec::new();
        let add = |pair: (NtId, u64),
                       entry: P1Bp,
                       bp: &mut HashMap<(NtId, u64), P1Bp>,
                       order: &mut Vec<(NtId, u64)>,
                       next: &mut Vec<(NtId, u64)>| {
            if bp.contains_key(&pair) {
                return;
            }
            bp.insert(pair, entry);
            order.push(pair);
            next.push(pair);
            // lossy lowering: same tree position, smaller annotation
            let (x, c) = pair;
            let mut upper = c;
            while upper > 0 {
                let low = (x, upper - 1);
                if bp.contains_key(&low) {
                    break;
                }
                bp.insert(low, P1Bp::Lower { parent: (x, upper) });
                order.push(low);
                upper -= 1;
            }
        };
        for &(w, c) in &layer {
            for &ri in &by_lhs[w.idx()] {
                let r = &gr.rules[ri];
                if let [Sym::Nt(y), Sym::Nt(z)] = r.rhs.as_slice() {
                    add(
                        (*y, c),
                        P1Bp::Left {
                            parent: (w, c),
                            rule: ri,
                        },
                        &mut bp,
                        &mut order,
                        &mut next,
                    );
                    if let Some(w_out) = mo.get(*y, c) {
                        add(
                            (*z, w_out),
                            P1Bp::Right {
                                parent: (w, c),
                                rule: ri,
                                left_out: w_out,
                            },
                            &mut bp,
                            &mut order,
                            &mut next,
                        );
                    }
                }
            }
        }
        layer = next;
        depth += 1;
    }
    Phase1 { bp, order }
}

#[derive(Clone, Copy)]
struct UpStep {
    rule: usize,
    // true: the path child is the left child
    left: bool,
    parent_sym: NtId,
    parent_in: u64,
    // left sibling's output for right steps
    left_out: u64,
    child_in: u64,
}

/// Unwinds phase-1 backpointers from a candidate pair to the root,
/// collapsing lowering steps into the child annotation.
fn unwind_phase1(p1: &Phase1, pair: (NtId, u64)) -> Vec<UpStep> {
    let mut steps = Vec::new();
    let mut cur = pair;
    let mut arrival = pair.1;
    loop {
        match p1.bp[&cur] {
            P1Bp::Root => {
                break;
            }
            P1Bp::Lower { parent } => {
                cur = parent;
            }
            P1Bp::Left { parent, rule } => {
                steps.push(UpStep {
                    rule,
                    left: true,
                    parent_sym: parent.0,
                    parent_in: parent.1,
                    left_out: 0,
                    child_in: arrival,
                });
                cur = parent;
                arrival = parent.1;
            }
            P1Bp::Right {
                parent,
                rule,
                left_out,
            } => {
                steps.push(UpStep {
                    rule,
                    left: false,
                    parent_sym: parent.0,
                    parent_in: parent.1,
                    left_out,
                    child_in: arrival,
                });
                cur = parent;
                arrival = parent.1;
            }
        }
    }
    steps
}

/// Wraps a subtree in one ancestor level. Ancestor outputs above the
/// marked pair are all -∞; off-path subtrees are realized from the
/// max-output table (left siblings) or as all--∞ completions (right
/// siblings).
fn wrap_step(
    g: &NormalizedGvas,
    mo: &MaxOutTable,
    min_trees: &[ParseTree],
    step: &UpStep,
    child: FlowTree,
    parent_out: ExtNat,
) -> FlowTree {
    let gr = g.grammar();
    let [Sym::Nt(y), Sym::Nt(z)] = gr.rules[step.rule].rhs.as_slice() else {
        unreachable!()
    };
    let children = if step.left {
        let sibling = all_bottom(&min_trees[z.idx()]);
        vec![child, sibling]
    } else {
        let sibling = mo.materialize(g, *y, step.parent_in, step.left_out);
        vec![sibling, child]
    };
    FlowTree {
        sym: SymLabel::Nt(step.parent_sym),
        input: ExtNat::Fin(step.parent_in),
        output: parent_out,
        children,
    }
}

fn steps_to_path(steps_down: &[UpStep]) -> NodePath {
    steps_down
        .iter()
        .map(|s| if s.left { 0 } else { 1 })
        .collect()
}

/// Result of the down-step pair closure below a candidate `s` pair.
enum PairClosure {
    /// Condition 1 fires: path to a strictly larger input at s's symbol.
    Accept(Vec<UpStep>),
    /// No growth; the inputs at which s's symbol reappears below, for
    /// bounding the condition-2 sweep.
    SameSymbolInputs(Vec<u64>),
}

/// Condition-1 search from a candidate `s` pair: a strictly larger input
/// at the same symbol, reachable by a nonempty down-step path. The pair
/// components evolve exactly as in the condition-2 state space, so the
/// closure also delimits that search.
fn phase2a(
    g: &NormalizedGvas,
    mo: &MaxOutTable,
    by_lhs: &[Vec<usize>],
    seed: (NtId, u64),
    depth_limit: Option<usize>,
    value_clip: u64,
) -> PairClosure {
    let gr = g.grammar();
    let mut bp: HashMap<(NtId, u64), UpStep> = HashMap::new();
    let mut layer = vec![seed];
    let mut depth = 0usize;
    while !layer.is_empty() && depth_limit.map_or(true, |l| depth < l) {
        let mut next = Vec::new();
        for &(w, c) in &layer {
            for &ri in &by_lhs[w.idx()] {
                let r = &gr.rules[ri];
                if let [Sym::Nt(y), Sym::Nt(z)] = r.rhs.as_slice() {
                    let mut try_add = |pair: (NtId, u64), step: UpStep| -> Option<Vec<UpStep>> {
                        if pair.1 > value_clip || bp.contains_key(&pair) {
                            return None;
                        }
                        bp.insert(pair, step);
                        if pair.0 == seed.0 && pair.1 > seed.1 {
                            // reconstruct the path seed -> accept
                            let mut steps = Vec::new();
                            let mut cur = pair;
                            while cur != seed {
                                let s = bp[&cur];
                                steps.push(s);
                                cur = (s.parent_sym, s.parent_in);
                            }
                            steps.reverse();
                            return Some(steps);
                        }
                        next.push(pair);
                        None
                    };
                    let left_step = UpStep {
                        rule: ri,
                        left: true,
                        parent_sym: w,
                        parent_in: c,
                        left_out: 0,
                        child_in: c,
                    };
                    if let Some(found) = try_add((*y, c), left_step) {
                        return PairClosure::Accept(found);
                    }
                    if let Some(w_out) = mo.get(*y, c) {
                        let right_step = UpStep {
                            rule: ri,
                            left: false,
                            parent_sym: w,
                            parent_in: c,
                            left_out: w_out,
                            child_in: w_out,
                        };
                        if let Some(found) = try_add((*z, w_out), right_step) {
                            return PairClosure::Accept(found);
                        }
                    }
                }
            }
        }
        layer = next;
        depth += 1;
    }
    PairClosure::SameSymbolInputs(
        bp.keys()
            .filter(|(sym, _)| *sym == seed.0)
            .map(|&(_, c)| c)
            .collect(),
    )
}

#[derive(Clone, Copy)]
struct P2bStep {
    rule: usize,
    left: bool,
    parent: (NtId, u64, u64),
    left_out: u64,
}

/// Condition-2 search: seek `t` below `s` with `in(t) >= in(s)` and
/// `out(t) = d_t` while the path still returns an output of at least
/// `d_t + 1` at `s`. The state tracks (symbol, maximal input, least
/// output requirement).
fn phase2b(
    g: &NormalizedGvas,
    mo: &MaxOutTable,
    inv: &InverseMo,
    by_lhs: &[Vec<usize>],
    seed: (NtId, u64),
    d_t: u64,
    depth_limit: Option<usize>,
    in_clip: u64,
    out_clip: u64,
) -> Option<(Vec<P2bStep>, (NtId, u64, u64))> {
    let gr = g.grammar();
    let b0 = d_t + 1;
    if b0 > mo.cap() || b0 > out_clip {
        return None;
    }
    let start = (seed.0, seed.1, b0);
    let mut bp: HashMap<(NtId, u64, u64), P2bStep> = HashMap::new();
    let mut layer = vec![start];
    let mut depth = 0usize;
    while !layer.is_empty() && depth_limit.map_or(true, |l| depth < l) {
        let mut next = Vec::new();
        for &(w, c, b) in &layer {
            for &ri in &by_lhs[w.idx()] {
                let r = &gr.rules[ri];
                if let [Sym::Nt(y), Sym::Nt(z)] = r.rhs.as_slice() {
                    let mut succs: Vec<((NtId, u64, u64), P2bStep)> = Vec::new();
                    if let Some(b_left) = inv.least_input(*z, b) {
                        succs.push((
                            (*y, c, b_left),
                            P2bStep {
                                rule: ri,
                                left: true,
                                parent: (w, c, b),
                                left_out: 0,
                            },
                        ));
                    }
                    if let Some(w_out) = mo.get(*y, c) {
                        succs.push((
                            (*z, w_out, b),
                            P2bStep {
                                rule: ri,
                                left: false,
                                parent: (w, c, b),
                                left_out: w_out,
                            },
                        ));
                    }
                    for (state, step) in succs {
                        if state.1 > in_clip || state.2 > out_clip {
                            continue;
                        }
                        if bp.contains_key(&state) {
                            continue;
                        }
                        bp.insert(state, step);
                        let (sym, c2, b2) = state;
                        let accept = sym == seed.0
                            && c2 >= seed.1
                            && b2 <= d_t
                            && mo.get(sym, c2).is_some_and(|v| v >= d_t);
                        if accept {
                            let mut steps = Vec::new();
                            let mut cur = state;
                            while cur != start {
                                let s = bp[&cur];
                                steps.push(s);
                                cur = s.parent;
                            }
                            steps.reverse();
                            return Some((steps, state));
                        }
                        next.push(state);
                    }
                }
            }
        }
        layer = next;
        depth += 1;
    }
    None
}

/// Capped certificate search. When any certificate with all annotations
/// at most the cap exists, one is found; the returned certificate always
/// passes the independent validator. Pruning clips search depths and
/// values to the bounds a minimal certificate satisfies; the depth
/// limits apply only once the cap covers those value bounds, so pruning
/// never costs completeness at small caps.
pub fn find_certificate(
    g: &NormalizedGvas,
    cap: Cap,
    pruning: bool,
) -> Result<Option<Certificate>, SearchError> {
    let gr = g.grammar();
    let v = gr.nt_count();
    let mo = maxout_table(g, cap)?;
    let inv = InverseMo::build(&mo);
    let min_trees: Vec<ParseTree> = gr
        .min_height_trees()
        .into_iter()
        .map(|t| t.expect("all nonterminals productive"))
        .collect();

    let facts_cap = facts_value_cap(g);
    let depths_apply = pruning && cap.value() >= facts_cap;
    let p1_depth = if depths_apply { Some(v) } else { None };
    let p2_depth = if depths_apply { Some(v + 1) } else { None };
    let (in_clip, out_clip) = if pruning {
        (facts_cap.min(cap.value()), facts_cap.min(cap.value()))
    } else {
        (cap.value(), cap.value())
    };

    // s needs a same-symbol strict descendant, so its symbol must reach
    // itself in the rule-descent graph
    let self_reachable: Vec<bool> = {
        let mut succs: Vec<Vec<NtId>> = vec![Vec::new(); v];
        for r in &gr.rules {
            if let [Sym::Nt(y), Sym::Nt(z)] = r.rhs.as_slice() {
                succs[r.lhs.idx()].push(*y);
                succs[r.lhs.idx()].push(*z);
            }
        }
        (0..v)
            .map(|x| {
                let mut seen = vec![false; v];
                let mut stack: Vec<NtId> = succs[x].clone();
                while let Some(y) = stack.pop() {
                    if y.idx() == x {
                        return true;
                    }
                    if !seen[y.idx()] {
                        seen[y.idx()] = true;
                        stack.extend(&succs[y.idx()]);
                    }
                }
                false
            })
            .collect()
    };

    let by_lhs = gr.rules_by_lhs();
    let p1 = phase1(g, &mo, &by_lhs, p1_depth);
    for &(x, c_s) in &p1.order {
        if !self_reachable[x.idx()] {
            continue;
        }
        // condition 1: input grows at a repeated symbol
        let closure = phase2a(g, &mo, &by_lhs, (x, c_s), p2_depth, in_clip);
        if let PairClosure::Accept(steps) = closure {
            let t_sub = {
                let last = steps.last().unwrap();
                let t_sym = x;
                let mut t_root = all_bottom(&min_trees[t_sym.idx()]);
                t_root.input = ExtNat::Fin(last.child_in);
                t_root
            };
            let mut cur = t_sub;
            for step in steps.iter().rev() {
                cur = wrap_step(g, &mo, &min_trees, step, cur, ExtNat::NegInf);
            }
            // cur is now the s subtree; its input is the exact phase-1
            // value, lowered to the candidate value
            let mut s_sub = cur;
            s_sub.input = ExtNat::Fin(c_s);
            let upper = unwind_phase1(&p1, (x, c_s));
            let mut tree = s_sub;
            for step in &upper {
                tree = wrap_step(g, &mo, &min_trees, step, tree, ExtNat::NegInf);
            }
            let s_path: NodePath =
                steps_to_path(&upper.iter().rev().copied().collect::<Vec<_>>());
            let mut t_path = s_path.clone();
            t_path.extend(steps_to_path(&steps));
            let cert = Certificate {
                tree,
                s: s_path,
                t: t_path,
            };
            debug_assert_eq!(validate_certificate(g.gvas(), &cert), vec![]);
            return Ok(Some(cert));
        }
        // condition 2: same or larger input, strictly smaller output.
        // out(s) never exceeds MO(x, c_s), out(t) = d_t must be realized
        // at some reachable same-symbol input, and d_t + 1 must fit
        // below out(s).
        let PairClosure::SameSymbolInputs(inputs) = closure else {
            unreachable!("accept already handled")
        };
        let Some(t_mo_max) = inputs.iter().filter_map(|&c| mo.get(x, c)).max() else {
            continue;
        };
        let Some(s_max_out) = mo.get(x, c_s) else { continue };
        if s_max_out == 0 {
            continue;
        }
        let d_t_max = s_max_out
            .saturating_sub(1)
            .min(t_mo_max)
            .min(cap.value().saturating_sub(1))
            .min(out_clip);
        for d_t in 0..=d_t_max {
            let Some((steps, accept)) = phase2b(
                g,
                &mo,
                &inv,
                &by_lhs,
                (x, c_s),
                d_t,
                p2_depth,
                in_clip,
                out_clip,
            ) else {
                continue;
            };
            let (_, c_t, _) = accept;
            // build t's subtree and fold the path back up to s,
            // computing the exact return values
            let mut cur = mo.materialize(g, x, c_t, d_t);
            for step in steps.iter().rev() {
                let [Sym::Nt(y), Sym::Nt(z)] = gr.rules[step.rule].rhs.as_slice() else {
                    unreachable!()
                };
                let (_, parent_c, parent_b) = step.parent;
                let v_child = match cur.output {
                    ExtNat::Fin(v) => v,
                    ExtNat::NegInf => unreachable!("return path outputs are finite"),
                };
                cur = if step.left {
                    let v_parent = mo.get(*z, v_child).expect("requirement tracked");
                    debug_assert!(v_parent >= parent_b);
                    let sibling = mo.materialize(g, *z, v_child, v_parent);
                    FlowTree {
                        sym: SymLabel::Nt(step.parent.0),
                        input: ExtNat::Fin(parent_c),
                        output: ExtNat::Fin(v_parent),
                        children: vec![cur, sibling],
                    }
                } else {
                    let sibling = mo.materialize(g, *y, parent_c, step.left_out);
                    FlowTree {
                        sym: SymLabel::Nt(step.parent.0),
                        input: ExtNat::Fin(parent_c),
                        output: cur.output,
                        children: vec![sibling, cur],
                    }
                };
            }
            let v_s = match cur.output {
                ExtNat::Fin(v) => v,
                ExtNat::NegInf => unreachable!(),
            };
            assert!(v_s > d_t, "return value must exceed the t output");
            let mut s_sub = cur;
            s_sub.input = ExtNat::Fin(c_s);
            let upper = unwind_phase1(&p1, (x, c_s));
            let mut tree = s_sub;
            for step in &upper {
                tree = wrap_step(g, &mo, &min_trees, step, tree, ExtNat::NegInf);
            }
            let s_path: NodePath =
                steps_to_path(&upper.iter().rev().copied().collect::<Vec<_>>());
            let mut t_path = s_path.clone();
            t_path.extend(steps.iter().map(|s| if s.left { 0 } else { 1 }));
            let cert = Certificate {
                tree,
                s: s_path,
                t: t_path,
            };
            debug_assert_eq!(validate_certificate(g.gvas(), &cert), vec![]);
            return Ok(Some(cert));
        }
    }
    Ok(None)
}

// ---------------------------------------------------------------------
// Brute-force certificate enumeration on tiny instances: an exhaustive
// memoized search over every annotated complete parse tree within the
// height and value bounds, used as the independent oracle for the
// certificate search.

const GUARD_NTS: usize = 3;
const GUARD_BOUND: u64 = 8;

struct BruteDp {
    h_max: usize,
    mv: u64,
    // plain[h][x][c][o]: some valid flow subtree rooted at x with input
    // annotation c and output annotation >= o, height <= h. The extra o
    // index (mv+1) encodes "no requirement" (output may be -∞).
    plain: Vec<Vec<Vec<Vec<bool>>>>,
    min_h: Vec<usize>,
}

impl BruteDp {
    fn noreq(&self) -> usize {
        self.mv as usize + 1
    }

    fn compute(g: &NormalizedGvas, h_max: usize, mv: u64) -> BruteDp {
        let gr = g.grammar();
        let v = gr.nt_count();
        let min_h: Vec<usize> = gr
            .min_height_trees()
            .iter()
            .map(|t| {
                fn h(t: &ParseTree) -> usize {
                    match t {
                        ParseTree::Node(_, cs) => 1 + cs.iter().map(h).max().unwrap_or(0),
                        _ => 0,
                    }
                }
                h(t.as_ref().expect("productive"))
            })
            .collect();
        let o_dim = mv as usize + 2;
        let mut plain = vec![vec![vec![vec![false; o_dim]; mv as usize + 1]; v]; h_max + 1];
        for h in 1..=h_max {
            for x in 0..v {
                for c in 0..=mv {
                    // no-requirement: any complete all--∞ completion fits
                    plain[h][x][c as usize][mv as usize + 1] = min_h[x] <= h;
                    for o in 0..=mv {
                        let mut ok = false;
                        for (_, r) in gr.rules_of(NtId(x as u32)) {
                            ok = match r.rhs.as_slice() {
                                [Sym::Act(a)] => {
                                    let top = c as i128 + *a as i128;
                                    top >= 0 && (top.min(mv as i128)) >= o as i128
                                }
                                [] => c >= o,
                                [Sym::Nt(y), Sym::Nt(z)] => (0..=mv).any(|w| {
                                    plain[h - 1][y.idx()][c as usize][w as usize]
                                        && plain[h - 1][z.idx()][w as usize][o as usize]
                                }),
                                _ => unreachable!(),
                            };
                            if ok {
                                break;
                            }
                        }
                        plain[h][x][c as usize][o as usize] = ok;
                    }
                }
            }
        }
        BruteDp {
            h_max,
            mv,
            plain,
            min_h,
        }
    }

    fn plain_at(&self, h: usize, x: NtId, c: u64, o: usize) -> bool {
        self.plain[h][x.idx()][c as usize][o]
    }

    fn max_out(&self, h: usize, x: NtId, c: u64) -> Option<u64> {
        (0..=self.mv)
            .rev()
            .find(|&o| self.plain_at(h, x, c, o as usize))
    }

    /// Flow subtree with input c and output annotation exactly o (or -∞
    /// for the no-requirement index), rebuilt by re-deriving the DP.
    fn mat_plain(&self, g: &NormalizedGvas, min_trees: &[ParseTree], h: usize, x: NtId, c: u64, o: usize) -> FlowTree {
        let gr = g.grammar();
        if o == self.noreq() {
            let mut t = all_bottom(&min_trees[x.idx()]);
            t.input = ExtNat::Fin(c);
            return t;
        }
        let out = ExtNat::Fin(o as u64);
        for (_, r) in gr.rules_of(x) {
            match r.rhs.as_slice() {
                [Sym::Act(a)] => {
                    let top = c as i128 + *a as i128;
                    if top >= 0 && top.min(self.mv as i128) >= o as i128 {
                        return FlowTree {
                            sym: SymLabel::Nt(x),
                            input: ExtNat::Fin(c),
                            output: out,
                            children: vec![FlowTree::leaf(SymLabel::Act(*a), ExtNat::Fin(c), out)],
                        };
                    }
                }
                [] => {
                    if c >= o as u64 {
                        return FlowTree {
                            sym: SymLabel::Nt(x),
                            input: ExtNat::Fin(c),
                            output: out,
                            children: vec![FlowTree::leaf(SymLabel::Eps, ExtNat::Fin(c), out)],
                        };
                    }
                }
                [Sym::Nt(y), Sym::Nt(z)] => {
                    if h == 0 {
                        continue;
                    }
                    for w in 0..=self.mv {
                        if self.plain_at(h - 1, *y, c, w as usize)
                            && self.plain_at(h - 1, *z, w, o)
                        {
                            return FlowTree {
                                sym: SymLabel::Nt(x),
                                input: ExtNat::Fin(c),
                                output: out,
                                children: vec![
                                    self.mat_plain(g, min_trees, h - 1, *y, c, w as usize),
                                    self.mat_plain(g, min_trees, h - 1, *z, w, o),
                                ],
                            };
                        }
                    }
                }
                _ => unreachable!(),
            }
        }
        unreachable!("mat_plain called on a true DP entry")
    }
}

/// t-label for the containment DP: symbol, input annotation, output
/// annotation (None encodes -∞).
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct TLabel {
    sym: NtId,
    input: u64,
    output: Option<u64>,
}

struct TdpTable {
    // tdp[h][x][c][o]: subtree rooted (x, in c, out >= o) containing a
    // node annotated exactly like the t-label
    tdp: Vec<Vec<Vec<Vec<bool>>>>,
}

fn compute_tdp(g: &NormalizedGvas, dp: &BruteDp, t: TLabel) -> TdpTable {
    let gr = g.grammar();
    let v = gr.nt_count();
    let mv = dp.mv;
    let o_dim = mv as usize + 2;
    let noreq = dp.noreq();
    let mut tdp = vec![vec![vec![vec![false; o_dim]; mv as usize + 1]; v]; dp.h_max + 1];
    let t_feasible = |h: usize| match t.output {
        None => dp.min_h[t.sym.idx()] <= h,
        Some(ot) => dp.plain_at(h, t.sym, t.input, ot as usize),
    };
    for h in 1..=dp.h_max {
        for x in 0..v {
            for c in 0..=mv {
                for o in 0..o_dim {
                    // the node itself is t
                    let mut ok = x == t.sym.idx()
                        && c == t.input
                        && (o == noreq || t.output.is_some_and(|ot| ot >= o as u64))
                        && t_feasible(h);
                    if !ok {
                        for (_, r) in gr.rules_of(NtId(x as u32)) {
                            if let [Sym::Nt(y), Sym::Nt(z)] = r.rhs.as_slice() {
                                // t in the left child, right child carries o
                                ok = (0..=mv).any(|w| {
                                    tdp[h - 1][y.idx()][c as usize][w as usize]
                                        && dp.plain_at(h - 1, *z, w, o)
                                });
                                // right child dropped entirely
                                if !ok && o == noreq {
                                    ok = tdp[h - 1][y.idx()][c as usize][noreq]
                                        && dp.min_h[z.idx()] <= h - 1;
                                }
                                // t in the right child
                                if !ok {
                                    ok = (0..=mv).any(|w| {
                                        dp.plain_at(h - 1, *y, c, w as usize)
                                            && tdp[h - 1][z.idx()][w as usize][o]
                                    });
                                }
                                if ok {
                                    break;
                                }
                            }
                        }
                    }
                    tdp[h][x][c as usize][o] = ok;
                }
            }
        }
    }
    TdpTable { tdp }
}

fn mat_tdp(
    g: &NormalizedGvas,
    dp: &BruteDp,
    min_trees: &[ParseTree],
    table: &TdpTable,
    t: TLabel,
    h: usize,
    x: NtId,
    c: u64,
    o: usize,
) -> (FlowTree, NodePath) {
    let gr = g.grammar();
    let noreq = dp.noreq();
    let t_feasible = match t.output {
        None => dp.min_h[t.sym.idx()] <= h,
        Some(ot) => dp.plain_at(h, t.sym, t.input, ot as usize),
    };
    if x == t.sym && c == t.input && (o == noreq || t.output.is_some_and(|ot| ot >= o as u64)) && t_feasible
    {
        let t_o_idx = match t.output {
            None => noreq,
            Some(ot) => ot as usize,
        };
        return (mat_plain_for(g, dp, min_trees, h, x, c, t_o_idx), vec![]);
    }
    for (_, r) in gr.rules_of(x) {
        if let [Sym::Nt(y), Sym::Nt(z)] = r.rhs.as_slice() {
            for w in 0..=dp.mv {
                if table.tdp[h - 1][y.idx()][c as usize][w as usize]
                    && dp.plain_at(h - 1, *z, w, o)
                {
                    let (sub, mut p) = mat_tdp(g, dp, min_trees, table, t, h - 1, *y, c, w as usize);
                    let sib = dp.mat_plain(g, min_trees, h - 1, *z, w, o);
                    let out = if o == noreq {
                        ExtNat::NegInf
                    } else {
                        ExtNat::Fin(o as u64)
                    };
                    let node = FlowTree {
                        sym: SymLabel::Nt(x),
                        input: ExtNat::Fin(c),
                        output: out,
                        children: vec![sub, sib],
                    };
                    let mut path = vec![0];
                    path.append(&mut p);
                    return (node, path);
                }
            }
            if o == noreq
                && table.tdp[h - 1][y.idx()][c as usize][noreq]
                && dp.min_h[z.idx()] <= h - 1
            {
                let (sub, mut p) = mat_tdp(g, dp, min_trees, table, t, h - 1, *y, c, noreq);
                let sib = all_bottom(&min_trees[z.idx()]);
                let node = FlowTree {
                    sym: SymLabel::Nt(x),
                    input: ExtNat::Fin(c),
                    output: ExtNat::NegInf,
                    children: vec![sub, sib],
                };
                let mut path = vec![0];
                path.append(&mut p);
                return (node, path);
            }
            for w in 0..=dp.mv {
                if dp.plain_at(h - 1, *y, c, w as usize)
                    && table.tdp[h - 1][z.idx()][w as usize][o]
                {
                    let sib = dp.mat_plain(g, min_trees, h - 1, *y, c, w as usize);
                    let (sub, mut p) = mat_tdp(g, dp, min_trees, table, t, h - 1, *z, w, o);
                    let out = if o == noreq {
                        ExtNat::NegInf
                    } else {
                        ExtNat::Fin(o as u64)
                    };
                    let node = FlowTree {
                        sym: SymLabel::Nt(x),
                        input: ExtNat::Fin(c),
                        output: out,
                        children: vec![sib, sub],
                    };
                    let mut path = vec![1];
                    path.append(&mut p);
                    return (node, path);
                }
            }
        }
    }
    unreachable!("mat_tdp called on a true DP entry")
}

fn mat_plain_for(
    g: &NormalizedGvas,
    dp: &BruteDp,
    min_trees: &[ParseTree],
    h: usize,
    x: NtId,
    c: u64,
    o: usize,
) -> FlowTree {
    dp.mat_plain(g, min_trees, h, x, c, o)
}

#[derive(Clone, Copy)]
struct CtxBp {
    parent: (NtId, u64),
    rule: usize,
    left: bool,
    // out annotation feeding a right child
    sibling_out: u64,
    depth: usize,
}

/// Exhaustive certificate enumeration for tiny instances: every complete
/// parse tree up to the height bound, annotated with every value
/// assignment within the bound that satisfies the flow conditions, in a
/// fixed deterministic order. Memoized rather than materialized one tree
/// at a time, which changes nothing about the set searched.
pub fn brute_force_certificate(
    g: &NormalizedGvas,
    max_height: usize,
    max_value: u64,
) -> Result<Option<Certificate>, SearchError> {
    let gr = g.grammar();
    if gr.nt_count() > GUARD_NTS || max_height as u64 > GUARD_BOUND || max_value > GUARD_BOUND {
        return Err(SearchError::BruteForceGuard(format!(
            "requires |V| <= {}, bounds <= {}; got |V| = {}, height {}, value {}",
            GUARD_NTS,
            GUARD_BOUND,
            gr.nt_count(),
            max_height,
            max_value
        )));
    }
    if g.c_init() > max_value || max_height < 2 {
        return Ok(None);
    }
    let mv = max_value;
    let dp = BruteDp::compute(g, max_height, mv);
    let min_trees: Vec<ParseTree> = gr
        .min_height_trees()
        .into_iter()
        .map(|t| t.expect("productive"))
        .collect();

    // reachable s positions: (symbol, input annotation) with their
    // shallowest depth, via lossy down-steps from the root
    let mut ctx: HashMap<(NtId, u64), CtxBp> = HashMap::new();
    let mut order: Vec<(NtId, u64, usize)> = Vec::new();
    let root = (gr.start, g.c_init());
    order.push((root.0, root.1, 0));
    let mut layer = vec![root];
    let mut depth = 0usize;
    while !layer.is_empty() && depth + 1 <= max_height.saturating_sub(1) {
        let mut next = Vec::new();
        for &(w, c) in &layer {
            let rem = max_height - (depth + 1);
            for (ri, r) in gr.rules_of(w) {
                if let [Sym::Nt(y), Sym::Nt(z)] = r.rhs.as_slice() {
                    if dp.min_h[z.idx()] <= rem {
                        for c2 in (0..=c).rev() {
                            let pair = (*y, c2);
                            if pair == root || ctx.contains_key(&pair) {
                                continue;
                            }
                            ctx.insert(
                                pair,
                                CtxBp {
                                    parent: (w, c),
                                    rule: ri,
                                    left: true,
                                    sibling_out: 0,
                                    depth: depth + 1,
                                },
                            );
                            order.push((*y, c2, depth + 1));
                            next.push(pair);
                        }
                    }
                    if let Some(m) = dp.max_out(rem, *y, c) {
                        for c2 in (0..=m).rev() {
                            let pair = (*z, c2);
                            if pair == root || ctx.contains_key(&pair) {
                                continue;
                            }
                            ctx.insert(
                                pair,
                                CtxBp {
                                    parent: (w, c),
                                    rule: ri,
                                    left: false,
                                    sibling_out: c2,
                                    depth: depth + 1,
                                },
                            );
                            order.push((*z, c2, depth + 1));
                            next.push(pair);
                        }
                    }
                }
            }
        }
        layer = next;
        depth += 1;
    }

    let noreq = dp.noreq();
    let mut tdp_cache: HashMap<TLabel, TdpTable> = HashMap::new();
    for &(sym, i_s, d) in &order {
        let h_s = max_height - d;
        if h_s < 1 {
            continue;
        }
        // o_s = None encodes -∞
        let o_s_options: Vec<Option<u64>> =
            std::iter::once(None).chain((0..=mv).map(Some)).collect();
        for &o_s in &o_s_options {
            for i_t in i_s..=mv {
                for o_t in std::iter::once(None).chain((0..=mv).map(Some)) {
                    let strict_in = i_s < i_t;
                    let strict_out = match (o_t, o_s) {
                        (None, Some(_)) => true,
                        (Some(a), Some(b)) => a < b,
                        _ => false,
                    };
                    if !(strict_in || strict_out) {
                        continue;
                    }
                    let t = TLabel {
                        sym,
                        input: i_t,
                        output: o_t,
                    };
                    let table = tdp_cache
                        .entry(t)
                        .or_insert_with(|| compute_tdp(g, &dp, t));
                    // s expands via some rule with t strictly inside
                    let o_s_idx = match o_s {
                        None => noreq,
                        Some(v) => v as usize,
                    };
                    let mut found: Option<(usize, bool, usize)> = None;
                    'rules: for (ri, r) in gr.rules_of(sym) {
                        if let [Sym::Nt(y), Sym::Nt(z)] = r.rhs.as_slice() {
                            for w in 0..=mv {
                                if table.tdp[h_s - 1][y.idx()][i_s as usize][w as usize]
                                    && dp.plain_at(h_s - 1, *z, w, o_s_idx)
                                {
                                    found = Some((ri, true, w as usize));
                                    break 'rules;
                                }
                            }
                            if o_s_idx == noreq
                                && table.tdp[h_s - 1][y.idx()][i_s as usize][noreq]
                                && dp.min_h[z.idx()] <= h_s - 1
                            {
                                found = Some((ri, true, noreq));
                                break 'rules;
                            }
                            for w in 0..=mv {
                                if dp.plain_at(h_s - 1, *y, i_s, w as usize)
                                    && table.tdp[h_s - 1][z.idx()][w as usize][o_s_idx]
                                {
                                    found = Some((ri, false, w as usize));
                                    break 'rules;
                                }
                            }
                        }
                    }
                    let Some((ri, t_left, w)) = found else { continue };
                    // materialize s's subtree with t inside
                    let r = &gr.rules[ri];
                    let [Sym::Nt(y), Sym::Nt(z)] = r.rhs.as_slice() else {
                        unreachable!()
                    };
                    let s_out = match o_s {
                        None => ExtNat::NegInf,
                        Some(v) => ExtNat::Fin(v),
                    };
                    let (children, t_rel): (Vec<FlowTree>, NodePath) = if t_left {
                        let (sub, p) =
                            mat_tdp(g, &dp, &min_trees, table, t, h_s - 1, *y, i_s, w);
                        let sib = if w == noreq {
                            all_bottom(&min_trees[z.idx()])
                        } else {
                            dp.mat_plain(g, &min_trees, h_s - 1, *z, w as u64, o_s_idx)
                        };
                        let mut path = vec![0];
                        path.extend(p);
                        (vec![sub, sib], path)
                    } else {
                        let sib = dp.mat_plain(g, &min_trees, h_s - 1, *y, i_s, w);
                        let (sub, p) =
                            mat_tdp(g, &dp, &min_trees, table, t, h_s - 1, *z, w as u64, o_s_idx);
                        let mut path = vec![1];
                        path.extend(p);
                        (vec![sib, sub], path)
                    };
                    let s_sub = FlowTree {
                        sym: SymLabel::Nt(sym),
                        input: ExtNat::Fin(i_s),
                        output: s_out,
                        children,
                    };
                    // wrap the context back to the root
                    let mut tree = s_sub;
                    let mut s_path_rev: Vec<usize> = Vec::new();
                    let mut cur = (sym, i_s);
                    while cur != root {
                        let bp = ctx[&cur];
                        let r = &gr.rules[bp.rule];
                        let [Sym::Nt(y), Sym::Nt(z)] = r.rhs.as_slice() else {
                            unreachable!()
                        };
                        let rem = max_height - bp.depth;
                        tree = if bp.left {
                            s_path_rev.push(0);
                            FlowTree {
                                sym: SymLabel::Nt(bp.parent.0),
                                input: ExtNat::Fin(bp.parent.1),
                                output: ExtNat::NegInf,
                                children: vec![tree, all_bottom(&min_trees[z.idx()])],
                            }
                        } else {
                            s_path_rev.push(1);
                            let sib = dp.mat_plain(
                                g,
                                &min_trees,
                                rem,
                                *y,
                                bp.parent.1,
                                bp.sibling_out as usize,
                            );
                            FlowTree {
                                sym: SymLabel::Nt(bp.parent.0),
                                input: ExtNat::Fin(bp.parent.1),
                                output: ExtNat::NegInf,
                                children: vec![sib, tree],
                            }
                        };
                        cur = bp.parent;
                    }
                    let s_path: NodePath = s_path_rev.into_iter().rev().collect();
                    let mut t_path = s_path.clone();
                    t_path.extend(t_rel);
                    let cert = Certificate {
                        tree,
                        s: s_path,
                        t: t_path,
                    };
                    debug_assert_eq!(validate_certificate(g.gvas(), &cert), vec![]);
                    return Ok(Some(cert));
                }
            }
        }
    }
    Ok(None)
}

// ---------------------------------------------------------------------
// Top-level verdict

#[derive(Clone, Debug)]
pub enum BoundedProof {
    /// The exact reachability oracle closed; the set is the full
    /// reachability set.
    OracleClosure(BTreeSet<u64>),
    /// No certificate exists up to the completeness cap.
    CapExhausted(u64),
}

#[derive(Clone, Debug)]
pub enum Verdict {
    Unbounded(Certificate),
    Bounded(BoundedProof),
    Inconclusive { caps: Vec<u64>, budgets: Vec<u64> },
}

#[derive(Clone, Debug)]
pub struct DecideOptions {
    pub max_cap: u64,
    pub max_oracle: u64,
    pub complete: bool,
    pub pruning: bool,
    /// Sample prefix-closedness up to this word length; failures are
    /// warnings, not errors.
    pub prefix_check_len: Option<usize>,
}

impl Default for DecideOptions {
    fn default() -> Self {
        DecideOptions {
            max_cap: 256,
            max_oracle: 1024,
            complete: false,
            pruning: true,
            prefix_check_len: None,
        }
    }
}

#[derive(Debug)]
pub struct DecideOutcome {
    pub verdict: Verdict,
    /// The normalized grammar certificates refer to.
    pub normalized: Option<NormalizedGvas>,
    pub warnings: Vec<String>,
    /// The escalation schedules the run was configured with.
    pub caps: Vec<u64>,
    pub oracle_budgets: Vec<u64>,
}

fn geometric_schedule(first: u64, max: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut v = first.min(max);
    loop {
        out.push(v);
        if v >= max {
            break;
        }
        v = v.saturating_mul(4).min(max);
    }
    out
}

/// Words of the language up to the given length whose prefixes fall out
/// of the language, found by sampling over the action alphabet.
pub fn prefix_closure_counterexamples(g: &NormalizedGvas, max_len: usize) -> Vec<Vec<i64>> {
    let start = g.grammar().start;
    let mut bad = Vec::new();
    let mut words: Vec<Vec<i64>> = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &words {
            for a in [-1i64, 0, 1] {
                let mut w2 = w.clone();
                w2.push(a);
                next.push(w2);
            }
        }
        for w in &next {
            if g.member(start, w) {
                let all_prefixes_in =
                    (0..w.len()).all(|k| g.member(start, &w[..k]));
                if !all_prefixes_in {
                    bad.push(w.clone());
                }
            }
        }
        words = next;
    }
    bad
}

/// The boundedness decision: interleaves the exact oracle at escalating
/// budgets with the certificate search at escalating caps. The caller is
/// responsible for prefix-closedness of the language; grammars produced
/// by the PVAS reduction have it by construction.
pub fn decide(g: &Gvas, opts: &DecideOptions) -> Result<DecideOutcome, SearchError> {
    let mut warnings = Vec::new();
    let caps = geometric_schedule(16, opts.max_cap);
    let budgets = geometric_schedule(64, opts.max_oracle);
    let norm = match crate::normalize::normalize(g) {
        Ok(n) => n,
        Err(GrammarError::EmptyLanguage(_)) => {
            return Ok(DecideOutcome {
                verdict: Verdict::Bounded(BoundedProof::OracleClosure(BTreeSet::new())),
                normalized: None,
                warnings,
                caps,
                oracle_budgets: budgets,
            });
        }
        Err(e) => panic!("normalization failed: {}", e),
    };
    if let Some(len) = opts.prefix_check_len {
        for w in prefix_closure_counterexamples(&norm, len) {
            warnings.push(format!(
                "language is not prefix-closed: word {:?} is in the language but a prefix is not",
                w
            ));
        }
    }
    let stages = caps.len().max(budgets.len());
    for i in 0..stages {
        if let Some(&budget) = budgets.get(i) {
            let table = crate::oracle::reach_table(&norm, budget);
            if !table.capped() {
                let set = table.outputs(norm.grammar().start, norm.c_init());
                return Ok(DecideOutcome {
                    verdict: Verdict::Bounded(BoundedProof::OracleClosure(set)),
                    normalized: Some(norm),
                    warnings,
                    caps,
                    oracle_budgets: budgets,
                });
            }
        }
        if let Some(&cap) = caps.get(i) {
            if let Some(cert) =
                find_certificate(&norm, Cap::new(cap, norm.c_init()), opts.pruning)?
            {
                return Ok(DecideOutcome {
                    verdict: Verdict::Unbounded(cert),
                    normalized: Some(norm),
                    warnings,
                    caps,
                    oracle_budgets: budgets,
                });
            }
        }
    }
    if opts.complete {
        let cap = theoretical_cap(&norm)?;
        let verdict = match find_certificate(&norm, Cap::new(cap, norm.c_init()), opts.pruning)? {
            Some(cert) => Verdict::Unbounded(cert),
            None => Verdict::Bounded(BoundedProof::CapExhausted(cap)),
        };
        return Ok(DecideOutcome {
            verdict,
            normalized: Some(norm),
            warnings,
            caps,
            oracle_budgets: budgets,
        });
    }
    Ok(DecideOutcome {
        verdict: Verdict::Inconclusive {
            caps: caps.clone(),
            budgets: budgets.clone(),
        },
        normalized: Some(norm),
        warnings,
        caps,
        oracle_budgets: budgets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normalize::normalize;
    use crate::textfmt::parse_gvas;

    fn norm(text: &str) -> NormalizedGvas {
        normalize(&parse_gvas(text).unwrap()).unwrap()
    }

    fn g1() -> NormalizedGvas {
        norm("gvas\ncounter_init 0\nstart S\nS -> U S\nS ->\nU -> 1\n")
    }

    fn decreasing(c_init: u64) -> NormalizedGvas {
        norm(&format!(
            "gvas\ncounter_init {}\nstart S\nS -> M S\nS ->\nM -> -1\n",
            c_init
        ))
    }

    #[test]
    fn mo_g1_pump_saturates_at_cap() {
        let g = g1();
        let mo = maxout_table(&g, Cap::new(3, 0)).unwrap();
        assert_eq!(mo.get(g.grammar().start, 0), Some(3));
    }

    #[test]
    fn mo_negative_leaf_at_zero_is_bottom() {
        let g = norm("gvas\ncounter_init 0\nstart S\nS -> M S\nS ->\nM -> -1\n");
        let m = g.grammar().lookup("M").unwrap();
        let mo = maxout_table(&g, Cap::new(8, 0)).unwrap();
        assert_eq!(mo.get(m, 0), None);
        assert_eq!(mo.get(m, 1), Some(0));
    }

    #[test]
    fn mo_ackermann_m1_matches_function() {
        let mut text = String::from("gvas\ncounter_init 0\nstart X1\nX0 -> 1\n");
        text.push_str("X1 -> -1 X1 X0\nX1 -> 1 X0\n");
        let g = norm(&text);
        let x1 = g.grammar().lookup("X1").unwrap();
        let mo = maxout_table(&g, Cap::new(64, 0)).unwrap();
        assert_eq!(mo.get(x1, 5), Some(7)); // A_1(5)
    }

    #[test]
    fn mo_materialize_validates() {
        let g = g1();
        let mo = maxout_table(&g, Cap::new(5, 0)).unwrap();
        let ft = mo.materialize(&g, g.grammar().start, 0, 4);
        assert_eq!(
            crate::flowtree::validate_flow_tree(g.gvas(), &ft),
            vec![]
        );
        assert_eq!(ft.output, ExtNat::Fin(4));
    }

    #[test]
    fn theoretical_cap_values() {
        let g = g1(); // |V| = 2 after normalization
        assert_eq!(g.grammar().nt_count(), 2);
        assert_eq!(theoretical_cap(&g).unwrap(), 16_777_216);
        let g = norm("gvas\ncounter_init 3\nstart S\nS -> 1\n");
        assert_eq!(theoretical_cap(&g).unwrap(), 3 + 65_536);
        let mut big = String::from("gvas\ncounter_init 0\nstart N0\n");
        for i in 0..40 {
            big.push_str(&format!("N{} -> 1\n", i));
        }
        let g = norm(&big);
        assert!(matches!(
            theoretical_cap(&g),
            Err(SearchError::CapOverflow(40))
        ));
    }

    #[test]
    fn find_certificate_g1() {
        let g = g1();
        let cert = find_certificate(&g, Cap::new(4, 0), true).unwrap().unwrap();
        assert_eq!(validate_certificate(g.gvas(), &cert), vec![]);
        // the shallowest certificate anchors s at the root
        assert_eq!(cert.s, Vec::<usize>::new());
        let s_node = cert.tree.get(&cert.s).unwrap();
        let t_node = cert.tree.get(&cert.t).unwrap();
        assert_eq!(s_node.input, ExtNat::Fin(0));
        assert_eq!(t_node.input, ExtNat::Fin(1));
    }

    #[test]
    fn find_certificate_decreasing_absent() {
        let g = decreasing(2);
        assert!(find_certificate(&g, Cap::new(16, 2), true).unwrap().is_none());
        let g = decreasing(5);
        assert!(find_certificate(&g, Cap::new(64, 5), true).unwrap().is_none());
    }

    #[test]
    fn find_certificate_ackermann_x1_absent() {
        let g = norm("gvas\ncounter_init 0\nstart X1\nX0 -> 1\nX1 -> -1 X1 X0\nX1 -> 1 X0\n");
        assert!(find_certificate(&g, Cap::new(16, 0), true).unwrap().is_none());
        assert!(find_certificate(&g, Cap::new(16, 0), false).unwrap().is_none());
    }

    #[test]
    fn brute_force_g1_agrees() {
        let g = g1();
        let brute = brute_force_certificate(&g, 4, 4).unwrap();
        let cert = brute.expect("certificate exists");
        assert_eq!(validate_certificate(g.gvas(), &cert), vec![]);
        assert!(find_certificate(&g, Cap::new(4, 0), true).unwrap().is_some());
    }

    #[test]
    fn brute_force_decreasing_absent() {
        let g = decreasing(2);
        assert!(brute_force_certificate(&g, 6, 6).unwrap().is_none());
    }

    #[test]
    fn brute_force_guard() {
        let g = norm(
            "gvas\ncounter_init 0\nstart A\nA -> B C\nB -> C A\nC -> 1\nA ->\nB ->\nC ->\nD -> 1\n",
        );
        assert!(matches!(
            brute_force_certificate(&g, 4, 4),
            Err(SearchError::BruteForceGuard(_))
        ));
    }

    #[test]
    fn decide_g1_unbounded() {
        let g = parse_gvas("gvas\ncounter_init 0\nstart S\nS -> 1 S\nS ->\n").unwrap();
        let out = decide(&g, &DecideOptions::default()).unwrap();
        match out.verdict {
            Verdict::Unbounded(cert) => {
                let norm = out.normalized.unwrap();
                assert_eq!(validate_certificate(norm.gvas(), &cert), vec![]);
            }
            other => panic!("expected unbounded, got {:?}", other),
        }
    }

    #[test]
    fn decide_decreasing_bounded_with_exact_set() {
        let g = parse_gvas("gvas\ncounter_init 5\nstart S\nS -> -1 S\nS ->\n").unwrap();
        let out = decide(&g, &DecideOptions::default()).unwrap();
        match out.verdict {
            Verdict::Bounded(BoundedProof::OracleClosure(set)) => {
                assert_eq!(set, (0..=5).collect());
            }
            other => panic!("expected bounded, got {:?}", other),
        }
    }

    #[test]
    fn decide_empty_language_is_bounded_empty() {
        let g = parse_gvas("gvas\ncounter_init 3\nstart S\nS -> S S\n").unwrap();
        let out = decide(&g, &DecideOptions::default()).unwrap();
        match out.verdict {
            Verdict::Bounded(BoundedProof::OracleClosure(set)) => assert!(set.is_empty()),
            other => panic!("expected bounded empty, got {:?}", other),
        }
    }

    #[test]
    fn prefix_closure_sampling() {
        let g = g1();
        assert!(prefix_closure_counterexamples(&g, 4).is_empty());
        // 1 1 is in the language but the prefix 1 is not
        let g = norm("gvas\ncounter_init 0\nstart S\nS -> U U\nS ->\nU -> 1\n");
        let bad = prefix_closure_counterexamples(&g, 3);
        assert!(bad.contains(&vec![1, 1]));
    }
}
