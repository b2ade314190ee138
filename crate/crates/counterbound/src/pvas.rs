//! Pushdown VAS: model, exact breadth-first simulator, and the reduction
//! to a prefix-closed GVAS over run-prefix delta sequences.

use std::collections::{BTreeSet, HashMap, VecDeque};

use thiserror::Error;

use crate::grammar::{Grammar, Gvas, Rule, Sym};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct StateId(pub u32);

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct StackSym(pub u32);

impl StateId {
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl StackSym {
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

/// Stack operation of a transition.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum StackOp {
    Push(StackSym),
    Pop(StackSym),
    Nop,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transition {
    pub src: StateId,
    pub delta: Vec<i64>,
    pub op: StackOp,
    pub dst: StateId,
}

/// k-dimensional pushdown vector addition system. The stack top is the
/// rightmost symbol of the stack word.
#[derive(Clone, Debug)]
pub struct Pvas {
    state_names: Vec<String>,
    state_by_name: HashMap<String, StateId>,
    stack_names: Vec<String>,
    stack_by_name: HashMap<String, StackSym>,
    pub dim: usize,
    pub q_init: StateId,
    pub c_init: Vec<u64>,
    pub w_init: Vec<StackSym>,
    pub transitions: Vec<Transition>,
}

/// State, counters, stack content (rightmost symbol on top).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Config {
    pub state: StateId,
    pub counters: Vec<u64>,
    pub stack: Vec<StackSym>,
}

#[derive(Debug, Error)]
pub enum PvasError {
    #[error("decision pipeline is 1-dimensional, got dimension {0}")]
    NotOneDimensional(usize),
}

/// Which budget a breadth-first exploration ran into.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TruncFlags {
    pub max_counter: bool,
    pub max_stack: bool,
    pub max_configs: bool,
}

impl TruncFlags {
    pub fn any(&self) -> bool {
        self.max_counter || self.max_stack || self.max_configs
    }
}

#[derive(Clone, Debug)]
pub struct BfsReach {
    pub configs: BTreeSet<Config>,
    pub truncated: TruncFlags,
}

impl Pvas {
    pub fn new(dim: usize) -> Self {
        Pvas {
            state_names: Vec::new(),
            state_by_name: HashMap::new(),
            stack_names: Vec::new(),
            stack_by_name: HashMap::new(),
            dim,
            q_init: StateId(0),
            c_init: vec![0; dim],
            w_init: Vec::new(),
            transitions: Vec::new(),
        }
    }

    pub fn intern_state(&mut self, name: &str) -> StateId {
        if let Some(&id) = self.state_by_name.get(name) {
            return id;
        }
        let id = StateId(self.state_names.len() as u32);
        self.state_names.push(name.to_string());
        self.state_by_name.insert(name.to_string(), id);
        id
    }

    pub fn intern_stack_sym(&mut self, name: &str) -> StackSym {
        if let Some(&id) = self.stack_by_name.get(name) {
            return id;
        }
        let id = StackSym(self.stack_names.len() as u32);
        self.stack_names.push(name.to_string());
        self.stack_by_name.insert(name.to_string(), id);
        id
    }

    pub fn lookup_state(&self, name: &str) -> Option<StateId> {
        self.state_by_name.get(name).copied()
    }

    pub fn lookup_stack_sym(&self, name: &str) -> Option<StackSym> {
        self.stack_by_name.get(name).copied()
    }

    pub fn state_name(&self, id: StateId) -> &str {
        &self.state_names[id.idx()]
    }

    pub fn stack_sym_name(&self, id: StackSym) -> &str {
        &self.stack_names[id.idx()]
    }

    pub fn state_count(&self) -> usize {
        self.state_names.len()
    }

    pub fn stack_sym_count(&self) -> usize {
        self.stack_names.len()
    }

    pub fn state_ids(&self) -> impl Iterator<Item = StateId> {
        (0..self.state_names.len() as u32).map(StateId)
    }

    pub fn initial_config(&self) -> Config {
        Config {
            state: self.q_init,
            counters: self.c_init.clone(),
            stack: self.w_init.clone(),
        }
    }

    /// All one-step successors. Blocked transitions (counter would go
    /// negative, pop on a mismatched or empty stack) are simply absent.
    pub fn step(&self, config: &Config) -> Vec<Config> {
        let mut out = Vec::new();
        for t in &self.transitions {
            if t.src != config.state {
                continue;
            }
            let mut counters = Vec::with_capacity(self.dim);
            let mut ok = true;
            for (c, d) in config.counters.iter().zip(&t.delta) {
                let v = *c as i128 + *d as i128;
                if v < 0 {
                    ok = false;
                    break;
                }
                counters.push(v as u64);
            }
            if !ok {
                continue;
            }
            let stack = match t.op {
                StackOp::Nop => config.stack.clone(),
                StackOp::Push(g) => {
                    let mut s = config.stack.clone();
                    s.push(g);
                    s
                }
                StackOp::Pop(g) => {
                    if config.stack.last() != Some(&g) {
                        continue;
                    }
                    let mut s = config.stack.clone();
                    s.pop();
                    s
                }
            };
            out.push(Config {
                state: t.dst,
                counters,
                stack,
            });
        }
        out
    }

    /// Breadth-first closure of `step` from the initial configuration.
    /// Successors exceeding a budget are discarded and the corresponding
    /// flag is set.
    pub fn bfs_reach(&self, max_counter: u64, max_stack: usize, max_configs: usize) -> BfsReach {
        let mut flags = TruncFlags::default();
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::new();
        let init = self.initial_config();
        let fits = |c: &Config, flags: &mut TruncFlags| {
            let mut ok = true;
            if c.counters.iter().any(|&v| v > max_counter) {
                flags.max_counter = true;
                ok = false;
            }
            if c.stack.len() > max_stack {
                flags.max_stack = true;
                ok = false;
            }
            ok
        };
        if fits(&init, &mut flags) {
            seen.insert(init.clone());
            queue.push_back(init);
        }
        while let Some(c) = queue.pop_front() {
            for succ in self.step(&c) {
                if !fits(&succ, &mut flags) {
                    continue;
                }
                if seen.contains(&succ) {
                    continue;
                }
                if seen.len() >= max_configs {
                    flags.max_configs = true;
                    continue;
                }
                seen.insert(succ.clone());
                queue.push_back(succ);
            }
        }
        BfsReach {
            configs: seen,
            truncated: flags,
        }
    }

    /// Reduces a 1-dimensional PVAS to a GVAS whose language is the set of
    /// counter-delta sequences along all stack-consistent run prefixes,
    /// which is prefix-closed by construction. Reachable counter values are
    /// preserved.
    ///
    /// Nonterminals: `@Trip[p,γ,q]` derives the deltas of runs that start
    /// in `p` with `γ` on top and end exactly when that `γ` is popped,
    /// ending in `q`; `@Live[p,γ]` the prefixes that never pop below `γ`;
    /// `@Run[p,i]` the runs over the initial-stack prefix of height `i`.
    pub fn reduce_to_gvas(&self) -> Result<Gvas, PvasError> {
        if self.dim != 1 {
            return Err(PvasError::NotOneDimensional(self.dim));
        }
        let mut g = Grammar::new();
        let states: Vec<StateId> = self.state_ids().collect();
        let syms: Vec<StackSym> = (0..self.stack_names.len() as u32).map(StackSym).collect();
        let trip = |p: &Pvas, s: StateId, g_: StackSym, q: StateId| {
            format!(
                "@Trip[{},{},{}]",
                p.state_name(s),
                p.stack_sym_name(g_),
                p.state_name(q)
            )
        };
        let live = |p: &Pvas, s: StateId, g_: StackSym| {
            format!("@Live[{},{}]", p.state_name(s), p.stack_sym_name(g_))
        };
        let run = |p: &Pvas, s: StateId, i: usize| format!("@Run[{},{}]", p.state_name(s), i);

        // intern everything up front so rule construction stays readable
        let n = self.w_init.len();
        for &p in &states {
            for &gm in &syms {
                for &q in &states {
                    g.intern(&trip(self, p, gm, q));
                }
                g.intern(&live(self, p, gm));
            }
            for i in 0..=n {
                g.intern(&run(self, p, i));
            }
        }
        let start = g.intern(&run(self, self.q_init, n));
        g.start = start;

        let add = |g: &mut Grammar, lhs: String, rhs: Vec<Sym>| {
            let lhs = g.intern(&lhs);
            g.rules.push(Rule { lhs, rhs });
        };

        for t in &self.transitions {
            let a = Sym::Act(t.delta[0]);
            match t.op {
                StackOp::Nop => {
                    for &gm in &syms {
                        for &q in &states {
                            let inner = g.intern(&trip(self, t.dst, gm, q));
                            add(
                                &mut g,
                                trip(self, t.src, gm, q),
                                vec![a, Sym::Nt(inner)],
                            );
                        }
                        let inner = g.intern(&live(self, t.dst, gm));
                        add(&mut g, live(self, t.src, gm), vec![a, Sym::Nt(inner)]);
                    }
                    let inner = g.intern(&run(self, t.dst, 0));
                    add(&mut g, run(self, t.src, 0), vec![a, Sym::Nt(inner)]);
                }
                StackOp::Push(dl) => {
                    for &gm in &syms {
                        for &q in &states {
                            for &r in &states {
                                let first = g.intern(&trip(self, t.dst, dl, r));
                                let second = g.intern(&trip(self, r, gm, q));
                                add(
                                    &mut g,
                                    trip(self, t.src, gm, q),
                                    vec![a, Sym::Nt(first), Sym::Nt(second)],
                                );
                            }
                        }
                        let deep = g.intern(&live(self, t.dst, dl));
                        add(&mut g, live(self, t.src, gm), vec![a, Sym::Nt(deep)]);
                        for &r in &states {
                            let first = g.intern(&trip(self, t.dst, dl, r));
                            let second = g.intern(&live(self, r, gm));
                            add(
                                &mut g,
                                live(self, t.src, gm),
                                vec![a, Sym::Nt(first), Sym::Nt(second)],
                            );
                        }
                    }
                    let deep = g.intern(&live(self, t.dst, dl));
                    add(&mut g, run(self, t.src, 0), vec![a, Sym::Nt(deep)]);
                    for &r in &states {
                        let first = g.intern(&trip(self, t.dst, dl, r));
                        let second = g.intern(&run(self, r, 0));
                        add(
                            &mut g,
                            run(self, t.src, 0),
                            vec![a, Sym::Nt(first), Sym::Nt(second)],
                        );
                    }
                }
                StackOp::Pop(gm) => {
                    add(&mut g, trip(self, t.src, gm, t.dst), vec![a]);
                }
            }
        }
        for &p in &states {
            for &gm in &syms {
                add(&mut g, live(self, p, gm), vec![]);
            }
            add(&mut g, run(self, p, 0), vec![]);
            for i in 1..=n {
                let top = self.w_init[i - 1];
                for &q in &states {
                    let first = g.intern(&trip(self, p, top, q));
                    let second = g.intern(&run(self, q, i - 1));
                    add(
                        &mut g,
                        run(self, p, i),
                        vec![Sym::Nt(first), Sym::Nt(second)],
                    );
                }
                let stay = g.intern(&live(self, p, top));
                add(&mut g, run(self, p, i), vec![Sym::Nt(stay)]);
            }
        }
        Ok(Gvas {
            grammar: g,
            c_init: self.c_init[0],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textfmt::parse_pvas;

    pub fn fig1(n: u64) -> Pvas {
        parse_pvas(&format!(
            "pvas\ndim 1\ninit 2 {} -\n2 -> 3 : add=0\n3 -> 5 : add=-1\n3 -> 7 : add=0\n\
             5 -> 2 : add=0 push=A\n7 -> 8 : add=2\n8 -> 6 : add=0 pop=A\n6 -> 7 : add=0\n",
            n
        ))
        .unwrap()
    }

    fn ack_pvas(m: usize, n: u64) -> Pvas {
        // states bot,0..m; gamma_0..gamma_m
        let mut text = format!("pvas\ndim 1\ninit bot {} g{}\n", n, m);
        text.push_str("bot -> 0 : add=0 pop=g0\n0 -> bot : add=1\n");
        for i in 1..=m {
            text.push_str(&format!("bot -> {} : add=0 pop=g{}\n", i, i));
            text.push_str(&format!("{} -> bot : add=1 push=g{}\n", i, i - 1));
            text.push_str(&format!("{} -> {} : add=-1 push=g{}\n", i, i, i - 1));
        }
        parse_pvas(&text).unwrap()
    }

    #[test]
    fn step_fig1_from_state3() {
        let p = fig1(2);
        let s3 = p.lookup_state("3").unwrap();
        let succs = p.step(&Config {
            state: s3,
            counters: vec![1],
            stack: vec![],
        });
        let mut got: Vec<(String, u64, usize)> = succs
            .iter()
            .map(|c| (p.state_name(c.state).to_string(), c.counters[0], c.stack.len()))
            .collect();
        got.sort();
        assert_eq!(got, vec![("5".to_string(), 0, 0), ("7".to_string(), 1, 0)]);
    }

    #[test]
    fn step_pop_on_empty_stack_blocked() {
        let p = parse_pvas("pvas\ndim 1\ninit p 0 -\np -> q : add=0 pop=A\n").unwrap();
        assert!(p.step(&p.initial_config()).is_empty());
    }

    #[test]
    fn step_push_appends_on_right() {
        let p = fig1(2);
        let s5 = p.lookup_state("5").unwrap();
        let succs = p.step(&Config {
            state: s5,
            counters: vec![0],
            stack: vec![],
        });
        assert_eq!(succs.len(), 1);
        assert_eq!(p.state_name(succs[0].state), "2");
        assert_eq!(succs[0].stack.len(), 1);
    }

    #[test]
    fn bfs_fig1_stabilizes_within_budgets() {
        let p = fig1(2);
        let r = p.bfs_reach(64, 16, 100_000);
        assert!(!r.truncated.any());
        let max = r.configs.iter().map(|c| c.counters[0]).max().unwrap();
        // from x = n the deepest branch peaks at 2n + 2
        assert_eq!(max, 6);
    }

    #[test]
    fn bfs_ackermann_m1_max_counter() {
        let p = ack_pvas(1, 1);
        let r = p.bfs_reach(64, 16, 100_000);
        assert!(!r.truncated.any());
        let bot = p.lookup_state("bot").unwrap();
        let max_at_empty = r
            .configs
            .iter()
            .filter(|c| c.state == bot && c.stack.is_empty())
            .map(|c| c.counters[0])
            .max()
            .unwrap();
        assert_eq!(max_at_empty, 3); // A_1(1)
    }

    #[test]
    fn bfs_unbounded_loop_sets_counter_flag() {
        let p = parse_pvas("pvas\ndim 1\ninit p 0 -\np -> p : add=1\n").unwrap();
        let r = p.bfs_reach(10, 4, 100_000);
        assert!(r.truncated.max_counter);
    }

    #[test]
    fn reduce_single_loop_is_one_star() {
        let p = parse_pvas("pvas\ndim 1\ninit p 0 -\np -> p : add=1\n").unwrap();
        let g = p.reduce_to_gvas().unwrap();
        let norm = crate::normalize::normalize(&g).unwrap();
        let s = norm.grammar().start;
        for len in 0..5 {
            assert!(norm.member(s, &vec![1; len]));
        }
        assert!(!norm.member(s, &[-1]));
        assert!(!norm.member(s, &[1, -1]));
    }

    #[test]
    fn reduce_pop_only_is_epsilon() {
        let p = parse_pvas("pvas\ndim 1\ninit p 0 -\np -> q : add=1 pop=A\n").unwrap();
        let g = p.reduce_to_gvas().unwrap();
        let norm = crate::normalize::normalize(&g).unwrap();
        let s = norm.grammar().start;
        assert!(norm.member(s, &[]));
        assert!(!norm.member(s, &[1]));
        assert!(!norm.member(s, &[0]));
    }

    #[test]
    fn reduce_fig1_oracle_agrees_with_simulator() {
        let p = fig1(2);
        let sim = p.bfs_reach(64, 16, 100_000);
        assert!(!sim.truncated.any());
        let sim_values: BTreeSet<u64> = sim.configs.iter().map(|c| c.counters[0]).collect();
        let g = p.reduce_to_gvas().unwrap();
        match crate::oracle::reachability_set(&g, 64).unwrap() {
            crate::oracle::OracleResult::Closed(values) => assert_eq!(values, sim_values),
            other => panic!("expected closed, got {:?}", other),
        }
    }

    #[test]
    fn reduce_ackermann_m1_closes_at_three() {
        let p = ack_pvas(1, 1);
        let g = p.reduce_to_gvas().unwrap();
        match crate::oracle::reachability_set(&g, 16).unwrap() {
            crate::oracle::OracleResult::Closed(values) => {
                assert_eq!(values.iter().max(), Some(&3)); // A_1(1)
            }
            other => panic!("expected closed, got {:?}", other),
        }
    }

    #[test]
    fn reduce_requires_dimension_one() {
        let p = parse_pvas("pvas\ndim 2\ninit p 0 0 -\np -> p : add=1,0\n").unwrap();
        assert!(matches!(
            p.reduce_to_gvas(),
            Err(PvasError::NotOneDimensional(2))
        ));
    }
}
