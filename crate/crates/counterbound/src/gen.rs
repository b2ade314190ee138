//! Seeded random instance generators. All randomness derives from the
//! seed; the same seed always yields the same instance.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::grammar::{Grammar, Gvas, NormalizedGvas, Rule, Sym};
use crate::pvas::{Pvas, StackOp, Transition};

#[derive(Clone, Debug)]
pub struct GvasGenParams {
    pub max_nts: usize,
    pub max_rules: usize,
    pub max_action: i64,
    pub max_c_init: u64,
}

impl Default for GvasGenParams {
    fn default() -> Self {
        GvasGenParams {
            max_nts: 3,
            max_rules: 6,
            max_action: 2,
            max_c_init: 3,
        }
    }
}

fn nt_name(i: usize) -> String {
    format!("N{}", i)
}

/// Random GVAS with a productive start symbol. Non-productive attempts
/// are regenerated from derived seeds.
pub fn gen_gvas(seed: u64, p: &GvasGenParams) -> Gvas {
    for attempt in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(attempt));
        let nts = rng.gen_range(1..=p.max_nts);
        let mut g = Grammar::new();
        for i in 0..nts {
            g.intern(&nt_name(i));
        }
        let n_rules = rng.gen_range(1..=p.max_rules);
        for _ in 0..n_rules {
            let lhs = crate::grammar::NtId(rng.gen_range(0..nts) as u32);
            let len = rng.gen_range(0..=3);
            let rhs = (0..len)
                .map(|_| {
                    if rng.gen_bool(0.5) {
                        Sym::Nt(crate::grammar::NtId(rng.gen_range(0..nts) as u32))
                    } else {
                        Sym::Act(rng.gen_range(-p.max_action..=p.max_action))
                    }
                })
                .collect();
            g.rules.push(Rule { lhs, rhs });
        }
        let gvas = Gvas {
            grammar: g,
            c_init: rng.gen_range(0..=p.max_c_init),
        };
        if gvas
            .grammar
            .productive_set()
            .contains(&gvas.grammar.start)
        {
            return gvas;
        }
    }
    unreachable!("productive grammar not found in 1000 attempts");
}

/// Random normalized GVAS: rules drawn in normalized shapes, then pruned
/// to the productive core.
pub fn gen_normalized_gvas(seed: u64, p: &GvasGenParams) -> NormalizedGvas {
    for attempt in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x51_7cc1).wrapping_add(attempt));
        let nts = rng.gen_range(1..=p.max_nts);
        let mut g = Grammar::new();
        for i in 0..nts {
            g.intern(&nt_name(i));
        }
        let n_rules = rng.gen_range(1..=p.max_rules);
        for _ in 0..n_rules {
            let lhs = crate::grammar::NtId(rng.gen_range(0..nts) as u32);
            let rhs = match rng.gen_range(0..10) {
                0..=3 => vec![
                    Sym::Nt(crate::grammar::NtId(rng.gen_range(0..nts) as u32)),
                    Sym::Nt(crate::grammar::NtId(rng.gen_range(0..nts) as u32)),
                ],
                4..=7 => vec![Sym::Act(rng.gen_range(-1..=1))],
                _ => vec![],
            };
            g.rules.push(Rule { lhs, rhs });
        }
        let gvas = Gvas {
            grammar: g,
            c_init: rng.gen_range(0..=p.max_c_init),
        };
        if let Ok(pruned) = gvas.prune_nonproductive() {
            if let Ok(norm) = NormalizedGvas::new(pruned) {
                return norm;
            }
        }
    }
    unreachable!("normalized grammar not found in 1000 attempts");
}

#[derive(Clone, Debug)]
pub struct PvasGenParams {
    pub dim: usize,
    pub max_states: usize,
    pub max_stack_syms: usize,
    pub max_transitions: usize,
    pub max_delta: i64,
    pub max_c_init: u64,
    pub max_w_init: usize,
}

impl Default for PvasGenParams {
    fn default() -> Self {
        PvasGenParams {
            dim: 1,
            max_states: 3,
            max_stack_syms: 2,
            max_transitions: 6,
            max_delta: 1,
            max_c_init: 2,
            max_w_init: 1,
        }
    }
}

pub fn gen_pvas(seed: u64, p: &PvasGenParams) -> Pvas {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0xb5ad_4ece).wrapping_add(7));
    let mut pvas = Pvas::new(p.dim);
    let states = rng.gen_range(1..=p.max_states);
    for i in 0..states {
        pvas.intern_state(&format!("q{}", i));
    }
    let syms = rng.gen_range(0..=p.max_stack_syms);
    for i in 0..syms {
        pvas.intern_stack_sym(&format!("G{}", i));
    }
    let n_trans = rng.gen_range(1..=p.max_transitions);
    for _ in 0..n_trans {
        let src = crate::pvas::StateId(rng.gen_range(0..states) as u32);
        let dst = crate::pvas::StateId(rng.gen_range(0..states) as u32);
        let delta = (0..p.dim)
            .map(|_| rng.gen_range(-p.max_delta..=p.max_delta))
            .collect();
        let op = if syms == 0 {
            StackOp::Nop
        } else {
            match rng.gen_range(0..4) {
                0 => StackOp::Push(crate::pvas::StackSym(rng.gen_range(0..syms) as u32)),
                1 => StackOp::Pop(crate::pvas::StackSym(rng.gen_range(0..syms) as u32)),
                _ => StackOp::Nop,
            }
        };
        pvas.transitions.push(Transition {
            src,
            delta,
            op,
            dst,
        });
    }
    pvas.q_init = crate::pvas::StateId(0);
    pvas.c_init = (0..p.dim).map(|_| rng.gen_range(0..=p.max_c_init)).collect();
    let w_len = if syms == 0 {
        0
    } else {
        rng.gen_range(0..=p.max_w_init)
    };
    pvas.w_init = (0..w_len)
        .map(|_| crate::pvas::StackSym(rng.gen_range(0..syms) as u32))
        .collect();
    pvas
}
