//! Normalization of a GVAS into weak Chomsky normal form over the action
//! alphabet {-1,0,1}: binary expansion of large actions, rule reshaping,
//! unit-rule inlining, productivity pruning.
//!
//! Weak CNF keeps ε-rules: prefix-closed languages contain ε and many
//! short prefixes, and the flow conditions handle ε leaves directly.
//! The language of the start symbol is preserved exactly by the reshaping
//! steps; action expansion preserves the reachability relation.

use std::collections::{HashMap, HashSet};

use crate::grammar::{GrammarError, Gvas, NormalizedGvas, NtId, Rule, Sym};

/// Replaces every action `a` with `|a| > 1` by a fresh nonterminal whose
/// language is `sign(a)^{|a|}`, built from doubling chains
/// `@B1 -> 1`, `@Bm -> @B(m-1) @B(m-1)` (and `@C...` for the negatives).
pub fn expand_actions(gvas: &Gvas) -> Gvas {
    let mut g = gvas.grammar.clone();
    let original_rule_count = g.rules.len();
    let mut big: Vec<i64> = g
        .actions()
        .into_iter()
        .filter(|a| a.abs() > 1)
        .collect();
    big.sort_unstable();
    if big.is_empty() {
        return gvas.clone();
    }
    let bits_needed = |a: i64| 64 - (a.unsigned_abs()).leading_zeros() as usize;
    let max_bits = big.iter().map(|&a| bits_needed(a)).max().unwrap();

    let mut pos_chain: Vec<Option<Sym>> = vec![None; max_bits + 1];
    let mut neg_chain: Vec<Option<Sym>> = vec![None; max_bits + 1];
    let need_pos = big.iter().any(|&a| a > 0);
    let need_neg = big.iter().any(|&a| a < 0);
    for (chain, prefix, unit, needed) in [
        (&mut pos_chain, "@B", 1i64, need_pos),
        (&mut neg_chain, "@C", -1i64, need_neg),
    ] {
        if !needed {
            continue;
        }
        for m in 1..=max_bits {
            let id = g.intern(&format!("{}{}", prefix, m));
            chain[m] = Some(Sym::Nt(id));
            let rhs = if m == 1 {
                vec![Sym::Act(unit)]
            } else {
                let prev = chain[m - 1].unwrap();
                vec![prev, prev]
            };
            g.rules.push(Rule { lhs: id, rhs });
        }
    }

    let mut wrapper: HashMap<i64, Sym> = HashMap::new();
    for &a in &big {
        let id = g.intern(&format!("@A{}", a));
        wrapper.insert(a, Sym::Nt(id));
        let chain = if a > 0 { &pos_chain } else { &neg_chain };
        let mag = a.unsigned_abs();
        let bits = bits_needed(a);
        // most significant bit first
        let mut rhs = Vec::new();
        for m in (1..=bits).rev() {
            if (mag >> (m - 1)) & 1 == 1 {
                rhs.push(chain[m].unwrap());
            }
        }
        g.rules.push(Rule { lhs: id, rhs });
    }

    // rewrite occurrences, leaving the chain/wrapper rules themselves alone
    for r in g.rules[..original_rule_count].iter_mut() {
        for s in r.rhs.iter_mut() {
            if let Sym::Act(a) = s {
                if a.abs() > 1 {
                    *s = wrapper[a];
                }
            }
        }
    }
    Gvas {
        grammar: g,
        c_init: gvas.c_init,
    }
}

/// Reshapes a grammar with actions in {-1,0,1} into weak CNF: terminal
/// wrapping inside long rules, binarization with fresh chain symbols,
/// unit-rule inlining, then productivity pruning.
pub fn to_weak_cnf(gvas: &Gvas) -> Result<NormalizedGvas, GrammarError> {
    let mut g = gvas.grammar.clone();
    let mut fresh = 0usize;

    // wrap actions that appear in rules of length >= 2
    let mut act_wrapper: HashMap<i64, NtId> = HashMap::new();
    let mut new_rules: Vec<Rule> = Vec::new();
    let old_rules = std::mem::take(&mut g.rules);
    for r in &old_rules {
        if r.rhs.len() >= 2 {
            let mut rhs = Vec::with_capacity(r.rhs.len());
            for s in &r.rhs {
                match s {
                    Sym::Act(a) => {
                        let id = match act_wrapper.get(a) {
                            Some(&id) => id,
                            None => {
                                let id = g.intern(&format!("@t{}", a));
                                act_wrapper.insert(*a, id);
                                id
                            }
                        };
                        rhs.push(Sym::Nt(id));
                    }
                    other => rhs.push(*other),
                }
            }
            new_rules.push(Rule { lhs: r.lhs, rhs });
        } else {
            new_rules.push(r.clone());
        }
    }
    let mut wrapped: Vec<(i64, NtId)> = act_wrapper.into_iter().collect();
    wrapped.sort_unstable();
    for (a, id) in wrapped {
        new_rules.push(Rule {
            lhs: id,
            rhs: vec![Sym::Act(a)],
        });
    }

    // binarize long right-hand sides, right-associatively
    let mut bin_rules: Vec<Rule> = Vec::new();
    for r in new_rules {
        if r.rhs.len() <= 2 {
            bin_rules.push(r);
            continue;
        }
        let mut lhs = r.lhs;
        let n = r.rhs.len();
        for i in 0..n - 2 {
            let chain = g.intern(&format!("@b{}", fresh));
            fresh += 1;
            bin_rules.push(Rule {
                lhs,
                rhs: vec![r.rhs[i], Sym::Nt(chain)],
            });
            lhs = chain;
        }
        bin_rules.push(Rule {
            lhs,
            rhs: vec![r.rhs[n - 2], r.rhs[n - 1]],
        });
    }

    // unit-pair closure, then inline non-unit rules of the targets
    let v = g.nt_count();
    let is_unit = |r: &Rule| matches!(r.rhs.as_slice(), [Sym::Nt(_)]);
    let mut unit_pairs: Vec<HashSet<usize>> = (0..v).map(|i| HashSet::from([i])).collect();
    let mut changed = true;
    while changed {
        changed = false;
        for r in bin_rules.iter().filter(|r| is_unit(r)) {
            let Sym::Nt(y) = r.rhs[0] else { unreachable!() };
            for x in 0..v {
                if unit_pairs[x].contains(&r.lhs.idx()) && !unit_pairs[x].contains(&y.idx()) {
                    unit_pairs[x].insert(y.idx());
                    changed = true;
                }
            }
        }
    }
    let mut final_rules: Vec<Rule> = Vec::new();
    let mut seen: HashSet<(u32, Vec<Sym>)> = HashSet::new();
    for x in g.nt_ids() {
        let mut targets: Vec<usize> = unit_pairs[x.idx()].iter().copied().collect();
        targets.sort_unstable();
        for y in targets {
            for r in bin_rules.iter().filter(|r| r.lhs.idx() == y && !is_unit(r)) {
                if seen.insert((x.0, r.rhs.clone())) {
                    final_rules.push(Rule {
                        lhs: x,
                        rhs: r.rhs.clone(),
                    });
                }
            }
        }
    }
    g.rules = final_rules;

    let pruned = Gvas {
        grammar: g,
        c_init: gvas.c_init,
    }
    .prune_nonproductive()?;
    NormalizedGvas::new(pruned)
}

/// Full normalization: action expansion, weak CNF, productivity pruning.
pub fn normalize(gvas: &Gvas) -> Result<NormalizedGvas, GrammarError> {
    to_weak_cnf(&expand_actions(gvas))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::sum_of;
    use crate::textfmt::parse_gvas;

    #[test]
    fn expand_plus_five_uses_binary_decomposition() {
        let g = parse_gvas("gvas\ncounter_init 0\nstart S\nS -> 5\n").unwrap();
        let e = expand_actions(&g);
        let gr = &e.grammar;
        let a5 = gr.lookup("@A5").expect("wrapper for 5");
        let (_, r) = gr.rules_of(a5).next().unwrap();
        // 5 = 101 in binary: B3 B1
        assert_eq!(
            r.rhs,
            vec![
                Sym::Nt(gr.lookup("@B3").unwrap()),
                Sym::Nt(gr.lookup("@B1").unwrap())
            ]
        );
        let b1 = gr.lookup("@B1").unwrap();
        let (_, rb1) = gr.rules_of(b1).next().unwrap();
        assert_eq!(rb1.rhs, vec![Sym::Act(1)]);
        // language of @A5 is exactly 1^5
        let norm = normalize(&g).unwrap();
        for len in 0..8 {
            let in_lang = norm.member(norm.grammar().start, &vec![1; len]);
            assert_eq!(in_lang, len == 5, "length {}", len);
        }
    }

    #[test]
    fn expand_leaves_small_actions_alone() {
        let g = parse_gvas("gvas\ncounter_init 0\nstart S\nS -> -1\n").unwrap();
        let e = expand_actions(&g);
        assert_eq!(e.grammar.rules.len(), 1);
        assert_eq!(e.grammar.nt_count(), 1);
    }

    #[test]
    fn expand_preserves_reachability() {
        let g = parse_gvas("gvas\ncounter_init 0\nstart S\nS -> 5\n").unwrap();
        let before = crate::oracle::reachability_set(&g, 40).unwrap();
        let after = crate::oracle::reachability_set(&expand_actions(&g), 40).unwrap();
        let (crate::oracle::OracleResult::Closed(a), crate::oracle::OracleResult::Closed(b)) =
            (before, after)
        else {
            panic!("both runs should close at budget 40");
        };
        assert_eq!(a, b);
        assert_eq!(a.into_iter().collect::<Vec<_>>(), vec![5]);
    }

    #[test]
    fn weak_cnf_binarizes_simple_loop() {
        let g = parse_gvas("gvas\ncounter_init 0\nstart S\nS -> 1 S\nS ->\n").unwrap();
        let n = to_weak_cnf(&g).unwrap();
        n.grammar().check_normalized_shapes().unwrap();
        // S -> @t1 S | ε, @t1 -> 1
        assert_eq!(n.grammar().nt_count(), 2);
        assert_eq!(n.grammar().rules.len(), 3);
    }

    #[test]
    fn weak_cnf_ackermann_shapes() {
        let g = parse_gvas(
            "gvas\ncounter_init 0\nstart X1\nX0 -> 1\nX1 -> -1 X1 X0\nX1 -> 1 X0\n",
        )
        .unwrap();
        let n = normalize(&g).unwrap();
        n.grammar().check_normalized_shapes().unwrap();
        // original nonterminals survive with their names
        assert!(n.grammar().lookup("X0").is_some());
        assert!(n.grammar().lookup("X1").is_some());
        // words of X1 still reach as before: 1 1 ∈ L(X1)
        let x1 = n.grammar().lookup("X1").unwrap();
        assert!(n.member(x1, &[1, 1]));
        assert!(n.member(x1, &[-1, 1, 1, 1]));
        assert!(!n.member(x1, &[1]));
    }

    #[test]
    fn weak_cnf_preserves_short_words() {
        let g = parse_gvas(
            "gvas\ncounter_init 0\nstart S\nS -> 1 S -1\nS -> 0\nS ->\n",
        )
        .unwrap();
        let n = normalize(&g).unwrap();
        let s = n.grammar().start;
        // enumerate all words up to length 5 in the original by hand:
        // S derives 1^k (0|ε) (-1)^k; lengths <= 5
        for w in crate::testsupport::words_up_to(&[-1, 0, 1], 5) {
            let expect = is_in_orig(&w);
            assert_eq!(n.member(s, &w), expect, "word {:?}", w);
        }
        fn is_in_orig(w: &[i64]) -> bool {
            // 1^k m (-1)^k with m ∈ {0, ε}
            for k in 0..=w.len() / 2 {
                for mid in [vec![], vec![0]] {
                    let mut cand: Vec<i64> = vec![1; k];
                    cand.extend(&mid);
                    cand.extend(vec![-1; k]);
                    if cand == w {
                        return true;
                    }
                }
            }
            false
        }
        let _ = sum_of(&[]);
    }

    #[test]
    fn normalize_identity_on_already_normalized() {
        let text = "gvas\ncounter_init 0\nstart S\nS -> U S\nS ->\nU -> 1\n";
        let g = parse_gvas(text).unwrap();
        let n = normalize(&g).unwrap();
        assert_eq!(n.grammar().nt_count(), 2);
        assert_eq!(n.grammar().rules.len(), 3);
        let again = normalize(n.gvas()).unwrap();
        assert_eq!(again.grammar().nt_count(), 2);
        assert_eq!(again.grammar().rules.len(), 3);
    }

    #[test]
    fn normalize_empty_language_errors() {
        let g = parse_gvas("gvas\ncounter_init 0\nstart S\nS -> S S\n").unwrap();
        assert!(matches!(
            normalize(&g),
            Err(GrammarError::EmptyLanguage(_))
        ));
    }
}
