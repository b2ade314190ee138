//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line and checking its wall-clock budget.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use counterbound::certsearch::{
    brute_force_certificate, decide, find_certificate, BoundedProof, Cap, DecideOptions, Verdict,
};
use counterbound::displacement::{
    derive_witness, displacement_table, find_positive_pump, ExtValue,
};
use counterbound::flowtree::{flow_from_json, is_good, rank_of, validate_flow_tree, Rank};
use counterbound::gen::{gen_gvas, gen_normalized_gvas, gen_pvas, GvasGenParams, PvasGenParams};
use counterbound::grammar::{sum_of, yield_of, NormalizedGvas};
use counterbound::normalize::normalize;
use counterbound::oracle::{max_reachable, reachability_set, MaxReachable, OracleResult};
use counterbound::testsupport;
use counterbound::textfmt::{parse_gvas, parse_pvas};

fn fixture(name: &str) -> String {
    let path = format!("{}/fixtures/{}", env!("CARGO_MANIFEST_DIR"), name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {}", path, e))
}

fn norm_fixture(name: &str) -> NormalizedGvas {
    normalize(&parse_gvas(&fixture(name)).unwrap()).unwrap()
}

struct Criterion {
    name: &'static str,
    budget: Duration,
    start: Instant,
}

impl Criterion {
    fn new(name: &'static str, budget: Duration) -> Criterion {
        Criterion {
            name,
            budget,
            start: Instant::now(),
        }
    }

    fn pass(self) {
        let elapsed = self.start.elapsed();
        println!(
            "{}: PASS ({:.2?} of {:.2?} budget)",
            self.name, elapsed, self.budget
        );
        assert!(
            elapsed <= self.budget,
            "{} exceeded its time budget: {:.2?} > {:.2?}",
            self.name,
            elapsed,
            self.budget
        );
    }
}

#[test]
fn criterion_01_fig2_left_fixture() {
    let c = Criterion::new("criterion 1 (fig2-left fixture)", Duration::from_secs(1));
    let g = parse_gvas(&fixture("ackermann_m1.gvas")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&fixture("fig2_left.json")).unwrap();
    let ft = flow_from_json(&g.grammar, &v).unwrap();
    assert_eq!(validate_flow_tree(&g, &ft), vec![]);
    assert_eq!(is_good(&ft), None);
    assert_eq!(
        rank_of(&ft),
        Rank {
            finite_count: 12,
            value_sum: 53
        }
    );
    c.pass();
}

#[test]
fn criterion_02_g1_unbounded_with_small_certificate() {
    let c = Criterion::new("criterion 2 (G1 unbounded)", Duration::from_secs(1));
    let g = parse_gvas(&fixture("g1.gvas")).unwrap();
    let out = decide(&g, &DecideOptions::default()).unwrap();
    let norm = out.normalized.as_ref().unwrap();
    match &out.verdict {
        Verdict::Unbounded(cert) => {
            assert_eq!(
                counterbound::validate_certificate(norm.gvas(), cert),
                vec![]
            );
        }
        other => panic!("expected unbounded, got {:?}", other),
    }
    // and the certificate is already found at cap 16
    let cert = find_certificate(norm, Cap::new(16, norm.c_init()), true)
        .unwrap()
        .expect("certificate at cap 16");
    assert!(cert.tree.max_value().unwrap_or(0) <= 16);
    c.pass();
}

#[test]
fn criterion_03_decreasing_bounded_exact_set() {
    let c = Criterion::new("criterion 3 (decreasing bounded)", Duration::from_secs(1));
    let g = parse_gvas(&fixture("decreasing.gvas")).unwrap();
    let out = decide(&g, &DecideOptions::default()).unwrap();
    match &out.verdict {
        Verdict::Bounded(BoundedProof::OracleClosure(set)) => {
            assert_eq!(*set, (0..=5).collect::<BTreeSet<u64>>());
        }
        other => panic!("expected bounded via oracle closure, got {:?}", other),
    }
    let norm = out.normalized.as_ref().unwrap();
    assert!(find_certificate(norm, Cap::new(64, norm.c_init()), true)
        .unwrap()
        .is_none());
    c.pass();
}

#[test]
fn criterion_04_ackermann_oracle_values() {
    let c = Criterion::new("criterion 4 (Ackermann oracle)", Duration::from_secs(10));
    let g = norm_fixture("ackermann_m2.gvas");
    let x1 = g.grammar().lookup("X1").unwrap();
    let x2 = g.grammar().lookup("X2").unwrap();
    // independent check: the recursion itself
    assert_eq!(testsupport::ackermann(1, 5), 7);
    assert_eq!(testsupport::ackermann(2, 2), 7);
    assert_eq!(testsupport::ackermann(2, 3), 9);
    assert_eq!(max_reachable(&g, x1, 5, 64), MaxReachable::Max(7));
    assert_eq!(max_reachable(&g, x2, 2, 64), MaxReachable::Max(7));
    assert_eq!(max_reachable(&g, x2, 3, 64), MaxReachable::Max(9));
    c.pass();
}

#[test]
fn criterion_05_ackermann_displacements_and_pump() {
    let c = Criterion::new("criterion 5 (displacement table)", Duration::from_secs(5));
    let g = norm_fixture("ackermann_m2.gvas");
    let table = displacement_table(&g);
    let gr = g.grammar();
    let x0 = gr.lookup("X0").unwrap();
    let x1 = gr.lookup("X1").unwrap();
    let x2 = gr.lookup("X2").unwrap();
    assert_eq!(table.get(x0), ExtValue::Fin(1));
    assert_eq!(table.get(x1), ExtValue::Fin(2));
    assert_eq!(table.get(x2), ExtValue::PosInf);
    // brute-force confirmation of the finite entries
    let h = gr.nt_count() + 1;
    assert_eq!(testsupport::max_sum_by_height(&g, x0, h), Some(1));
    assert_eq!(testsupport::max_sum_by_height(&g, x1, h), Some(2));
    // pump witness for X2
    let w = find_positive_pump(&g).expect("pump witness");
    let (u, v) = w.pump_tree.yield_around_hole();
    assert_eq!(sum_of(&u) + sum_of(&v), 1);
    let bound = 4usize.pow(gr.nt_count() as u32 + 1);
    assert!(w.pump_tree.node_count() <= bound);
    assert!(w.context_tree.node_count() <= bound);
    assert!(g.derivable_set().contains(&w.anchor));
    c.pass();
}

#[test]
fn criterion_06_derive_witness_suite() {
    let c = Criterion::new("criterion 6 (derive_witness suite)", Duration::from_secs(60));
    let params = GvasGenParams {
        max_nts: 4,
        max_rules: 8,
        ..GvasGenParams::default()
    };
    for seed in 0..100u64 {
        let g = gen_normalized_gvas(seed, &params);
        let gr = g.grammar();
        let k = 1 + (seed as usize % 3);
        let starts: Vec<_> = (0..k)
            .map(|i| {
                counterbound::NtId(((seed as usize + i * 7) % gr.nt_count()) as u32)
            })
            .collect();
        let trees = derive_witness(&g, &starts);
        assert_eq!(trees.len(), k);
        let table = displacement_table(&g);
        let mut dsum = ExtValue::Fin(0);
        for &s in &starts {
            dsum = match (dsum, table.get(s)) {
                (ExtValue::Fin(a), ExtValue::Fin(b)) => ExtValue::Fin(a + b),
                _ => ExtValue::PosInf,
            };
        }
        let total: i64 = trees
            .iter()
            .map(|t| {
                assert!(t.is_complete(), "seed {}", seed);
                sum_of(&yield_of(t).unwrap())
            })
            .sum();
        match dsum {
            ExtValue::PosInf => assert!(total > 0, "seed {}: sum {} not positive", seed, total),
            ExtValue::Fin(d) if d > 0 => {
                assert!(total > 0, "seed {}: sum {} not positive", seed, total)
            }
            ExtValue::Fin(0) => assert_eq!(total, 0, "seed {}", seed),
            _ => {}
        }
        let bound = 3 * k * 4usize.pow(gr.nt_count() as u32 + 1);
        let size: usize = trees.iter().map(|t| t.node_count()).sum();
        assert!(
            size <= bound,
            "seed {}: total size {} exceeds bound {}",
            seed,
            size,
            bound
        );
    }
    c.pass();
}

#[test]
fn criterion_07_search_brute_force_agreement() {
    let c = Criterion::new(
        "criterion 7 (search vs brute force)",
        Duration::from_secs(300),
    );
    let params = GvasGenParams {
        max_nts: 3,
        max_rules: 6,
        ..GvasGenParams::default()
    };
    let mut brute_found = 0;
    for seed in 0..200u64 {
        let g = gen_normalized_gvas(seed, &params);
        if g.c_init() > 6 {
            continue;
        }
        let brute = brute_force_certificate(&g, 6, 6).unwrap();
        let cap = Cap::new(6, g.c_init());
        let found_on = find_certificate(&g, cap, true).unwrap();
        let found_off = find_certificate(&g, cap, false).unwrap();
        assert_eq!(
            found_on.is_some(),
            found_off.is_some(),
            "seed {}: pruning changed presence",
            seed
        );
        if let Some(cert) = &brute {
            brute_found += 1;
            assert_eq!(
                counterbound::validate_certificate(g.gvas(), cert),
                vec![],
                "seed {}",
                seed
            );
            assert!(
                found_on.is_some(),
                "seed {}: brute force found a certificate but the search did not",
                seed
            );
        }
        if let Some(cert) = &found_on {
            assert_eq!(
                counterbound::validate_certificate(g.gvas(), cert),
                vec![],
                "seed {}",
                seed
            );
            assert!(cert.tree.max_value().unwrap_or(0) <= cap.value());
        }
    }
    assert!(
        brute_found >= 20,
        "corpus too skewed: only {} brute-force hits",
        brute_found
    );
    c.pass();
}

#[test]
fn criterion_08_reduction_consistency() {
    let c = Criterion::new(
        "criterion 8 (reduction consistency)",
        Duration::from_secs(300),
    );
    let params = PvasGenParams::default();
    let mut compared = 0;
    for seed in 0..100u64 {
        let p = gen_pvas(seed, &params);
        let g = p.reduce_to_gvas().unwrap();
        let norm = normalize(&g).expect("reduced languages contain ε");
        // prefix-closedness, sampled on every reduced grammar
        let bad = counterbound::certsearch::prefix_closure_counterexamples(&norm, 5);
        assert!(bad.is_empty(), "seed {}: prefixes fall out: {:?}", seed, bad);
        // counter-value agreement when neither side truncates
        let sim = p.bfs_reach(30, 12, 200_000);
        let oracle = reachability_set(&g, 30).unwrap();
        if sim.truncated.any() {
            continue;
        }
        let OracleResult::Closed(values) = oracle else {
            continue;
        };
        let sim_values: BTreeSet<u64> = sim.configs.iter().map(|c| c.counters[0]).collect();
        assert_eq!(sim_values, values, "seed {}", seed);
        compared += 1;
    }
    assert!(compared >= 20, "only {} instances comparable", compared);
    c.pass();
}

#[test]
fn criterion_09_normalization_preserves_reachability() {
    let c = Criterion::new(
        "criterion 9 (normalization preservation)",
        Duration::from_secs(120),
    );
    let params = GvasGenParams {
        max_nts: 3,
        max_rules: 6,
        max_action: 4,
        max_c_init: 3,
    };
    let mut compared = 0;
    for seed in 0..50u64 {
        let g = gen_gvas(seed, &params);
        let before = reachability_set(&g, 40).unwrap();
        let norm = normalize(&g).unwrap();
        let after = reachability_set(norm.gvas(), 40).unwrap();
        if let (OracleResult::Closed(a), OracleResult::Closed(b)) = (&before, &after) {
            assert_eq!(a, b, "seed {}", seed);
            compared += 1;
        }
    }
    assert!(compared >= 10, "only {} instances closed", compared);
    c.pass();
}

#[test]
fn criterion_10_verdict_consistency() {
    let c = Criterion::new(
        "criterion 10 (verdict consistency)",
        Duration::from_secs(300),
    );
    let opts = DecideOptions {
        max_cap: 64,
        max_oracle: 256,
        ..DecideOptions::default()
    };
    let mut corpus: Vec<counterbound::Gvas> = vec![
        parse_gvas(&fixture("g1.gvas")).unwrap(),
        parse_gvas(&fixture("decreasing.gvas")).unwrap(),
        parse_pvas(&fixture("fig1.pvas")).unwrap().reduce_to_gvas().unwrap(),
        parse_pvas(&fixture("ack_pvas_m0.pvas")).unwrap().reduce_to_gvas().unwrap(),
        parse_pvas(&fixture("ack_pvas_m1.pvas")).unwrap().reduce_to_gvas().unwrap(),
    ];
    for seed in 0..100u64 {
        corpus.push(
            gen_pvas(seed, &PvasGenParams::default())
                .reduce_to_gvas()
                .unwrap(),
        );
    }
    let mut unbounded = 0;
    for (i, g) in corpus.iter().enumerate() {
        let out = decide(g, &opts).unwrap();
        if let Verdict::Unbounded(_) = &out.verdict {
            unbounded += 1;
            // the oracle must never close on an unbounded instance, and
            // its horizon must grow strictly with the budget
            let mut last_max: Option<u64> = None;
            for budget in [10u64, 20, 40] {
                match reachability_set(g, budget).unwrap() {
                    OracleResult::Closed(_) => {
                        panic!("instance {}: unbounded verdict but oracle closed", i)
                    }
                    OracleResult::Capped { values, .. } => {
                        let m = values.iter().last().copied();
                        assert!(
                            m > last_max,
                            "instance {}: oracle max {:?} did not grow past {:?}",
                            i,
                            m,
                            last_max
                        );
                        last_max = m;
                    }
                }
            }
        }
    }
    assert!(unbounded >= 5, "corpus too skewed: {} unbounded", unbounded);
    c.pass();
}

#[test]
fn criterion_11_theoretical_cap_and_docs() {
    let c = Criterion::new("criterion 11 (theoretical cap)", Duration::from_secs(1));
    // |V| = 2, c_init = 0
    let g = normalize(&parse_gvas("gvas\ncounter_init 0\nstart S\nS -> U S\nS ->\nU -> 1\n").unwrap())
        .unwrap();
    assert_eq!(g.grammar().nt_count(), 2);
    assert_eq!(counterbound::theoretical_cap(&g).unwrap(), 16_777_216);
    // the README records that full-cap runs are out of practical reach
    let readme = std::fs::read_to_string(format!(
        "{}/../../README.md",
        env!("CARGO_MANIFEST_DIR")
    ))
    .expect("workspace README");
    assert!(readme.contains("infeasible"));
    assert!(readme.to_lowercase().contains("oracle closure"));
    c.pass();
}
