//! Command-line front end: normalize, displacement, pump, witness,
//! reduce, simulate, oracle, decide, verify, rank, gen.
//!
//! Exit codes: 0 definitive verdicts and valid checks, 1 violations or
//! absent witnesses, 2 inconclusive outcomes, 3 input errors.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use counterbound::certsearch::{self, BoundedProof, DecideOptions, Verdict};
use counterbound::displacement;
use counterbound::flowtree::{self, parse_path};
use counterbound::gen::{GvasGenParams, PvasGenParams};
use counterbound::grammar::{Gvas, NormalizedGvas};
use counterbound::normalize::normalize;
use counterbound::oracle;
use counterbound::textfmt;

#[derive(Parser)]
#[command(
    name = "counterbound",
    about = "Counter-boundedness for one-dimensional pushdown VAS via grammar-controlled VAS certificates"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Normalize a GVAS to weak CNF over actions {-1,0,1}
    Normalize { input: PathBuf },
    /// Print the displacement table of the normalized grammar
    Displacement {
        input: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Find a positive pump witnessing infinite displacement
    Pump {
        input: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Build sign-constrained complete parse trees for given start symbols
    Witness {
        input: PathBuf,
        /// Comma-separated nonterminal names
        #[arg(long, value_delimiter = ',', required = true)]
        starts: Vec<String>,
        #[arg(long)]
        json: bool,
    },
    /// Reduce a 1-dimensional PVAS to a prefix-closed GVAS
    Reduce { input: PathBuf },
    /// Breadth-first exact simulation of a PVAS under budgets
    Simulate {
        input: PathBuf,
        #[arg(long, default_value_t = 64)]
        max_counter: u64,
        #[arg(long, default_value_t = 16)]
        max_stack: usize,
        #[arg(long, default_value_t = 100_000)]
        max_configs: usize,
        #[arg(long)]
        json: bool,
    },
    /// Exact GVAS reachability under a value budget
    Oracle {
        input: PathBuf,
        #[arg(long, default_value_t = 64)]
        max: u64,
        /// Query a specific nonterminal of the normalized grammar
        #[arg(long)]
        start: Option<String>,
        /// Input counter value for --start (defaults to counter_init)
        #[arg(long)]
        input_value: Option<u64>,
        #[arg(long)]
        json: bool,
    },
    /// Decide counter-boundedness of a prefix-closed GVAS
    Decide {
        input: PathBuf,
        #[arg(long)]
        cap: Option<u64>,
        #[arg(long)]
        oracle_max: Option<u64>,
        /// Escalate to the theoretical completeness cap
        #[arg(long)]
        complete: bool,
        #[arg(long)]
        no_pruning: bool,
        /// Sample prefix-closedness up to this word length (warning only)
        #[arg(long)]
        check_prefix_closed: Option<usize>,
        #[arg(long)]
        json: bool,
    },
    /// Validate a flow tree or certificate against a grammar
    Verify {
        #[arg(long)]
        grammar: PathBuf,
        #[arg(long, conflicts_with = "certificate")]
        flow_tree: Option<PathBuf>,
        #[arg(long)]
        certificate: Option<PathBuf>,
        /// Marked node s as a dotted path (overrides the JSON)
        #[arg(long)]
        s: Option<String>,
        /// Marked node t as a dotted path (overrides the JSON)
        #[arg(long)]
        t: Option<String>,
        /// Write a Graphviz rendering here
        #[arg(long)]
        dot: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Print the rank of a flow tree
    Rank {
        #[arg(long)]
        grammar: PathBuf,
        #[arg(long)]
        flow_tree: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Generate a seeded random instance
    Gen {
        /// "gvas" or "pvas"
        kind: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        nts: usize,
        #[arg(long, default_value_t = 6)]
        rules: usize,
        #[arg(long, default_value_t = 2)]
        max_action: i64,
        #[arg(long, default_value_t = 3)]
        states: usize,
        #[arg(long, default_value_t = 2)]
        stack_syms: usize,
        #[arg(long, default_value_t = 6)]
        transitions: usize,
        /// Emit a normalized grammar
        #[arg(long)]
        normalized: bool,
    },
}

struct CliError(String);

impl<E: std::fmt::Display> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError(e.to_string())
    }
}

fn read_gvas(path: &PathBuf) -> Result<Gvas, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError(format!("{}: {}", path.display(), e)))?;
    textfmt::parse_gvas(&text).map_err(|e| CliError(format!("{}: {}", path.display(), e)))
}

fn read_norm(path: &PathBuf) -> Result<NormalizedGvas, CliError> {
    let g = read_gvas(path)?;
    Ok(normalize(&g)?)
}

fn read_json(path: &PathBuf) -> Result<serde_json::Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError(format!("{}: {}", path.display(), e)))?;
    serde_json::from_str(&text).map_err(|e| CliError(format!("{}: {}", path.display(), e)))
}

fn values_json(set: &BTreeSet<u64>) -> serde_json::Value {
    json!(set.iter().collect::<Vec<_>>())
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.cmd {
        Cmd::Normalize { input } => {
            let norm = read_norm(&input)?;
            print!("{}", textfmt::print_gvas(norm.gvas()));
            Ok(0)
        }
        Cmd::Displacement { input, json } => {
            let norm = read_norm(&input)?;
            let table = displacement::displacement_table(&norm);
            if json {
                let mut map = serde_json::Map::new();
                for (x, v) in table.iter() {
                    map.insert(
                        norm.grammar().name(x).to_string(),
                        match v {
                            displacement::ExtValue::Fin(n) => json!(n),
                            other => json!(other.to_string()),
                        },
                    );
                }
                println!("{}", serde_json::Value::Object(map));
            } else {
                for (x, v) in table.iter() {
                    println!("{}: {}", norm.grammar().name(x), v);
                }
            }
            Ok(0)
        }
        Cmd::Pump { input, json } => {
            let norm = read_norm(&input)?;
            match displacement::find_positive_pump(&norm) {
                None => {
                    if json {
                        println!("{}", json!({ "pump": null }));
                    } else {
                        println!("no positive pump: displacement of the start symbol is finite");
                    }
                    Ok(1)
                }
                Some(w) => {
                    let (u, v) = w.pump_tree.yield_around_hole();
                    let total =
                        counterbound::sum_of(&u) + counterbound::sum_of(&v);
                    if json {
                        println!(
                            "{}",
                            json!({
                                "anchor": norm.grammar().name(w.anchor),
                                "pump_sum": total,
                                "pump_tree": flowtree::parse_tree_to_json(norm.grammar(), &w.pump_tree),
                                "context_tree": flowtree::parse_tree_to_json(norm.grammar(), &w.context_tree),
                            })
                        );
                    } else {
                        println!(
                            "pump at {} with yield sum {} ({:?} around the hole {:?})",
                            norm.grammar().name(w.anchor),
                            total,
                            u,
                            v
                        );
                    }
                    Ok(0)
                }
            }
        }
        Cmd::Witness {
            input,
            starts,
            json,
        } => {
            let norm = read_norm(&input)?;
            let mut ids = Vec::new();
            for name in &starts {
                ids.push(
                    norm.grammar()
                        .lookup(name)
                        .ok_or_else(|| CliError(format!("unknown nonterminal '{}'", name)))?,
                );
            }
            let trees = displacement::derive_witness(&norm, &ids);
            let total: i64 = trees
                .iter()
                .map(|t| counterbound::sum_of(&counterbound::yield_of(t).unwrap()))
                .sum();
            let nodes: usize = trees.iter().map(|t| t.node_count()).sum();
            if json {
                println!(
                    "{}",
                    json!({
                        "total_sum": total,
                        "total_nodes": nodes,
                        "trees": trees
                            .iter()
                            .map(|t| flowtree::parse_tree_to_json(norm.grammar(), t))
                            .collect::<Vec<_>>(),
                    })
                );
            } else {
                println!("{} trees, total yield sum {}, total nodes {}", trees.len(), total, nodes);
            }
            Ok(0)
        }
        Cmd::Reduce { input } => {
            let text = std::fs::read_to_string(&input)
                .map_err(|e| CliError(format!("{}: {}", input.display(), e)))?;
            let p = textfmt::parse_pvas(&text)
                .map_err(|e| CliError(format!("{}: {}", input.display(), e)))?;
            let g = p.reduce_to_gvas()?;
            print!("{}", textfmt::print_gvas(&g));
            Ok(0)
        }
        Cmd::Simulate {
            input,
            max_counter,
            max_stack,
            max_configs,
            json,
        } => {
            let text = std::fs::read_to_string(&input)
                .map_err(|e| CliError(format!("{}: {}", input.display(), e)))?;
            let p = textfmt::parse_pvas(&text)
                .map_err(|e| CliError(format!("{}: {}", input.display(), e)))?;
            let r = p.bfs_reach(max_counter, max_stack, max_configs);
            let max_counters: Vec<u64> = (0..p.dim)
                .map(|i| {
                    r.configs
                        .iter()
                        .map(|c| c.counters[i])
                        .max()
                        .unwrap_or(0)
                })
                .collect();
            if json {
                println!(
                    "{}",
                    json!({
                        "configs": r.configs.len(),
                        "max_counters": max_counters,
                        "truncated": {
                            "max_counter": r.truncated.max_counter,
                            "max_stack": r.truncated.max_stack,
                            "max_configs": r.truncated.max_configs,
                        },
                    })
                );
            } else {
                println!(
                    "{} configurations, max counters {:?}, truncated: {}",
                    r.configs.len(),
                    max_counters,
                    if r.truncated.any() {
                        "yes"
                    } else {
                        "no"
                    }
                );
            }
            Ok(if r.truncated.any() { 2 } else { 0 })
        }
        Cmd::Oracle {
            input,
            max,
            start,
            input_value,
            json,
        } => {
            let norm = read_norm(&input)?;
            let (x, c) = match (&start, input_value) {
                (Some(name), c) => (
                    norm.grammar()
                        .lookup(name)
                        .ok_or_else(|| CliError(format!("unknown nonterminal '{}'", name)))?,
                    c.unwrap_or(norm.c_init()),
                ),
                (None, c) => (norm.grammar().start, c.unwrap_or(norm.c_init())),
            };
            let mut alt = norm.gvas().clone();
            alt.grammar.start = x;
            alt.c_init = c;
            let alt = NormalizedGvas::new(alt)?;
            let table = oracle::reach_table(&alt, max);
            let values = table.outputs(x, c);
            let closed = !table.capped();
            if json {
                println!(
                    "{}",
                    json!({
                        "closed": closed,
                        "values": values_json(&values),
                        "max": values.iter().last(),
                        "capped_at": if closed { None } else { Some(max) },
                    })
                );
            } else if closed {
                println!("closed: {:?} (max {:?})", values, values.iter().last());
            } else {
                println!(
                    "capped at {}: observed {:?} so far",
                    max,
                    values.iter().last()
                );
            }
            Ok(if closed { 0 } else { 2 })
        }
        Cmd::Decide {
            input,
            cap,
            oracle_max,
            complete,
            no_pruning,
            check_prefix_closed,
            json,
        } => {
            let g = read_gvas(&input)?;
            let opts = DecideOptions {
                max_cap: cap.unwrap_or(256),
                max_oracle: oracle_max.unwrap_or(1024),
                complete,
                pruning: !no_pruning,
                prefix_check_len: check_prefix_closed,
            };
            let out = certsearch::decide(&g, &opts)?;
            for w in &out.warnings {
                eprintln!("warning: {}", w);
            }
            let code = match &out.verdict {
                Verdict::Unbounded(_) | Verdict::Bounded(_) => 0,
                Verdict::Inconclusive { .. } => 2,
            };
            if json {
                let budgets = json!({"caps": out.caps, "oracle": out.oracle_budgets});
                let doc = match &out.verdict {
                    Verdict::Unbounded(cert) => {
                        let norm = out.normalized.as_ref().unwrap();
                        json!({
                            "verdict": "unbounded",
                            "certificate": flowtree::cert_to_json(norm.grammar(), cert),
                            "normalized": textfmt::print_gvas(norm.gvas()),
                            "budgets": budgets,
                            "warnings": out.warnings,
                        })
                    }
                    Verdict::Bounded(BoundedProof::OracleClosure(set)) => json!({
                        "verdict": "bounded",
                        "proof": "oracle-closure",
                        "reach_set": values_json(set),
                        "budgets": budgets,
                        "warnings": out.warnings,
                    }),
                    Verdict::Bounded(BoundedProof::CapExhausted(cap)) => json!({
                        "verdict": "bounded",
                        "proof": "cap-exhausted",
                        "cap": cap,
                        "budgets": budgets,
                        "warnings": out.warnings,
                    }),
                    Verdict::Inconclusive { .. } => json!({
                        "verdict": "inconclusive",
                        "budgets": budgets,
                        "warnings": out.warnings,
                    }),
                };
                println!("{}", doc);
            } else {
                match &out.verdict {
                    Verdict::Unbounded(cert) => {
                        let norm = out.normalized.as_ref().unwrap();
                        println!(
                            "unbounded: certificate with s = {} and t = {} (symbol {})",
                            flowtree::format_path(&cert.s),
                            flowtree::format_path(&cert.t),
                            match cert.tree.get(&cert.s).map(|n| n.sym) {
                                Some(flowtree::SymLabel::Nt(x)) =>
                                    norm.grammar().name(x).to_string(),
                                _ => "?".to_string(),
                            }
                        );
                    }
                    Verdict::Bounded(BoundedProof::OracleClosure(set)) => {
                        println!(
                            "bounded: reachability set {:?} (oracle closure)",
                            set.iter().collect::<Vec<_>>()
                        );
                    }
                    Verdict::Bounded(BoundedProof::CapExhausted(cap)) => {
                        println!("bounded: no certificate up to the completeness cap {}", cap);
                    }
                    Verdict::Inconclusive { caps, budgets } => {
                        println!(
                            "inconclusive: no certificate at caps {:?}, oracle still capped at budgets {:?}",
                            caps, budgets
                        );
                    }
                }
            }
            Ok(code)
        }
        Cmd::Verify {
            grammar,
            flow_tree,
            certificate,
            s,
            t,
            dot,
            json,
        } => {
            let g = read_gvas(&grammar)?;
            let (tree, s_embedded, t_embedded) = match (&flow_tree, &certificate) {
                (Some(p), None) => {
                    let v = read_json(p)?;
                    // accept both bare trees and {tree, s, t} documents
                    if v.get("tree").is_some() {
                        flowtree::cert_from_json(&g.grammar, &v)?
                    } else {
                        (flowtree::flow_from_json(&g.grammar, &v)?, None, None)
                    }
                }
                (None, Some(p)) => {
                    let v = read_json(p)?;
                    flowtree::cert_from_json(&g.grammar, &v)?
                }
                _ => {
                    return Err(CliError(
                        "pass exactly one of --flow-tree or --certificate".into(),
                    ))
                }
            };
            if let Some(path) = dot {
                std::fs::write(&path, flowtree::to_dot(&g.grammar, &tree))
                    .map_err(|e| CliError(format!("{}: {}", path.display(), e)))?;
            }
            let violations = if certificate.is_some() {
                let s = match s {
                    Some(p) => parse_path(&p)?,
                    None => s_embedded.ok_or_else(|| {
                        CliError("certificate needs node s (in the JSON or via --s)".into())
                    })?,
                };
                let t = match t {
                    Some(p) => parse_path(&p)?,
                    None => t_embedded.ok_or_else(|| {
                        CliError("certificate needs node t (in the JSON or via --t)".into())
                    })?,
                };
                flowtree::validate_certificate(
                    &g,
                    &flowtree::Certificate { tree, s, t },
                )
            } else {
                flowtree::validate_flow_tree(&g, &tree)
            };
            let ok = violations.is_empty();
            if json {
                println!(
                    "{}",
                    json!({
                        "ok": ok,
                        "violations": violations.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
                    })
                );
            } else if ok {
                println!("ok");
            } else {
                for v in &violations {
                    println!("violation {}", v);
                }
            }
            Ok(if ok { 0 } else { 1 })
        }
        Cmd::Rank {
            grammar,
            flow_tree,
            json,
        } => {
            let g = read_gvas(&grammar)?;
            let v = read_json(&flow_tree)?;
            let tree = if v.get("tree").is_some() {
                flowtree::cert_from_json(&g.grammar, &v)?.0
            } else {
                flowtree::flow_from_json(&g.grammar, &v)?
            };
            let r = flowtree::rank_of(&tree);
            if json {
                println!(
                    "{}",
                    json!({"finite_count": r.finite_count, "value_sum": r.value_sum})
                );
            } else {
                println!("rank ({}, {})", r.finite_count, r.value_sum);
            }
            Ok(0)
        }
        Cmd::Gen {
            kind,
            seed,
            nts,
            rules,
            max_action,
            states,
            stack_syms,
            transitions,
            normalized,
        } => match kind.as_str() {
            "gvas" => {
                let p = GvasGenParams {
                    max_nts: nts,
                    max_rules: rules,
                    max_action,
                    ..GvasGenParams::default()
                };
                if normalized {
                    let g = counterbound::gen::gen_normalized_gvas(seed, &p);
                    print!("{}", textfmt::print_gvas(g.gvas()));
                } else {
                    let g = counterbound::gen::gen_gvas(seed, &p);
                    print!("{}", textfmt::print_gvas(&g));
                }
                Ok(0)
            }
            "pvas" => {
                let p = PvasGenParams {
                    max_states: states,
                    max_stack_syms: stack_syms,
                    max_transitions: transitions,
                    ..PvasGenParams::default()
                };
                let inst = counterbound::gen::gen_pvas(seed, &p);
                print!("{}", textfmt::print_pvas(&inst));
                Ok(0)
            }
            other => Err(CliError(format!(
                "unknown kind '{}', expected gvas or pvas",
                other
            ))),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(CliError(msg)) => {
            eprintln!("error: {}", msg);
            ExitCode::from(3)
        }
    }
}
