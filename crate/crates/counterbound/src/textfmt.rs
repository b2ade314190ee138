//! Line-oriented text formats for GVAS and PVAS instances.
//!
//! GVAS files:
//!
//! ```text
//! gvas
//! counter_init 0
//! start S
//! S -> 1 S
//! S ->
//! ```
//!
//! PVAS files:
//!
//! ```text
//! pvas
//! dim 1
//! init 2 2 -
//! 3 -> 5 : add=-1
//! 5 -> 2 : add=0 push=A
//! ```
//!
//! `#` starts a comment. Rule symbols are nonterminal names or integer
//! literals; an empty right-hand side is an ε-rule. The `init` line lists
//! the state, one counter per dimension, then the initial stack bottom to
//! top (`-` for empty).

use std::fmt::Write as _;

use thiserror::Error;

use crate::grammar::{Grammar, Gvas, Rule, Sym};
use crate::pvas::{Pvas, StackOp, Transition};

#[derive(Debug, Error)]
#[error("line {line}: {msg}")]
pub struct FormatError {
    pub line: usize,
    pub msg: String,
}

fn err<T>(line: usize, msg: impl Into<String>) -> Result<T, FormatError> {
    Err(FormatError {
        line,
        msg: msg.into(),
    })
}

fn meaningful_lines(input: &str) -> impl Iterator<Item = (usize, &str)> {
    input.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        if l.is_empty() {
            None
        } else {
            Some((i + 1, l))
        }
    })
}

/// A name is an action literal iff it parses as an integer.
pub fn is_action_token(tok: &str) -> bool {
    tok.parse::<i64>().is_ok()
}

pub fn parse_gvas(input: &str) -> Result<Gvas, FormatError> {
    let mut lines = meaningful_lines(input);
    match lines.next() {
        Some((_, "gvas")) => {}
        Some((n, other)) => return err(n, format!("expected 'gvas' header, found '{}'", other)),
        None => return err(1, "empty input, expected 'gvas' header"),
    }
    let mut c_init: Option<u64> = None;
    let mut start_name: Option<String> = None;
    let mut grammar = Grammar::new();
    let mut pending_rules: Vec<(usize, String, Vec<String>)> = Vec::new();
    for (n, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks[0] {
            "counter_init" => {
                if toks.len() != 2 {
                    return err(n, "counter_init expects one natural number");
                }
                match toks[1].parse::<u64>() {
                    Ok(v) => c_init = Some(v),
                    Err(_) => return err(n, format!("invalid counter value '{}'", toks[1])),
                }
            }
            "start" => {
                if toks.len() != 2 {
                    return err(n, "start expects one nonterminal name");
                }
                if is_action_token(toks[1]) {
                    return err(n, "start symbol cannot be an integer literal");
                }
                start_name = Some(toks[1].to_string());
            }
            _ => {
                if toks.len() < 2 || toks[1] != "->" {
                    return err(n, format!("expected '<name> -> ...', found '{}'", line));
                }
                if is_action_token(toks[0]) {
                    return err(n, "rule left-hand side cannot be an integer literal");
                }
                pending_rules.push((
                    n,
                    toks[0].to_string(),
                    toks[2..].iter().map(|s| s.to_string()).collect(),
                ));
            }
        }
    }
    let c_init = match c_init {
        Some(v) => v,
        None => return err(1, "missing 'counter_init' declaration"),
    };
    let start_name = match start_name {
        Some(s) => s,
        None => return err(1, "missing 'start' declaration"),
    };
    let start = grammar.intern(&start_name);
    for (_, lhs, _) in &pending_rules {
        grammar.intern(lhs);
    }
    for (n, lhs, rhs_toks) in &pending_rules {
        let lhs = grammar.lookup(lhs).unwrap();
        let mut rhs = Vec::with_capacity(rhs_toks.len());
        for tok in rhs_toks {
            if let Ok(a) = tok.parse::<i64>() {
                rhs.push(Sym::Act(a));
            } else if let Some(id) = grammar.lookup(tok) {
                rhs.push(Sym::Nt(id));
            } else {
                // nonterminals may appear on a rhs before any of their rules
                let id = grammar.intern(tok);
                rhs.push(Sym::Nt(id));
                let _ = n;
            }
        }
        grammar.rules.push(Rule { lhs, rhs });
    }
    grammar.start = start;
    Ok(Gvas { grammar, c_init })
}

pub fn print_gvas(g: &Gvas) -> String {
    let mut out = String::new();
    out.push_str("gvas\n");
    let _ = writeln!(out, "counter_init {}", g.c_init);
    let _ = writeln!(out, "start {}", g.grammar.name(g.grammar.start));
    for r in &g.grammar.rules {
        let _ = write!(out, "{} ->", g.grammar.name(r.lhs));
        for s in &r.rhs {
            match s {
                Sym::Act(a) => {
                    let _ = write!(out, " {}", a);
                }
                Sym::Nt(y) => {
                    let _ = write!(out, " {}", g.grammar.name(*y));
                }
            }
        }
        out.push('\n');
    }
    out
}

pub fn parse_pvas(input: &str) -> Result<Pvas, FormatError> {
    let mut lines = meaningful_lines(input);
    match lines.next() {
        Some((_, "pvas")) => {}
        Some((n, other)) => return err(n, format!("expected 'pvas' header, found '{}'", other)),
        None => return err(1, "empty input, expected 'pvas' header"),
    }
    let mut dim: Option<usize> = None;
    let mut init: Option<(usize, String, Vec<u64>, Vec<String>)> = None;
    let mut trans: Vec<(usize, String, String, Vec<i64>, Option<(bool, String)>)> = Vec::new();
    for (n, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks[0] {
            "dim" => {
                if toks.len() != 2 {
                    return err(n, "dim expects one positive integer");
                }
                match toks[1].parse::<usize>() {
                    Ok(k) if k >= 1 => dim = Some(k),
                    _ => return err(n, format!("invalid dimension '{}'", toks[1])),
                }
            }
            "init" => {
                let k = match dim {
                    Some(k) => k,
                    None => return err(n, "'dim' must appear before 'init'"),
                };
                if toks.len() < 2 + k {
                    return err(n, format!("init expects a state, {} counters, and a stack", k));
                }
                let state = toks[1].to_string();
                let mut counters = Vec::with_capacity(k);
                for t in &toks[2..2 + k] {
                    match t.parse::<u64>() {
                        Ok(v) => counters.push(v),
                        Err(_) => return err(n, format!("invalid counter value '{}'", t)),
                    }
                }
                let stack_toks = &toks[2 + k..];
                let stack: Vec<String> = if stack_toks == ["-"] || stack_toks.is_empty() {
                    Vec::new()
                } else {
                    stack_toks.iter().map(|s| s.to_string()).collect()
                };
                init = Some((n, state, counters, stack));
            }
            _ => {
                // P -> Q : add=v1,..,vk [push=G|pop=G]
                let k = match dim {
                    Some(k) => k,
                    None => return err(n, "'dim' must appear before transitions"),
                };
                if toks.len() < 5 || toks[1] != "->" || toks[3] != ":" {
                    return err(n, format!("expected 'P -> Q : add=...', found '{}'", line));
                }
                let src = toks[0].to_string();
                let dst = toks[2].to_string();
                let add_tok = toks[4];
                let Some(vals) = add_tok.strip_prefix("add=") else {
                    return err(n, format!("expected 'add=...', found '{}'", add_tok));
                };
                let mut delta = Vec::with_capacity(k);
                for v in vals.split(',') {
                    match v.parse::<i64>() {
                        Ok(d) => delta.push(d),
                        Err(_) => return err(n, format!("invalid delta '{}'", v)),
                    }
                }
                if delta.len() != k {
                    return err(n, format!("expected {} deltas, found {}", k, delta.len()));
                }
                let mut op = None;
                for tok in &toks[5..] {
                    if let Some(g) = tok.strip_prefix("push=") {
                        op = Some((true, g.to_string()));
                    } else if let Some(g) = tok.strip_prefix("pop=") {
                        op = Some((false, g.to_string()));
                    } else {
                        return err(n, format!("unexpected token '{}'", tok));
                    }
                }
                trans.push((n, src, dst, delta, op));
            }
        }
    }
    let k = match dim {
        Some(k) => k,
        None => return err(1, "missing 'dim' declaration"),
    };
    let mut pvas = Pvas::new(k);
    let (_, init_state, counters, stack) = match init {
        Some(t) => t,
        None => return err(1, "missing 'init' declaration"),
    };
    let q0 = pvas.intern_state(&init_state);
    for (_, src, dst, _, op) in &trans {
        pvas.intern_state(src);
        pvas.intern_state(dst);
        if let Some((_, g)) = op {
            pvas.intern_stack_sym(g);
        }
    }
    let mut w_init = Vec::with_capacity(stack.len());
    for s in &stack {
        w_init.push(pvas.intern_stack_sym(s));
    }
    for (_, src, dst, delta, op) in trans {
        let src = pvas.lookup_state(&src).unwrap();
        let dst = pvas.lookup_state(&dst).unwrap();
        let op = match op {
            None => StackOp::Nop,
            Some((true, g)) => StackOp::Push(pvas.lookup_stack_sym(&g).unwrap()),
            Some((false, g)) => StackOp::Pop(pvas.lookup_stack_sym(&g).unwrap()),
        };
        pvas.transitions.push(Transition {
            src,
            delta,
            op,
            dst,
        });
    }
    pvas.q_init = q0;
    pvas.c_init = counters;
    pvas.w_init = w_init;
    Ok(pvas)
}

pub fn print_pvas(p: &Pvas) -> String {
    let mut out = String::new();
    out.push_str("pvas\n");
    let _ = writeln!(out, "dim {}", p.dim);
    let counters: Vec<String> = p.c_init.iter().map(|c| c.to_string()).collect();
    let stack = if p.w_init.is_empty() {
        "-".to_string()
    } else {
        p.w_init
            .iter()
            .map(|s| p.stack_sym_name(*s).to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let _ = writeln!(
        out,
        "init {} {} {}",
        p.state_name(p.q_init),
        counters.join(" "),
        stack
    );
    for t in &p.transitions {
        let delta: Vec<String> = t.delta.iter().map(|d| d.to_string()).collect();
        let _ = write!(
            out,
            "{} -> {} : add={}",
            p.state_name(t.src),
            p.state_name(t.dst),
            delta.join(",")
        );
        match t.op {
            StackOp::Nop => {}
            StackOp::Push(g) => {
                let _ = write!(out, " push={}", p.stack_sym_name(g));
            }
            StackOp::Pop(g) => {
                let _ = write!(out, " pop={}", p.stack_sym_name(g));
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gvas_round_trip_is_identity_on_canonical_form() {
        let text = "gvas\ncounter_init 3\nstart S\nS -> 1 S\nS ->\nS -> M S\nM -> -2\n";
        let g = parse_gvas(text).unwrap();
        let printed = print_gvas(&g);
        let g2 = parse_gvas(&printed).unwrap();
        assert_eq!(printed, print_gvas(&g2));
        assert_eq!(g.c_init, 3);
        assert_eq!(g.grammar.rules.len(), 4);
    }

    #[test]
    fn gvas_parse_errors_carry_line_numbers() {
        let e = parse_gvas("gvas\ncounter_init x\n").unwrap_err();
        assert_eq!(e.line, 2);
        let e = parse_gvas("gvas\ncounter_init 0\nstart S\nS - 1\n").unwrap_err();
        assert_eq!(e.line, 4);
    }

    #[test]
    fn pvas_round_trip() {
        let text = "pvas\ndim 1\ninit p 2 A B\np -> q : add=-1 push=A\nq -> p : add=2 pop=B\n";
        let p = parse_pvas(text).unwrap();
        let printed = print_pvas(&p);
        let p2 = parse_pvas(&printed).unwrap();
        assert_eq!(printed, print_pvas(&p2));
        assert_eq!(p.w_init.len(), 2);
    }

    #[test]
    fn pvas_requires_dim_before_init() {
        let e = parse_pvas("pvas\ninit p 0 -\ndim 1\n").unwrap_err();
        assert_eq!(e.line, 2);
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let g = parse_gvas("# header\ngvas\n\ncounter_init 0 # trailing\nstart S\nS ->\n").unwrap();
        assert_eq!(g.grammar.nt_count(), 1);
    }
}
