//! Flow trees, flow-condition validation, good/bad classification,
//! certificate validation, ranks, and the JSON tree schema.
//!
//! A flow tree is a complete parse tree whose nodes carry input and
//! output values in ℕ ∪ {-∞}. The flow conditions are inequalities, so
//! the counter follows a lossy semantics along a depth-first pre-order
//! traversal. The validator here is the single source of truth for every
//! tree the search and witness builders emit; it shares nothing with the
//! producers beyond the type definitions.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{Grammar, Gvas, NormalizedGvas, NtId, ParseTree, Sym};

/// A natural number or -∞. `-∞ <= x` holds for every `x`; `-∞ < -∞` does
/// not. Derived ordering gives exactly that.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub enum ExtNat {
    NegInf,
    Fin(u64),
}

impl ExtNat {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtNat::Fin(_))
    }
}

impl fmt::Display for ExtNat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtNat::NegInf => write!(f, "-inf"),
            ExtNat::Fin(v) => write!(f, "{}", v),
        }
    }
}

/// Node label of a flow tree.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SymLabel {
    Nt(NtId),
    Act(i64),
    Eps,
}

/// Complete parse tree annotated with input/output values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowTree {
    pub sym: SymLabel,
    pub input: ExtNat,
    pub output: ExtNat,
    pub children: Vec<FlowTree>,
}

/// Child-index path addressing a node; the empty path is the root.
pub type NodePath = Vec<usize>;

pub fn format_path(p: &[usize]) -> String {
    if p.is_empty() {
        "ε".to_string()
    } else {
        p.iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(".")
    }
}

/// Parses a dotted child-index path; the empty string is the root.
pub fn parse_path(s: &str) -> Result<NodePath, FlowError> {
    let s = s.trim();
    if s.is_empty() || s == "ε" {
        return Ok(Vec::new());
    }
    s.split('.')
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| FlowError::BadPath(s.to_string()))
        })
        .collect()
}

/// Flow tree with two marked nodes witnessing a pumpable growing pattern.
#[derive(Clone, Debug)]
pub struct Certificate {
    pub tree: FlowTree,
    pub s: NodePath,
    pub t: NodePath,
}

/// Lexicographic rank of a flow tree: count of finite annotations, then
/// their sum.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct Rank {
    pub finite_count: u64,
    pub value_sum: u64,
}

/// A failed flow condition or certificate condition at a node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub path: NodePath,
    pub msg: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at {}: {}", format_path(&self.path), self.msg)
    }
}

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("invalid node path '{0}'")]
    BadPath(String),
    #[error("path {0} does not address a node")]
    NoSuchNode(String),
    #[error("unknown symbol '{0}' in tree")]
    UnknownSymbol(String),
    #[error("malformed tree JSON: {0}")]
    BadJson(String),
    #[error("{0} ⇒^{1} {2} is not reachable within budget {3}")]
    NotExactlyReachable(String, u64, u64, u64),
}

impl FlowTree {
    pub fn leaf(sym: SymLabel, input: ExtNat, output: ExtNat) -> FlowTree {
        FlowTree {
            sym,
            input,
            output,
            children: Vec::new(),
        }
    }

    pub fn get(&self, path: &[usize]) -> Option<&FlowTree> {
        let mut cur = self;
        for &i in path {
            cur = cur.children.get(i)?;
        }
        Some(cur)
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(|c| c.node_count()).sum::<usize>()
    }

    pub fn height(&self) -> usize {
        self.children
            .iter()
            .map(|c| c.height() + 1)
            .max()
            .unwrap_or(0)
    }

    /// Maximum finite annotation anywhere in the tree.
    pub fn max_value(&self) -> Option<u64> {
        let mut m = None;
        self.visit(&mut |_, n| {
            for v in [n.input, n.output] {
                if let ExtNat::Fin(x) = v {
                    m = Some(m.map_or(x, |old: u64| old.max(x)));
                }
            }
        });
        m
    }

    pub fn visit<F: FnMut(&NodePath, &FlowTree)>(&self, f: &mut F) {
        fn walk<F: FnMut(&NodePath, &FlowTree)>(t: &FlowTree, p: &mut NodePath, f: &mut F) {
            f(p, t);
            for (i, c) in t.children.iter().enumerate() {
                p.push(i);
                walk(c, p, f);
                p.pop();
            }
        }
        walk(self, &mut Vec::new(), f)
    }

    /// Strips the annotations, keeping the underlying parse tree.
    pub fn to_parse_tree(&self) -> ParseTree {
        match self.sym {
            SymLabel::Act(a) => ParseTree::Act(a),
            SymLabel::Eps => ParseTree::Eps,
            SymLabel::Nt(x) => {
                if self.children.is_empty() {
                    ParseTree::Hole(x)
                } else {
                    ParseTree::Node(x, self.children.iter().map(|c| c.to_parse_tree()).collect())
                }
            }
        }
    }
}

/// Annotates a complete parse tree with all--∞ values (the root input is
/// set separately by callers that need it).
pub fn all_bottom(tree: &ParseTree) -> FlowTree {
    match tree {
        ParseTree::Act(a) => FlowTree::leaf(SymLabel::Act(*a), ExtNat::NegInf, ExtNat::NegInf),
        ParseTree::Eps => FlowTree::leaf(SymLabel::Eps, ExtNat::NegInf, ExtNat::NegInf),
        ParseTree::Hole(x) => FlowTree::leaf(SymLabel::Nt(*x), ExtNat::NegInf, ExtNat::NegInf),
        ParseTree::Node(x, cs) => FlowTree {
            sym: SymLabel::Nt(*x),
            input: ExtNat::NegInf,
            output: ExtNat::NegInf,
            children: cs.iter().map(all_bottom).collect(),
        },
    }
}

fn check_rule_conformance(g: &Gvas, node: &FlowTree, path: &NodePath, out: &mut Vec<Violation>) {
    let SymLabel::Nt(x) = node.sym else { return };
    if node.children.is_empty() {
        out.push(Violation {
            path: path.clone(),
            msg: format!(
                "nonterminal leaf '{}': tree is not complete",
                g.grammar.name(x)
            ),
        });
        return;
    }
    let is_eps_rule = node.children.len() == 1 && node.children[0].sym == SymLabel::Eps;
    let label_seq: Option<Vec<Sym>> = node
        .children
        .iter()
        .map(|c| match c.sym {
            SymLabel::Nt(y) => Some(Sym::Nt(y)),
            SymLabel::Act(a) => Some(Sym::Act(a)),
            SymLabel::Eps => None,
        })
        .collect();
    let matches = g.grammar.rules_of(x).any(|(_, r)| {
        if is_eps_rule {
            r.rhs.is_empty()
        } else {
            label_seq.as_deref() == Some(r.rhs.as_slice())
        }
    });
    if !matches {
        out.push(Violation {
            path: path.clone(),
            msg: format!(
                "children of '{}' do not match any rule",
                g.grammar.name(x)
            ),
        });
    }
}

fn le_shifted(out: ExtNat, input: ExtNat, shift: i64) -> bool {
    // out <= input + shift, with -∞ below everything
    match (out, input) {
        (ExtNat::NegInf, _) => true,
        (ExtNat::Fin(_), ExtNat::NegInf) => false,
        (ExtNat::Fin(o), ExtNat::Fin(i)) => (o as i128) <= i as i128 + shift as i128,
    }
}

/// Checks that the tree is a complete parse tree of `g` with root input
/// `c_init`, rooted at the start symbol, and that every node satisfies
/// its flow condition. Violations name the node and the failed
/// inequality; an empty list means the tree is a valid flow tree.
pub fn validate_flow_tree(g: &Gvas, tree: &FlowTree) -> Vec<Violation> {
    let mut out = Vec::new();
    if tree.sym != SymLabel::Nt(g.grammar.start) {
        out.push(Violation {
            path: vec![],
            msg: format!(
                "root symbol must be the start symbol '{}'",
                g.grammar.name(g.grammar.start)
            ),
        });
    }
    if tree.input != ExtNat::Fin(g.c_init) {
        out.push(Violation {
            path: vec![],
            msg: format!("root input must equal counter_init {}", g.c_init),
        });
    }
    tree.visit(&mut |path, node| {
        match node.sym {
            SymLabel::Act(a) => {
                if !node.children.is_empty() {
                    out.push(Violation {
                        path: path.clone(),
                        msg: "action node must be a leaf".into(),
                    });
                }
                if !le_shifted(node.output, node.input, a) {
                    out.push(Violation {
                        path: path.clone(),
                        msg: format!(
                            "leaf out ≤ in + a fails: {} > {} + {}",
                            node.output, node.input, a
                        ),
                    });
                }
            }
            SymLabel::Eps => {
                if !node.children.is_empty() {
                    out.push(Violation {
                        path: path.clone(),
                        msg: "ε node must be a leaf".into(),
                    });
                }
                if !le_shifted(node.output, node.input, 0) {
                    out.push(Violation {
                        path: path.clone(),
                        msg: format!("ε leaf out ≤ in fails: {} > {}", node.output, node.input),
                    });
                }
            }
            SymLabel::Nt(_) => {
                check_rule_conformance(g, node, path, &mut out);
                if let (Some(first), Some(last)) = (node.children.first(), node.children.last()) {
                    if first.input > node.input {
                        out.push(Violation {
                            path: path.clone(),
                            msg: format!(
                                "in(t0) ≤ in(t) fails: {} > {}",
                                first.input, node.input
                            ),
                        });
                    }
                    if node.output > last.output {
                        out.push(Violation {
                            path: path.clone(),
                            msg: format!(
                                "out(t) ≤ out(tk) fails: {} > {}",
                                node.output, last.output
                            ),
                        });
                    }
                    for j in 0..node.children.len() - 1 {
                        if node.children[j + 1].input > node.children[j].output {
                            out.push(Violation {
                                path: path.clone(),
                                msg: format!(
                                    "in(t{}) ≤ out(t{}) fails: {} > {}",
                                    j + 1,
                                    j,
                                    node.children[j + 1].input,
                                    node.children[j].output
                                ),
                            });
                        }
                    }
                }
            }
        }
    });
    out
}

/// True with a witness pair when some node repeats a proper ancestor's
/// symbol with an input at least as large.
pub fn is_good(tree: &FlowTree) -> Option<(NodePath, NodePath)> {
    fn walk(
        node: &FlowTree,
        path: &mut NodePath,
        stack: &mut Vec<(SymLabel, ExtNat, NodePath)>,
    ) -> Option<(NodePath, NodePath)> {
        for (sym, input, spath) in stack.iter() {
            if *sym == node.sym && *input <= node.input {
                return Some((spath.clone(), path.clone()));
            }
        }
        stack.push((node.sym, node.input, path.clone()));
        for (i, c) in node.children.iter().enumerate() {
            path.push(i);
            if let Some(w) = walk(c, path, stack) {
                return Some(w);
            }
            path.pop();
        }
        stack.pop();
        None
    }
    walk(tree, &mut Vec::new(), &mut Vec::new())
}

/// Checks the flow conditions plus the certificate conditions on the
/// marked pair `s ≺ t`.
pub fn validate_certificate(g: &Gvas, cert: &Certificate) -> Vec<Violation> {
    let mut out = validate_flow_tree(g, &cert.tree);
    let s_node = match cert.tree.get(&cert.s) {
        Some(n) => n,
        None => {
            out.push(Violation {
                path: cert.s.clone(),
                msg: "s does not address a node".into(),
            });
            return out;
        }
    };
    let t_node = match cert.tree.get(&cert.t) {
        Some(n) => n,
        None => {
            out.push(Violation {
                path: cert.t.clone(),
                msg: "t does not address a node".into(),
            });
            return out;
        }
    };
    if !(cert.s.len() < cert.t.len() && cert.t.starts_with(&cert.s)) {
        out.push(Violation {
            path: cert.t.clone(),
            msg: "s must be a strict prefix of t".into(),
        });
        return out;
    }
    if s_node.sym != t_node.sym {
        out.push(Violation {
            path: cert.t.clone(),
            msg: "symbol mismatch between s and t".into(),
        });
    }
    if !(s_node.input <= t_node.input) {
        out.push(Violation {
            path: cert.t.clone(),
            msg: format!(
                "in(s) ≤ in(t) fails: {} > {}",
                s_node.input, t_node.input
            ),
        });
    }
    let strict_in = s_node.input < t_node.input;
    let strict_out = t_node.output < s_node.output;
    if !(strict_in || strict_out) {
        out.push(Violation {
            path: cert.t.clone(),
            msg: "neither strict condition holds: need in(s) < in(t) or out(t) < out(s)".into(),
        });
    }
    out
}

/// Rank of a flow tree: nodes with finite input plus nodes with finite
/// output, then the sum of those values.
pub fn rank_of(tree: &FlowTree) -> Rank {
    let mut count = 0u64;
    let mut sum = 0u64;
    tree.visit(&mut |_, n| {
        if let ExtNat::Fin(v) = n.input {
            count += 1;
            sum += v;
        }
        if let ExtNat::Fin(v) = n.output {
            count += 1;
            sum += v;
        }
    });
    Rank {
        finite_count: count,
        value_sum: sum,
    }
}

/// Builds a flow tree for an exact reachability fact `c ⇒^x d`, checked
/// against the oracle under the given budget. All annotations are the
/// exact intermediate values, with no lossy slack.
pub fn build_flow_tree(
    g: &NormalizedGvas,
    x: NtId,
    c: u64,
    d: u64,
    budget: u64,
) -> Result<FlowTree, FlowError> {
    let mut alt = g.gvas().clone();
    alt.grammar.start = x;
    alt.c_init = c;
    let alt = NormalizedGvas::new(alt).expect("restart preserves normalization");
    let table = crate::oracle::reach_table(&alt, budget);
    if !table.outputs(x, c).contains(&d) {
        return Err(FlowError::NotExactlyReachable(
            g.grammar().name(x).to_string(),
            c,
            d,
            budget,
        ));
    }
    Ok(build_from_oracle(&alt, &table, x, c, d))
}

fn build_from_oracle(
    g: &NormalizedGvas,
    table: &crate::oracle::ReachTable,
    x: NtId,
    c: u64,
    d: u64,
) -> FlowTree {
    let children = match table
        .justification(x, c, d)
        .expect("fact present in the table")
    {
        crate::oracle::JustifView::Leaf { rule } => {
            let Sym::Act(a) = g.grammar().rules[rule].rhs[0] else {
                unreachable!()
            };
            vec![FlowTree::leaf(
                SymLabel::Act(a),
                ExtNat::Fin(c),
                ExtNat::Fin(d),
            )]
        }
        crate::oracle::JustifView::EpsRule { .. } => {
            vec![FlowTree::leaf(SymLabel::Eps, ExtNat::Fin(c), ExtNat::Fin(d))]
        }
        crate::oracle::JustifView::Bin { rule, mid } => {
            let [Sym::Nt(y), Sym::Nt(z)] = g.grammar().rules[rule].rhs.as_slice() else {
                unreachable!()
            };
            vec![
                build_from_oracle(g, table, *y, c, mid),
                build_from_oracle(g, table, *z, mid, d),
            ]
        }
    };
    FlowTree {
        sym: SymLabel::Nt(x),
        input: ExtNat::Fin(c),
        output: ExtNat::Fin(d),
        children,
    }
}

// ---------------------------------------------------------------------
// JSON schema: a tree node is {sym, in, out, children}; parse trees drop
// the in/out fields. Action symbols serialize as their decimal string,
// ε as the empty string.

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum JsonExt {
    Num(u64),
    Str(String),
}

#[derive(Serialize, Deserialize)]
struct JsonNode {
    sym: String,
    #[serde(rename = "in", skip_serializing_if = "Option::is_none")]
    input: Option<JsonExt>,
    #[serde(rename = "out", skip_serializing_if = "Option::is_none")]
    output: Option<JsonExt>,
    children: Vec<JsonNode>,
}

#[derive(Serialize, Deserialize)]
struct JsonCert {
    tree: JsonNode,
    #[serde(skip_serializing_if = "Option::is_none")]
    s: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t: Option<Vec<usize>>,
}

fn sym_to_string(g: &Grammar, sym: SymLabel) -> String {
    match sym {
        SymLabel::Nt(x) => g.name(x).to_string(),
        SymLabel::Act(a) => a.to_string(),
        SymLabel::Eps => String::new(),
    }
}

fn sym_from_string(g: &Grammar, s: &str) -> Result<SymLabel, FlowError> {
    if s.is_empty() {
        return Ok(SymLabel::Eps);
    }
    if let Ok(a) = s.parse::<i64>() {
        return Ok(SymLabel::Act(a));
    }
    g.lookup(s)
        .map(SymLabel::Nt)
        .ok_or_else(|| FlowError::UnknownSymbol(s.to_string()))
}

fn ext_to_json(v: ExtNat) -> JsonExt {
    match v {
        ExtNat::Fin(n) => JsonExt::Num(n),
        ExtNat::NegInf => JsonExt::Str("-inf".to_string()),
    }
}

fn ext_from_json(v: &JsonExt) -> Result<ExtNat, FlowError> {
    match v {
        JsonExt::Num(n) => Ok(ExtNat::Fin(*n)),
        JsonExt::Str(s) if s == "-inf" => Ok(ExtNat::NegInf),
        JsonExt::Str(s) => Err(FlowError::BadJson(format!(
            "expected a natural number or \"-inf\", found \"{}\"",
            s
        ))),
    }
}

fn flow_to_node(g: &Grammar, t: &FlowTree) -> JsonNode {
    JsonNode {
        sym: sym_to_string(g, t.sym),
        input: Some(ext_to_json(t.input)),
        output: Some(ext_to_json(t.output)),
        children: t.children.iter().map(|c| flow_to_node(g, c)).collect(),
    }
}

fn node_to_flow(g: &Grammar, n: &JsonNode) -> Result<FlowTree, FlowError> {
    let sym = sym_from_string(g, &n.sym)?;
    let input = match &n.input {
        Some(v) => ext_from_json(v)?,
        None => ExtNat::NegInf,
    };
    let output = match &n.output {
        Some(v) => ext_from_json(v)?,
        None => ExtNat::NegInf,
    };
    Ok(FlowTree {
        sym,
        input,
        output,
        children: n
            .children
            .iter()
            .map(|c| node_to_flow(g, c))
            .collect::<Result<_, _>>()?,
    })
}

pub fn flow_to_json(g: &Grammar, t: &FlowTree) -> serde_json::Value {
    serde_json::to_value(flow_to_node(g, t)).expect("tree serializes")
}

pub fn flow_from_json(g: &Grammar, v: &serde_json::Value) -> Result<FlowTree, FlowError> {
    let node: JsonNode =
        serde_json::from_value(v.clone()).map_err(|e| FlowError::BadJson(e.to_string()))?;
    node_to_flow(g, &node)
}

pub fn cert_to_json(g: &Grammar, cert: &Certificate) -> serde_json::Value {
    let jc = JsonCert {
        tree: flow_to_node(g, &cert.tree),
        s: Some(cert.s.clone()),
        t: Some(cert.t.clone()),
    };
    serde_json::to_value(jc).expect("certificate serializes")
}

/// Reads a certificate; `s`/`t` may be omitted in the JSON and supplied
/// separately by the caller.
pub fn cert_from_json(
    g: &Grammar,
    v: &serde_json::Value,
) -> Result<(FlowTree, Option<NodePath>, Option<NodePath>), FlowError> {
    let jc: JsonCert =
        serde_json::from_value(v.clone()).map_err(|e| FlowError::BadJson(e.to_string()))?;
    Ok((node_to_flow(g, &jc.tree)?, jc.s, jc.t))
}

fn parse_tree_to_node(g: &Grammar, t: &ParseTree) -> JsonNode {
    match t {
        ParseTree::Act(a) => JsonNode {
            sym: a.to_string(),
            input: None,
            output: None,
            children: vec![],
        },
        ParseTree::Eps => JsonNode {
            sym: String::new(),
            input: None,
            output: None,
            children: vec![],
        },
        ParseTree::Hole(x) => JsonNode {
            sym: g.name(*x).to_string(),
            input: None,
            output: None,
            children: vec![],
        },
        ParseTree::Node(x, cs) => JsonNode {
            sym: g.name(*x).to_string(),
            input: None,
            output: None,
            children: cs.iter().map(|c| parse_tree_to_node(g, c)).collect(),
        },
    }
}

pub fn parse_tree_to_json(g: &Grammar, t: &ParseTree) -> serde_json::Value {
    serde_json::to_value(parse_tree_to_node(g, t)).expect("tree serializes")
}

/// Graphviz rendering of a flow tree for inspection.
pub fn to_dot(g: &Grammar, t: &FlowTree) -> String {
    let mut out = String::from("digraph flowtree {\n  node [shape=record];\n");
    let mut ids: Vec<(String, String)> = Vec::new();
    let mut edges: Vec<(String, String)> = Vec::new();
    t.visit(&mut |path, node| {
        let id = if path.is_empty() {
            "n".to_string()
        } else {
            format!(
                "n_{}",
                path.iter()
                    .map(|i| i.to_string())
                    .collect::<Vec<_>>()
                    .join("_")
            )
        };
        let label = format!(
            "{{{}|in {}|out {}}}",
            sym_to_string(g, node.sym).replace('"', ""),
            node.input,
            node.output
        );
        ids.push((id.clone(), label));
        if !path.is_empty() {
            let parent = if path.len() == 1 {
                "n".to_string()
            } else {
                format!(
                    "n_{}",
                    path[..path.len() - 1]
                        .iter()
                        .map(|i| i.to_string())
                        .collect::<Vec<_>>()
                        .join("_")
                )
            };
            edges.push((parent, id));
        }
    });
    for (id, label) in ids {
        out.push_str(&format!("  {} [label=\"{}\"];\n", id, label));
    }
    for (a, b) in edges {
        out.push_str(&format!("  {} -> {};\n", a, b));
    }
    out.push_str("}\n");
    out
}

/// The set of nonterminals that label nodes of the tree.
pub fn nonterminals_in(tree: &FlowTree) -> BTreeSet<NtId> {
    let mut set = BTreeSet::new();
    tree.visit(&mut |_, n| {
        if let SymLabel::Nt(x) = n.sym {
            set.insert(x);
        }
    });
    set
}
