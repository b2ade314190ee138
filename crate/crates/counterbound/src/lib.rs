//! Counter-boundedness for one-dimensional pushdown vector addition
//! systems, decided through grammar-controlled VAS.
//!
//! A PVAS is reduced to a prefix-closed GVAS over its run-prefix delta
//! sequences ([`pvas`]). The GVAS is normalized to rules of shape
//! `X -> Y Z`, `X -> a` with `a ∈ {-1,0,1}`, or `X -> ε` ([`normalize`]).
//! Boundedness of the reachable counter values is then decided by
//! interleaving an exact reachability oracle ([`oracle`]) with a search
//! for certificates of unboundedness: annotated parse trees containing a
//! repeated nonterminal whose input grows, or stays equal while the
//! output shrinks ([`flowtree`], [`certsearch`]). Displacement analysis
//! and constructive growing-pattern witnesses live in [`displacement`].

#![deny(unsafe_code)]

pub mod certsearch;
pub mod displacement;
pub mod flowtree;
pub mod gen;
pub mod grammar;
pub mod normalize;
pub mod oracle;
pub mod pvas;
pub mod testsupport;
pub mod textfmt;

pub use certsearch::{
    brute_force_certificate, decide, find_certificate, maxout_table, theoretical_cap, Cap,
    DecideOptions, DecideOutcome, Verdict,
};
pub use displacement::{
    derivability_witness, derive_witness, displacement_table, elementary_tree,
    find_positive_pump, DisplacementTable, ExtValue, PumpWitness,
};
pub use flowtree::{
    build_flow_tree, is_good, rank_of, validate_certificate, validate_flow_tree, Certificate,
    ExtNat, FlowTree, Rank,
};
pub use grammar::{
    sum_of, yield_of, Grammar, GrammarError, Gvas, NormalizedGvas, NtId, ParseTree, Rule, Sym,
    Word,
};
pub use oracle::{max_reachable, reach_table, reachability_set, MaxReachable, OracleResult};
pub use pvas::{Config, Pvas, StackOp, Transition};
