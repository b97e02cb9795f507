//! A linear quantum λ-calculus with a wave-style multi-token machine.
//!
//! The pipeline: [`syntax`] parses terms, [`typing`] checks them into
//! derivation trees, [`machine`] executes derivations as synchronized
//! multi-token runs over a simulated quantum register ([`quantum`]),
//! [`oracle`] normalizes superposed terms as an independent semantics,
//! and [`mll`] maps types and judgements into multiplicative linear
//! logic formulas and sequents.

pub mod gen;
pub mod machine;
pub mod mll;
pub mod oracle;
pub mod quantum;
pub mod syntax;
pub mod typing;
