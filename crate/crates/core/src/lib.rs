//! Calibrated fusion of heterogeneous retrieval scores.
//!
//! A dense retriever and a Personalized PageRank graph retriever produce
//! scores on incomparable scales. This crate maps both onto percentile ranks
//! (or min-max / raw-max for comparison), turns them into per-system
//! Boltzmann distributions and fuses them, alongside rank-only RRF and a
//! family of alternative operators. An optional mean-field Ising pass
//! reranks fused candidates through shared entities.
//!
//! The evaluation side covers last-hop and full-support recall, paired
//! win/loss tallies, the exact McNemar sign test, Wilson intervals, odds
//! ratios and bootstrap intervals, plus a seeded synthetic corpus generator
//! and a config-driven harness.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`corpus`] | passages, queries, embeddings, MD5 tune/test split |
//! | [`retrieve`] | vector top-k, entity graph, synonym linking, PPR, pool cap |
//! | [`calibrate`] | PIT / min-max / raw-max, energies, temperature, Boltzmann |
//! | [`fusion`] | thermo, RRF, linear and eight alternative strategies |
//! | [`ising`] | mean-field reranking and the (J, T, blend) sweep |
//! | [`eval`] | retrieval metrics and significance statistics |
//! | [`synth`] | synthetic multi-hop corpora and score-regime reports |
//! | [`harness`] | run configs, evaluation, tune-winner selection, sweeps |

// `!(x > 0.0)` also rejects NaN, which is the point of those checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod harness;
pub mod ising;
pub mod retrieve;
pub mod synth;

pub use error::{Error, Result};
