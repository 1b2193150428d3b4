//! Retrieval metrics, paired win/loss tallies and significance statistics.

mod metrics;
mod stats;

pub use metrics::{
    any_at_k, full_at_k, fullsup_at_k, lasthop_at_k, pair_outcomes, Hits, Metric, PairedComparison, QueryOutcome,
};
pub use stats::{bootstrap_ci, mcnemar_exact, odds_ratio, wilson_ci, OddsRatio};
