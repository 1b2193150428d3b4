//! Plackett-Luce strengths by Hunter's MM algorithm.
//!
//! A single complete ranking has no finite maximum-likelihood estimate (the
//! top item's strength diverges), so each update adds a pseudo-count to the
//! win tally and the iteration is capped.

use std::collections::HashMap;

use crate::calibrate::CalibratedList;

use super::{rank_joined, FusedRanking, StrategyParams};

#[derive(Debug, Clone, PartialEq)]
pub struct PlackettLuceFit {
    /// Strength per item in ranking order, summing to one.
    pub strengths: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Fits strengths for items listed best-first.
///
/// Stage `s` chooses item `s` out of `{s, …, n−1}`. The MM update is
/// `γ_i ← (w_i + c) / Σ_{s ≤ min(i, n−2)} 1 / Σ_{k ≥ s} γ_k` with `w_i` the
/// number of stages item `i` wins and `c` the pseudo-count.
pub fn plackett_luce_strengths(n: usize, pseudo_count: f64, max_iterations: usize) -> PlackettLuceFit {
    if n <= 1 {
        return PlackettLuceFit {
            strengths: vec![1.0; n],
            iterations: 0,
            converged: true,
        };
    }
    let mut gamma = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iterations {
        iterations += 1;
        // tail[s] = Σ_{k ≥ s} γ_k
        let mut tail = vec![0.0; n + 1];
        for s in (0..n).rev() {
            tail[s] = tail[s + 1] + gamma[s];
        }
        let mut denom = 0.0;
        for i in 0..n {
            if i < n - 1 {
                denom += 1.0 / tail[i];
            }
            let wins = if i < n - 1 { 1.0 } else { 0.0 };
            next[i] = (wins + pseudo_count) / denom;
        }
        let z: f64 = next.iter().sum();
        next.iter_mut().for_each(|g| *g /= z);
        let change = gamma
            .iter()
            .zip(&next)
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut gamma, &mut next);
        if change < 1e-12 {
            converged = true;
            break;
        }
    }
    PlackettLuceFit {
        strengths: gamma,
        iterations,
        converged,
    }
}

/// `γ_v^α · γ_g^(1−α)` with each system's strengths fitted to its ranking;
/// absent strengths floored at `eps`. Scores are reported in log space.
pub(crate) fn plackett_luce_fuse(
    v: &CalibratedList,
    g: &CalibratedList,
    alpha: f64,
    params: &StrategyParams,
    eps: f64,
    k: usize,
) -> FusedRanking {
    fn fit<'a>(c: &'a CalibratedList, params: &StrategyParams) -> HashMap<&'a str, f64> {
        let fit = plackett_luce_strengths(c.len(), params.pl_pseudo_count, params.pl_iterations);
        c.entries.iter().map(|d| d.id.as_str()).zip(fit.strengths).collect()
    }
    let (sv, sg) = (fit(v, params), fit(g, params));
    rank_joined(v, g, k, |j| {
        let a = sv.get(j.id).copied().unwrap_or(eps).max(eps);
        let b = sg.get(j.id).copied().unwrap_or(eps).max(eps);
        alpha * a.ln() + (1.0 - alpha) * b.ln()
    })
}
