use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::{Error, Result};

/// Exact two-sided McNemar test: the sign test on the discordant pairs,
/// `min(1, 2·P(X ≤ min(W, L)))` with `X ~ Binomial(W+L, 1/2)`.
pub fn mcnemar_exact(wins: u64, losses: u64) -> f64 {
    let n = wins + losses;
    if n == 0 {
        return 1.0;
    }
    let tail_max = wins.min(losses);
    if 2 * tail_max + 1 >= n {
        // the lower tail reaches the median, so it is at least 1/2
        return 1.0;
    }
    let ln_half_n = n as f64 * std::f64::consts::LN_2;
    let terms: Vec<f64> = (0..=tail_max).map(|i| ln_binomial(n, i) - ln_half_n).collect();
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ln_tail = top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln();
    (2.0 * ln_tail.exp()).min(1.0)
}

/// Wilson score interval for a binomial proportion, without continuity
/// correction.
pub fn wilson_ci(successes: u64, n: u64, z: f64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::invalid("Wilson interval needs n ≥ 1"));
    }
    if successes > n {
        return Err(Error::invalid(format!("{successes} successes out of {n}")));
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = p + z2 / (2.0 * nf);
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    let low = ((centre - half) / denom).clamp(0.0, p);
    let high = ((centre + half) / denom).clamp(p, 1.0);
    Ok((low, high))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OddsRatio {
    pub value: f64,
    /// A zero cell forced the Haldane +0.5 correction.
    pub corrected: bool,
}

/// `(a/(n−a)) / (b/(n−b))` for `a` method and `b` baseline successes out of
/// `n` each.
pub fn odds_ratio(a: u64, b: u64, n: u64) -> Result<OddsRatio> {
    if a > n || b > n {
        return Err(Error::invalid(format!("successes {a}, {b} exceed n = {n}")));
    }
    let cells = [a, n - a, b, n - b];
    let corrected = cells.contains(&0);
    let shift = if corrected { 0.5 } else { 0.0 };
    let [a, fa, b, fb] = cells.map(|c| c as f64 + shift);
    Ok(OddsRatio {
        value: (a / fa) / (b / fb),
        corrected,
    })
}

/// Percentile bootstrap interval for the mean at confidence `level`,
/// deterministic for a given seed.
pub fn bootstrap_ci(values: &[f64], resamples: usize, level: f64, seed: u64) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Empty("bootstrap needs at least one value".into()));
    }
    if resamples == 0 {
        return Err(Error::invalid("bootstrap needs at least one resample"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!(
            "confidence level must be in (0,1), got {level}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = values.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok((quantile(&means, tail), quantile(&means, 1.0 - tail)))
}

/// Linearly interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}
