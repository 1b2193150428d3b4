//! Alternative fusion operators over calibrated lists.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::calibrate::{boltzmann, CalibratedList};
use crate::error::{Error, Result};

use super::{join, rank_joined, thermo_fuse, CopulaTheta, FusedRanking};

/// `P_v^α · P_g^(1−α)`, absent probabilities floored at `eps`. Scores are
/// reported as the logarithm of the product.
pub fn log_linear_fuse(v: &CalibratedList, g: &CalibratedList, alpha: f64, eps: f64, k: usize) -> FusedRanking {
    rank_joined(v, g, k, |j| {
        let pv = j.v.map_or(eps, |d| d.probability.max(eps));
        let pg = j.g.map_or(eps, |d| d.probability.max(eps));
        // log space keeps the order exact for tiny probabilities
        alpha * pv.ln() + (1.0 - alpha) * pg.ln()
    })
}

/// Weighted power mean of the normalized values,
/// `(α·v^p + (1−α)·g^p)^(1/p)`; absent values count as zero.
pub fn power_mean_fuse(v: &CalibratedList, g: &CalibratedList, alpha: f64, p: f64, k: usize) -> Result<FusedRanking> {
    if p == 0.0 || !p.is_finite() {
        return Err(Error::invalid("power mean exponent p must be finite and non-zero"));
    }
    Ok(rank_joined(v, g, k, |j| {
        let a = j.v.map_or(0.0, |d| d.value.max(0.0));
        let b = j.g.map_or(0.0, |d| d.value.max(0.0));
        power_mean(a, b, alpha, p)
    }))
}

fn power_mean(a: f64, b: f64, alpha: f64, p: f64) -> f64 {
    let terms = [(alpha, a), (1.0 - alpha, b)];
    if p < 0.0 && terms.iter().any(|&(w, x)| w > 0.0 && x == 0.0) {
        // a zero component drives a negative-exponent mean to zero
        return 0.0;
    }
    let s: f64 = terms
        .iter()
        .filter(|&&(w, _)| w > 0.0)
        .map(|&(w, x)| w * x.powf(p))
        .sum();
    s.powf(1.0 / p)
}

/// q-exponential weight `[1 + (1−q)·x]_+^(1/(1−q))` for `x = −E/T`,
/// returned in log space (`-inf` where cut off).
fn ln_q_exp(x: f64, q: f64) -> f64 {
    if q == 1.0 {
        return x;
    }
    let base = (1.0 - q) * x;
    if base <= -1.0 {
        return f64::NEG_INFINITY;
    }
    base.ln_1p() / (1.0 - q)
}

/// Thermo fusion with the graph system's Boltzmann factor replaced by a
/// Tsallis q-exponential at the same temperature.
pub fn tsallis_fuse(
    v: &CalibratedList,
    g: &CalibratedList,
    alpha: f64,
    beta: f64,
    q: f64,
    k: usize,
) -> Result<FusedRanking> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::invalid(format!("tsallis q must be positive, got {q}")));
    }
    let mut g2 = g.clone();
    if !g.is_empty() {
        let t = g.temperature;
        let logw: Vec<f64> = g.entries.iter().map(|d| ln_q_exp(-d.energy / t, q)).collect();
        let probs = crate::calibrate::softmax(logw.iter().copied());
        for (d, p) in g2.entries.iter_mut().zip(probs) {
            d.probability = p;
        }
    }
    Ok(thermo_fuse(v, &g2, alpha, beta, k))
}

/// Kendall's τ-a over paired observations; 0 for fewer than two pairs.
pub fn kendall_tau(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len();
    if n < 2 {
        return 0.0;
    }
    let mut s = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            let dx = pairs[i].0 - pairs[j].0;
            let dy = pairs[i].1 - pairs[j].1;
            let prod = dx * dy;
            if prod > 0.0 {
                s += 1;
            } else if prod < 0.0 {
                s -= 1;
            }
        }
    }
    s as f64 / (n * (n - 1) / 2) as f64
}

/// Gumbel copula `C_θ(u, v) = exp(−((−ln u)^θ + (−ln v)^θ)^(1/θ))` on the
/// normalized values. With [`CopulaTheta::Auto`], θ = 1/(1−τ) from Kendall's
/// τ over the overlap, clamped to [1, 20].
pub fn gumbel_copula_fuse(
    v: &CalibratedList,
    g: &CalibratedList,
    theta: CopulaTheta,
    eps: f64,
    k: usize,
) -> Result<FusedRanking> {
    let theta = match theta {
        CopulaTheta::Fixed(t) if t >= 1.0 && t.is_finite() => t,
        CopulaTheta::Fixed(t) => return Err(Error::invalid(format!("copula theta must be ≥ 1, got {t}"))),
        CopulaTheta::Auto => estimate_theta(v, g),
    };
    Ok(rank_joined(v, g, k, |j| {
        let u = j.v.map_or(eps, |d| d.value.clamp(eps, 1.0));
        let w = j.g.map_or(eps, |d| d.value.clamp(eps, 1.0));
        let s = (-u.ln()).powf(theta) + (-w.ln()).powf(theta);
        // C = exp(−s^(1/θ)); rank by the exponent to avoid underflow ties
        -s.powf(1.0 / theta)
    }))
}

pub(crate) fn estimate_theta(v: &CalibratedList, g: &CalibratedList) -> f64 {
    let pairs: Vec<(f64, f64)> = join(v, g)
        .iter()
        .filter_map(|j| Some((j.v?.value, j.g?.value)))
        .collect();
    let tau = kendall_tau(&pairs);
    let theta = if tau >= 1.0 { f64::INFINITY } else { 1.0 / (1.0 - tau) };
    theta.clamp(1.0, 20.0)
}

/// Interference sum `P_v + P_g + 2·√(P_v·P_g)·cos θ`, absent probabilities
/// floored at `eps`.
pub fn quantum_fuse(v: &CalibratedList, g: &CalibratedList, theta: f64, eps: f64, k: usize) -> FusedRanking {
    let c = theta.cos();
    rank_joined(v, g, k, |j| {
        let pv = j.v.map_or(eps, |d| d.probability.max(eps));
        let pg = j.g.map_or(eps, |d| d.probability.max(eps));
        pv + pg + 2.0 * (pv * pg).sqrt() * c
    })
}

/// Maps each system's normalized values onto a standard normal by quantile
/// matching, then mixes additively. An absent document sits at the bottom
/// quantile `Φ⁻¹(ε)`.
pub fn ot_align_fuse(v: &CalibratedList, g: &CalibratedList, alpha: f64, eps: f64, k: usize) -> FusedRanking {
    let normal = Normal::standard();
    let z = |p: f64| normal.inverse_cdf(p.clamp(eps, 1.0 - eps));
    let floor = z(eps);
    rank_joined(v, g, k, |j| {
        let zv = j.v.map_or(floor, |d| z(d.value));
        let zg = j.g.map_or(floor, |d| z(d.value));
        alpha * zv + (1.0 - alpha) * zg
    })
}

/// Exact 1-Wasserstein distance between two empirical distributions,
/// `∫₀¹ |F⁻¹(u) − G⁻¹(u)| du`. Zero if either sample is empty.
pub fn wasserstein_1(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut u = 0.0;
    let mut total = 0.0;
    while i < n && j < m {
        let next_a = (i + 1) as f64 / n as f64;
        let next_b = (j + 1) as f64 / m as f64;
        let next = next_a.min(next_b);
        total += (next - u) * (a[i] - b[j]).abs();
        u = next;
        if next_a <= next {
            i += 1;
        }
        if next_b <= next {
            j += 1;
        }
    }
    total
}

/// Thermo fusion with each system's temperature scaled by
/// `1 + γ·W₁` between the two systems' normalized-value distributions.
pub fn wasserstein_t_fuse(
    v: &CalibratedList,
    g: &CalibratedList,
    alpha: f64,
    beta: f64,
    t0: Option<f64>,
    gamma: f64,
    k: usize,
) -> FusedRanking {
    let va: Vec<f64> = v.entries.iter().map(|d| d.value).collect();
    let ga: Vec<f64> = g.entries.iter().map(|d| d.value).collect();
    let scale = 1.0 + gamma * wasserstein_1(&va, &ga);
    let retemper = |c: &CalibratedList| {
        let mut c = c.clone();
        if c.is_empty() {
            return c;
        }
        c.temperature = t0.unwrap_or(c.temperature) * scale;
        let p = boltzmann(&c.energies(), c.temperature);
        for (d, p) in c.entries.iter_mut().zip(p) {
            d.probability = p;
        }
        c
    };
    thermo_fuse(&retemper(v), &retemper(g), alpha, beta, k)
}
