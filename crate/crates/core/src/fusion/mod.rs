//! Fusing a vector and a graph candidate list into one ranking.
//!
//! The main operator ("thermo") mixes the two systems' Boltzmann
//! probabilities and adds a flat bonus for documents both systems returned:
//!
//! ```text
//! score(d) = α·P_v(d) + (1 − α)·P_g(d) + β·1[d ∈ both]
//! ```
//!
//! A document missing from one system contributes zero for that system in
//! additive strategies and the floor `ε` in multiplicative ones.

mod plackett_luce;
mod strategies;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calibrate::{calibrate, CalibratedDoc, CalibratedList, Normalizer, TemperatureMode, DEFAULT_EPSILON};
use crate::error::{Error, Result};
use crate::retrieve::{by_score_then_id, ScoreList};

pub use plackett_luce::{plackett_luce_strengths, PlackettLuceFit};
pub use strategies::{
    gumbel_copula_fuse, kendall_tau, log_linear_fuse, ot_align_fuse, power_mean_fuse, quantum_fuse, tsallis_fuse,
    wasserstein_1, wasserstein_t_fuse,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Thermo,
    Rrf,
    Linear,
    LogLinear,
    PowerMean,
    Tsallis,
    GumbelCopula,
    PlackettLuce,
    Quantum,
    OtAlign,
    WassersteinT,
}

impl Strategy {
    pub const ALL: [Strategy; 11] = [
        Strategy::Thermo,
        Strategy::Rrf,
        Strategy::Linear,
        Strategy::LogLinear,
        Strategy::PowerMean,
        Strategy::Tsallis,
        Strategy::GumbelCopula,
        Strategy::PlackettLuce,
        Strategy::Quantum,
        Strategy::OtAlign,
        Strategy::WassersteinT,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Thermo => "thermo",
            Strategy::Rrf => "rrf",
            Strategy::Linear => "linear",
            Strategy::LogLinear => "log_linear",
            Strategy::PowerMean => "power_mean",
            Strategy::Tsallis => "tsallis",
            Strategy::GumbelCopula => "gumbel_copula",
            Strategy::PlackettLuce => "plackett_luce",
            Strategy::Quantum => "quantum",
            Strategy::OtAlign => "ot_align",
            Strategy::WassersteinT => "wasserstein_t",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown strategy {s:?}")))
    }
}

/// Copula dependence parameter: estimated from overlap documents, or fixed.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum CopulaTheta {
    #[default]
    Auto,
    Fixed(f64),
}

impl FromStr for CopulaTheta {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(CopulaTheta::Auto);
        }
        s.parse()
            .map(CopulaTheta::Fixed)
            .map_err(|_| Error::invalid(format!("copula theta must be \"auto\" or a number, got {s:?}")))
    }
}

impl fmt::Display for CopulaTheta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CopulaTheta::Auto => f.write_str("auto"),
            CopulaTheta::Fixed(t) => write!(f, "{t}"),
        }
    }
}

impl Serialize for CopulaTheta {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            CopulaTheta::Auto => s.serialize_str("auto"),
            CopulaTheta::Fixed(t) => s.serialize_f64(*t),
        }
    }
}

impl<'de> Deserialize<'de> for CopulaTheta {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(t) => Ok(CopulaTheta::Fixed(t)),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrategyParams {
    pub rrf_k0: f64,
    /// Power-mean exponent; must be non-zero.
    pub power_p: f64,
    /// Tsallis q for the graph system; must be positive.
    pub tsallis_q: f64,
    pub copula_theta: CopulaTheta,
    pub quantum_theta: f64,
    /// Base temperature for Wasserstein-T; `None` uses each system's own
    /// automatic temperature.
    pub t0: Option<f64>,
    pub gamma: f64,
    pub pl_iterations: usize,
    pub pl_pseudo_count: f64,
}

impl Default for StrategyParams {
    fn default() -> Self {
        Self {
            rrf_k0: 60.0,
            power_p: 0.5,
            tsallis_q: 1.5,
            copula_theta: CopulaTheta::Auto,
            quantum_theta: 0.0,
            t0: None,
            gamma: 1.0,
            pl_iterations: 200,
            pl_pseudo_count: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub strategy: Strategy,
    pub alpha: f64,
    pub beta: f64,
    /// Output cutoff.
    pub k: usize,
    pub normalizer: Normalizer,
    pub temperature: TemperatureMode,
    pub epsilon: f64,
    pub params: StrategyParams,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Thermo,
            alpha: 0.7,
            beta: 0.0,
            k: 10,
            normalizer: Normalizer::Pit,
            temperature: TemperatureMode::Auto,
            epsilon: DEFAULT_EPSILON,
            params: StrategyParams::default(),
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid(format!(
                "beta {} must be finite and non-negative",
                self.beta
            )));
        }
        if self.k == 0 {
            return Err(Error::invalid("K must be at least 1"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        let p = &self.params;
        match self.strategy {
            Strategy::PowerMean if p.power_p == 0.0 || !p.power_p.is_finite() => {
                Err(Error::invalid("power mean exponent p must be finite and non-zero"))
            }
            Strategy::Tsallis if !(p.tsallis_q > 0.0 && p.tsallis_q.is_finite()) => Err(Error::invalid(format!(
                "tsallis q must be positive, got {}",
                p.tsallis_q
            ))),
            Strategy::GumbelCopula => match p.copula_theta {
                CopulaTheta::Fixed(t) if !(t >= 1.0 && t.is_finite()) => {
                    Err(Error::invalid(format!("copula theta must be ≥ 1, got {t}")))
                }
                _ => Ok(()),
            },
            Strategy::Rrf if !(p.rrf_k0 >= 0.0 && p.rrf_k0.is_finite()) => {
                Err(Error::invalid("rrf k0 must be non-negative"))
            }
            Strategy::WassersteinT if matches!(p.t0, Some(t) if !(t > 0.0)) || !(p.gamma >= 0.0) => {
                Err(Error::invalid("wasserstein-T needs t0 > 0 and gamma ≥ 0"))
            }
            Strategy::PlackettLuce if !(p.pl_pseudo_count > 0.0) || p.pl_iterations == 0 => Err(Error::invalid(
                "plackett-luce needs a positive pseudo-count and iteration cap",
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedDoc {
    pub id: String,
    pub score: f64,
    pub in_vector: bool,
    pub in_graph: bool,
    pub consensus: bool,
}

/// Final candidates, sorted by score descending with ids ascending on ties.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FusedRanking {
    pub entries: Vec<FusedDoc>,
}

impl FusedRanking {
    /// Sorts, truncates to `k` and wraps.
    pub fn from_unsorted(mut entries: Vec<FusedDoc>, k: usize) -> Self {
        entries.sort_by(|a, b| by_score_then_id(a.score, &a.id, b.score, &b.id));
        entries.truncate(k);
        Self { entries }
    }

    /// A single system's list taken as-is (used for the vector-only baseline).
    pub fn from_score_list(list: &ScoreList, k: usize) -> Self {
        let vector = list.system() == crate::retrieve::System::Vector;
        Self {
            entries: list
                .entries()
                .iter()
                .take(k)
                .map(|d| FusedDoc {
                    id: d.id.clone(),
                    score: d.score,
                    in_vector: vector,
                    in_graph: !vector,
                    consensus: false,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.entries.iter().map(|d| d.id.clone()).collect()
    }
}

/// A document of `v ∪ g` with its per-system calibration, if present.
pub(crate) struct Joined<'a> {
    pub id: &'a str,
    pub v: Option<&'a CalibratedDoc>,
    pub g: Option<&'a CalibratedDoc>,
}

pub(crate) fn join<'a>(v: &'a CalibratedList, g: &'a CalibratedList) -> Vec<Joined<'a>> {
    let mut m: BTreeMap<&str, (Option<&CalibratedDoc>, Option<&CalibratedDoc>)> = BTreeMap::new();
    for d in &v.entries {
        m.entry(d.id.as_str()).or_default().0 = Some(d);
    }
    for d in &g.entries {
        m.entry(d.id.as_str()).or_default().1 = Some(d);
    }
    m.into_iter().map(|(id, (v, g))| Joined { id, v, g }).collect()
}

/// Scores every document of `v ∪ g` with `score` and keeps the top `k`.
pub(crate) fn rank_joined(
    v: &CalibratedList,
    g: &CalibratedList,
    k: usize,
    mut score: impl FnMut(&Joined) -> f64,
) -> FusedRanking {
    let entries = join(v, g)
        .iter()
        .map(|j| FusedDoc {
            id: j.id.to_string(),
            score: score(j),
            in_vector: j.v.is_some(),
            in_graph: j.g.is_some(),
            consensus: j.v.is_some() && j.g.is_some(),
        })
        .collect();
    FusedRanking::from_unsorted(entries, k)
}

fn consensus(j: &Joined) -> f64 {
    if j.v.is_some() && j.g.is_some() {
        1.0
    } else {
        0.0
    }
}

/// `α·P_v + (1 − α)·P_g + β·consensus`, absent systems contributing zero.
pub fn thermo_fuse(v: &CalibratedList, g: &CalibratedList, alpha: f64, beta: f64, k: usize) -> FusedRanking {
    rank_joined(v, g, k, |j| {
        alpha * j.v.map_or(0.0, |d| d.probability)
            + (1.0 - alpha) * j.g.map_or(0.0, |d| d.probability)
            + beta * consensus(j)
    })
}

/// Same mixture over the normalized values instead of probabilities.
pub fn linear_fuse(v: &CalibratedList, g: &CalibratedList, alpha: f64, beta: f64, k: usize) -> FusedRanking {
    rank_joined(v, g, k, |j| {
        alpha * j.v.map_or(0.0, |d| d.value) + (1.0 - alpha) * j.g.map_or(0.0, |d| d.value) + beta * consensus(j)
    })
}

/// Reciprocal rank fusion: `Σ 1 / (k0 + rank)` over the lists holding a
/// document, ranks 1-based. Raw scores are ignored.
pub fn rrf_fuse(v: &ScoreList, g: &ScoreList, k0: f64, k: usize) -> FusedRanking {
    let mut m: BTreeMap<&str, (f64, bool, bool)> = BTreeMap::new();
    for (rank, d) in v.entries().iter().enumerate() {
        let e = m.entry(d.id.as_str()).or_default();
        e.0 += 1.0 / (k0 + (rank + 1) as f64);
        e.1 = true;
    }
    for (rank, d) in g.entries().iter().enumerate() {
        let e = m.entry(d.id.as_str()).or_default();
        e.0 += 1.0 / (k0 + (rank + 1) as f64);
        e.2 = true;
    }
    let entries = m
        .into_iter()
        .map(|(id, (score, in_vector, in_graph))| FusedDoc {
            id: id.to_string(),
            score,
            in_vector,
            in_graph,
            consensus: in_vector && in_graph,
        })
        .collect();
    FusedRanking::from_unsorted(entries, k)
}

fn calibrate_or_empty(list: &ScoreList, cfg: &FusionConfig) -> Result<CalibratedList> {
    if list.is_empty() {
        return Ok(CalibratedList {
            system: list.system(),
            entries: Vec::new(),
            temperature: 1.0,
            epsilon: cfg.epsilon,
            normalizer: cfg.normalizer,
        });
    }
    calibrate(list, cfg.normalizer, cfg.temperature, cfg.epsilon)
}

/// A fused ranking and the strategy that actually produced it (copula and
/// Plackett-Luce fall back to thermo when fewer than two documents overlap).
#[derive(Debug, Clone, PartialEq)]
pub struct Fused {
    pub ranking: FusedRanking,
    pub strategy: Strategy,
}

impl Fused {
    pub fn downgraded(&self, requested: Strategy) -> bool {
        self.strategy != requested
    }
}

/// Calibrates both lists as configured and applies the configured strategy.
pub fn fuse(vector: &ScoreList, graph: &ScoreList, cfg: &FusionConfig) -> Result<Fused> {
    cfg.validate()?;
    let k = cfg.k;
    let p = &cfg.params;
    if cfg.strategy == Strategy::Rrf {
        return Ok(Fused {
            ranking: rrf_fuse(vector, graph, p.rrf_k0, k),
            strategy: Strategy::Rrf,
        });
    }
    let v = calibrate_or_empty(vector, cfg)?;
    let g = calibrate_or_empty(graph, cfg)?;
    let thermo = |v: &CalibratedList, g: &CalibratedList| thermo_fuse(v, g, cfg.alpha, cfg.beta, k);
    let overlap = join(&v, &g).iter().filter(|j| j.v.is_some() && j.g.is_some()).count();

    let (ranking, strategy) = match cfg.strategy {
        Strategy::Thermo => (thermo(&v, &g), Strategy::Thermo),
        Strategy::Linear => (linear_fuse(&v, &g, cfg.alpha, cfg.beta, k), Strategy::Linear),
        Strategy::LogLinear => (log_linear_fuse(&v, &g, cfg.alpha, cfg.epsilon, k), Strategy::LogLinear),
        Strategy::PowerMean => (power_mean_fuse(&v, &g, cfg.alpha, p.power_p, k)?, Strategy::PowerMean),
        Strategy::Tsallis => (
            tsallis_fuse(&v, &g, cfg.alpha, cfg.beta, p.tsallis_q, k)?,
            Strategy::Tsallis,
        ),
        Strategy::GumbelCopula | Strategy::PlackettLuce if overlap < 2 => (thermo(&v, &g), Strategy::Thermo),
        Strategy::GumbelCopula => (
            gumbel_copula_fuse(&v, &g, p.copula_theta, cfg.epsilon, k)?,
            Strategy::GumbelCopula,
        ),
        Strategy::PlackettLuce => (
            plackett_luce::plackett_luce_fuse(&v, &g, cfg.alpha, p, cfg.epsilon, k),
            Strategy::PlackettLuce,
        ),
        Strategy::Quantum => (quantum_fuse(&v, &g, p.quantum_theta, cfg.epsilon, k), Strategy::Quantum),
        Strategy::OtAlign => (ot_align_fuse(&v, &g, cfg.alpha, cfg.epsilon, k), Strategy::OtAlign),
        Strategy::WassersteinT => (
            wasserstein_t_fuse(&v, &g, cfg.alpha, cfg.beta, p.t0, p.gamma, k),
            Strategy::WassersteinT,
        ),
        Strategy::Rrf => unreachable!(),
    };
    Ok(Fused { ranking, strategy })
}
