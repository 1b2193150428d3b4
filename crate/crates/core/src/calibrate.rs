//! Per-system score calibration.
//!
//! Raw scores are mapped to a unit-free value (percentile rank, min-max or
//! score/max), converted to energies `E = -ln(v + ε)`, and turned into a
//! Boltzmann distribution `P ∝ exp(-E / T)` within the system. With the
//! automatic temperature, `T` is half the mean energy.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::retrieve::{ScoreList, System};

pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const TEMPERATURE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalizer {
    #[default]
    Pit,
    MinMax,
    RawMax,
}

impl fmt::Display for Normalizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalizer::Pit => "pit",
            Normalizer::MinMax => "minmax",
            Normalizer::RawMax => "rawmax",
        })
    }
}

impl FromStr for Normalizer {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pit" => Ok(Normalizer::Pit),
            "minmax" => Ok(Normalizer::MinMax),
            "rawmax" => Ok(Normalizer::RawMax),
            other => Err(Error::invalid(format!("unknown normalizer {other:?}"))),
        }
    }
}

/// `auto` (half the mean energy) or a fixed positive temperature.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum TemperatureMode {
    #[default]
    Auto,
    Fixed(f64),
}

impl fmt::Display for TemperatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemperatureMode::Auto => f.write_str("auto"),
            TemperatureMode::Fixed(t) => write!(f, "{t}"),
        }
    }
}

impl FromStr for TemperatureMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(TemperatureMode::Auto);
        }
        let t: f64 = s
            .parse()
            .map_err(|_| Error::invalid(format!("temperature must be \"auto\" or a number, got {s:?}")))?;
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::invalid(format!("fixed temperature must be positive, got {t}")));
        }
        Ok(TemperatureMode::Fixed(t))
    }
}

impl Serialize for TemperatureMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TemperatureMode::Auto => s.serialize_str("auto"),
            TemperatureMode::Fixed(t) => s.serialize_f64(*t),
        }
    }
}

impl<'de> Deserialize<'de> for TemperatureMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(t) => TemperatureMode::from_str(&t.to_string()),
            Raw::Str(s) => TemperatureMode::from_str(&s),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// Empirical CDF value of each entry, in list order:
/// `|{j : s_j ≤ s_i}| / N`. Tied scores share the larger percentile.
pub fn pit_normalize(list: &ScoreList) -> Result<Vec<f64>> {
    let entries = list.entries();
    if entries.is_empty() {
        return Err(Error::EmptyScoreList);
    }
    let n = entries.len();
    let mut out = vec![0.0; n];
    // Entries are sorted descending, so the number of scores ≤ s_i is
    // n minus the index where s_i's tie group starts.
    let mut group_start = 0;
    for i in 0..n {
        if entries[i].score != entries[group_start].score {
            group_start = i;
        }
        out[i] = (n - group_start) as f64 / n as f64;
    }
    Ok(out)
}

/// `(s - min) / (max - min)`; a constant list maps to all ones.
pub fn minmax_normalize(list: &ScoreList) -> Result<Vec<f64>> {
    if list.is_empty() {
        return Err(Error::EmptyScoreList);
    }
    let (min, max) = list
        .scores()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s), hi.max(s)));
    let span = max - min;
    Ok(list
        .scores()
        .map(|s| if span > 0.0 { (s - min) / span } else { 1.0 })
        .collect())
}

/// `s / max`; requires a positive maximum.
pub fn rawmax_normalize(list: &ScoreList) -> Result<Vec<f64>> {
    let max = list.scores().fold(f64::NEG_INFINITY, f64::max);
    if list.is_empty() {
        return Err(Error::EmptyScoreList);
    }
    if max <= 0.0 {
        return Err(Error::NonPositiveMax(max));
    }
    Ok(list.scores().map(|s| s / max).collect())
}

pub fn normalize(list: &ScoreList, normalizer: Normalizer) -> Result<Vec<f64>> {
    match normalizer {
        Normalizer::Pit => pit_normalize(list),
        Normalizer::MinMax => minmax_normalize(list),
        Normalizer::RawMax => rawmax_normalize(list),
    }
}

pub fn energies(values: &[f64], epsilon: f64) -> Vec<f64> {
    values.iter().map(|p| -(p + epsilon).ln()).collect()
}

/// Half the mean energy, floored at [`TEMPERATURE_FLOOR`] (the mean can be
/// non-positive when every value is 1).
pub fn auto_temperature(energies: &[f64]) -> f64 {
    if energies.is_empty() {
        return TEMPERATURE_FLOOR;
    }
    let t = energies.iter().sum::<f64>() / energies.len() as f64 / 2.0;
    if t > TEMPERATURE_FLOOR {
        t
    } else {
        TEMPERATURE_FLOOR
    }
}

/// Softmax of `-E / T`, shifted by the maximum logit.
pub fn boltzmann(energies: &[f64], temperature: f64) -> Vec<f64> {
    softmax(energies.iter().map(|e| -e / temperature))
}

pub(crate) fn softmax(logits: impl Iterator<Item = f64> + Clone) -> Vec<f64> {
    let m = logits.clone().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logits.map(|l| (l - m).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedDoc {
    pub id: String,
    pub raw: f64,
    /// Normalized value fed into the energy (the percentile under PIT).
    pub value: f64,
    pub energy: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedList {
    pub system: System,
    /// Same order as the source [`ScoreList`].
    pub entries: Vec<CalibratedDoc>,
    pub temperature: f64,
    pub epsilon: f64,
    pub normalizer: Normalizer,
}

impl CalibratedList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&CalibratedDoc> {
        self.entries.iter().find(|d| d.id == id)
    }

    pub fn probabilities(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|d| d.probability)
    }

    pub fn energies(&self) -> Vec<f64> {
        self.entries.iter().map(|d| d.energy).collect()
    }
}

/// Runs normalization, energies, temperature and Boltzmann weighting.
///
/// Min-max and raw/max values stand in for the percentile in the energy;
/// negative raw/max values are clamped to zero.
pub fn calibrate(
    list: &ScoreList,
    normalizer: Normalizer,
    temperature: TemperatureMode,
    epsilon: f64,
) -> Result<CalibratedList> {
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    let mut values = normalize(list, normalizer)?;
    if normalizer == Normalizer::RawMax {
        values.iter_mut().for_each(|v| *v = v.max(0.0));
    }
    let e = energies(&values, epsilon);
    let t = match temperature {
        TemperatureMode::Auto => auto_temperature(&e),
        TemperatureMode::Fixed(t) if t > 0.0 && t.is_finite() => t,
        TemperatureMode::Fixed(t) => {
            return Err(Error::invalid(format!("fixed temperature must be positive, got {t}")))
        }
    };
    let p = boltzmann(&e, t);
    let entries = list
        .entries()
        .iter()
        .zip(values)
        .zip(e)
        .zip(p)
        .map(|(((d, value), energy), probability)| CalibratedDoc {
            id: d.id.clone(),
            raw: d.score,
            value,
            energy,
            probability,
        })
        .collect();
    Ok(CalibratedList {
        system: list.system(),
        entries,
        temperature: t,
        epsilon,
        normalizer,
    })
}
