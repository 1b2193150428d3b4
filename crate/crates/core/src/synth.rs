//! Synthetic multi-hop corpora with controlled score regimes.
//!
//! Query and background passage embeddings share one fixed direction, so
//! unrelated query–passage cosines form a narrow Gaussian around
//! `cosine_mean`. Noise is confined to enough coordinates to give a spread
//! of `cosine_sd`. Gold passages are placed at an exact cosine to their query,
//! falling linearly from `gold_cosine_first` at hop 1 to `gold_cosine_last`
//! at the last hop.
//!
//! Entities live in topical clusters, one per query. Chain passages are
//! linked hop to hop by bridge entities. Distractor passages mention the
//! topic and bridge entities, which enlarges the PPR pool. With probability
//! `alias_rate` a bridge is written as a surface variant in the later
//! passage, breaking the link until synonym linking repairs it.

use std::collections::BTreeSet;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::calibrate::{minmax_normalize, pit_normalize};
use crate::corpus::{Corpus, Dataset, EmbeddingStore, Passage, Query, QuerySet};
use crate::retrieve::ScoreList;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    /// Total corpus size: chain, distractor and background passages.
    pub n_passages: usize,
    pub n_queries: usize,
    pub min_hops: usize,
    pub max_hops: usize,
    pub dimension: usize,
    /// Target mean and spread of unrelated query–passage cosines.
    pub cosine_mean: f64,
    pub cosine_sd: f64,
    pub gold_cosine_first: f64,
    pub gold_cosine_last: f64,
    pub gold_cosine_jitter: f64,
    /// Background entity vocabulary, split evenly across topic clusters.
    pub entity_vocab: usize,
    pub min_entities: usize,
    pub max_entities: usize,
    /// Cluster entities added to every chain passage except the last hop.
    pub chain_fillers: usize,
    /// Chance that a background passage also mentions an entity from another
    /// cluster.
    pub cross_topic_rate: f64,
    pub alias_rate: f64,
    pub alias_cosine: f64,
    /// Expected distractor passages per topic or bridge entity.
    pub distractor_density: f64,
    pub entity_dimension: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            n_passages: 4000,
            n_queries: 500,
            min_hops: 2,
            max_hops: 4,
            dimension: 2048,
            cosine_mean: 0.09,
            cosine_sd: 0.02,
            gold_cosine_first: 0.45,
            gold_cosine_last: 0.15,
            gold_cosine_jitter: 0.02,
            entity_vocab: 6000,
            min_entities: 2,
            max_entities: 4,
            chain_fillers: 1,
            cross_topic_rate: 0.02,
            alias_rate: 0.0,
            alias_cosine: 0.92,
            distractor_density: 1.0,
            entity_dimension: 64,
        }
    }
}

impl SynthConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn local_vocab(&self) -> usize {
        (self.entity_vocab / self.n_queries.max(1)).max(1)
    }

    /// Noise coordinates needed for the target cosine spread.
    fn noise_dims(&self) -> usize {
        let ideal = ((1.0 - self.cosine_mean) / self.cosine_sd).powi(2).round() as usize;
        ideal.clamp(1, self.dimension - 1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(m));
        if self.n_queries == 0 {
            return bad("n_queries must be at least 1".into());
        }
        if self.min_hops < 2 || self.min_hops > self.max_hops {
            return bad(format!(
                "hop range [{}, {}] invalid; need 2 ≤ min ≤ max",
                self.min_hops, self.max_hops
            ));
        }
        if self.dimension < 2 || self.entity_dimension < 2 {
            return bad("embedding dimensions must be at least 2".into());
        }
        if self.min_entities == 0 || self.min_entities > self.max_entities {
            return bad(format!(
                "entities per passage [{}, {}] invalid",
                self.min_entities, self.max_entities
            ));
        }
        let local = self.local_vocab();
        if self.max_entities > local || self.chain_fillers > local {
            return bad(format!(
                "up to {} entities per passage but each topic cluster has only {local}",
                self.max_entities.max(self.chain_fillers)
            ));
        }
        if !(self.cosine_mean > 0.0 && self.cosine_mean < 1.0 && self.cosine_sd > 0.0) {
            return bad("cosine_mean must be in (0,1) and cosine_sd positive".into());
        }
        // noise spread is (1 − mean)/√(noise dims); allow ~5% above target
        let ideal = ((1.0 - self.cosine_mean) / self.cosine_sd).powi(2);
        if ideal > 1.1 * (self.dimension - 1) as f64 {
            return bad(format!(
                "dimension {} is too small for cosine_sd {}; need at least {}",
                self.dimension,
                self.cosine_sd,
                (ideal / 1.1).ceil() as usize + 1
            ));
        }
        for (name, v) in [
            ("gold_cosine_first", self.gold_cosine_first),
            ("gold_cosine_last", self.gold_cosine_last),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return bad(format!("{name} must be in (0,1), got {v}"));
            }
        }
        for (name, v) in [
            ("alias_rate", self.alias_rate),
            ("cross_topic_rate", self.cross_topic_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must be in [0,1], got {v}"));
            }
        }
        if !(self.alias_cosine > 0.0 && self.alias_cosine <= 1.0) {
            return bad("alias_cosine must be in (0,1]".into());
        }
        if !(self.distractor_density >= 0.0 && self.distractor_density.is_finite()) || self.gold_cosine_jitter < 0.0 {
            return bad("distractor_density and gold_cosine_jitter must be non-negative".into());
        }
        Ok(())
    }
}

struct Draft {
    entities: Vec<String>,
    vector: Vec<f64>,
}

struct Geometry {
    dimension: usize,
    noise_dims: usize,
    shared: f64,
}

impl Geometry {
    fn unit_noise(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut v = vec![0.0; self.dimension];
        for x in &mut v[1..=self.noise_dims] {
            *x = rng.sample(StandardNormal);
        }
        normalize(&mut v);
        v
    }

    /// Shared direction plus isotropic noise.
    fn background(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut v = self.unit_noise(rng);
        let s = (1.0 - self.shared * self.shared).sqrt();
        v.iter_mut().for_each(|x| *x *= s);
        v[0] = self.shared;
        v
    }

    /// A unit vector at cosine `t` to `q`, otherwise background-like.
    fn aligned(&self, q: &[f64], t: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut r = self.background(rng);
        let proj = dot(&r, q);
        r.iter_mut().zip(q).for_each(|(x, qi)| *x -= proj * qi);
        normalize(&mut r);
        let s = (1.0 - t * t).sqrt();
        r.iter().zip(q).map(|(x, qi)| t * qi + s * x).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

fn random_unit(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    normalize(&mut v);
    v
}

/// A unit vector at cosine `c` to the unit vector `e`.
fn variant_of(e: &[f64], c: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut u = random_unit(e.len(), rng);
    let proj = dot(&u, e);
    u.iter_mut().zip(e).for_each(|(x, ei)| *x -= proj * ei);
    normalize(&mut u);
    let s = (1.0 - c * c).sqrt();
    e.iter().zip(&u).map(|(a, b)| c * a + s * b).collect()
}

fn local_entity(cluster: usize, j: usize) -> String {
    format!("ent-{cluster:04}-{j:03}")
}

pub fn alias_of(name: &str) -> String {
    format!("{name} (alt)")
}

/// Counts per chain entity: the integer part plus one more with the
/// fractional probability.
fn distractor_count(density: f64, rng: &mut ChaCha8Rng) -> usize {
    let whole = density.floor();
    whole as usize + usize::from(rng.gen::<f64>() < density - whole)
}

/// Generates a dataset. Identical configs give identical datasets.
pub fn generate(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let geo = Geometry {
        dimension: cfg.dimension,
        noise_dims: cfg.noise_dims(),
        shared: cfg.cosine_mean.sqrt(),
    };
    let local = cfg.local_vocab();
    let pick_local = |cluster: usize, n: usize, rng: &mut ChaCha8Rng| -> Vec<String> {
        rand::seq::index::sample(rng, local, n)
            .into_iter()
            .map(|j| local_entity(cluster, j))
            .collect()
    };

    let mut drafts: Vec<Draft> = Vec::new();
    let mut chains: Vec<Vec<usize>> = Vec::with_capacity(cfg.n_queries);
    let mut query_vectors = Vec::with_capacity(cfg.n_queries);
    let mut topics = Vec::with_capacity(cfg.n_queries);
    let mut chain_entities: Vec<(usize, String)> = Vec::new();
    let mut aliased: BTreeSet<String> = BTreeSet::new();

    for q in 0..cfg.n_queries {
        let hops = rng.gen_range(cfg.min_hops..=cfg.max_hops);
        let qv = geo.background(&mut rng);
        let topic = format!("topic-{q:04}");
        let bridges: Vec<String> = (1..hops).map(|k| format!("bridge-{q:04}-{k}")).collect();
        let mut chain = Vec::with_capacity(hops);
        for h in 0..hops {
            let frac = h as f64 / (hops - 1) as f64;
            let target = cfg.gold_cosine_first + (cfg.gold_cosine_last - cfg.gold_cosine_first) * frac;
            let jitter: f64 = rng.sample::<f64, _>(StandardNormal) * cfg.gold_cosine_jitter;
            let t = (target + jitter).clamp(0.0, 0.99);
            let mut entities = Vec::new();
            if h == 0 {
                entities.push(topic.clone());
            } else {
                let b = &bridges[h - 1];
                if rng.gen::<f64>() < cfg.alias_rate {
                    aliased.insert(b.clone());
                    entities.push(alias_of(b));
                } else {
                    entities.push(b.clone());
                }
            }
            if h + 1 < hops {
                entities.push(bridges[h].clone());
                entities.extend(pick_local(q, cfg.chain_fillers, &mut rng));
            } else {
                // the answer passage stays off the cluster graph
                entities.push(format!("answer-{q:04}"));
            }
            chain.push(drafts.len());
            drafts.push(Draft {
                entities,
                vector: geo.aligned(&qv, t, &mut rng),
            });
        }
        chain_entities.push((q, topic.clone()));
        chain_entities.extend(bridges.into_iter().map(|b| (q, b)));
        chains.push(chain);
        query_vectors.push(qv);
        topics.push(topic);
    }

    for (cluster, entity) in &chain_entities {
        for _ in 0..distractor_count(cfg.distractor_density, &mut rng) {
            let k = rng.gen_range(cfg.min_entities..=cfg.max_entities);
            let mut entities = vec![entity.clone()];
            entities.extend(pick_local(*cluster, k.saturating_sub(1), &mut rng));
            drafts.push(Draft {
                entities,
                vector: geo.background(&mut rng),
            });
        }
    }

    let background = cfg.n_passages.checked_sub(drafts.len()).ok_or_else(|| {
        Error::invalid(format!(
            "{} chain and distractor passages exceed n_passages = {}",
            drafts.len(),
            cfg.n_passages
        ))
    })?;
    for _ in 0..background {
        let cluster = rng.gen_range(0..cfg.n_queries);
        let k = rng.gen_range(cfg.min_entities..=cfg.max_entities);
        let mut entities = pick_local(cluster, k, &mut rng);
        if cfg.n_queries > 1 && rng.gen::<f64>() < cfg.cross_topic_rate {
            let other = (cluster + rng.gen_range(1..cfg.n_queries)) % cfg.n_queries;
            let j = rng.gen_range(0..local);
            entities[0] = local_entity(other, j);
        }
        drafts.push(Draft {
            entities,
            vector: geo.background(&mut rng),
        });
    }

    // Ids are assigned in shuffled order so that id tie-breaks carry no
    // information about gold status.
    let mut order: Vec<usize> = (0..drafts.len()).collect();
    order.shuffle(&mut rng);
    let mut id_of = vec![String::new(); drafts.len()];
    for (slot, &d) in order.iter().enumerate() {
        id_of[d] = format!("p{slot:06}");
    }

    let mut entity_names: BTreeSet<String> = BTreeSet::new();
    let mut passages = Vec::with_capacity(drafts.len());
    let mut passage_vectors = Vec::with_capacity(drafts.len());
    for (d, draft) in drafts.into_iter().enumerate() {
        entity_names.extend(draft.entities.iter().cloned());
        let text = if draft.entities.is_empty() {
            "An unremarkable passage.".to_string()
        } else {
            format!("This passage mentions {}.", draft.entities.join(", "))
        };
        passages.push(Passage {
            id: id_of[d].clone(),
            text,
            entity_mentions: draft.entities,
        });
        passage_vectors.push((id_of[d].clone(), draft.vector));
    }

    let mut entity_vectors = Vec::with_capacity(entity_names.len());
    for name in &entity_names {
        if name.ends_with(" (alt)") {
            continue;
        }
        let e = random_unit(cfg.entity_dimension, &mut rng);
        if aliased.contains(name) {
            entity_vectors.push((alias_of(name), variant_of(&e, cfg.alias_cosine, &mut rng)));
        }
        entity_vectors.push((name.clone(), e));
    }

    let queries: Vec<Query> = chains
        .iter()
        .enumerate()
        .map(|(q, chain)| Query {
            id: format!("q{q:05}"),
            text: format!("Which answer is reached from {} by following its chain?", topics[q]),
            gold_chain: chain.iter().map(|&d| id_of[d].clone()).collect(),
            entities: vec![topics[q].clone()],
        })
        .collect();

    let corpus = Corpus::from_passages(passages)?;
    let queries = QuerySet::new(queries, &corpus)?;
    Ok(Dataset {
        corpus,
        queries,
        passage_embeddings: EmbeddingStore::from_vectors(passage_vectors, Some(cfg.dimension))?,
        query_embeddings: EmbeddingStore::from_vectors(
            query_vectors
                .into_iter()
                .enumerate()
                .map(|(q, v)| (format!("q{q:05}"), v)),
            Some(cfg.dimension),
        )?,
        entity_embeddings: Some(EmbeddingStore::from_vectors(
            entity_vectors,
            Some(cfg.entity_dimension),
        )?),
    })
}

/// Cosines between queries and passages outside their gold chains, drawn
/// uniformly with replacement.
pub fn sample_unrelated_cosines(data: &Dataset, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let queries = data.queries.queries();
    let passages = data.passage_embeddings.ids();
    let mut out = Vec::with_capacity(n);
    if queries.is_empty() || passages.is_empty() {
        return out;
    }
    while out.len() < n {
        let q = &queries[rng.gen_range(0..queries.len())];
        let p = &passages[rng.gen_range(0..passages.len())];
        if q.gold_chain.contains(p) {
            continue;
        }
        let (Some(qv), Some(pv)) = (data.query_embeddings.get(&q.id), data.passage_embeddings.get(p)) else {
            continue;
        };
        out.push(dot(qv, pv));
    }
    out
}

/// Equal-width histogram over `[lo, hi]`; the top edge is inclusive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub series: String,
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(series: &str, values: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        let mut counts = vec![0; if values.is_empty() { 0 } else { bins }];
        let width = (hi - lo) / bins as f64;
        for &v in values {
            let b = if width > 0.0 {
                ((v - lo) / width).floor() as isize
            } else {
                0
            };
            counts[b.clamp(0, bins as isize - 1) as usize] += 1;
        }
        Self {
            series: series.to_string(),
            lo,
            hi,
            counts,
        }
    }

    /// Histogram over the observed range.
    pub fn spanning(series: &str, values: &[f64], bins: usize) -> Self {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if values.is_empty() {
            return Self::new(series, values, 0.0, 0.0, bins);
        }
        Self::new(series, values, lo, hi, bins)
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn fraction(&self, bin: usize) -> f64 {
        self.counts[bin] as f64 / self.total() as f64
    }
}

/// Kolmogorov–Smirnov distance between the sample and Uniform(0, 1).
pub fn ks_to_uniform(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            ((i + 1) as f64 / n - x).max(x - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KsSummary {
    pub series: String,
    /// Lists with at least the required number of distinct scores.
    pub lists: usize,
    pub values: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeReport {
    pub histograms: Vec<Histogram>,
    pub ks: Vec<KsSummary>,
}

impl RegimeReport {
    pub fn histogram(&self, series: &str) -> Option<&Histogram> {
        self.histograms.iter().find(|h| h.series == series)
    }

    pub fn ks(&self, series: &str) -> Option<&KsSummary> {
        self.ks.iter().find(|k| k.series == series)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "series,bin,bin_low,bin_high,count,fraction")?;
        for h in &self.histograms {
            let width = (h.hi - h.lo) / h.counts.len().max(1) as f64;
            for (b, &c) in h.counts.iter().enumerate() {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    h.series,
                    b,
                    h.lo + width * b as f64,
                    h.lo + width * (b + 1) as f64,
                    c,
                    h.fraction(b)
                )?;
            }
        }
        Ok(())
    }
}

fn distinct(list: &ScoreList) -> usize {
    let mut s: Vec<f64> = list.scores().collect();
    s.dedup();
    s.len()
}

/// Raw, percentile and min-max score distributions of both systems, and the
/// KS distance to uniform of each percentile marginal pooled over lists with
/// at least `min_distinct` distinct scores.
pub fn regime_report(
    vector: &[ScoreList],
    graph: &[ScoreList],
    bins: usize,
    min_distinct: usize,
) -> Result<RegimeReport> {
    let mut histograms = Vec::new();
    let mut ks = Vec::new();
    for (name, lists) in [("vector", vector), ("graph", graph)] {
        let lists: Vec<&ScoreList> = lists.iter().filter(|l| !l.is_empty()).collect();
        let raw: Vec<f64> = lists.iter().flat_map(|l| l.scores()).collect();
        let mut pit = Vec::new();
        let mut minmax = Vec::new();
        let mut ks_values = Vec::new();
        let mut ks_lists = 0;
        for l in &lists {
            let p = pit_normalize(l)?;
            if distinct(l) >= min_distinct {
                ks_lists += 1;
                ks_values.extend_from_slice(&p);
            }
            pit.extend(p);
            minmax.extend(minmax_normalize(l)?);
        }
        histograms.push(Histogram::spanning(&format!("{name}_raw"), &raw, bins));
        histograms.push(Histogram::new(&format!("{name}_pit"), &pit, 0.0, 1.0, bins));
        histograms.push(Histogram::new(&format!("{name}_minmax"), &minmax, 0.0, 1.0, bins));
        ks.push(KsSummary {
            series: format!("{name}_pit"),
            lists: ks_lists,
            values: ks_values.len(),
            distance: if ks_values.is_empty() {
                f64::NAN
            } else {
                ks_to_uniform(&ks_values)
            },
        });
    }
    Ok(RegimeReport { histograms, ks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieve::{EntityGraph, System};

    fn small() -> SynthConfig {
        SynthConfig {
            n_passages: 600,
            n_queries: 40,
            dimension: 256,
            entity_vocab: 800,
            cosine_sd: 0.06,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a, b);
        let c = generate(&SynthConfig { seed: 8, ..small() }).unwrap();
        assert_ne!(a.corpus, c.corpus);
    }

    #[test]
    fn chains_have_two_to_four_hops() {
        let d = generate(&small()).unwrap();
        assert_eq!(d.queries.len(), 40);
        assert_eq!(d.corpus.len(), 600);
        assert!(d.queries.iter().all(|q| (2..=4).contains(&q.hop_count())));
    }

    #[test]
    fn gold_cosines_fall_along_the_chain() {
        let cfg = SynthConfig {
            gold_cosine_jitter: 0.0,
            ..small()
        };
        let d = generate(&cfg).unwrap();
        for q in d.queries.iter() {
            let qv = d.query_embeddings.get(&q.id).unwrap();
            let cos: Vec<f64> = q
                .gold_chain
                .iter()
                .map(|p| dot(qv, d.passage_embeddings.get(p).unwrap()))
                .collect();
            assert!((cos[0] - cfg.gold_cosine_first).abs() < 1e-9);
            assert!((cos.last().unwrap() - cfg.gold_cosine_last).abs() < 1e-9);
            assert!(cos.windows(2).all(|w| w[0] > w[1]));
        }
    }

    #[test]
    fn alias_free_chains_are_connected() {
        let d = generate(&small()).unwrap();
        let g = EntityGraph::build(&d.corpus);
        for q in d.queries.iter() {
            for w in q.gold_chain.windows(2) {
                let a: BTreeSet<usize> = g.passage_entities(&w[0]).iter().copied().collect();
                assert!(
                    g.passage_entities(&w[1]).iter().any(|e| a.contains(e)),
                    "{} broken",
                    q.id
                );
            }
        }
    }

    #[test]
    fn aliases_sit_close_to_their_canonical() {
        let d = generate(&SynthConfig {
            alias_rate: 1.0,
            ..small()
        })
        .unwrap();
        let e = d.entity_embeddings.unwrap();
        let alts: Vec<&str> = e
            .ids()
            .iter()
            .filter(|i| i.ends_with(" (alt)"))
            .map(String::as_str)
            .collect();
        assert!(!alts.is_empty());
        for alt in alts {
            let base = alt.trim_end_matches(" (alt)");
            let c = dot(e.get(alt).unwrap(), e.get(base).unwrap());
            assert!(c >= 0.9, "{alt}: {c}");
        }
    }

    #[test]
    fn infeasible_configs_are_rejected() {
        assert!(generate(&SynthConfig {
            max_entities: 100,
            ..small()
        })
        .is_err());
        assert!(generate(&SynthConfig {
            n_passages: 10,
            ..small()
        })
        .is_err());
        assert!(generate(&SynthConfig { min_hops: 1, ..small() }).is_err());
    }

    #[test]
    fn ks_of_a_grid_is_its_step() {
        let v: Vec<f64> = (1..=100).map(|i| i as f64 / 100.0).collect();
        assert!((ks_to_uniform(&v) - 0.01).abs() < 1e-12);
    }

    #[test]
    fn empty_lists_give_empty_rows() {
        let r = regime_report(&[ScoreList::empty(System::Vector)], &[], 10, 100).unwrap();
        let mut csv = Vec::new();
        r.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1);
    }
}
