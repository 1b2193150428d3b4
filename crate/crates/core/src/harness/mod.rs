//! Configuration-driven evaluation: retrieval pools, fusion cells, paired
//! comparison against a vector-only baseline, tune-winner selection and
//! grid sweeps.

mod report;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibrate::Normalizer;
use crate::corpus::{split_of, Dataset, DatasetPaths, Split};
use crate::eval::{Hits, Metric, QueryOutcome};
use crate::fusion::{fuse, FusedRanking, FusionConfig, Strategy};
use crate::ising::{build_coupling, mean_field_rerank, IsingConfig};
use crate::retrieve::{
    cap_pool, graph_passage_scores, ppr, seed_entities_for_query, vector_topk, EntityGraph, PprConfig, ScoreList,
    System,
};
use crate::synth::{generate, SynthConfig};
use crate::{Error, Result};

pub use report::{write_outputs, CellReport, MetricResult, Report, SplitReport, SweepSummary, TierRow};

/// Where the evaluation data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Files(DatasetPaths),
    Synthetic(SynthConfig),
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DataSource::Files(paths) => Dataset::load(paths),
            DataSource::Synthetic(cfg) => generate(cfg),
        }
    }
}

/// One evaluated configuration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CellConfig {
    pub fusion: FusionConfig,
    /// Graph-only candidate cap; `None` is uncapped.
    pub dk: Option<usize>,
    /// Link entity synonyms at this cosine before PPR.
    pub synonym_threshold: Option<f64>,
    pub ising: Option<IsingConfig>,
}

impl CellConfig {
    /// A short stable label, e.g. `thermo a=0.7 b=0 dk=30 syn=0.85`.
    pub fn label(&self) -> String {
        let f = &self.fusion;
        let mut s = format!("{} a={} b={}", f.strategy, f.alpha, f.beta);
        if f.normalizer != Normalizer::Pit {
            s.push_str(&format!(" norm={}", f.normalizer));
        }
        match self.dk {
            Some(dk) => s.push_str(&format!(" dk={dk}")),
            None => s.push_str(" dk=none"),
        }
        if let Some(t) = self.synonym_threshold {
            s.push_str(&format!(" syn={t}"));
        }
        if let Some(i) = &self.ising {
            s.push_str(&format!(" ising=J{}/T{}/b{}", i.j, i.t, i.blend));
        }
        s
    }
}

/// Cross-product grid of cell settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub strategies: Vec<Strategy>,
    pub normalizers: Vec<Normalizer>,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub dks: Vec<Option<usize>>,
    pub synonym_thresholds: Vec<Option<f64>>,
    /// Shared settings for every cell; grid axes override its fields.
    pub base: CellConfig,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            strategies: vec![Strategy::Thermo],
            normalizers: vec![Normalizer::Pit],
            alphas: vec![0.3, 0.4, 0.5, 0.7, 1.0],
            betas: vec![0.0, 0.5, 1.0, 1.5],
            dks: vec![None, Some(0), Some(20), Some(30), Some(50)],
            synonym_thresholds: vec![None],
            base: CellConfig::default(),
        }
    }
}

impl GridSpec {
    pub fn size(&self) -> usize {
        self.strategies.len()
            * self.normalizers.len()
            * self.alphas.len()
            * self.betas.len()
            * self.dks.len()
            * self.synonym_thresholds.len()
    }

    /// Cells in axis order: strategy, normalizer, alpha, beta, dk, synonyms.
    pub fn cells(&self) -> Vec<CellConfig> {
        let mut out = Vec::with_capacity(self.size());
        for &strategy in &self.strategies {
            for &normalizer in &self.normalizers {
                for &alpha in &self.alphas {
                    for &beta in &self.betas {
                        for &dk in &self.dks {
                            for &synonym_threshold in &self.synonym_thresholds {
                                let mut c = self.base;
                                c.fusion.strategy = strategy;
                                c.fusion.normalizer = normalizer;
                                c.fusion.alpha = alpha;
                                c.fusion.beta = beta;
                                c.dk = dk;
                                c.synonym_threshold = synonym_threshold;
                                out.push(c);
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub data: DataSource,
    pub tune_fraction: f64,
    /// Vector candidates per query.
    pub n_v: usize,
    pub ppr: PprConfig,
    pub cells: Vec<CellConfig>,
    /// Cell every other cell is paired against; vector-only when absent.
    pub baseline: Option<CellConfig>,
    /// Expanded and appended after `cells`.
    pub grid: Option<GridSpec>,
    pub ks: Vec<usize>,
    /// Metric and K used for selection and summaries.
    pub metric: Metric,
    pub k: usize,
    /// Fused candidates handed to the Ising reranker.
    pub ising_candidates: usize,
    /// Grids above this many cells are refused.
    pub cell_cap: usize,
    pub bootstrap_resamples: usize,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: DataSource::Synthetic(SynthConfig::default()),
            tune_fraction: 0.5,
            n_v: 10,
            ppr: PprConfig::default(),
            cells: Vec::new(),
            baseline: None,
            grid: None,
            ks: vec![5, 10],
            metric: Metric::LastHop,
            k: 5,
            ising_candidates: 20,
            cell_cap: 2000,
            bootstrap_resamples: 1000,
            seed: 0,
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// First 16 hex digits of the SHA-256 of the config's JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(&Sha256::digest(json.as_bytes())[..8])
    }

    /// Explicit cells followed by the grid expansion, checked against the cap.
    pub fn all_cells(&self) -> Result<Vec<CellConfig>> {
        let grid = self.grid.as_ref().map_or(0, GridSpec::size);
        let total = self.cells.len() + grid;
        if total > self.cell_cap {
            return Err(Error::GridTooLarge {
                cells: total,
                cap: self.cell_cap,
            });
        }
        let mut cells = self.cells.clone();
        if let Some(g) = &self.grid {
            cells.extend(g.cells());
        }
        Ok(cells)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.tune_fraction) {
            return Err(Error::invalid("tune_fraction must be in [0, 1]"));
        }
        if self.n_v == 0 || self.ks.is_empty() || self.ks.contains(&0) || self.k == 0 {
            return Err(Error::invalid("n_v, K values and the summary K must be positive"));
        }
        if !self.ks.contains(&self.k) {
            return Err(Error::invalid(format!(
                "summary K {} is not among ks {:?}",
                self.k, self.ks
            )));
        }
        if !(self.ppr.damping > 0.0 && self.ppr.damping < 1.0) || !(self.ppr.epsilon > 0.0) {
            return Err(Error::invalid("PPR damping must be in (0,1) and epsilon positive"));
        }
        for c in self.all_cells()?.iter().chain(&self.baseline) {
            c.fusion.validate()?;
            if let Some(i) = &c.ising {
                i.validate()?;
            }
        }
        Ok(())
    }

    fn max_k(&self) -> usize {
        self.ks.iter().copied().max().unwrap_or(1)
    }
}

/// One query's result under one cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub query_id: String,
    pub cell: usize,
    pub split: Split,
    pub retrieved: Vec<String>,
    pub hits: BTreeMap<usize, Hits>,
    /// Kept out of the serialized records so reruns are byte-identical.
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Graph state for one synonym setting.
struct GraphVariant {
    threshold: Option<f64>,
    graph: EntityGraph,
}

/// Per-query inputs shared by every cell.
struct PreparedQuery {
    id: String,
    split: Split,
    gold_chain: Vec<String>,
    vector: std::result::Result<ScoreList, String>,
    /// Uncapped graph list per graph variant.
    graph: Vec<ScoreList>,
}

/// Retrieval pools for a dataset, computed once per run.
pub struct Prepared {
    variants: Vec<GraphVariant>,
    queries: Vec<PreparedQuery>,
    pub seed_misses: usize,
    pub no_seed_queries: usize,
}

impl Prepared {
    fn variant(&self, threshold: Option<f64>) -> usize {
        self.variants
            .iter()
            .position(|v| v.threshold == threshold)
            .expect("variant prepared for every cell")
    }

    pub fn graph(&self, threshold: Option<f64>) -> &EntityGraph {
        &self.variants[self.variant(threshold)].graph
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// Vector list and uncapped graph list of query `i`.
    pub fn lists(&self, i: usize, threshold: Option<f64>) -> Option<(&ScoreList, &ScoreList)> {
        let q = &self.queries[i];
        let v = q.vector.as_ref().ok()?;
        Some((v, &q.graph[self.variant(threshold)]))
    }

    pub fn query_id(&self, i: usize) -> &str {
        &self.queries[i].id
    }

    pub fn gold_chain(&self, i: usize) -> &[String] {
        &self.queries[i].gold_chain
    }
}

/// Builds the entity graph (and any linked variants) and retrieves both
/// candidate lists for every query.
pub fn prepare(cfg: &RunConfig, data: &Dataset, thresholds: &[Option<f64>]) -> Result<Prepared> {
    let base = EntityGraph::build(&data.corpus);
    let mut variants = Vec::new();
    for &t in thresholds {
        if variants.iter().any(|v: &GraphVariant| v.threshold == t) {
            continue;
        }
        let graph = match t {
            None => base.clone(),
            Some(t) => {
                let emb = data
                    .entity_embeddings
                    .as_ref()
                    .ok_or_else(|| Error::invalid("synonym linking needs entity embeddings"))?;
                base.link_synonyms(emb, t)?.0
            }
        };
        variants.push(GraphVariant { threshold: t, graph });
    }

    let queries: Vec<(PreparedQuery, usize, bool)> = data
        .queries
        .queries()
        .par_iter()
        .map(|q| {
            let vector = match data.query_embeddings.get(&q.id) {
                None => Err(format!("no embedding for query {}", q.id)),
                Some(e) => vector_topk(e, &data.passage_embeddings, cfg.n_v).map_err(|e| e.to_string()),
            };
            let mut misses = 0;
            let mut no_seed = false;
            let graph = variants
                .iter()
                .map(|v| {
                    let seeds = seed_entities_for_query(&q.entities, &v.graph);
                    misses = seeds.misses;
                    match ppr(&v.graph, &seeds.entities, &cfg.ppr) {
                        Ok(scores) => graph_passage_scores(&scores, &v.graph),
                        Err(_) => {
                            no_seed = true;
                            ScoreList::empty(System::Graph)
                        }
                    }
                })
                .collect();
            (
                PreparedQuery {
                    id: q.id.clone(),
                    split: split_of(&q.id, cfg.tune_fraction),
                    gold_chain: q.gold_chain.clone(),
                    vector,
                    graph,
                },
                misses,
                no_seed,
            )
        })
        .collect();
    let seed_misses = queries.iter().map(|(_, m, _)| m).sum();
    let no_seed_queries = queries.iter().filter(|(_, _, n)| *n).count();
    Ok(Prepared {
        variants,
        queries: queries.into_iter().map(|(q, _, _)| q).collect(),
        seed_misses,
        no_seed_queries,
    })
}

/// Fuses (and optionally reranks) one query under one cell, returning the
/// top `k` and whether the strategy fell back to thermo.
pub fn run_cell_query(
    prepared: &Prepared,
    i: usize,
    cell: &CellConfig,
    k: usize,
    ising_candidates: usize,
) -> Result<(FusedRanking, bool, bool)> {
    let (vector, graph) = prepared
        .lists(i, cell.synonym_threshold)
        .ok_or_else(|| Error::invalid(format!("vector retrieval failed for {}", prepared.query_id(i))))?;
    let pool = cap_pool(graph, vector, cell.dk);
    let mut fusion = cell.fusion;
    if cell.ising.is_some() {
        fusion.k = ising_candidates.max(k);
    } else {
        fusion.k = k;
    }
    let fused = fuse(vector, &pool, &fusion)?;
    let downgraded = fused.downgraded(cell.fusion.strategy);
    let mut converged = true;
    let mut ranking = fused.ranking;
    if let Some(ising) = &cell.ising {
        let coupling = build_coupling(&ranking, prepared.graph(cell.synonym_threshold));
        let r = mean_field_rerank(&ranking, &coupling, ising)?;
        converged = r.field.converged;
        ranking = r.ranking;
        ranking.entries.truncate(k);
    }
    Ok((ranking, downgraded, converged))
}

/// Everything produced by [`run_eval`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutput {
    pub report: Report,
    pub records: Vec<RunRecord>,
}

fn outcome(prepared: &Prepared, i: usize, ranking: &FusedRanking, ks: &[usize]) -> Result<QueryOutcome> {
    QueryOutcome::new(prepared.query_id(i), ranking.ids(), prepared.gold_chain(i).to_vec(), ks)
}

/// Evaluates every cell on the tune split, and on the test split only when
/// `confirm` is set. Failed queries are excluded from both arms of every
/// comparison and counted.
pub fn run_eval(cfg: &RunConfig, data: &Dataset, confirm: bool) -> Result<RunOutput> {
    cfg.validate()?;
    let cells = cfg.all_cells()?;
    let mut thresholds: Vec<Option<f64>> = cells.iter().map(|c| c.synonym_threshold).collect();
    thresholds.insert(0, None);
    thresholds.extend(cfg.baseline.map(|b| b.synonym_threshold));
    let prepared = prepare(cfg, data, &thresholds)?;
    run_prepared(cfg, &cells, &prepared, confirm)
}

/// Like [`run_eval`] over already prepared retrieval pools.
pub fn run_prepared(cfg: &RunConfig, cells: &[CellConfig], prepared: &Prepared, confirm: bool) -> Result<RunOutput> {
    let max_k = cfg.max_k();
    let splits: &[Split] = if confirm {
        &[Split::Tune, Split::Test]
    } else {
        &[Split::Tune]
    };

    let baseline: Vec<Option<QueryOutcome>> = (0..prepared.len())
        .into_par_iter()
        .map(|i| {
            let ranking = match &cfg.baseline {
                None => FusedRanking::from_score_list(prepared.lists(i, None)?.0, max_k),
                Some(cell) => run_cell_query(prepared, i, cell, max_k, cfg.ising_candidates).ok()?.0,
            };
            outcome(prepared, i, &ranking, &cfg.ks).ok()
        })
        .collect();

    let mut records = Vec::new();
    let mut cell_results = Vec::with_capacity(cells.len());
    for (index, cell) in cells.iter().enumerate() {
        let per_query: Vec<Option<(QueryOutcome, bool, bool, Duration)>> = (0..prepared.len())
            .into_par_iter()
            .map(|i| {
                let start = Instant::now();
                let (ranking, downgraded, converged) =
                    run_cell_query(prepared, i, cell, max_k, cfg.ising_candidates).ok()?;
                let o = outcome(prepared, i, &ranking, &cfg.ks).ok()?;
                Some((o, downgraded, converged, start.elapsed()))
            })
            .collect();
        for (i, r) in per_query.iter().enumerate() {
            let split = prepared.queries[i].split;
            if let Some((o, _, _, t)) = r {
                if splits.contains(&split) {
                    records.push(RunRecord {
                        query_id: o.query_id.clone(),
                        cell: index,
                        split,
                        retrieved: o.retrieved.clone(),
                        hits: o.hits.clone(),
                        wall_time: *t,
                    });
                }
            }
        }
        cell_results.push(per_query);
    }

    let mut split_reports = Vec::new();
    for &split in splits {
        let in_split: Vec<usize> = (0..prepared.len())
            .filter(|&i| prepared.queries[i].split == split)
            .collect();
        let mut cell_reports = Vec::with_capacity(cells.len());
        for (index, cell) in cells.iter().enumerate() {
            let mut base = Vec::new();
            let mut method = Vec::new();
            let (mut failed, mut downgraded, mut unconverged) = (0, 0, 0);
            for &i in &in_split {
                match (&baseline[i], &cell_results[index][i]) {
                    (Some(b), Some((m, d, c, _))) => {
                        base.push(b.clone());
                        method.push(m.clone());
                        downgraded += *d as usize;
                        unconverged += !*c as usize;
                    }
                    _ => failed += 1,
                }
            }
            cell_reports.push(report::cell_report(
                index,
                cell,
                split,
                &base,
                &method,
                failed,
                downgraded,
                unconverged,
                cfg,
            )?);
        }
        let base: Vec<QueryOutcome> = in_split.iter().filter_map(|&i| baseline[i].clone()).collect();
        split_reports.push(report::split_report(split, in_split.len(), &base, cell_reports, cfg)?);
    }
    Ok(RunOutput {
        report: Report {
            config_hash: cfg.hash(),
            baseline: cfg.baseline.map_or_else(|| "vector only".to_string(), |b| b.label()),
            queries: prepared.len(),
            seed_misses: prepared.seed_misses,
            no_seed_queries: prepared.no_seed_queries,
            splits: split_reports,
        },
        records,
    })
}

/// How [`select_tune_winner`] ranks cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// Highest metric.
    BestMetric,
    /// Fewest losses among cells with at least one win.
    Safest,
}

/// Picks a cell from tune-split reports. Ties go to the smaller dk
/// (uncapped counts as largest), then the larger alpha, then the earlier
/// cell.
pub fn select_tune_winner(
    reports: &[CellReport],
    metric: Metric,
    k: usize,
    rule: SelectionRule,
) -> Result<&CellReport> {
    let candidates: Vec<(&CellReport, &MetricResult)> = reports
        .iter()
        .filter(|r| r.split == Split::Tune)
        .filter_map(|r| r.result(metric, k).map(|m| (r, m)))
        .filter(|(_, m)| rule == SelectionRule::BestMetric || m.paired.wins > 0)
        .collect();
    let dk_key = |r: &CellReport| r.config.dk.unwrap_or(usize::MAX);
    candidates
        .into_iter()
        .min_by(|(ra, ma), (rb, mb)| {
            let primary = match rule {
                SelectionRule::BestMetric => mb.hits.cmp(&ma.hits),
                SelectionRule::Safest => ma
                    .paired
                    .losses
                    .cmp(&mb.paired.losses)
                    .then(mb.paired.wins.cmp(&ma.paired.wins)),
            };
            primary
                .then(dk_key(ra).cmp(&dk_key(rb)))
                .then(rb.config.fusion.alpha.total_cmp(&ra.config.fusion.alpha))
                .then(ra.index.cmp(&rb.index))
        })
        .map(|(r, _)| r)
        .ok_or_else(|| Error::Empty("no tune-split cell qualifies for selection".into()))
}

/// Runs every grid cell and summarizes by strategy.
pub fn sweep(cfg: &RunConfig, data: &Dataset, confirm: bool) -> Result<(RunOutput, SweepSummary)> {
    let out = run_eval(cfg, data, confirm)?;
    let summary = SweepSummary::from_report(&out.report, cfg.metric, cfg.k);
    Ok((out, summary))
}
