//! Command-line front end: dataset ingestion and generation, retrieval,
//! fusion, evaluation, sweeps, reports and the significance calculators.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use calfuse::calibrate::{Normalizer, TemperatureMode};
use calfuse::corpus::{md5_split, Dataset, DatasetPaths, Split};
use calfuse::eval::{mcnemar_exact, odds_ratio, wilson_ci, Metric};
use calfuse::fusion::{CopulaTheta, FusedRanking, Strategy};
use calfuse::harness::{
    prepare, run_cell_query, run_eval, select_tune_winner, sweep, write_outputs, CellConfig, DataSource, Report,
    RunConfig, SelectionRule, SweepSummary,
};
use calfuse::ising::{build_coupling, ising_sweep, IsingConfig, IsingGrid, SweepQuery};
use calfuse::retrieve::{cap_pool, EntityGraph, ScoreList};
use calfuse::synth::{generate, regime_report, SynthConfig};

#[derive(Parser)]
#[command(name = "calfuse", version, about = "Calibrated fusion of vector and graph retrieval")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a dataset and print its summary; optionally rewrite it in the standard layout.
    Ingest(IngestArgs),
    /// Generate a synthetic multi-hop dataset.
    Synth(SynthArgs),
    /// Print each query's vector and (capped) graph candidate lists as JSON lines.
    Retrieve(QueryArgs),
    /// Print each query's fused ranking as JSON lines.
    Fuse(QueryArgs),
    /// Evaluate the configured cells against the baseline.
    Eval(EvalArgs),
    /// Evaluate a grid and summarize it by strategy, or sweep Ising parameters.
    Sweep(SweepArgs),
    /// Print a saved report and its tune-split winner.
    Report(ReportArgs),
    /// Significance calculators.
    Stats {
        #[command(subcommand)]
        stat: Stat,
    },
}

#[derive(Args)]
struct IngestArgs {
    /// Directory with the standard file names.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    passages: Option<PathBuf>,
    #[arg(long)]
    annotations: Option<PathBuf>,
    #[arg(long)]
    queries: Option<PathBuf>,
    #[arg(long)]
    passage_embeddings: Option<PathBuf>,
    #[arg(long)]
    query_embeddings: Option<PathBuf>,
    #[arg(long)]
    entity_embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    tune_fraction: f64,
    /// Write the dataset here with binary embeddings.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Generator settings; defaults apply when omitted.
    #[arg(long)]
    synth_config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Also write raw/PIT/min-max score histograms over this many vector candidates per query.
    #[arg(long)]
    regime: Option<usize>,
}

/// Run configuration plus flag overrides.
#[derive(Args, Clone)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Read the dataset from this directory instead of the configured source.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Generate the dataset from these settings instead of the configured source.
    #[arg(long)]
    synth_config: Option<PathBuf>,
    #[arg(long)]
    n_v: Option<usize>,
    #[arg(long)]
    damping: Option<f64>,
    #[arg(long)]
    ppr_eps: Option<f64>,
    #[arg(long)]
    ppr_max_iter: Option<usize>,
    /// Graph-only candidate cap, or "none".
    #[arg(long)]
    dk: Option<String>,
    /// Link entity synonyms at this cosine, or "none".
    #[arg(long)]
    synonym_threshold: Option<String>,
    #[arg(long)]
    normalizer: Option<Normalizer>,
    /// "auto" or a positive number.
    #[arg(long)]
    temperature: Option<TemperatureMode>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Cutoff; for eval and sweep also the summary K.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    rrf_k0: Option<f64>,
    #[arg(long)]
    power_p: Option<f64>,
    #[arg(long)]
    tsallis_q: Option<f64>,
    /// "auto" or a number ≥ 1.
    #[arg(long)]
    copula_theta: Option<CopulaTheta>,
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    ising_j: Option<f64>,
    #[arg(long)]
    ising_t: Option<f64>,
    #[arg(long)]
    ising_blend: Option<f64>,
    #[arg(long)]
    metric: Option<Metric>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct QueryArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Restrict to these query ids; all queries when omitted.
    #[arg(long = "query")]
    queries: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    Best,
    Safest,
}

impl From<Rule> for SelectionRule {
    fn from(r: Rule) -> Self {
        match r {
            Rule::Best => SelectionRule::BestMetric,
            Rule::Safest => SelectionRule::Safest,
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Also evaluate the test split. Selection still reads the tune split only.
    #[arg(long)]
    confirm: bool,
    #[arg(long, value_enum, default_value_t = Rule::Best)]
    select: Rule,
    /// Output directory; falls back to the config's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    eval: EvalArgs,
    /// Sweep mean-field (J, T, blend) over the first cell's fused candidates instead of the fusion grid.
    #[arg(long)]
    ising_sweep: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// A report.json or the directory holding it.
    input: PathBuf,
    #[arg(long)]
    metric: Option<Metric>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum, default_value_t = Rule::Best)]
    select: Rule,
    /// Print the CSV form instead of the table.
    #[arg(long)]
    csv: bool,
}

#[derive(Subcommand)]
enum Stat {
    /// Exact two-sided McNemar p-value from wins and losses.
    Mcnemar { wins: u64, losses: u64 },
    /// Wilson score interval.
    Wilson {
        successes: u64,
        n: u64,
        #[arg(long, default_value_t = 1.96)]
        z: f64,
    },
    /// Odds ratio of method vs baseline successes out of n each.
    Odds { method: u64, baseline: u64, n: u64 },
}

fn parse_optional<T: std::str::FromStr>(s: &str, what: &str) -> Result<Option<T>> {
    if s == "none" {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| anyhow::anyhow!("{what} must be \"none\" or a number, got {s:?}"))
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => RunConfig::default(),
        };
        if let Some(dir) = &self.data_dir {
            cfg.data = DataSource::Files(DatasetPaths::in_dir(dir));
        }
        if let Some(p) = &self.synth_config {
            cfg.data = DataSource::Synthetic(SynthConfig::load(p)?);
        }
        if let Some(n) = self.n_v {
            cfg.n_v = n;
        }
        if let Some(d) = self.damping {
            cfg.ppr.damping = d;
        }
        if let Some(e) = self.ppr_eps {
            cfg.ppr.epsilon = e;
        }
        if let Some(m) = self.ppr_max_iter {
            cfg.ppr.max_iterations = m;
        }
        if let Some(m) = self.metric {
            cfg.metric = m;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(k) = self.k {
            cfg.k = k;
            if !cfg.ks.contains(&k) {
                cfg.ks.push(k);
                cfg.ks.sort_unstable();
            }
        }
        if cfg.cells.is_empty() && cfg.grid.is_none() {
            cfg.cells.push(CellConfig::default());
        }
        let dk = self.dk.as_deref().map(|s| parse_optional(s, "--dk")).transpose()?;
        let syn = self
            .synonym_threshold
            .as_deref()
            .map(|s| parse_optional(s, "--synonym-threshold"))
            .transpose()?;
        let grid_base = cfg.grid.as_mut().map(|g| &mut g.base);
        for cell in cfg.cells.iter_mut().chain(grid_base) {
            self.apply(cell, dk, syn);
        }
        Ok(cfg)
    }

    fn apply(&self, cell: &mut CellConfig, dk: Option<Option<usize>>, syn: Option<Option<f64>>) {
        let f = &mut cell.fusion;
        macro_rules! set {
            ($field:expr, $flag:expr) => {
                if let Some(v) = $flag {
                    $field = v;
                }
            };
        }
        set!(f.strategy, self.strategy);
        set!(f.alpha, self.alpha);
        set!(f.beta, self.beta);
        set!(f.k, self.k);
        set!(f.normalizer, self.normalizer);
        set!(f.temperature, self.temperature);
        set!(f.epsilon, self.epsilon);
        set!(f.params.rrf_k0, self.rrf_k0);
        set!(f.params.power_p, self.power_p);
        set!(f.params.tsallis_q, self.tsallis_q);
        set!(f.params.copula_theta, self.copula_theta);
        set!(f.params.gamma, self.gamma);
        if self.t0.is_some() {
            f.params.t0 = self.t0;
        }
        set!(cell.dk, dk);
        set!(cell.synonym_threshold, syn);
        if self.ising_j.is_some() || self.ising_t.is_some() || self.ising_blend.is_some() {
            let i = cell.ising.get_or_insert_with(IsingConfig::default);
            set!(i.j, self.ising_j);
            set!(i.t, self.ising_t);
            set!(i.blend, self.ising_blend);
        }
    }
}

fn load_data(cfg: &RunConfig, only: &[String]) -> Result<Dataset> {
    let mut data = cfg.data.load().context("loading dataset")?;
    if !only.is_empty() {
        if let Some(missing) = only.iter().find(|id| data.queries.get(id).is_none()) {
            bail!("unknown query {missing:?}");
        }
        data.queries = data.queries.filtered(|q| only.contains(&q.id));
    }
    Ok(data)
}

fn first_cell(cfg: &RunConfig) -> Result<CellConfig> {
    cfg.all_cells()?
        .into_iter()
        .next()
        .context("the configuration has no cells")
}

fn json_line(out: &mut impl Write, value: &serde_json::Value) -> Result<()> {
    serde_json::to_writer(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn ingest(a: &IngestArgs) -> Result<()> {
    let mut paths = match &a.data_dir {
        Some(d) => DatasetPaths::in_dir(d),
        None => {
            let need = |p: &Option<PathBuf>, flag: &str| {
                p.clone().with_context(|| format!("{flag} or --data-dir is required"))
            };
            DatasetPaths {
                passages: need(&a.passages, "--passages")?,
                annotations: need(&a.annotations, "--annotations")?,
                queries: need(&a.queries, "--queries")?,
                passage_embeddings: need(&a.passage_embeddings, "--passage-embeddings")?,
                query_embeddings: need(&a.query_embeddings, "--query-embeddings")?,
                entity_embeddings: None,
            }
        }
    };
    if a.entity_embeddings.is_some() {
        paths.entity_embeddings = a.entity_embeddings.clone();
    }
    let data = Dataset::load(&paths)?;
    let graph = EntityGraph::build(&data.corpus);
    let splits = md5_split(&data.queries, a.tune_fraction);
    let tune = splits.values().filter(|s| **s == Split::Tune).count();
    let mut hops = std::collections::BTreeMap::new();
    for q in data.queries.iter() {
        *hops.entry(q.hop_count()).or_insert(0usize) += 1;
    }
    let summary = json!({
        "passages": data.corpus.len(),
        "queries": data.queries.len(),
        "hops": hops,
        "entities": graph.entity_count(),
        "edges": graph.edge_count(),
        "dimension": data.passage_embeddings.dimension(),
        "entity_embeddings": data.entity_embeddings.as_ref().map(|e| e.len()),
        "tune": tune,
        "test": splits.len() - tune,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    if let Some(out) = &a.out {
        data.write(out)?;
        eprintln!("wrote {}", out.display());
    }
    Ok(())
}

fn synth(a: &SynthArgs) -> Result<()> {
    let mut cfg = match &a.synth_config {
        Some(p) => SynthConfig::load(p)?,
        None => SynthConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let data = generate(&cfg)?;
    data.write(&a.out)?;
    eprintln!(
        "wrote {} passages and {} queries to {}",
        data.corpus.len(),
        data.queries.len(),
        a.out.display()
    );
    if let Some(n_v) = a.regime {
        let run = RunConfig {
            data: DataSource::Synthetic(cfg),
            n_v,
            ..RunConfig::default()
        };
        let prepared = prepare(&run, &data, &[None])?;
        let (vector, graph): (Vec<ScoreList>, Vec<ScoreList>) = (0..prepared.len())
            .filter_map(|i| prepared.lists(i, None))
            .map(|(v, g)| (v.clone(), g.clone()))
            .unzip();
        let report = regime_report(&vector, &graph, 20, 10)?;
        let path = a.out.join("regime.csv");
        report.write_csv(BufWriter::new(File::create(&path)?))?;
        for ks in &report.ks {
            eprintln!("{:<14} KS {:.4} over {} lists", ks.series, ks.distance, ks.lists);
        }
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn retrieve(a: &QueryArgs) -> Result<()> {
    let cfg = a.run.load()?;
    cfg.validate()?;
    let data = load_data(&cfg, &a.queries)?;
    let cell = first_cell(&cfg)?;
    let prepared = prepare(&cfg, &data, &[cell.synonym_threshold])?;
    let mut out = BufWriter::new(io::stdout().lock());
    for i in 0..prepared.len() {
        let line = match prepared.lists(i, cell.synonym_threshold) {
            Some((v, g)) => json!({
                "query_id": prepared.query_id(i),
                "vector": v.entries(),
                "graph": cap_pool(g, v, cell.dk).entries(),
            }),
            None => json!({ "query_id": prepared.query_id(i), "error": "vector retrieval failed" }),
        };
        json_line(&mut out, &line)?;
    }
    Ok(out.flush()?)
}

fn fuse_cmd(a: &QueryArgs) -> Result<()> {
    let cfg = a.run.load()?;
    cfg.validate()?;
    let data = load_data(&cfg, &a.queries)?;
    let cell = first_cell(&cfg)?;
    let prepared = prepare(&cfg, &data, &[cell.synonym_threshold])?;
    let mut out = BufWriter::new(io::stdout().lock());
    for i in 0..prepared.len() {
        let line = match run_cell_query(&prepared, i, &cell, cell.fusion.k, cfg.ising_candidates) {
            Ok((ranking, downgraded, converged)) => json!({
                "query_id": prepared.query_id(i),
                "cell": cell.label(),
                "downgraded": downgraded,
                "ising_converged": converged,
                "ranking": ranking.entries,
            }),
            Err(e) => json!({ "query_id": prepared.query_id(i), "error": e.to_string() }),
        };
        json_line(&mut out, &line)?;
    }
    Ok(out.flush()?)
}

fn print_report(report: &Report, metric: Metric, k: usize, rule: Rule) -> Result<()> {
    println!(
        "config {}  queries {}  baseline: {}",
        report.config_hash, report.queries, report.baseline
    );
    if report.no_seed_queries > 0 || report.seed_misses > 0 {
        println!(
            "{} queries without graph seeds, {} unresolved seed mentions",
            report.no_seed_queries, report.seed_misses
        );
    }
    for s in &report.splits {
        let base = s
            .baseline
            .iter()
            .find(|r| r.metric == metric && r.k == k)
            .context("summary metric missing from report")?;
        println!(
            "\n[{}] {} queries, baseline {metric}@{k} = {:.3}",
            s.split, s.queries, base.rate
        );
        println!(
            "{:>4}  {:<44} {:>6} {:>15} {:>4} {:>4} {:>9}",
            "cell", "label", "rate", "95% CI", "W", "L", "p"
        );
        for c in &s.cells {
            let Some(r) = c.result(metric, k) else { continue };
            let note = if c.failed > 0 {
                format!("  ({} failed)", c.failed)
            } else {
                String::new()
            };
            println!(
                "{:>4}  {:<44} {:>6.3} [{:.3}, {:.3}] {:>4} {:>4} {:>9.3e}{note}",
                c.index, c.label, r.rate, r.wilson.0, r.wilson.1, r.paired.wins, r.paired.losses, r.p_value
            );
        }
    }
    if let Some(tune) = report.split(Split::Tune) {
        if !tune.cells.is_empty() {
            let winner = match select_tune_winner(&tune.cells, metric, k, rule.into()) {
                Ok(w) => w,
                Err(e) => {
                    println!("\nno tune winner: {e}");
                    return Ok(());
                }
            };
            println!("\ntune winner: cell {} ({})", winner.index, winner.label);
            if let Some(test) = report.split(Split::Test) {
                if let Some(r) = test
                    .cells
                    .iter()
                    .find(|c| c.index == winner.index)
                    .and_then(|c| c.result(metric, k))
                {
                    println!(
                        "test: {metric}@{k} = {:.3}  W {}  L {}  p {:.3e}",
                        r.rate, r.paired.wins, r.paired.losses, r.p_value
                    );
                }
            }
        }
    }
    Ok(())
}

fn output_dir(flag: &Option<PathBuf>, cfg: &RunConfig) -> Option<PathBuf> {
    flag.clone().or_else(|| cfg.output_dir.clone())
}

fn eval(a: &EvalArgs) -> Result<()> {
    let cfg = a.run.load()?;
    let data = load_data(&cfg, &[])?;
    let out = run_eval(&cfg, &data, a.confirm)?;
    if let Some(dir) = output_dir(&a.out, &cfg) {
        write_outputs(&dir, &out, None)?;
        eprintln!("wrote reports to {}", dir.display());
    }
    print_report(&out.report, cfg.metric, cfg.k, a.select)
}

fn sweep_cmd(a: &SweepArgs) -> Result<()> {
    let cfg = a.eval.run.load()?;
    let data = load_data(&cfg, &[])?;
    if let Some(grid) = &a.ising_sweep {
        return ising_sweep_cmd(&cfg, &data, &IsingGrid::load(grid)?, &a.eval);
    }
    let (out, summary) = sweep(&cfg, &data, a.eval.confirm)?;
    if let Some(dir) = output_dir(&a.eval.out, &cfg) {
        write_outputs(&dir, &out, Some(&summary))?;
        eprintln!("wrote reports to {}", dir.display());
    }
    print_summary(&summary);
    Ok(())
}

fn print_summary(s: &SweepSummary) {
    println!("{}@{} by strategy", s.metric, s.k);
    println!(
        "{:<5} {:<14} {:>7} {:>6} {:>5} {:>6} {:>8}  best cell",
        "split", "tier", "configs", "best W", "net", "min L", "max"
    );
    for t in &s.tiers {
        println!(
            "{:<5} {:<14} {:>7} {:>6} {:>5} {:>6} {:>8.3}  {}",
            t.split.to_string(),
            t.tier.to_string(),
            t.configs,
            t.best_wins,
            t.best_net,
            t.min_losses,
            t.max_rate,
            t.best_cell
        );
    }
}

fn ising_sweep_cmd(cfg: &RunConfig, data: &Dataset, grid: &IsingGrid, a: &EvalArgs) -> Result<()> {
    cfg.validate()?;
    let mut cell = first_cell(cfg)?;
    let base = cell.ising.take().unwrap_or_default();
    let prepared = prepare(cfg, data, &[cell.synonym_threshold])?;
    let splits: &[Split] = if a.confirm {
        &[Split::Tune, Split::Test]
    } else {
        &[Split::Tune]
    };
    let graph = prepared.graph(cell.synonym_threshold);
    let mut queries = Vec::new();
    let mut gold = std::collections::HashMap::new();
    let mut failed = 0;
    for i in 0..prepared.len() {
        if !splits.contains(&calfuse::corpus::split_of(prepared.query_id(i), cfg.tune_fraction)) {
            continue;
        }
        match run_cell_query(&prepared, i, &cell, cfg.ising_candidates, cfg.ising_candidates) {
            Ok((candidates, _, _)) => {
                let coupling = build_coupling(&candidates, graph);
                gold.insert(prepared.query_id(i).to_string(), prepared.gold_chain(i).to_vec());
                queries.push(SweepQuery {
                    query_id: prepared.query_id(i).to_string(),
                    candidates,
                    coupling,
                });
            }
            Err(_) => failed += 1,
        }
    }
    let (metric, k) = (cfg.metric, cfg.k);
    let hit = |id: &str, r: &FusedRanking| metric.evaluate(&r.ids(), &gold[id], k).unwrap_or(false);
    let table = ising_sweep(&queries, grid, &base, hit)?;
    if failed > 0 {
        eprintln!("{failed} queries failed and were excluded");
    }
    match output_dir(&a.out, cfg) {
        Some(dir) => {
            std::fs::create_dir_all(&dir)?;
            let path = dir.join("ising_sweep.csv");
            table.write_csv(BufWriter::new(File::create(&path)?))?;
            eprintln!("wrote {}", path.display());
        }
        None => table.write_csv(io::stdout().lock())?,
    }
    Ok(())
}

fn report_cmd(a: &ReportArgs) -> Result<()> {
    let path = if a.input.is_dir() {
        a.input.join("report.json")
    } else {
        a.input.clone()
    };
    let report: Report =
        serde_json::from_reader(File::open(&path).with_context(|| format!("opening {}", path.display()))?)
            .with_context(|| format!("parsing {}", path.display()))?;
    if a.csv {
        print!("{}", report.to_csv());
        return Ok(());
    }
    let first = report
        .splits
        .iter()
        .flat_map(|s| &s.baseline)
        .next()
        .context("report has no results")?;
    let metric = a.metric.unwrap_or(Metric::LastHop);
    let k = a.k.unwrap_or(first.k);
    print_report(&report, metric, k, a.select)?;
    if report.splits.iter().any(|s| s.cells.len() > 1) {
        println!();
        print_summary(&SweepSummary::from_report(&report, metric, k));
    }
    Ok(())
}

fn stats(s: &Stat) -> Result<()> {
    match *s {
        Stat::Mcnemar { wins, losses } => println!("{}", mcnemar_exact(wins, losses)),
        Stat::Wilson { successes, n, z } => {
            let (lo, hi) = wilson_ci(successes, n, z)?;
            println!("{lo} {hi}");
        }
        Stat::Odds { method, baseline, n } => {
            let r = odds_ratio(method, baseline, n)?;
            let note = if r.corrected { " (Haldane-corrected)" } else { "" };
            println!("{}{note}", r.value);
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    match &Cli::parse().command {
        Command::Ingest(a) => ingest(a),
        Command::Synth(a) => synth(a),
        Command::Retrieve(a) => retrieve(a),
        Command::Fuse(a) => fuse_cmd(a),
        Command::Eval(a) => eval(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Report(a) => report_cmd(a),
        Command::Stats { stat } => stats(stat),
    }
}
