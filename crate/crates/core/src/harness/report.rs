use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CellConfig, RunConfig, RunOutput};
use crate::corpus::Split;
use crate::eval::{
    bootstrap_ci, odds_ratio, pair_outcomes, wilson_ci, Metric, OddsRatio, PairedComparison, QueryOutcome,
};
use crate::fusion::Strategy;
use crate::{Error, Result};

const WILSON_Z: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub metric: Metric,
    pub k: usize,
    pub n: usize,
    pub hits: usize,
    pub rate: f64,
    pub wilson: (f64, f64),
    /// Percentile bootstrap of the rate; computed for the summary metric only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<(f64, f64)>,
    pub paired: PairedComparison,
    pub p_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub odds_ratio: Option<OddsRatio>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub index: usize,
    pub label: String,
    pub config: CellConfig,
    pub split: Split,
    pub evaluated: usize,
    pub failed: usize,
    /// Queries where copula or Plackett-Luce fell back to thermo.
    pub downgraded: usize,
    pub ising_unconverged: usize,
    pub results: Vec<MetricResult>,
}

impl CellReport {
    pub fn result(&self, metric: Metric, k: usize) -> Option<&MetricResult> {
        self.results.iter().find(|r| r.metric == metric && r.k == k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub split: Split,
    pub queries: usize,
    /// Baseline results over every query whose retrieval succeeded.
    pub baseline: Vec<MetricResult>,
    pub cells: Vec<CellReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config_hash: String,
    /// Label of the pairing baseline.
    pub baseline: String,
    pub queries: usize,
    pub seed_misses: usize,
    pub no_seed_queries: usize,
    pub splits: Vec<SplitReport>,
}

impl Report {
    pub fn split(&self, split: Split) -> Option<&SplitReport> {
        self.splits.iter().find(|s| s.split == split)
    }

    /// One row per split, cell and metric, baseline rows first.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "config_hash,split,cell,label,metric,k,n,hits,rate,ci_low,ci_high,wins,losses,both,neither,p_value,failed,downgraded\n",
        );
        for s in &self.splits {
            for r in &s.baseline {
                row(
                    &mut out,
                    &self.config_hash,
                    s.split,
                    "baseline",
                    &self.baseline,
                    r,
                    0,
                    0,
                );
            }
            for c in &s.cells {
                for r in &c.results {
                    row(
                        &mut out,
                        &self.config_hash,
                        s.split,
                        &c.index.to_string(),
                        &c.label,
                        r,
                        c.failed,
                        c.downgraded,
                    );
                }
            }
        }
        out
    }
}

#[allow(clippy::too_many_arguments)]
fn row(
    out: &mut String,
    hash: &str,
    split: Split,
    cell: &str,
    label: &str,
    r: &MetricResult,
    failed: usize,
    downgraded: usize,
) {
    let p = &r.paired;
    writeln!(
        out,
        "{hash},{split},{cell},{label},{},{},{},{},{},{},{},{},{},{},{},{},{failed},{downgraded}",
        r.metric, r.k, r.n, r.hits, r.rate, r.wilson.0, r.wilson.1, p.wins, p.losses, p.both, p.neither, r.p_value
    )
    .expect("writing to a string");
}

fn metric_result(
    base: &[QueryOutcome],
    method: &[QueryOutcome],
    metric: Metric,
    k: usize,
    bootstrap: Option<(usize, u64)>,
) -> Result<MetricResult> {
    let paired = pair_outcomes(base, method, metric, k)?;
    let n = paired.total();
    let hits = paired.method_hits();
    let wilson = if n == 0 {
        (0.0, 0.0)
    } else {
        wilson_ci(hits as u64, n as u64, WILSON_Z)?
    };
    let bootstrap = match bootstrap {
        Some((resamples, seed)) if n > 0 && resamples > 0 => {
            let values: Vec<f64> = method
                .iter()
                .map(|o| o.hit(metric, k).map(|h| if h { 1.0 } else { 0.0 }))
                .collect::<Result<_>>()?;
            Some(bootstrap_ci(&values, resamples, 0.95, seed)?)
        }
        _ => None,
    };
    Ok(MetricResult {
        metric,
        k,
        n,
        hits,
        rate: if n == 0 { 0.0 } else { hits as f64 / n as f64 },
        wilson,
        bootstrap,
        paired,
        p_value: paired.mcnemar_p(),
        odds_ratio: if n == 0 {
            None
        } else {
            Some(odds_ratio(hits as u64, paired.baseline_hits() as u64, n as u64)?)
        },
    })
}

fn results(base: &[QueryOutcome], method: &[QueryOutcome], cfg: &RunConfig, seed: u64) -> Result<Vec<MetricResult>> {
    let mut out = Vec::new();
    for &k in &cfg.ks {
        for metric in Metric::ALL {
            let boot = (metric == cfg.metric && k == cfg.k).then_some((cfg.bootstrap_resamples, seed));
            out.push(metric_result(base, method, metric, k, boot)?);
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
pub(super) fn cell_report(
    index: usize,
    cell: &CellConfig,
    split: Split,
    base: &[QueryOutcome],
    method: &[QueryOutcome],
    failed: usize,
    downgraded: usize,
    ising_unconverged: usize,
    cfg: &RunConfig,
) -> Result<CellReport> {
    Ok(CellReport {
        index,
        label: cell.label(),
        config: *cell,
        split,
        evaluated: method.len(),
        failed,
        downgraded,
        ising_unconverged,
        results: results(base, method, cfg, cfg.seed.wrapping_add(index as u64 + 1))?,
    })
}

pub(super) fn split_report(
    split: Split,
    queries: usize,
    base: &[QueryOutcome],
    cells: Vec<CellReport>,
    cfg: &RunConfig,
) -> Result<SplitReport> {
    Ok(SplitReport {
        split,
        queries,
        baseline: results(base, base, cfg, cfg.seed)?,
        cells,
    })
}

/// Best results per strategy tier. The best cell is chosen like the tune
/// winner: highest metric, then smaller dk, larger alpha, earlier cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierRow {
    pub split: Split,
    pub tier: Strategy,
    pub configs: usize,
    pub best_wins: usize,
    pub best_net: i64,
    pub min_losses: usize,
    pub max_rate: f64,
    pub best_cell: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub metric: Metric,
    pub k: usize,
    pub baseline_rate: Vec<(Split, f64)>,
    pub tiers: Vec<TierRow>,
}

impl SweepSummary {
    pub fn from_report(report: &Report, metric: Metric, k: usize) -> Self {
        let mut tiers = Vec::new();
        let mut baseline_rate = Vec::new();
        for s in &report.splits {
            if let Some(b) = s.baseline.iter().find(|r| r.metric == metric && r.k == k) {
                baseline_rate.push((s.split, b.rate));
            }
            let mut strategies: Vec<Strategy> = s.cells.iter().map(|c| c.config.fusion.strategy).collect();
            strategies.sort();
            strategies.dedup();
            for tier in strategies {
                let cells: Vec<(&CellReport, &MetricResult)> = s
                    .cells
                    .iter()
                    .filter(|c| c.config.fusion.strategy == tier)
                    .filter_map(|c| c.result(metric, k).map(|r| (c, r)))
                    .collect();
                let best = cells
                    .iter()
                    .min_by(|(ca, ra), (cb, rb)| {
                        let dk = |c: &CellReport| c.config.dk.unwrap_or(usize::MAX);
                        rb.hits
                            .cmp(&ra.hits)
                            .then(dk(ca).cmp(&dk(cb)))
                            .then(cb.config.fusion.alpha.total_cmp(&ca.config.fusion.alpha))
                            .then(ca.index.cmp(&cb.index))
                    })
                    .expect("tier has cells");
                tiers.push(TierRow {
                    split: s.split,
                    tier,
                    configs: cells.len(),
                    best_wins: cells.iter().map(|c| c.1.paired.wins).max().unwrap_or(0),
                    best_net: cells.iter().map(|c| c.1.paired.net()).max().unwrap_or(0),
                    min_losses: cells.iter().map(|c| c.1.paired.losses).min().unwrap_or(0),
                    max_rate: best.1.rate,
                    best_cell: best.0.label.clone(),
                });
            }
        }
        Self {
            metric,
            k,
            baseline_rate,
            tiers,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("split,tier,configs,best_wins,best_net,min_losses,max_rate,baseline_rate,best_cell\n");
        for t in &self.tiers {
            let base = self
                .baseline_rate
                .iter()
                .find(|(s, _)| *s == t.split)
                .map_or(f64::NAN, |b| b.1);
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                t.split, t.tier, t.configs, t.best_wins, t.best_net, t.min_losses, t.max_rate, base, t.best_cell
            )
            .expect("writing to a string");
        }
        out
    }
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Writes `report.json`, `report.csv`, `records.jsonl`, `timings.csv` and,
/// for sweeps, `sweep_summary.csv`. Timings are the only non-deterministic
/// output and live in their own file.
pub fn write_outputs(dir: &Path, out: &RunOutput, summary: Option<&SweepSummary>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: Vec<u8>| -> Result<()> {
        let p = dir.join(name);
        write_atomic(&p, &bytes)?;
        written.push(p);
        Ok(())
    };
    put("report.json", serde_json::to_vec_pretty(&out.report)?)?;
    put("report.csv", out.report.to_csv().into_bytes())?;
    let mut records = Vec::new();
    for r in &out.records {
        serde_json::to_writer(&mut records, r)?;
        records.push(b'\n');
    }
    put("records.jsonl", records)?;
    let mut timings = String::from("cell,query_id,wall_time_us\n");
    for r in &out.records {
        writeln!(timings, "{},{},{}", r.cell, r.query_id, r.wall_time.as_micros()).expect("writing to a string");
    }
    put("timings.csv", timings.into_bytes())?;
    if let Some(s) = summary {
        put("sweep_summary.csv", s.to_csv().into_bytes())?;
    }
    Ok(written)
}
