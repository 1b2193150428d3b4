use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use calfuse::corpus::Split;
use calfuse::eval::{Metric, PairedComparison};
use calfuse::fusion::{FusionConfig, Strategy};
use calfuse::harness::{
    run_eval, select_tune_winner, sweep, CellConfig, CellReport, DataSource, GridSpec, MetricResult, RunConfig,
    SelectionRule,
};
use calfuse::synth::SynthConfig;

fn small_config() -> RunConfig {
    RunConfig {
        data: DataSource::Synthetic(SynthConfig {
            n_passages: 1200,
            n_queries: 60,
            entity_vocab: 1800,
            ..SynthConfig::default()
        }),
        bootstrap_resamples: 200,
        ..RunConfig::default()
    }
}

fn cell(alpha: f64, beta: f64, dk: Option<usize>) -> CellConfig {
    CellConfig {
        fusion: FusionConfig {
            alpha,
            beta,
            ..FusionConfig::default()
        },
        dk,
        ..CellConfig::default()
    }
}

#[test]
fn baseline_against_itself_is_a_null_comparison() {
    let cfg = RunConfig {
        cells: vec![cell(0.7, 0.5, Some(30))],
        ..small_config()
    };
    let data = cfg.data.load().unwrap();
    let out = run_eval(&cfg, &data, true).unwrap();
    for split in &out.report.splits {
        for r in &split.baseline {
            assert_eq!((r.paired.wins, r.paired.losses), (0, 0));
            assert_eq!(r.p_value, 1.0);
        }
    }
    assert_eq!(out.report.baseline, "vector only");

    // the same cell as explicit baseline
    let rebased = RunConfig {
        baseline: Some(cfg.cells[0]),
        ..cfg.clone()
    };
    let out = run_eval(&rebased, &data, true).unwrap();
    assert_eq!(out.report.baseline, cfg.cells[0].label());
    for split in &out.report.splits {
        for r in &split.cells[0].results {
            assert_eq!((r.paired.wins, r.paired.losses), (0, 0), "{} @ {}", r.metric, r.k);
        }
    }
}

#[test]
fn vector_only_thermo_cell_matches_the_baseline() {
    let cfg = RunConfig {
        cells: vec![cell(1.0, 0.0, None)],
        ..small_config()
    };
    let data = cfg.data.load().unwrap();
    let out = run_eval(&cfg, &data, true).unwrap();
    for split in &out.report.splits {
        let c = &split.cells[0];
        for r in &c.results {
            assert_eq!((r.paired.wins, r.paired.losses), (0, 0), "{} @ {}", r.metric, r.k);
            let b = split
                .baseline
                .iter()
                .find(|b| b.metric == r.metric && b.k == r.k)
                .unwrap();
            assert_eq!(r.hits, b.hits);
        }
    }
}

fn report(index: usize, alpha: f64, dk: Option<usize>, wins: usize, losses: usize, both: usize) -> CellReport {
    let paired = PairedComparison {
        wins,
        losses,
        both,
        neither: 100 - wins - losses - both,
    };
    let hits = paired.method_hits();
    let config = cell(alpha, 0.5, dk);
    CellReport {
        index,
        label: config.label(),
        config,
        split: Split::Tune,
        evaluated: 100,
        failed: 0,
        downgraded: 0,
        ising_unconverged: 0,
        results: vec![MetricResult {
            metric: Metric::LastHop,
            k: 5,
            n: 100,
            hits,
            rate: hits as f64 / 100.0,
            wilson: (0.0, 1.0),
            bootstrap: None,
            paired,
            p_value: paired.mcnemar_p(),
            odds_ratio: None,
        }],
    }
}

#[test]
fn safest_rule_prefers_fewer_losses() {
    let cells = [report(0, 0.5, None, 10, 3, 40), report(1, 0.5, None, 8, 0, 40)];
    let best = select_tune_winner(&cells, Metric::LastHop, 5, SelectionRule::BestMetric).unwrap();
    assert_eq!(best.index, 0);
    let safest = select_tune_winner(&cells, Metric::LastHop, 5, SelectionRule::Safest).unwrap();
    assert_eq!(safest.index, 1);

    let single = [report(0, 0.3, Some(20), 0, 4, 10)];
    assert_eq!(
        select_tune_winner(&single, Metric::LastHop, 5, SelectionRule::BestMetric)
            .unwrap()
            .index,
        0
    );
    // no cell with a win: the safest rule has nothing to pick
    assert!(select_tune_winner(&single, Metric::LastHop, 5, SelectionRule::Safest).is_err());
    assert!(select_tune_winner(&single, Metric::Any, 5, SelectionRule::BestMetric).is_err());
}

#[test]
fn tune_winner_matches_exhaustive_ranking() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let dks = [None, Some(0), Some(20), Some(30)];
    let alphas = [0.3, 0.5, 1.0];
    for _ in 0..200 {
        // coarse values so ties on every key occur
        let cells: Vec<CellReport> = (0..12)
            .map(|i| {
                let w = rng.gen_range(0..4);
                let l = rng.gen_range(0..4);
                let both = rng.gen_range(0..3);
                report(i, alphas[rng.gen_range(0..3)], dks[rng.gen_range(0..4)], w, l, both)
            })
            .collect();
        for rule in [SelectionRule::BestMetric, SelectionRule::Safest] {
            let key = |c: &CellReport| {
                let p = c.results[0].paired;
                let primary = match rule {
                    SelectionRule::BestMetric => (usize::MAX - p.method_hits(), 0),
                    SelectionRule::Safest => (p.losses, usize::MAX - p.wins),
                };
                let alpha_rank = usize::MAX - (c.config.fusion.alpha * 10.0) as usize;
                (primary, c.config.dk.unwrap_or(usize::MAX), alpha_rank, c.index)
            };
            let eligible: Vec<&CellReport> = cells
                .iter()
                .filter(|c| rule == SelectionRule::BestMetric || c.results[0].paired.wins > 0)
                .collect();
            let want = eligible.iter().min_by_key(|c| key(c)).map(|c| c.index);
            let got = select_tune_winner(&cells, Metric::LastHop, 5, rule)
                .ok()
                .map(|c| c.index);
            assert_eq!(got, want);
        }
    }
}

#[test]
fn single_cell_grid_equals_plain_evaluation() {
    let c = cell(0.5, 1.0, Some(20));
    let base = small_config();
    let data = base.data.load().unwrap();
    let grid = RunConfig {
        grid: Some(GridSpec {
            alphas: vec![0.5],
            betas: vec![1.0],
            dks: vec![Some(20)],
            ..GridSpec::default()
        }),
        ..base.clone()
    };
    let plain = RunConfig { cells: vec![c], ..base };
    let (swept, summary) = sweep(&grid, &data, true).unwrap();
    let evaluated = run_eval(&plain, &data, true).unwrap();
    assert_eq!(swept.report.splits, evaluated.report.splits);
    // wall times differ; everything serialized must not
    assert_eq!(
        serde_json::to_string(&swept.records).unwrap(),
        serde_json::to_string(&evaluated.records).unwrap()
    );
    assert_eq!(summary.tiers.len(), 2);
    assert!(summary.tiers.iter().all(|t| t.configs == 1 && t.best_cell == c.label()));
}

#[test]
fn grid_expands_to_the_cross_product() {
    let spec = GridSpec {
        alphas: vec![0.3, 0.5, 0.7],
        betas: vec![0.0, 0.5, 1.0],
        dks: vec![Some(30)],
        ..GridSpec::default()
    };
    assert_eq!(spec.size(), 9);
    let cfg = RunConfig {
        grid: Some(spec),
        ..small_config()
    };
    let data = cfg.data.load().unwrap();
    let (out, summary) = sweep(&cfg, &data, false).unwrap();
    let tune = out.report.split(Split::Tune).unwrap();
    assert!(out.report.split(Split::Test).is_none());
    assert_eq!(tune.cells.len(), 9);
    let mut labels: Vec<&str> = tune.cells.iter().map(|c| c.label.as_str()).collect();
    labels.sort_unstable();
    labels.dedup();
    assert_eq!(labels.len(), 9);
    let rows = out
        .report
        .to_csv()
        .lines()
        .filter(|l| l.contains(",lasthop,5,") && !l.contains(",baseline,"))
        .count();
    assert_eq!(rows, 9);
    assert_eq!(summary.tiers.len(), 1);
    assert_eq!(summary.tiers[0].configs, 9);
}

#[test]
fn oversized_grids_are_refused_and_large_ones_finish() {
    let spec = GridSpec {
        strategies: vec![
            Strategy::Thermo,
            Strategy::Linear,
            Strategy::Rrf,
            Strategy::LogLinear,
            Strategy::PowerMean,
            Strategy::Quantum,
        ],
        ..GridSpec::default()
    };
    assert_eq!(spec.size(), 600);
    let capped = RunConfig {
        grid: Some(spec.clone()),
        cell_cap: 599,
        ..small_config()
    };
    assert!(capped.validate().is_err());

    let cfg = RunConfig {
        grid: Some(spec),
        bootstrap_resamples: 0,
        ..small_config()
    };
    let data = cfg.data.load().unwrap();
    let start = Instant::now();
    let (out, summary) = sweep(&cfg, &data, true).unwrap();
    assert!(start.elapsed() < Duration::from_secs(300), "{:?}", start.elapsed());
    assert_eq!(out.report.splits[0].cells.len(), 600);
    assert_eq!(summary.tiers.len(), 12);
}
