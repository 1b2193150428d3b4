//! Generates a small synthetic corpus, evaluates a few fusion cells on the
//! tune split, picks the tune winner and only then looks at the test split.

use calfuse::corpus::Split;
use calfuse::fusion::{FusionConfig, Strategy};
use calfuse::harness::{run_eval, select_tune_winner, CellConfig, DataSource, RunConfig, SelectionRule};
use calfuse::synth::{generate, SynthConfig};

fn cell(strategy: Strategy, alpha: f64, beta: f64, dk: Option<usize>) -> CellConfig {
    CellConfig {
        fusion: FusionConfig {
            strategy,
            alpha,
            beta,
            ..FusionConfig::default()
        },
        dk,
        ..CellConfig::default()
    }
}

fn main() -> anyhow::Result<()> {
    let synth = SynthConfig {
        n_passages: 1500,
        n_queries: 120,
        alias_rate: 0.2,
        ..SynthConfig::default()
    };
    let data = generate(&synth)?;
    let cfg = RunConfig {
        data: DataSource::Synthetic(synth),
        cells: vec![
            cell(Strategy::Thermo, 0.7, 0.0, Some(30)),
            cell(Strategy::Thermo, 0.7, 0.5, Some(30)),
            cell(Strategy::Thermo, 0.3, 0.5, None),
            cell(Strategy::Rrf, 0.5, 0.0, None),
            cell(Strategy::LogLinear, 0.7, 0.0, Some(30)),
        ],
        ..RunConfig::default()
    };

    let tune = run_eval(&cfg, &data, false)?;
    let split = tune.report.split(Split::Tune).expect("tune split");
    for c in &split.cells {
        let r = c.result(cfg.metric, cfg.k).expect("summary metric");
        println!(
            "{:<28} {:.3}  W {:>2} L {:>2}",
            c.label, r.rate, r.paired.wins, r.paired.losses
        );
    }
    let winner = select_tune_winner(&split.cells, cfg.metric, cfg.k, SelectionRule::BestMetric)?;
    println!("tune winner: {}", winner.label);

    let confirmed = run_eval(&cfg, &data, true)?;
    let test = confirmed.report.split(Split::Test).expect("test split");
    let r = test.cells[winner.index]
        .result(cfg.metric, cfg.k)
        .expect("summary metric");
    let base = test
        .baseline
        .iter()
        .find(|b| b.metric == cfg.metric && b.k == cfg.k)
        .expect("baseline");
    println!(
        "test: {}@{} {:.3} vs vector-only {:.3}, W {} L {}, p = {:.3}",
        cfg.metric, cfg.k, r.rate, base.rate, r.paired.wins, r.paired.losses, r.p_value
    );
    Ok(())
}
