//! Shows the two score regimes of a synthetic corpus (a narrow band of
//! cosines, a heavy-tailed PPR) before and after calibration, over queries
//! whose graph pool has at least 100 candidates.

use calfuse::harness::{prepare, DataSource, RunConfig};
use calfuse::retrieve::ScoreList;
use calfuse::synth::{generate, regime_report, SynthConfig};

fn main() -> anyhow::Result<()> {
    let synth = SynthConfig {
        n_passages: 3000,
        n_queries: 100,
        cross_topic_rate: 0.3,
        distractor_density: 5.0,
        ..SynthConfig::default()
    };
    let data = generate(&synth)?;
    let cfg = RunConfig {
        data: DataSource::Synthetic(synth),
        n_v: 100,
        ..RunConfig::default()
    };
    let prepared = prepare(&cfg, &data, &[None])?;
    let (vector, graph): (Vec<ScoreList>, Vec<ScoreList>) = (0..prepared.len())
        .filter_map(|i| prepared.lists(i, None))
        .filter(|(_, g)| g.len() >= 100)
        .map(|(v, g)| (v.clone(), g.clone()))
        .unzip();

    let report = regime_report(&vector, &graph, 10, 10)?;
    for h in &report.histograms {
        let bars: String = (0..h.counts.len())
            .map(|b| {
                let f = h.fraction(b);
                [' ', '▁', '▂', '▃', '▄', '▅', '▆', '▇', '█'][((f * 16.0).ceil() as usize).min(8)]
            })
            .collect();
        println!("{:<14} [{:>7.4}, {:>7.4}] |{bars}|", h.series, h.lo, h.hi);
    }
    for ks in &report.ks {
        println!(
            "{:<14} KS to uniform {:.4} ({} lists)",
            ks.series, ks.distance, ks.lists
        );
    }
    Ok(())
}
