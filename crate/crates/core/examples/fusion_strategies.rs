//! Runs every fusion strategy on the same pair of candidate lists.

use calfuse::fusion::{fuse, FusionConfig, Strategy};
use calfuse::retrieve::{ScoreList, System};

fn list(system: System, items: &[(&str, f64)]) -> calfuse::Result<ScoreList> {
    ScoreList::new(system, items.iter().map(|&(id, s)| (id.to_string(), s)))
}

fn main() -> calfuse::Result<()> {
    let vector = list(
        System::Vector,
        &[
            ("a", 0.52),
            ("b", 0.47),
            ("c", 0.45),
            ("d", 0.44),
            ("e", 0.41),
            ("f", 0.40),
        ],
    )?;
    let graph = list(
        System::Graph,
        &[
            ("c", 0.20),
            ("x", 0.12),
            ("a", 0.05),
            ("y", 0.02),
            ("e", 0.01),
            ("z", 0.004),
        ],
    )?;

    for strategy in Strategy::ALL {
        let cfg = FusionConfig {
            strategy,
            alpha: 0.7,
            beta: 0.5,
            k: 5,
            ..FusionConfig::default()
        };
        let fused = fuse(&vector, &graph, &cfg)?;
        let ids: Vec<String> = fused
            .ranking
            .entries
            .iter()
            .map(|d| format!("{}{}", d.id, if d.consensus { "*" } else { "" }))
            .collect();
        let note = if fused.downgraded(strategy) {
            " (fell back to thermo)"
        } else {
            ""
        };
        println!("{:<14} {}{note}", strategy.to_string(), ids.join(" "));
    }
    println!("\n* returned by both systems");
    Ok(())
}
