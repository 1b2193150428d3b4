//! Mean-field reranking: candidates that share entities with strong
//! neighbours are pulled up.

use calfuse::fusion::{FusedDoc, FusedRanking};
use calfuse::ising::{mean_field_rerank, Coupling, IsingConfig};

fn doc(id: &str, score: f64) -> FusedDoc {
    FusedDoc {
        id: id.into(),
        score,
        in_vector: true,
        in_graph: true,
        consensus: true,
    }
}

fn main() -> calfuse::Result<()> {
    let candidates = FusedRanking::from_unsorted(
        vec![
            doc("a", 0.40),
            doc("b", 0.30),
            doc("c", 0.28),
            doc("d", 0.27),
            doc("e", 0.25),
        ],
        5,
    );
    // Shared-entity counts: a, d and e talk about the same things; b and c do not.
    let coupling = Coupling::from_rows(vec![
        vec![0.0, 0.0, 0.0, 2.0, 1.0],
        vec![0.0, 0.0, 0.0, 0.0, 0.0],
        vec![0.0, 0.0, 0.0, 0.0, 0.0],
        vec![2.0, 0.0, 0.0, 0.0, 2.0],
        vec![1.0, 0.0, 0.0, 2.0, 0.0],
    ])?
    .row_max_normalized();

    println!("fused:  {:?}", candidates.ids());
    for blend in [0.0, 0.2, 0.5] {
        let cfg = IsingConfig {
            j: 2.0,
            t: 0.5,
            blend,
            ..IsingConfig::default()
        };
        let r = mean_field_rerank(&candidates, &coupling, &cfg)?;
        let m: Vec<String> = r.field.m.iter().map(|m| format!("{m:+.3}")).collect();
        println!(
            "blend {blend:.1}: {:?}  m = [{}]  ({} iterations{})",
            r.ranking.ids(),
            m.join(", "),
            r.field.iterations,
            if r.field.converged { "" } else { ", not converged" }
        );
    }
    Ok(())
}
