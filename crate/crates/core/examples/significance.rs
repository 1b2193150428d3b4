//! Paired significance for a method vs baseline on per-query hits.

use calfuse::eval::{bootstrap_ci, mcnemar_exact, odds_ratio, pair_outcomes, wilson_ci, Metric, QueryOutcome};

fn main() -> calfuse::Result<()> {
    for (w, l) in [(8, 1), (11, 2), (15, 6), (5, 4), (26, 0), (2, 22)] {
        println!("McNemar W={w:<2} L={l:<2} p = {:.4e}", mcnemar_exact(w, l));
    }

    for (s, n) in [(26, 66), (49, 66), (53, 66), (6, 66)] {
        let (lo, hi) = wilson_ci(s, n, 1.96)?;
        println!(
            "Wilson {s}/{n}: {:.1}% [{:.1}, {:.1}]",
            100.0 * s as f64 / n as f64,
            100.0 * lo,
            100.0 * hi
        );
    }
    let or = odds_ratio(52, 26, 66)?;
    println!("odds ratio 52/66 vs 26/66: {:.2}", or.value);

    // Ten queries with a one-passage gold chain; the method rescues two and
    // loses one.
    let gold = |i: usize| vec![format!("g{i}")];
    let hit = |i: usize, yes: bool| {
        if yes {
            vec![format!("g{i}")]
        } else {
            vec!["x".to_string()]
        }
    };
    let base_hits = [true, true, false, false, true, true, true, false, true, false];
    let meth_hits = [true, true, true, true, false, true, true, false, true, false];
    let make = |hits: &[bool]| -> calfuse::Result<Vec<QueryOutcome>> {
        hits.iter()
            .enumerate()
            .map(|(i, &h)| QueryOutcome::new(format!("q{i}"), hit(i, h), gold(i), &[1]))
            .collect()
    };
    let (base, method) = (make(&base_hits)?, make(&meth_hits)?);
    let p = pair_outcomes(&base, &method, Metric::LastHop, 1)?;
    println!(
        "\npaired: W {} L {} both {} neither {}  p = {:.3}",
        p.wins,
        p.losses,
        p.both,
        p.neither,
        p.mcnemar_p()
    );
    let values: Vec<f64> = meth_hits.iter().map(|&h| if h { 1.0 } else { 0.0 }).collect();
    let (lo, hi) = bootstrap_ci(&values, 2000, 0.95, 42)?;
    println!("bootstrap 95% interval for the method's rate: [{lo:.2}, {hi:.2}]");
    Ok(())
}
