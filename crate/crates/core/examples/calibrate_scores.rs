//! Calibrates a cosine-like list and a heavy-tailed PPR-like list three
//! ways and prints the resulting Boltzmann probabilities side by side.

use calfuse::calibrate::{calibrate, Normalizer, TemperatureMode, DEFAULT_EPSILON};
use calfuse::retrieve::{ScoreList, System};

fn main() -> calfuse::Result<()> {
    let vector = ScoreList::new(
        System::Vector,
        [0.412, 0.398, 0.371, 0.366, 0.352, 0.349, 0.341, 0.337]
            .iter()
            .enumerate()
            .map(|(i, &s)| (format!("v{i}"), s)),
    )?;
    // one dominant node, then a long tail
    let graph = ScoreList::new(
        System::Graph,
        [0.31, 0.042, 0.018, 0.009, 0.004, 0.002, 0.001, 0.0005]
            .iter()
            .enumerate()
            .map(|(i, &s)| (format!("g{i}"), s)),
    )?;

    for list in [&vector, &graph] {
        println!("{:?} list", list.system());
        println!("{:<4} {:>8} {:>8} {:>8} {:>8}", "id", "raw", "pit", "minmax", "rawmax");
        let cal: Vec<_> = [Normalizer::Pit, Normalizer::MinMax, Normalizer::RawMax]
            .iter()
            .map(|&n| calibrate(list, n, TemperatureMode::Auto, DEFAULT_EPSILON))
            .collect::<calfuse::Result<_>>()?;
        for (i, d) in list.entries().iter().enumerate() {
            println!(
                "{:<4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
                d.id,
                d.score,
                cal[0].entries[i].probability,
                cal[1].entries[i].probability,
                cal[2].entries[i].probability
            );
        }
        println!(
            "temperatures: pit {:.3}  minmax {:.3}  rawmax {:.3}\n",
            cal[0].temperature, cal[1].temperature, cal[2].temperature
        );
    }

    // Percentile ranks depend only on order, so both lists get the same
    // probabilities under PIT; min-max keeps the graph's skew.
    Ok(())
}
