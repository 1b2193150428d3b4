//! Writes a synthetic dataset in the on-disk layout, reloads it and checks
//! that nothing changed.

use calfuse::corpus::{load_embeddings, md5_split, Dataset, Split};
use calfuse::synth::{generate, SynthConfig};

fn main() -> anyhow::Result<()> {
    let data = generate(&SynthConfig {
        n_passages: 600,
        n_queries: 40,
        ..SynthConfig::default()
    })?;
    let dir = tempfile::tempdir()?;
    let paths = data.write(dir.path())?;
    for p in [
        &paths.passages,
        &paths.annotations,
        &paths.queries,
        &paths.passage_embeddings,
    ] {
        println!("{:<60} {:>9} bytes", p.display(), std::fs::metadata(p)?.len());
    }

    let back = Dataset::load(&paths)?;
    println!(
        "passages and queries identical: {}",
        back.corpus == data.corpus && back.queries == data.queries
    );

    // Binary embeddings hold f32, so compare with a tolerance.
    let emb = load_embeddings(&paths.passage_embeddings, None)?;
    let worst = data
        .passage_embeddings
        .iter()
        .map(|(id, v)| {
            let w = emb.get(id).expect("same ids");
            v.iter().zip(w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    println!("largest embedding difference after the f32 round trip: {worst:.2e}");

    let split = md5_split(&back.queries, 0.5);
    let tune = split.values().filter(|s| **s == Split::Tune).count();
    println!("md5 split: {tune} tune / {} test", split.len() - tune);
    Ok(())
}
