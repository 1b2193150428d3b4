//! Two surface forms of one entity split the graph; linking them by
//! embedding similarity makes the second passage reachable again.

use calfuse::corpus::{Corpus, EmbeddingStore, Passage};
use calfuse::retrieve::{graph_passage_scores, ppr, seed_entities_for_query, EntityGraph, PprConfig};

fn passage(id: &str, entities: &[&str]) -> Passage {
    Passage {
        id: id.into(),
        text: String::new(),
        entity_mentions: entities.iter().map(|e| e.to_string()).collect(),
    }
}

fn reachable(graph: &EntityGraph, seed: &str) -> anyhow::Result<Vec<String>> {
    let seeds = seed_entities_for_query(&[seed.to_string()], graph);
    let scores = ppr(graph, &seeds.entities, &PprConfig::default())?;
    Ok(graph_passage_scores(&scores, graph).ids().map(String::from).collect())
}

fn main() -> anyhow::Result<()> {
    let corpus = Corpus::from_passages(vec![
        passage("p1", &["Apollo 11", "United States"]),
        passage("p2", &["US", "Washington"]),
        passage("p3", &["Washington", "Potomac"]),
    ])?;
    // Entity embeddings are keyed by normalized surface form.
    let embeddings = EmbeddingStore::from_vectors(
        [
            ("apollo 11", vec![1.0, 0.0, 0.0, 0.0]),
            ("united states", vec![0.0, 1.0, 0.05, 0.0]),
            ("us", vec![0.0, 0.98, 0.0, 0.1]),
            ("washington", vec![0.0, 0.3, 0.9, 0.0]),
            ("potomac", vec![0.0, 0.0, 0.2, 1.0]),
        ]
        .map(|(k, v)| (k.to_string(), v)),
        None,
    )?;

    let graph = EntityGraph::build(&corpus);
    println!("before linking: {:?}", reachable(&graph, "Apollo 11")?);

    let (linked, report) = graph.link_synonyms(&embeddings, 0.85)?;
    println!(
        "linked {} pair(s); \"US\" now resolves to {:?}",
        report.links,
        linked.canonical_of("US")
    );
    println!("after linking:  {:?}", reachable(&linked, "Apollo 11")?);
    Ok(())
}
