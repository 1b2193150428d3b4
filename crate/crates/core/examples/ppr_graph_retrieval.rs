//! Builds an entity co-occurrence graph from a handful of passages, runs
//! Personalized PageRank from the query's entities and caps the pool.

use calfuse::corpus::{Corpus, Passage};
use calfuse::retrieve::{
    cap_pool, graph_passage_scores, ppr, seed_entities_for_query, EntityGraph, PprConfig, ScoreList, System,
};

fn passage(id: &str, entities: &[&str]) -> Passage {
    Passage {
        id: id.into(),
        text: String::new(),
        entity_mentions: entities.iter().map(|e| e.to_string()).collect(),
    }
}

fn main() -> anyhow::Result<()> {
    let corpus = Corpus::from_passages(vec![
        passage("p1", &["Green", "Steve Hillage"]),
        passage("p2", &["Steve Hillage", "Miquette Giraudy"]),
        passage("p3", &["Steve Hillage", "Gong"]),
        passage("p4", &["Gong", "Daevid Allen"]),
        passage("p5", &["Daevid Allen", "Soft Machine"]),
        passage("p6", &["Kevin Ayers", "Soft Machine"]),
        passage("p7", &["Unrelated Town", "Some River"]),
    ])?;
    let graph = EntityGraph::build(&corpus);
    println!("{} entities, {} edges", graph.entity_count(), graph.edge_count());

    let seeds = seed_entities_for_query(&["Green".to_string()], &graph);
    let scores = ppr(&graph, &seeds.entities, &PprConfig::default())?;
    println!(
        "converged after {} iterations, mass {:.6}",
        scores.iterations,
        scores.total()
    );

    let pool = graph_passage_scores(&scores, &graph);
    for d in pool.entries() {
        println!("  {} {:.5}", d.id, d.score);
    }

    // Suppose the dense retriever returned p2 and p7: they stay, and only
    // the best two graph-only passages are admitted besides them.
    let vector = ScoreList::new(System::Vector, [("p2".to_string(), 0.4), ("p7".to_string(), 0.3)])?;
    let capped = cap_pool(&pool, &vector, Some(2));
    println!("capped at dk=2: {:?}", capped.ids().collect::<Vec<_>>());
    Ok(())
}
