use std::collections::HashSet;

use super::{ScoreList, ScoredDoc};

/// Caps the graph candidate pool.
///
/// Every graph entry also returned by the vector retriever is kept; at most
/// `dk` of the highest-scoring graph-only entries are kept besides them.
/// `None` leaves the list untouched.
pub fn cap_pool(graph: &ScoreList, vector: &ScoreList, dk: Option<usize>) -> ScoreList {
    let Some(dk) = dk else {
        return graph.clone();
    };
    let in_vector: HashSet<&str> = vector.ids().collect();
    let mut graph_only = 0;
    let kept: Vec<ScoredDoc> = graph
        .entries()
        .iter()
        .filter(|d| {
            if in_vector.contains(d.id.as_str()) {
                true
            } else if graph_only < dk {
                graph_only += 1;
                true
            } else {
                false
            }
        })
        .cloned()
        .collect();
    ScoreList::from_sorted(graph.system(), kept)
}
