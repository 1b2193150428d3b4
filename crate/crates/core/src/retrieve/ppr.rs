use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::graph::EntityGraph;
use super::{by_score_then_id, ScoreList, ScoredDoc, System};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PprConfig {
    pub damping: f64,
    /// Iteration stops once the L1 change between iterates drops below this.
    pub epsilon: f64,
    pub max_iterations: usize,
}

impl Default for PprConfig {
    fn default() -> Self {
        Self {
            damping: 0.85,
            epsilon: 1e-8,
            max_iterations: 100,
        }
    }
}

/// No query entity resolved to a graph node; callers fall back to
/// vector-only retrieval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("no seed entity resolved in the graph")]
pub struct NoSeeds;

/// Stationary PPR mass per entity (indexed like the graph's entities).
#[derive(Debug, Clone, PartialEq)]
pub struct EntityScores {
    pub scores: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl EntityScores {
    pub fn get(&self, graph: &EntityGraph, name: &str) -> f64 {
        graph.entity_index(name).map(|i| self.scores[i]).unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.scores.iter().sum()
    }
}

/// Personalized PageRank by power iteration on the row-normalized
/// co-occurrence matrix.
///
/// Restart mass `1 - damping` is spread uniformly over the canonicalized
/// seeds; mass sitting on entities without edges also returns to the seeds,
/// so every iterate is a probability distribution.
pub fn ppr(graph: &EntityGraph, seeds: &BTreeSet<String>, config: &PprConfig) -> Result<EntityScores, NoSeeds> {
    let seed_idx: BTreeSet<usize> = seeds
        .iter()
        .filter_map(|s| graph.entity_index(s))
        .map(|i| graph.canonical_index(i))
        .collect();
    if seed_idx.is_empty() {
        return Err(NoSeeds);
    }
    let n = graph.entity_count();
    let restart = 1.0 / seed_idx.len() as f64;
    let out_weight: Vec<f64> = (0..n)
        .map(|i| graph.neighbors(i).iter().map(|&(_, w)| w).sum())
        .collect();
    let d = config.damping;

    let mut x = vec![0.0; n];
    for &s in &seed_idx {
        x[s] = restart;
    }
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iterations {
        iterations += 1;
        next.iter_mut().for_each(|v| *v = 0.0);
        let mut dangling = 0.0;
        for i in 0..n {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            if out_weight[i] > 0.0 {
                let scale = d * xi / out_weight[i];
                for &(j, w) in graph.neighbors(i) {
                    next[j] += scale * w;
                }
            } else {
                dangling += xi;
            }
        }
        let to_seeds = (1.0 - d + d * dangling) * restart;
        for &s in &seed_idx {
            next[s] += to_seeds;
        }
        let delta: f64 = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut x, &mut next);
        if delta < config.epsilon {
            converged = true;
            break;
        }
    }
    Ok(EntityScores {
        scores: x,
        iterations,
        converged,
    })
}

/// Passage score is the sum of its member entities' PPR mass; passages
/// scoring zero are dropped.
pub fn graph_passage_scores(entity_scores: &EntityScores, graph: &EntityGraph) -> ScoreList {
    let mut entries: Vec<ScoredDoc> = (0..graph.passage_count())
        .filter_map(|p| {
            let id = graph.passage_id(p);
            let s: f64 = graph
                .passage_entities(id)
                .iter()
                .map(|&e| entity_scores.scores[e])
                .sum();
            (s > 0.0).then(|| ScoredDoc {
                id: id.to_string(),
                score: s,
            })
        })
        .collect();
    entries.sort_by(|a, b| by_score_then_id(a.score, &a.id, b.score, &b.id));
    ScoreList::from_sorted(System::Graph, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, Passage};

    fn graph(spec: &[(&str, &[&str])]) -> EntityGraph {
        EntityGraph::build(
            &Corpus::from_passages(
                spec.iter()
                    .map(|(id, ms)| Passage {
                        id: id.to_string(),
                        text: String::new(),
                        entity_mentions: ms.iter().map(|s| s.to_string()).collect(),
                    })
                    .collect(),
            )
            .unwrap(),
        )
    }

    fn seeds(s: &[&str]) -> BTreeSet<String> {
        s.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn isolated_seed_keeps_all_mass() {
        let g = graph(&[("p1", &["a"]), ("p2", &["b", "c"])]);
        let r = ppr(&g, &seeds(&["a"]), &PprConfig::default()).unwrap();
        assert!((r.get(&g, "a") - 1.0).abs() < 1e-12);
        assert_eq!(r.get(&g, "b"), 0.0);
    }

    #[test]
    fn symmetric_pair() {
        let g = graph(&[("p1", &["a", "b"])]);
        let r = ppr(&g, &seeds(&["a", "b"]), &PprConfig::default()).unwrap();
        assert!((r.get(&g, "a") - 0.5).abs() < 1e-12);
        assert!((r.get(&g, "b") - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unknown_seeds_signal_no_seed() {
        let g = graph(&[("p1", &["a", "b"])]);
        assert_eq!(ppr(&g, &seeds(&["zzz"]), &PprConfig::default()), Err(NoSeeds));
        assert_eq!(ppr(&g, &BTreeSet::new(), &PprConfig::default()), Err(NoSeeds));
    }

    #[test]
    fn mass_sums_to_one_on_a_chain() {
        let g = graph(&[
            ("p1", &["a", "b"]),
            ("p2", &["b", "c"]),
            ("p3", &["c", "d"]),
            ("p4", &["e"]),
        ]);
        let cfg = PprConfig {
            max_iterations: 1000,
            ..PprConfig::default()
        };
        let r = ppr(&g, &seeds(&["a"]), &cfg).unwrap();
        assert!(r.converged);
        assert!((r.total() - 1.0).abs() < 1e-9);
        // b collects from both sides: b ≈ 1.1855·a, c ≈ 0.6654·b, d = 0.425·c
        let (a, b, c, d) = (r.get(&g, "a"), r.get(&g, "b"), r.get(&g, "c"), r.get(&g, "d"));
        assert!((b / a - 0.85 / (1.0 - 0.425 * 0.425 / (1.0 - 0.85 * 0.425))).abs() < 1e-6);
        assert!(b > c && c > d);
        assert!((d / c - 0.425).abs() < 1e-6);
        assert_eq!(r.get(&g, "e"), 0.0);
    }

    #[test]
    fn passage_scores_sum_members() {
        let g = graph(&[("p1", &["A"]), ("p2", &["A", "B"]), ("p3", &["C"])]);
        let mut scores = vec![0.0; g.entity_count()];
        scores[g.entity_index("A").unwrap()] = 0.6;
        scores[g.entity_index("B").unwrap()] = 0.4;
        let es = EntityScores {
            scores,
            iterations: 0,
            converged: true,
        };
        let l = graph_passage_scores(&es, &g);
        assert_eq!(l.ids().collect::<Vec<_>>(), ["p2", "p1"]);
        assert!((l.entries()[0].score - 1.0).abs() < 1e-15);
        assert!((l.entries()[1].score - 0.6).abs() < 1e-15);
    }

    #[test]
    fn empty_or_orphan_mass_gives_empty_list() {
        let g = graph(&[("p1", &["A"])]);
        let zero = EntityScores {
            scores: vec![0.0; g.entity_count()],
            iterations: 0,
            converged: true,
        };
        assert!(graph_passage_scores(&zero, &g).is_empty());

        // all mass on an entity that no passage mentions after linking
        let g = graph(&[("p1", &["A"]), ("p2", &["B"])]);
        let store = crate::corpus::EmbeddingStore::from_vectors(
            [("a".to_string(), vec![1.0, 0.0]), ("b".to_string(), vec![1.0, 0.0])],
            None,
        )
        .unwrap();
        let (linked, _) = g.link_synonyms(&store, 0.9).unwrap();
        let mut scores = vec![0.0; linked.entity_count()];
        scores[linked.entity_index("b").unwrap()] = 1.0;
        let es = EntityScores {
            scores,
            iterations: 0,
            converged: true,
        };
        assert!(graph_passage_scores(&es, &linked).is_empty());
    }
}
