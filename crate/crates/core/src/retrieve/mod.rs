//! The two heterogeneous retrievers: exact cosine top-N over passage
//! embeddings, and Personalized PageRank over the entity graph.

mod graph;
mod pool;
mod ppr;
mod vector;

use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use graph::{seed_entities_for_query, EntityGraph, LinkReport, SeedSet};
pub use pool::cap_pool;
pub use ppr::{graph_passage_scores, ppr, EntityScores, NoSeeds, PprConfig};
pub use vector::vector_topk;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    Vector,
    Graph,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub id: String,
    pub score: f64,
}

/// Descending score, ascending id on ties.
pub(crate) fn by_score_then_id(a_score: f64, a_id: &str, b_score: f64, b_id: &str) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| a_id.cmp(b_id))
}

/// One system's ranked candidates with their raw scores.
///
/// Entries are sorted by score descending with ties broken by ascending id,
/// and ids are unique.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreList {
    system: System,
    entries: Vec<ScoredDoc>,
}

impl ScoreList {
    pub fn new(system: System, entries: impl IntoIterator<Item = (String, f64)>) -> Result<Self> {
        let mut entries: Vec<ScoredDoc> = entries.into_iter().map(|(id, score)| ScoredDoc { id, score }).collect();
        if let Some(bad) = entries.iter().find(|d| !d.score.is_finite()) {
            return Err(Error::invalid(format!("non-finite score for {:?}", bad.id)));
        }
        entries.sort_by(|a, b| by_score_then_id(a.score, &a.id, b.score, &b.id));
        let mut seen = HashSet::with_capacity(entries.len());
        if let Some(dup) = entries.iter().find(|d| !seen.insert(d.id.as_str())) {
            return Err(Error::DuplicateId {
                kind: "candidate",
                id: dup.id.clone(),
            });
        }
        Ok(Self { system, entries })
    }

    pub fn empty(system: System) -> Self {
        Self {
            system,
            entries: Vec::new(),
        }
    }

    /// Caller guarantees the sort and uniqueness invariants.
    pub(crate) fn from_sorted(system: System, entries: Vec<ScoredDoc>) -> Self {
        debug_assert!(entries
            .windows(2)
            .all(|w| by_score_then_id(w[0].score, &w[0].id, w[1].score, &w[1].id) == Ordering::Less));
        Self { system, entries }
    }

    pub fn system(&self) -> System {
        self.system
    }

    pub fn entries(&self) -> &[ScoredDoc] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|d| d.id.as_str())
    }

    pub fn scores(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|d| d.score)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.iter().any(|d| d.id == id)
    }

    /// Applies `f` to every raw score, re-sorting afterwards.
    pub fn map_scores(&self, mut f: impl FnMut(f64) -> f64) -> Result<Self> {
        Self::new(self.system, self.entries.iter().map(|d| (d.id.clone(), f(d.score))))
    }

    pub fn truncated(&self, n: usize) -> Self {
        Self {
            system: self.system,
            entries: self.entries.iter().take(n).cloned().collect(),
        }
    }
}
