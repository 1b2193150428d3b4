use crate::corpus::EmbeddingStore;
use crate::error::{Error, Result};

use super::{by_score_then_id, ScoreList, ScoredDoc, System};

/// Exact top-`n` passages by cosine similarity.
///
/// Stored vectors are unit-norm, so cosine reduces to a dot product. If `n`
/// exceeds the store size every passage is returned.
pub fn vector_topk(query: &[f64], store: &EmbeddingStore, n: usize) -> Result<ScoreList> {
    if query.len() != store.dimension() {
        return Err(Error::DimensionMismatch {
            id: "<query>".into(),
            expected: store.dimension(),
            found: query.len(),
        });
    }
    let mut scored: Vec<(usize, f64)> = (0..store.len()).map(|i| (i, dot(query, store.row(i)))).collect();
    let ids = store.ids();
    let cmp = |a: &(usize, f64), b: &(usize, f64)| by_score_then_id(a.1, &ids[a.0], b.1, &ids[b.0]);
    let n = n.min(scored.len());
    if n == 0 {
        return Ok(ScoreList::empty(System::Vector));
    }
    if n < scored.len() {
        scored.select_nth_unstable_by(n - 1, cmp);
        scored.truncate(n);
    }
    scored.sort_by(cmp);
    let entries = scored
        .into_iter()
        .map(|(i, score)| ScoredDoc {
            id: ids[i].clone(),
            score,
        })
        .collect();
    Ok(ScoreList::from_sorted(System::Vector, entries))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
