//! In-memory entity graph: passage membership, co-occurrence edges and the
//! synonym map produced by embedding-threshold linking.

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;

use crate::corpus::{Corpus, EmbeddingStore};
use crate::error::{Error, Result};

use super::vector::dot;

/// Surface normalization: trim and lowercase.
pub fn normalize_surface(s: &str) -> String {
    s.trim().to_lowercase()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntityGraph {
    /// Normalized surface forms, sorted; an entity's id is its surface form.
    names: Vec<String>,
    index: HashMap<String, usize>,
    /// Synonym map by index. Canonical is the smallest index, hence the
    /// lexicographically smallest id, of each merged component.
    canonical: Vec<usize>,
    passage_ids: Vec<String>,
    passage_index: HashMap<String, usize>,
    /// Distinct raw entities per passage, as ingested.
    raw_members: Vec<Vec<usize>>,
    /// Raw co-occurrence edges `(a, b, passages)` with `a < b`.
    raw_edges: Vec<(usize, usize, f64)>,
    // Derived from the raw data through `canonical`.
    members: Vec<Vec<usize>>,
    entity_passages: Vec<Vec<usize>>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

/// Outcome of a synonym-linking pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LinkReport {
    /// Entity pairs at or above the threshold.
    pub links: usize,
    /// Entities whose canonical changed.
    pub merged: usize,
    /// Entities skipped for lack of an embedding.
    pub skipped: usize,
}

impl EntityGraph {
    pub fn build(corpus: &Corpus) -> Self {
        let names: BTreeSet<String> = corpus
            .iter()
            .flat_map(|p| p.entity_mentions.iter().map(|m| normalize_surface(m)))
            .filter(|m| !m.is_empty())
            .collect();
        let names: Vec<String> = names.into_iter().collect();
        let index: HashMap<String, usize> = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();

        let mut passage_ids = Vec::new();
        let mut raw_members = Vec::new();
        for p in corpus.iter() {
            let mut ms: Vec<usize> = p
                .entity_mentions
                .iter()
                .filter_map(|m| index.get(&normalize_surface(m)).copied())
                .collect();
            ms.sort_unstable();
            ms.dedup();
            if !ms.is_empty() {
                passage_ids.push(p.id.clone());
                raw_members.push(ms);
            }
        }

        let mut counts: HashMap<(usize, usize), f64> = HashMap::new();
        for ms in &raw_members {
            for (i, &a) in ms.iter().enumerate() {
                for &b in &ms[i + 1..] {
                    *counts.entry((a, b)).or_insert(0.0) += 1.0;
                }
            }
        }
        let mut raw_edges: Vec<(usize, usize, f64)> = counts.into_iter().map(|((a, b), w)| (a, b, w)).collect();
        raw_edges.sort_by_key(|e| (e.0, e.1));

        let passage_index = passage_ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        let canonical = (0..names.len()).collect();
        let mut g = Self {
            names,
            index,
            canonical,
            passage_ids,
            passage_index,
            raw_members,
            raw_edges,
            members: Vec::new(),
            entity_passages: Vec::new(),
            adjacency: Vec::new(),
        };
        g.derive();
        g
    }

    fn derive(&mut self) {
        let n = self.names.len();
        self.members = self
            .raw_members
            .iter()
            .map(|ms| {
                let mut c: Vec<usize> = ms.iter().map(|&e| self.canonical[e]).collect();
                c.sort_unstable();
                c.dedup();
                c
            })
            .collect();
        let mut entity_passages = vec![Vec::new(); n];
        for (p, ms) in self.members.iter().enumerate() {
            for &e in ms {
                entity_passages[e].push(p);
            }
        }
        self.entity_passages = entity_passages;

        let mut merged: HashMap<(usize, usize), f64> = HashMap::new();
        for &(a, b, w) in &self.raw_edges {
            let (ca, cb) = (self.canonical[a], self.canonical[b]);
            if ca != cb {
                *merged.entry((ca.min(cb), ca.max(cb))).or_insert(0.0) += w;
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        for ((a, b), w) in merged {
            adjacency[a].push((b, w));
            adjacency[b].push((a, w));
        }
        for row in &mut adjacency {
            row.sort_by_key(|&(j, _)| j);
        }
        self.adjacency = adjacency;
    }

    /// Merges entities whose embeddings have cosine ≥ `threshold`, taking
    /// the transitive closure. Entity embeddings are looked up by normalized
    /// surface form; entities without one are skipped and counted.
    pub fn link_synonyms(&self, embeddings: &EmbeddingStore, threshold: f64) -> Result<(EntityGraph, LinkReport)> {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(Error::invalid(format!("synonym threshold {threshold} outside (0, 1]")));
        }
        let with_emb: Vec<(usize, &[f64])> = (0..self.names.len())
            .filter_map(|i| embeddings.get(&self.names[i]).map(|v| (i, v)))
            .collect();
        let skipped = self.names.len() - with_emb.len();

        let pairs: Vec<(usize, usize)> = (0..with_emb.len())
            .into_par_iter()
            .flat_map_iter(|i| {
                let (a, va) = with_emb[i];
                with_emb[i + 1..]
                    .iter()
                    .filter(move |(_, vb)| dot(va, vb) >= threshold)
                    .map(move |&(b, _)| (a, b))
            })
            .collect();

        let mut uf = UnionFind::new(self.names.len());
        for (i, &c) in self.canonical.iter().enumerate() {
            uf.union(i, c);
        }
        for &(a, b) in &pairs {
            uf.union(a, b);
        }
        let canonical: Vec<usize> = (0..self.names.len()).map(|i| uf.find(i)).collect();
        let merged = canonical.iter().zip(&self.canonical).filter(|(a, b)| a != b).count();

        let mut g = self.clone();
        g.canonical = canonical;
        g.derive();
        Ok((
            g,
            LinkReport {
                links: pairs.len(),
                merged,
                skipped,
            },
        ))
    }

    pub fn entity_count(&self) -> usize {
        self.names.len()
    }

    pub fn canonical_count(&self) -> usize {
        self.canonical.iter().enumerate().filter(|(i, c)| i == *c).count()
    }

    pub fn name(&self, entity: usize) -> &str {
        &self.names[entity]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn entity_index(&self, name: &str) -> Option<usize> {
        self.index.get(&normalize_surface(name)).copied()
    }

    pub fn canonical_index(&self, entity: usize) -> usize {
        self.canonical[entity]
    }

    /// Canonical id for a surface form, if the entity exists.
    pub fn canonical_of(&self, name: &str) -> Option<&str> {
        self.entity_index(name).map(|i| self.names[self.canonical[i]].as_str())
    }

    /// Co-occurrence weight between two canonical entities, zero if absent.
    pub fn cooccurrence(&self, a: &str, b: &str) -> f64 {
        let (Some(a), Some(b)) = (self.entity_index(a), self.entity_index(b)) else {
            return 0.0;
        };
        self.adjacency[a]
            .binary_search_by_key(&b, |&(j, _)| j)
            .map(|k| self.adjacency[a][k].1)
            .unwrap_or(0.0)
    }

    pub fn neighbors(&self, entity: usize) -> &[(usize, f64)] {
        &self.adjacency[entity]
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn passage_count(&self) -> usize {
        self.passage_ids.len()
    }

    pub fn passage_id(&self, p: usize) -> &str {
        &self.passage_ids[p]
    }

    /// Canonical entities mentioned by a passage.
    pub fn passage_entities(&self, passage_id: &str) -> &[usize] {
        self.passage_index
            .get(passage_id)
            .map(|&p| self.members[p].as_slice())
            .unwrap_or(&[])
    }

    /// Passages (by graph-local index) containing a canonical entity.
    pub fn entity_passages(&self, entity: usize) -> &[usize] {
        &self.entity_passages[entity]
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// The smaller root wins, so each root is its component's minimum.
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

/// Canonical entities grounding a query, plus the number of annotation
/// strings that matched nothing in the graph.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SeedSet {
    pub entities: BTreeSet<String>,
    pub misses: usize,
}

pub fn seed_entities_for_query(annotations: &[String], graph: &EntityGraph) -> SeedSet {
    let mut out = SeedSet::default();
    for a in annotations {
        match graph.canonical_of(a) {
            Some(c) => {
                out.entities.insert(c.to_string());
            }
            None => out.misses += 1,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Passage;

    fn corpus(spec: &[(&str, &[&str])]) -> Corpus {
        Corpus::from_passages(
            spec.iter()
                .map(|(id, ms)| Passage {
                    id: id.to_string(),
                    text: String::new(),
                    entity_mentions: ms.iter().map(|s| s.to_string()).collect(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn cooccurrence_by_hand() {
        let g = EntityGraph::build(&corpus(&[("p1", &["A", "B"]), ("p2", &["B", "C"])]));
        assert_eq!(g.names(), ["a", "b", "c"]);
        assert_eq!(g.cooccurrence("A", "B"), 1.0);
        assert_eq!(g.cooccurrence("B", "C"), 1.0);
        assert_eq!(g.cooccurrence("A", "C"), 0.0);
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn empty_annotations_give_empty_graph() {
        let g = EntityGraph::build(&corpus(&[("p1", &[]), ("p2", &[])]));
        assert_eq!(g.entity_count(), 0);
        assert_eq!(g.passage_count(), 0);
    }

    #[test]
    fn case_folding_merges_surface_forms() {
        let g = EntityGraph::build(&corpus(&[("p1", &["US", "x"]), ("p2", &[" us "])]));
        assert_eq!(g.entity_count(), 2);
        assert_eq!(g.entity_passages(g.entity_index("Us").unwrap()).len(), 2);
    }

    fn emb(v: &[(&str, Vec<f64>)]) -> EmbeddingStore {
        EmbeddingStore::from_vectors(v.iter().map(|(id, x)| (id.to_string(), x.clone())), None).unwrap()
    }

    /// Unit vector in the plane at `deg` degrees from the x axis.
    fn at(deg: f64) -> Vec<f64> {
        let r = deg.to_radians();
        vec![r.cos(), r.sin(), 0.0]
    }

    #[test]
    fn identical_embeddings_merge() {
        let g = EntityGraph::build(&corpus(&[("p1", &["US", "x"]), ("p2", &["United States", "y"])]));
        let e = emb(&[
            ("us", vec![1.0, 0.0, 0.0]),
            ("united states", vec![1.0, 0.0, 0.0]),
            ("x", vec![0.0, 1.0, 0.0]),
            ("y", vec![0.0, 0.0, 1.0]),
        ]);
        let (linked, report) = g.link_synonyms(&e, 0.85).unwrap();
        assert_eq!(report.links, 1);
        assert_eq!(linked.canonical_of("US"), Some("united states"));
        assert_eq!(linked.canonical_of("united states"), Some("united states"));
        // x and y now co-occur only through the merged node
        assert_eq!(linked.cooccurrence("united states", "x"), 1.0);
        assert_eq!(linked.cooccurrence("united states", "y"), 1.0);
        assert!(linked.neighbors(linked.entity_index("us").unwrap()).is_empty());

        let seeds = seed_entities_for_query(&["US".to_string(), "Z".to_string()], &linked);
        assert_eq!(seeds.entities.into_iter().collect::<Vec<_>>(), ["united states"]);
        assert_eq!(seeds.misses, 1);
    }

    #[test]
    fn threshold_one_with_distinct_embeddings_is_identity() {
        let g = EntityGraph::build(&corpus(&[("p1", &["a", "b", "c"])]));
        let e = emb(&[("a", at(0.0)), ("b", at(10.0)), ("c", at(50.0))]);
        let (linked, report) = g.link_synonyms(&e, 1.0).unwrap();
        assert_eq!(report.links, 0);
        assert_eq!(linked, g);
    }

    #[test]
    fn transitive_closure() {
        // cos(e1,e2) = cos(e2,e3) ≈ 0.9, cos(e1,e3) ≈ 0.62
        let g = EntityGraph::build(&corpus(&[("p1", &["e1", "e2", "e3", "e4"])]));
        let d = 0.9f64.acos().to_degrees();
        let e = emb(&[
            ("e1", at(0.0)),
            ("e2", at(d)),
            ("e3", at(2.0 * d)),
            ("e4", vec![0.0, 0.0, 1.0]),
        ]);
        let (linked, report) = g.link_synonyms(&e, 0.85).unwrap();
        assert_eq!(report.links, 2);
        for n in ["e1", "e2", "e3"] {
            assert_eq!(linked.canonical_of(n), Some("e1"));
        }
        assert_eq!(linked.canonical_of("e4"), Some("e4"));
        assert_eq!(linked.canonical_count(), 2);
        // summed weights: (e1,e4)+(e2,e4)+(e3,e4)
        assert_eq!(linked.cooccurrence("e1", "e4"), 3.0);
    }

    #[test]
    fn missing_embeddings_are_counted() {
        let g = EntityGraph::build(&corpus(&[("p1", &["a", "b"])]));
        let e = emb(&[("a", at(0.0))]);
        let (_, report) = g.link_synonyms(&e, 0.85).unwrap();
        assert_eq!(report.skipped, 1);
    }

    #[test]
    fn threshold_validated() {
        let g = EntityGraph::build(&corpus(&[("p1", &["a"])]));
        let e = emb(&[("a", at(0.0))]);
        assert!(g.link_synonyms(&e, 0.0).is_err());
        assert!(g.link_synonyms(&e, 1.5).is_err());
    }

    #[test]
    fn canonical_map_is_idempotent() {
        let g = EntityGraph::build(&corpus(&[("p1", &["b", "a"]), ("p2", &["c"])]));
        let e = emb(&[("a", at(0.0)), ("b", at(1.0)), ("c", at(2.0))]);
        let (linked, _) = g.link_synonyms(&e, 0.99).unwrap();
        for i in 0..linked.entity_count() {
            let c = linked.canonical_index(i);
            assert_eq!(linked.canonical_index(c), c);
        }
    }
}
