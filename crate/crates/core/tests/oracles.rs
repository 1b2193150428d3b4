//! Library results checked against independent, brute-force computations.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use calfuse::corpus::{md5_unit, split_of, Corpus, EmbeddingStore, Passage, Split};
use calfuse::retrieve::{graph_passage_scores, ppr, vector_topk, EntityGraph, PprConfig};

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn vector_topk_matches_exhaustive_sort() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let dim = rng.gen_range(2..12);
        let n = rng.gen_range(1..80);
        let mut raw: Vec<(String, Vec<f64>)> = (0..n)
            .map(|i| (format!("p{i:03}"), (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()))
            .collect();
        // exact duplicates force score ties broken by id
        for i in 1..n {
            if rng.gen_bool(0.15) {
                raw[i].1 = raw[i - 1].1.clone();
            }
        }
        let store = EmbeddingStore::from_vectors(raw.clone(), None).unwrap();
        let q: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let qn = unit(&q);
        let mut expected: Vec<(String, f64)> = raw.iter().map(|(id, v)| (id.clone(), dot(&qn, &unit(v)))).collect();
        expected.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let k = rng.gen_range(0..n + 5);
        let got = vector_topk(&qn, &store, k).unwrap();
        assert_eq!(got.len(), k.min(n));
        for (d, (_, s)) in got.entries().iter().zip(&expected) {
            assert!((d.score - s).abs() < 1e-12);
        }
        // ids follow the store's own scores, ties broken by id
        let got_ids: Vec<&str> = got.ids().collect();
        let mut sorted = got_ids.clone();
        sorted.sort_by(|a, b| {
            let sa = store.get(a).map(|v| dot(&qn, v)).unwrap();
            let sb = store.get(b).map(|v| dot(&qn, v)).unwrap();
            sb.total_cmp(&sa).then(a.cmp(b))
        });
        assert_eq!(got_ids, sorted);
    }
}

fn corpus_of(passages: &[Vec<String>]) -> Corpus {
    Corpus::from_passages(
        passages
            .iter()
            .enumerate()
            .map(|(i, ents)| Passage {
                id: format!("p{i:03}"),
                text: String::new(),
                entity_mentions: ents.clone(),
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn synonym_linking_matches_connected_components() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut checked = 0;
    while checked < 40 {
        let n = rng.gen_range(2..30);
        let names: Vec<String> = (0..n).map(|i| format!("ent{i:02}")).collect();
        let passages: Vec<Vec<String>> = names.chunks(2).map(|c| c.to_vec()).collect();
        let corpus = corpus_of(&passages);
        let graph = EntityGraph::build(&corpus);

        // a few tight clusters so thresholds produce non-trivial components
        let centers: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let mut vectors: Vec<(String, Vec<f64>)> = Vec::new();
        for name in &names {
            if rng.gen_bool(0.85) {
                let c = &centers[rng.gen_range(0..centers.len())];
                vectors.push((name.clone(), c.iter().map(|x| x + rng.gen_range(-0.3..0.3)).collect()));
            }
        }
        let threshold = rng.gen_range(0.6..0.99);
        let units: HashMap<&str, Vec<f64>> = vectors.iter().map(|(n, v)| (n.as_str(), unit(v))).collect();
        let near_boundary = units
            .values()
            .flat_map(|a| units.values().map(move |b| dot(a, b)))
            .any(|c| (c - threshold).abs() < 1e-9);
        if near_boundary {
            continue;
        }

        let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (a, va) in &units {
            for (b, vb) in &units {
                if a != b && dot(va, vb) >= threshold {
                    adj.entry(a).or_default().push(b);
                }
            }
        }
        let mut component_min: HashMap<&str, &str> = HashMap::new();
        for start in names.iter().map(String::as_str) {
            if component_min.contains_key(start) {
                continue;
            }
            let mut seen = BTreeSet::from([start]);
            let mut queue = VecDeque::from([start]);
            while let Some(x) = queue.pop_front() {
                for &y in adj.get(x).into_iter().flatten() {
                    if seen.insert(y) {
                        queue.push_back(y);
                    }
                }
            }
            let min = *seen.iter().next().unwrap();
            for s in seen {
                component_min.insert(s, min);
            }
        }

        let store = EmbeddingStore::from_vectors(vectors.clone(), None).unwrap();
        let (linked, report) = graph.link_synonyms(&store, threshold).unwrap();
        for name in &names {
            assert_eq!(
                linked.canonical_of(name),
                Some(component_min[name.as_str()]),
                "entity {name}"
            );
        }
        let classes: BTreeSet<&str> = component_min.values().copied().collect();
        assert_eq!(linked.canonical_count(), classes.len());
        assert_eq!(report.skipped, n - vectors.len());
        checked += 1;
    }
}

/// Solves the PPR fixed point directly:
/// (I − d·Pᵀ − d·s·cᵀ) x = (1 − d)·s, where c marks dangling nodes.
fn ppr_linear_solve(graph: &EntityGraph, seeds: &[usize], damping: f64) -> DVector<f64> {
    let n = graph.entity_count();
    let mut m = DMatrix::<f64>::identity(n, n);
    let mut s = DVector::<f64>::zeros(n);
    for &i in seeds {
        s[i] = 1.0 / seeds.len() as f64;
    }
    for i in 0..n {
        let row = graph.neighbors(i);
        let out: f64 = row.iter().map(|&(_, w)| w).sum();
        if out == 0.0 {
            for j in 0..n {
                m[(j, i)] -= damping * s[j];
            }
        } else {
            for &(j, w) in row {
                m[(j, i)] -= damping * w / out;
            }
        }
    }
    m.lu().solve(&((1.0 - damping) * s)).expect("nonsingular")
}

#[test]
fn ppr_matches_linear_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let cfg = PprConfig {
        damping: 0.85,
        epsilon: 1e-14,
        max_iterations: 20_000,
    };
    for _ in 0..60 {
        let n = rng.gen_range(2..40);
        let passages: Vec<Vec<String>> = (0..rng.gen_range(1..2 * n))
            .map(|_| {
                let k = rng.gen_range(1..=3.min(n));
                rand::seq::index::sample(&mut rng, n, k)
                    .into_iter()
                    .map(|e| format!("e{e:02}"))
                    .collect()
            })
            .collect();
        let graph = EntityGraph::build(&corpus_of(&passages));
        let m = graph.entity_count();
        let seeds: BTreeSet<usize> = (0..rng.gen_range(1..=3)).map(|_| rng.gen_range(0..m)).collect();
        let seeds: Vec<usize> = seeds.into_iter().collect();
        let names: BTreeSet<String> = seeds.iter().map(|&i| graph.name(i).to_string()).collect();
        let got = ppr(&graph, &names, &cfg).unwrap();
        assert!(got.converged);
        let want = ppr_linear_solve(&graph, &seeds, cfg.damping);
        for i in 0..m {
            assert!((got.get(&graph, graph.name(i)) - want[i]).abs() < 1e-9);
        }
        // passage score is the sum of its entities' mass
        let scores = graph_passage_scores(&got, &graph);
        for d in scores.entries() {
            let members = graph.passage_entities(&d.id);
            let sum: f64 = members.iter().map(|&e| want[e]).sum();
            assert!((d.score - sum).abs() < 1e-9);
            assert!(d.score > 0.0);
        }
    }
}

#[test]
fn md5_split_matches_reference_digests() {
    // first eight digest bytes, big-endian, over 2^64
    assert_eq!(md5_unit("query-0000"), 0x97e6b82f6c789195u64 as f64 / 2f64.powi(64));
    assert!((md5_unit("query-0000") - 0.5933642497807077).abs() < 1e-15);
    assert!((md5_unit("q00042") - 0.3763310731526626).abs() < 1e-15);
    assert!((md5_unit("") - 0.8285759001873909).abs() < 1e-15);

    let ids: Vec<String> = (0..1000).map(|i| format!("query-{i:04}")).collect();
    let tune = |f: f64| ids.iter().filter(|id| split_of(id, f) == Split::Tune).count();
    assert_eq!(tune(0.5), 494);
    assert_eq!(tune(0.3), 299);
    assert_eq!(tune(0.0), 0);
    assert_eq!(tune(1.0), 1000);
}
