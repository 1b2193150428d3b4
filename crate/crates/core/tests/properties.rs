use std::collections::{BTreeSet, HashSet};

use proptest::prelude::*;

use calfuse::calibrate::{calibrate, pit_normalize, Normalizer, TemperatureMode, DEFAULT_EPSILON};
use calfuse::eval::{mcnemar_exact, wilson_ci, Metric};
use calfuse::fusion::{fuse, FusionConfig, Strategy as FusionStrategy};
use calfuse::retrieve::{cap_pool, ScoreList, System};

/// Distinct positive scores keyed `d0, d1, ...`.
fn scores(max_len: usize) -> impl Strategy<Value = Vec<(String, f64)>> {
    prop::collection::btree_set(1u32..1_000_000, 1..max_len).prop_map(|set| {
        set.into_iter()
            .enumerate()
            .map(|(i, t)| (format!("d{}", i * 7 % 97), t as f64 / 1e6))
            .collect::<std::collections::BTreeMap<_, _>>()
            .into_iter()
            .collect()
    })
}

fn apply(kind: u8, x: f64) -> f64 {
    match kind % 4 {
        0 => 4.0 * x - 2.0,
        1 => (6.0 * x).exp(),
        2 => x * x * x + x,
        _ => (x + 0.001).ln(),
    }
}

fn list(system: System, items: &[(String, f64)], kind: Option<u8>) -> ScoreList {
    ScoreList::new(
        system,
        items
            .iter()
            .map(|(id, s)| (id.clone(), kind.map_or(*s, |k| apply(k, *s)))),
    )
    .unwrap()
}

fn chain(ids: &[u8]) -> Vec<String> {
    ids.iter().map(|i| format!("p{i}")).collect()
}

proptest! {
    #[test]
    fn pit_fusion_ignores_monotone_rescaling(
        v in scores(25),
        g in scores(25),
        kv in any::<u8>(),
        kg in any::<u8>(),
        alpha in 0.0..=1.0f64,
        beta in 0.0..2.0f64,
        s in 0usize..5,
    ) {
        let strategy = [
            FusionStrategy::Thermo,
            FusionStrategy::Linear,
            FusionStrategy::LogLinear,
            FusionStrategy::PowerMean,
            FusionStrategy::Tsallis,
        ][s];
        let cfg = FusionConfig { strategy, alpha, beta, k: 100, ..FusionConfig::default() };
        let a = fuse(&list(System::Vector, &v, None), &list(System::Graph, &g, None), &cfg).unwrap();
        let b = fuse(&list(System::Vector, &v, Some(kv)), &list(System::Graph, &g, Some(kg)), &cfg).unwrap();
        prop_assert_eq!(a.ranking, b.ranking);
    }

    #[test]
    fn calibrated_list_is_a_distribution(v in scores(40), n in 0usize..3) {
        let normalizer = [Normalizer::Pit, Normalizer::MinMax, Normalizer::RawMax][n];
        let c = calibrate(&list(System::Vector, &v, None), normalizer, TemperatureMode::Auto, DEFAULT_EPSILON).unwrap();
        let total: f64 = c.probabilities().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(c.probabilities().all(|p| p > 0.0));
        let pit = pit_normalize(&list(System::Vector, &v, None)).unwrap();
        prop_assert!(pit.iter().all(|&x| x > 0.0 && x <= 1.0));
        prop_assert!(pit.contains(&1.0));
    }

    #[test]
    fn mcnemar_is_symmetric_and_bounded(w in 0u64..400, l in 0u64..400) {
        let p = mcnemar_exact(w, l);
        prop_assert_eq!(p, mcnemar_exact(l, w));
        prop_assert!(p > 0.0 && p <= 1.0);
    }

    #[test]
    fn mcnemar_one_sided_tally(w in 0u64..1000) {
        let want = 2f64.powi(1 - w as i32).min(1.0);
        let p = mcnemar_exact(w, 0);
        prop_assert!((p - want).abs() <= 1e-12 * want.max(1e-300), "p({}, 0) = {} vs {}", w, p, want);
    }

    #[test]
    fn wilson_brackets_the_rate(n in 1u64..5000, frac in 0.0..=1.0f64, z in 0.5..3.5f64) {
        let s = (frac * n as f64).round() as u64;
        let (lo, hi) = wilson_ci(s, n, z).unwrap();
        let rate = s as f64 / n as f64;
        prop_assert!(0.0 <= lo && lo <= rate + 1e-12);
        prop_assert!(rate - 1e-12 <= hi && hi <= 1.0);
        let (lo2, hi2) = wilson_ci(s, n, z + 0.5).unwrap();
        prop_assert!(lo2 <= lo + 1e-12 && hi2 >= hi - 1e-12);
    }

    #[test]
    fn hits_are_monotone_in_k(
        retrieved in prop::collection::vec(0u8..30, 0..20),
        gold in prop::collection::vec(0u8..30, 1..5),
        k in 1usize..20,
    ) {
        let mut seen = HashSet::new();
        let retrieved: Vec<u8> = retrieved.into_iter().filter(|x| seen.insert(*x)).collect();
        let (r, g) = (chain(&retrieved), chain(&gold));
        for m in Metric::ALL {
            if m.evaluate(&r, &g, k).unwrap() {
                prop_assert!(m.evaluate(&r, &g, k + 1).unwrap(), "{} hit at {} but not {}", m, k, k + 1);
            }
        }
    }

    #[test]
    fn cap_pool_keeps_consensus_and_top_graph_only(
        g in scores(40),
        v in scores(40),
        dk in prop::option::of(0usize..15),
    ) {
        let (gl, vl) = (list(System::Graph, &g, None), list(System::Vector, &v, None));
        let capped = cap_pool(&gl, &vl, dk);
        let in_vector: HashSet<&str> = vl.ids().collect();
        let kept: BTreeSet<&str> = capped.ids().collect();

        // order preserved as a subsequence of the graph list
        let order: Vec<&str> = gl.ids().filter(|id| kept.contains(id)).collect();
        prop_assert_eq!(order, capped.ids().collect::<Vec<_>>());
        for id in gl.ids().filter(|id| in_vector.contains(id)) {
            prop_assert!(kept.contains(id));
        }
        let graph_only: Vec<&str> = gl.ids().filter(|id| !in_vector.contains(id)).collect();
        let kept_only = capped.ids().filter(|id| !in_vector.contains(id)).count();
        match dk {
            None => prop_assert_eq!(capped, gl),
            Some(dk) => {
                prop_assert_eq!(kept_only, dk.min(graph_only.len()));
                for id in &graph_only[..kept_only] {
                    prop_assert!(kept.contains(id));
                }
            }
        }
    }
}
