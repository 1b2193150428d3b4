//! Mean-field Ising reranking of fused candidates.
//!
//! Each candidate is a spin. Its external field is the fused score shifted to
//! zero mean, and candidates sharing canonical entities are coupled. The
//! magnetization update is the standard damped mean-field iteration
//!
//! ```text
//! m_i ← (1−μ)·m_i + μ·tanh((h_i + J·Σ_j A_ij·m_j) / T)
//! ```
//!
//! and the reranked score is `(1−blend)·fused_i + blend·(m_i+1)/2`.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fusion::FusedRanking;
use crate::retrieve::EntityGraph;
use crate::{Error, Result};

/// Magnetizations are kept strictly inside (−1, 1).
const SPIN_LIMIT: f64 = 1.0 - 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IsingConfig {
    pub j: f64,
    pub t: f64,
    pub blend: f64,
    pub max_iterations: usize,
    pub tol: f64,
    pub damping_mix: f64,
}

impl Default for IsingConfig {
    fn default() -> Self {
        Self {
            j: 1.0,
            t: 1.0,
            blend: 0.0,
            max_iterations: 100,
            tol: 1e-6,
            damping_mix: 0.5,
        }
    }
}

impl IsingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.j >= 0.0 && self.j.is_finite()) {
            return Err(Error::invalid(format!("ising J must be ≥ 0, got {}", self.j)));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::invalid(format!("ising T must be > 0, got {}", self.t)));
        }
        if !(0.0..=1.0).contains(&self.blend) {
            return Err(Error::invalid(format!(
                "ising blend must be in [0,1], got {}",
                self.blend
            )));
        }
        if !(self.damping_mix > 0.0 && self.damping_mix <= 1.0) {
            return Err(Error::invalid(format!(
                "ising damping_mix must be in (0,1], got {}",
                self.damping_mix
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("ising tol must be > 0"));
        }
        Ok(())
    }
}

/// Dense square coupling matrix over a candidate list, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    size: usize,
    values: Vec<f64>,
}

impl Coupling {
    pub fn zeros(size: usize) -> Self {
        Self {
            size,
            values: vec![0.0; size * size],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let size = rows.len();
        if rows.iter().any(|r| r.len() != size) {
            return Err(Error::invalid("coupling rows must form a square matrix"));
        }
        Ok(Self {
            size,
            values: rows.into_iter().flatten().collect(),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.size..(i + 1) * self.size]
    }

    /// Scales each row by its maximum; all-zero rows stay zero.
    pub fn row_max_normalized(&self) -> Self {
        let mut out = self.clone();
        for row in out.values.chunks_mut(self.size.max(1)) {
            let max = row.iter().copied().fold(0.0, f64::max);
            if max > 0.0 {
                row.iter_mut().for_each(|x| *x /= max);
            }
        }
        out
    }
}

/// Number of canonical entities each pair of candidates shares. Symmetric,
/// zero diagonal. Candidates unknown to the graph share nothing.
pub fn shared_entity_counts(candidates: &FusedRanking, graph: &EntityGraph) -> Coupling {
    let members: Vec<&[usize]> = candidates
        .entries
        .iter()
        .map(|d| graph.passage_entities(&d.id))
        .collect();
    let n = members.len();
    let mut c = Coupling::zeros(n);
    for i in 0..n {
        for j in i + 1..n {
            let shared = sorted_intersection(members[i], members[j]) as f64;
            c.values[i * n + j] = shared;
            c.values[j * n + i] = shared;
        }
    }
    c
}

fn sorted_intersection(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// Shared-entity counts, row-max normalized to [0, 1].
pub fn build_coupling(candidates: &FusedRanking, graph: &EntityGraph) -> Coupling {
    shared_entity_counts(candidates, graph).row_max_normalized()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanField {
    pub m: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Runs the damped mean-field iteration from `m = 0` until the L∞ change
/// drops below `tol` or the iteration cap is hit.
pub fn mean_field(h: &[f64], coupling: &Coupling, cfg: &IsingConfig) -> Result<MeanField> {
    cfg.validate()?;
    let n = h.len();
    if coupling.size() != n {
        return Err(Error::invalid(format!(
            "coupling is {0}×{0} but there are {n} fields",
            coupling.size()
        )));
    }
    let mu = cfg.damping_mix;
    let mut m = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = n == 0;
    while !converged && iterations < cfg.max_iterations {
        iterations += 1;
        let mut change: f64 = 0.0;
        for i in 0..n {
            let local: f64 = coupling.row(i).iter().zip(&m).map(|(a, mj)| a * mj).sum();
            let target = ((h[i] + cfg.j * local) / cfg.t).tanh();
            let v = ((1.0 - mu) * m[i] + mu * target).clamp(-SPIN_LIMIT, SPIN_LIMIT);
            change = change.max((v - m[i]).abs());
            next[i] = v;
        }
        std::mem::swap(&mut m, &mut next);
        converged = change < cfg.tol;
    }
    Ok(MeanField {
        m,
        iterations,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reranked {
    pub ranking: FusedRanking,
    pub field: MeanField,
}

/// Blends fused scores with the mean-field magnetization and re-sorts.
/// `blend = 0` returns the input ranking unchanged.
pub fn mean_field_rerank(candidates: &FusedRanking, coupling: &Coupling, cfg: &IsingConfig) -> Result<Reranked> {
    let n = candidates.len();
    let mean = if n == 0 {
        0.0
    } else {
        candidates.entries.iter().map(|d| d.score).sum::<f64>() / n as f64
    };
    let h: Vec<f64> = candidates.entries.iter().map(|d| d.score - mean).collect();
    let field = mean_field(&h, coupling, cfg)?;
    if cfg.blend == 0.0 {
        return Ok(Reranked {
            ranking: candidates.clone(),
            field,
        });
    }
    let entries = candidates
        .entries
        .iter()
        .zip(&field.m)
        .map(|(d, &m)| {
            let mut d = d.clone();
            d.score = (1.0 - cfg.blend) * d.score + cfg.blend * (m + 1.0) / 2.0;
            d
        })
        .collect();
    Ok(Reranked {
        ranking: FusedRanking::from_unsorted(entries, n),
        field,
    })
}

/// Default blend values for a sweep.
pub const DEFAULT_BLENDS: [f64; 6] = [0.0, 0.1, 0.2, 0.25, 0.3, 0.5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingGrid {
    pub j: Vec<f64>,
    pub t: Vec<f64>,
    #[serde(default = "default_blends")]
    pub blend: Vec<f64>,
}

fn default_blends() -> Vec<f64> {
    DEFAULT_BLENDS.to_vec()
}

impl Default for IsingGrid {
    fn default() -> Self {
        Self {
            j: vec![0.5, 1.0, 2.0],
            t: vec![0.5, 1.0, 2.0],
            blend: default_blends(),
        }
    }
}

impl IsingGrid {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn cells(&self) -> usize {
        self.j.len() * self.t.len() * self.blend.len()
    }
}

/// One query's inputs to a sweep.
#[derive(Debug, Clone)]
pub struct SweepQuery {
    pub query_id: String,
    pub candidates: FusedRanking,
    pub coupling: Coupling,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub j: f64,
    pub t: f64,
    pub blend: f64,
    /// Reranked hit where the unreranked candidates missed.
    pub wins: usize,
    /// Unreranked hit lost by reranking.
    pub losses: usize,
    pub hits: usize,
    pub unconverged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub queries: usize,
    pub baseline_hits: usize,
    pub cells: Vec<SweepCell>,
}

impl SweepTable {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "j,t,blend,wins,losses,net,hits,baseline_hits,queries,unconverged")?;
        for c in &self.cells {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                c.j,
                c.t,
                c.blend,
                c.wins,
                c.losses,
                c.wins as i64 - c.losses as i64,
                c.hits,
                self.baseline_hits,
                self.queries,
                c.unconverged
            )?;
        }
        Ok(())
    }
}

/// Reranks every query at every grid cell and tallies wins and losses
/// against the unreranked candidates. `hit(query_id, ranking)` decides
/// success. Cells are ordered J, then T, then blend.
pub fn ising_sweep<F>(queries: &[SweepQuery], grid: &IsingGrid, base: &IsingConfig, hit: F) -> Result<SweepTable>
where
    F: Fn(&str, &FusedRanking) -> bool + Sync,
{
    let baseline: Vec<bool> = queries.par_iter().map(|q| hit(&q.query_id, &q.candidates)).collect();
    let mut cells = Vec::with_capacity(grid.cells());
    for &j in &grid.j {
        for &t in &grid.t {
            for &blend in &grid.blend {
                let cfg = IsingConfig { j, t, blend, ..*base };
                cfg.validate()?;
                let outcomes: Vec<(bool, bool)> = queries
                    .par_iter()
                    .map(|q| {
                        let r = mean_field_rerank(&q.candidates, &q.coupling, &cfg)?;
                        Ok((hit(&q.query_id, &r.ranking), r.field.converged))
                    })
                    .collect::<Result<_>>()?;
                let mut cell = SweepCell {
                    j,
                    t,
                    blend,
                    wins: 0,
                    losses: 0,
                    hits: 0,
                    unconverged: 0,
                };
                for (&b, &(h, converged)) in baseline.iter().zip(&outcomes) {
                    cell.hits += h as usize;
                    cell.wins += (h && !b) as usize;
                    cell.losses += (b && !h) as usize;
                    cell.unconverged += !converged as usize;
                }
                cells.push(cell);
            }
        }
    }
    Ok(SweepTable {
        queries: queries.len(),
        baseline_hits: baseline.iter().filter(|&&b| b).count(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, Passage};
    use crate::fusion::FusedDoc;

    fn ranking(items: &[(&str, f64)]) -> FusedRanking {
        FusedRanking::from_unsorted(
            items
                .iter()
                .map(|(id, s)| FusedDoc {
                    id: id.to_string(),
                    score: *s,
                    in_vector: true,
                    in_graph: false,
                    consensus: false,
                })
                .collect(),
            usize::MAX,
        )
    }

    fn graph(passages: &[(&str, &[&str])]) -> EntityGraph {
        let corpus = Corpus::from_passages(
            passages
                .iter()
                .map(|(id, es)| Passage {
                    id: id.to_string(),
                    text: String::new(),
                    entity_mentions: es.iter().map(|s| s.to_string()).collect(),
                })
                .collect(),
        )
        .unwrap();
        EntityGraph::build(&corpus)
    }

    #[test]
    fn no_shared_entities_gives_zero_coupling() {
        let g = graph(&[("p1", &["a"]), ("p2", &["b"]), ("p3", &[])]);
        let c = build_coupling(&ranking(&[("p1", 0.3), ("p2", 0.2), ("p3", 0.1)]), &g);
        assert_eq!(c, Coupling::zeros(3));
    }

    #[test]
    fn coupling_counts_and_row_max() {
        let g = graph(&[("p1", &["a", "b", "c"]), ("p2", &["a", "b"]), ("p3", &["c"])]);
        let cands = ranking(&[("p1", 0.3), ("p2", 0.2), ("p3", 0.1)]);
        let raw = shared_entity_counts(&cands, &g);
        assert_eq!(raw.row(0), [0.0, 2.0, 1.0]);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(raw.get(i, j), raw.get(j, i));
            }
        }
        let a = build_coupling(&cands, &g);
        assert_eq!(a.row(0), [0.0, 1.0, 0.5]);
        assert_eq!(a.row(1), [1.0, 0.0, 0.0]);
        assert_eq!(a.row(2), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn blend_zero_is_identity() {
        let cands = ranking(&[("x", 0.9), ("y", 0.5), ("z", 0.5)]);
        let c = Coupling::from_rows(vec![vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]]).unwrap();
        let r = mean_field_rerank(
            &cands,
            &c,
            &IsingConfig {
                j: 5.0,
                ..IsingConfig::default()
            },
        )
        .unwrap();
        assert_eq!(r.ranking, cands);
    }

    #[test]
    fn zero_coupling_strength_keeps_order() {
        let cands = ranking(&[("a", 0.9), ("b", 0.7), ("c", 0.2), ("d", 0.1)]);
        let c = Coupling::from_rows(vec![vec![0.0, 0.0, 0.0, 1.0]; 4]).unwrap();
        for blend in [0.1, 0.5, 1.0] {
            let cfg = IsingConfig {
                j: 0.0,
                blend,
                ..IsingConfig::default()
            };
            let r = mean_field_rerank(&cands, &c, &cfg).unwrap();
            assert_eq!(r.ranking.ids(), cands.ids());
            // m → tanh(h/T)
            for (m, d) in r.field.m.iter().zip(&cands.entries) {
                assert!((m - ((d.score - 0.475) / cfg.t).tanh()).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn two_spin_fixed_point() {
        // Antisymmetric fields give m2 = −m1 with m1 = tanh(0.1 − m1).
        let (mut lo, mut hi) = (0.0_f64, 0.1_f64);
        while hi - lo > 1e-15 {
            let mid = (lo + hi) / 2.0;
            if (0.1 - mid).tanh() > mid {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let c = Coupling::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let mf = mean_field(&[0.1, -0.1], &c, &IsingConfig::default()).unwrap();
        assert!(mf.converged);
        assert!((mf.m[0] - lo).abs() < 1e-6, "{} vs {lo}", mf.m[0]);
        assert!((mf.m[1] + lo).abs() < 1e-6);
    }

    #[test]
    fn damping_does_not_move_the_fixed_point() {
        let c = Coupling::from_rows(vec![vec![0.0, 1.0, 0.5], vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]]).unwrap();
        let h = [0.2, -0.05, -0.15];
        let a = mean_field(
            &h,
            &c,
            &IsingConfig {
                damping_mix: 0.5,
                ..IsingConfig::default()
            },
        )
        .unwrap();
        let b = mean_field(
            &h,
            &c,
            &IsingConfig {
                damping_mix: 0.9,
                ..IsingConfig::default()
            },
        )
        .unwrap();
        assert!(a.converged && b.converged);
        for (x, y) in a.m.iter().zip(&b.m) {
            assert!((x - y).abs() < 10.0 * 1e-6);
        }
    }

    #[test]
    fn non_convergence_is_flagged() {
        let c = Coupling::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let cfg = IsingConfig {
            max_iterations: 2,
            ..IsingConfig::default()
        };
        let mf = mean_field(&[0.1, -0.1], &c, &cfg).unwrap();
        assert_eq!(mf.iterations, 2);
        assert!(!mf.converged);
    }

    #[test]
    fn saturated_spins_stay_open() {
        let c = Coupling::zeros(2);
        let cfg = IsingConfig {
            t: 1e-6,
            damping_mix: 1.0,
            ..IsingConfig::default()
        };
        let mf = mean_field(&[5.0, -5.0], &c, &cfg).unwrap();
        assert!(mf.m.iter().all(|m| m.abs() < 1.0));
    }

    #[test]
    fn config_validation() {
        assert!(IsingConfig {
            t: 0.0,
            ..IsingConfig::default()
        }
        .validate()
        .is_err());
        assert!(IsingConfig {
            j: -1.0,
            ..IsingConfig::default()
        }
        .validate()
        .is_err());
        assert!(IsingConfig {
            blend: 1.5,
            ..IsingConfig::default()
        }
        .validate()
        .is_err());
        assert!(IsingConfig {
            damping_mix: 0.0,
            ..IsingConfig::default()
        }
        .validate()
        .is_err());
        assert!(mean_field(&[0.0], &Coupling::zeros(2), &IsingConfig::default()).is_err());
    }

    #[test]
    fn sweep_blend_zero_row_matches_baseline() {
        let queries = vec![
            SweepQuery {
                query_id: "q1".into(),
                candidates: ranking(&[("a", 0.6), ("b", 0.5)]),
                coupling: Coupling::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(),
            },
            SweepQuery {
                query_id: "q2".into(),
                candidates: ranking(&[("c", 0.9), ("d", 0.1)]),
                coupling: Coupling::zeros(2),
            },
        ];
        let hit = |_: &str, r: &FusedRanking| r.entries.first().is_some_and(|d| d.id == "a" || d.id == "c");
        let grid = IsingGrid::default();
        let t1 = ising_sweep(&queries, &grid, &IsingConfig::default(), hit).unwrap();
        let t2 = ising_sweep(&queries, &grid, &IsingConfig::default(), hit).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(t1.cells.len(), 54);
        for c in t1.cells.iter().filter(|c| c.blend == 0.0) {
            assert_eq!((c.wins, c.losses, c.hits), (0, 0, t1.baseline_hits));
        }
        let mut csv = Vec::new();
        t1.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 55);
    }
}
