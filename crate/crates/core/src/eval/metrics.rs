use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Retrieval success criteria over a top-K list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Last gold passage in the top K.
    LastHop,
    /// Every gold passage in the top K.
    FullSup,
    /// At least one gold passage in the top K.
    Any,
    /// Every gold passage in the top K; reported separately from `FullSup`.
    Full,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::LastHop, Metric::FullSup, Metric::Any, Metric::Full];

    pub fn name(self) -> &'static str {
        match self {
            Metric::LastHop => "lasthop",
            Metric::FullSup => "fullsup",
            Metric::Any => "any",
            Metric::Full => "full",
        }
    }

    pub fn evaluate(self, retrieved: &[String], gold_chain: &[String], k: usize) -> Result<bool> {
        match self {
            Metric::LastHop => lasthop_at_k(retrieved, gold_chain, k),
            Metric::FullSup => fullsup_at_k(retrieved, gold_chain, k),
            Metric::Any => any_at_k(retrieved, gold_chain, k),
            Metric::Full => full_at_k(retrieved, gold_chain, k),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown metric {s:?}")))
    }
}

fn check(gold_chain: &[String], k: usize) -> Result<()> {
    if gold_chain.is_empty() {
        return Err(Error::Empty("gold chain is empty".into()));
    }
    if k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    Ok(())
}

fn top(retrieved: &[String], k: usize) -> HashSet<&str> {
    retrieved.iter().take(k).map(String::as_str).collect()
}

pub fn lasthop_at_k(retrieved: &[String], gold_chain: &[String], k: usize) -> Result<bool> {
    check(gold_chain, k)?;
    let last = gold_chain.last().expect("checked non-empty");
    Ok(retrieved.iter().take(k).any(|r| r == last))
}

pub fn fullsup_at_k(retrieved: &[String], gold_chain: &[String], k: usize) -> Result<bool> {
    check(gold_chain, k)?;
    let top = top(retrieved, k);
    Ok(gold_chain.iter().all(|g| top.contains(g.as_str())))
}

pub fn any_at_k(retrieved: &[String], gold_chain: &[String], k: usize) -> Result<bool> {
    check(gold_chain, k)?;
    let top = top(retrieved, k);
    Ok(gold_chain.iter().any(|g| top.contains(g.as_str())))
}

pub fn full_at_k(retrieved: &[String], gold_chain: &[String], k: usize) -> Result<bool> {
    fullsup_at_k(retrieved, gold_chain, k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Hits {
    pub lasthop: bool,
    pub fullsup: bool,
    pub any: bool,
    pub full: bool,
}

impl Hits {
    pub fn compute(retrieved: &[String], gold_chain: &[String], k: usize) -> Result<Self> {
        Ok(Self {
            lasthop: lasthop_at_k(retrieved, gold_chain, k)?,
            fullsup: fullsup_at_k(retrieved, gold_chain, k)?,
            any: any_at_k(retrieved, gold_chain, k)?,
            full: full_at_k(retrieved, gold_chain, k)?,
        })
    }

    pub fn get(&self, metric: Metric) -> bool {
        match metric {
            Metric::LastHop => self.lasthop,
            Metric::FullSup => self.fullsup,
            Metric::Any => self.any,
            Metric::Full => self.full,
        }
    }
}

/// One query's retrieved list and its hits at each evaluated K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryOutcome {
    pub query_id: String,
    pub retrieved: Vec<String>,
    pub gold_chain: Vec<String>,
    pub hits: BTreeMap<usize, Hits>,
}

impl QueryOutcome {
    pub fn new(
        query_id: impl Into<String>,
        retrieved: Vec<String>,
        gold_chain: Vec<String>,
        ks: &[usize],
    ) -> Result<Self> {
        let hits = ks
            .iter()
            .map(|&k| Ok((k, Hits::compute(&retrieved, &gold_chain, k)?)))
            .collect::<Result<_>>()?;
        Ok(Self {
            query_id: query_id.into(),
            retrieved,
            gold_chain,
            hits,
        })
    }

    /// Looks up a precomputed hit, recomputing for a K not evaluated at
    /// construction.
    pub fn hit(&self, metric: Metric, k: usize) -> Result<bool> {
        match self.hits.get(&k) {
            Some(h) => Ok(h.get(metric)),
            None => metric.evaluate(&self.retrieved, &self.gold_chain, k),
        }
    }
}

/// Paired 2×2 tally of a method against a baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PairedComparison {
    /// Method hit, baseline miss.
    pub wins: usize,
    /// Baseline hit, method miss.
    pub losses: usize,
    pub both: usize,
    pub neither: usize,
}

impl PairedComparison {
    pub fn total(&self) -> usize {
        self.wins + self.losses + self.both + self.neither
    }

    pub fn method_hits(&self) -> usize {
        self.wins + self.both
    }

    pub fn baseline_hits(&self) -> usize {
        self.losses + self.both
    }

    pub fn net(&self) -> i64 {
        self.wins as i64 - self.losses as i64
    }

    pub fn mcnemar_p(&self) -> f64 {
        super::mcnemar_exact(self.wins as u64, self.losses as u64)
    }

    /// Adds one query's pair of outcomes.
    pub fn record(&mut self, method: bool, baseline: bool) {
        match (method, baseline) {
            (true, false) => self.wins += 1,
            (false, true) => self.losses += 1,
            (true, true) => self.both += 1,
            (false, false) => self.neither += 1,
        }
    }
}

/// Tallies per-query outcomes matched by query id. Both runs must cover
/// exactly the same queries.
pub fn pair_outcomes(
    baseline: &[QueryOutcome],
    method: &[QueryOutcome],
    metric: Metric,
    k: usize,
) -> Result<PairedComparison> {
    let mut base: BTreeMap<&str, &QueryOutcome> = BTreeMap::new();
    for o in baseline {
        if base.insert(&o.query_id, o).is_some() {
            return Err(Error::DuplicateId {
                kind: "outcome",
                id: o.query_id.clone(),
            });
        }
    }
    if method.len() != base.len() {
        return Err(Error::MismatchedQueries(format!(
            "baseline has {} queries, method has {}",
            base.len(),
            method.len()
        )));
    }
    let mut seen = HashSet::new();
    let mut tally = PairedComparison::default();
    for m in method {
        let b = base
            .get(m.query_id.as_str())
            .ok_or_else(|| Error::MismatchedQueries(format!("query {:?} missing from baseline", m.query_id)))?;
        if !seen.insert(m.query_id.as_str()) {
            return Err(Error::DuplicateId {
                kind: "outcome",
                id: m.query_id.clone(),
            });
        }
        tally.record(m.hit(metric, k)?, b.hit(metric, k)?);
    }
    Ok(tally)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn lasthop_boundary() {
        let r = ids(&["a", "b", "c", "d", "g", "x"]);
        let gold = ids(&["z", "g"]);
        assert!(lasthop_at_k(&r, &gold, 5).unwrap());
        let r = ids(&["a", "b", "c", "d", "x", "g"]);
        assert!(!lasthop_at_k(&r, &gold, 5).unwrap());
        assert!(lasthop_at_k(&r, &gold, 6).unwrap());
    }

    #[test]
    fn set_metrics() {
        let r = ids(&["g1", "x", "g2"]);
        assert!(fullsup_at_k(&r, &ids(&["g1", "g2"]), 3).unwrap());
        assert!(full_at_k(&r, &ids(&["g1", "g2"]), 3).unwrap());
        assert!(!fullsup_at_k(&r, &ids(&["g1", "g2"]), 2).unwrap());
        assert!(any_at_k(&r, &ids(&["g1", "g2"]), 2).unwrap());
        assert!(!any_at_k(&r, &ids(&["g3"]), 3).unwrap());
    }

    #[test]
    fn empty_chain_and_zero_k_are_errors() {
        for m in Metric::ALL {
            assert!(m.evaluate(&ids(&["a"]), &[], 5).is_err());
            assert!(m.evaluate(&ids(&["a"]), &ids(&["a"]), 0).is_err());
        }
    }

    #[test]
    fn three_query_tally() {
        let gold = ids(&["g"]);
        let o = |q: &str, r: &[&str]| QueryOutcome::new(q, ids(r), gold.clone(), &[1]).unwrap();
        let base = [o("q1", &["g"]), o("q2", &["x"]), o("q3", &["x"])];
        let meth = [o("q3", &["g"]), o("q1", &["x"]), o("q2", &["x"])];
        let t = pair_outcomes(&base, &meth, Metric::LastHop, 1).unwrap();
        assert_eq!(
            t,
            PairedComparison {
                wins: 1,
                losses: 1,
                both: 0,
                neither: 1
            }
        );
        assert_eq!(pair_outcomes(&base, &base, Metric::LastHop, 1).unwrap().net(), 0);
        assert!(matches!(
            pair_outcomes(&base, &meth[..2], Metric::LastHop, 1),
            Err(Error::MismatchedQueries(_))
        ));
        let other = [o("q1", &["g"]), o("q2", &["x"]), o("q4", &["x"])];
        assert!(pair_outcomes(&base, &other, Metric::LastHop, 1).is_err());
    }

    #[test]
    fn recompute_at_unlisted_k() {
        let o = QueryOutcome::new("q", ids(&["a", "g"]), ids(&["g"]), &[1]).unwrap();
        assert!(!o.hit(Metric::LastHop, 1).unwrap());
        assert!(o.hit(Metric::LastHop, 2).unwrap());
    }

    #[test]
    fn metric_names_round_trip() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
    }
}
