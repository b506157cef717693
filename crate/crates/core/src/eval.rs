//! Top-k accuracy metrics and wall-clock timing.

use std::time::Instant;

use serde::{Serialize, Serializer};

use crate::corpus::TestSet;
use crate::error::{Error, Result};
use crate::recommend::RankList;

pub(crate) fn round5<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64((v * 1e5).round() / 1e5)
}

pub(crate) fn round3<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64((v * 1e3).round() / 1e3)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsAtK {
    pub k: usize,
    #[serde(serialize_with = "round5")]
    pub recall: f64,
    #[serde(serialize_with = "round5")]
    pub precision: f64,
    #[serde(serialize_with = "round5")]
    pub f1: f64,
}

fn test_set_of<'a>(test: &'a [TestSet], list: &RankList) -> Result<&'a TestSet> {
    match test.get(list.user as usize) {
        Some(t) if !t.is_empty() => Ok(t),
        _ => Err(Error::EmptyTestSet(list.user)),
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        Err(Error::config("k must be at least 1"))
    } else {
        Ok(())
    }
}

fn hits(list: &RankList, test: &TestSet, k: usize) -> usize {
    list.items().take(k).filter(|&i| test.contains(i)).count()
}

/// Total number of top-k entries that appear in the users' test sets.
pub fn hit_count(ranklists: &[RankList], test: &[TestSet], k: usize) -> Result<u64> {
    check_k(k)?;
    let mut total = 0u64;
    for list in ranklists {
        total += hits(list, test_set_of(test, list)?, k) as u64;
    }
    Ok(total)
}

/// Mean over users of `|top-k ∩ T_u| / |T_u|`.
pub fn recall_at_k(ranklists: &[RankList], test: &[TestSet], k: usize) -> Result<f64> {
    check_k(k)?;
    if ranklists.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for list in ranklists {
        let t = test_set_of(test, list)?;
        sum += hits(list, t, k) as f64 / t.len() as f64;
    }
    Ok(sum / ranklists.len() as f64)
}

/// Mean over users of `|top-k ∩ T_u| / k`; the denominator is always `k`.
pub fn precision_at_k(ranklists: &[RankList], test: &[TestSet], k: usize) -> Result<f64> {
    check_k(k)?;
    if ranklists.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for list in ranklists {
        sum += hits(list, test_set_of(test, list)?, k) as f64 / k as f64;
    }
    Ok(sum / ranklists.len() as f64)
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_at_k(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

pub fn metrics_at_k(ranklists: &[RankList], test: &[TestSet], k: usize) -> Result<MetricsAtK> {
    let recall = recall_at_k(ranklists, test, k)?;
    let precision = precision_at_k(ranklists, test, k)?;
    Ok(MetricsAtK {
        k,
        recall,
        precision,
        f1: f1_at_k(precision, recall),
    })
}

/// Runs `f` and returns its result with the elapsed monotonic time in seconds.
pub fn run_timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

/// Median of a non-empty sample; the mean of the middle pair for even sizes.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty sample");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    }
}

/// Wall-clock breakdown of one algorithm run. `total_seconds` covers profile
/// building, clustering and scoring; corpus I/O is excluded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Timing {
    #[serde(serialize_with = "round3")]
    pub cluster_seconds: f64,
    #[serde(serialize_with = "round3")]
    pub score_seconds: f64,
    #[serde(serialize_with = "round3")]
    pub total_seconds: f64,
}

/// Problem sizes and the scored-work estimates of both algorithms.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct WorkCounters {
    pub n_users: usize,
    pub n_items: usize,
    pub n_tags: usize,
    pub clusters: usize,
    pub non_empty_clusters: usize,
    /// Sum of cluster sizes; equals `n_users` for any partition.
    pub clustered_users: usize,
    /// Work of the run this counter block belongs to.
    pub scored_work: u64,
    /// Work of the global baseline on the same corpus.
    pub ucf_work: u64,
}

/// Parameters a report was produced with.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub mode: String,
    pub beta: f64,
    pub gamma: f64,
    pub clusters: usize,
    pub avg_cluster_size: usize,
    pub iterations: usize,
    pub degree_threshold: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub per_k: Vec<MetricsAtK>,
    pub timing: Timing,
    pub work: WorkCounters,
    pub config: ConfigEcho,
}

impl EvalReport {
    pub fn at(&self, k: usize) -> Option<&MetricsAtK> {
        self.per_k.iter().find(|m| m.k == k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn list(user: u32, items: &[u32]) -> RankList {
        RankList {
            user,
            entries: items.iter().map(|&i| (i, 1.0)).collect(),
        }
    }

    fn ts(items: &[u32]) -> TestSet {
        TestSet { items: items.to_vec() }
    }

    #[test]
    fn recall_examples() {
        let test = vec![ts(&[1, 2])];
        assert_eq!(recall_at_k(&[list(0, &[1, 2, 3])], &test, 3).unwrap(), 1.0);
        assert_eq!(recall_at_k(&[list(0, &[1, 5, 6, 7, 8])], &test, 5).unwrap(), 0.5);
        assert_eq!(recall_at_k(&[list(0, &[5, 6])], &test, 5).unwrap(), 0.0);
    }

    #[test]
    fn precision_examples() {
        let test = vec![ts(&[1, 2])];
        assert_eq!(precision_at_k(&[list(0, &[1, 5, 6, 7, 8])], &test, 5).unwrap(), 0.2);
        assert_eq!(precision_at_k(&[list(0, &[2, 1])], &test, 2).unwrap(), 1.0);
        assert_eq!(precision_at_k(&[list(0, &[])], &test, 5).unwrap(), 0.0);
        // Short list: denominator stays k.
        assert_eq!(precision_at_k(&[list(0, &[1])], &test, 4).unwrap(), 0.25);
    }

    #[test]
    fn f1_examples() {
        assert_eq!(f1_at_k(0.3, 0.3), 0.3);
        assert_eq!(f1_at_k(0.0, 0.5), 0.0);
        assert_eq!(f1_at_k(0.0, 0.0), 0.0);
        assert!((f1_at_k(0.05244, 0.11916) - 0.07283).abs() < 5e-5);
    }

    #[test]
    fn errors() {
        let test = vec![ts(&[1]), ts(&[])];
        assert!(recall_at_k(&[list(0, &[1])], &test, 0).unwrap_err().is_usage());
        assert!(matches!(recall_at_k(&[list(1, &[1])], &test, 1), Err(Error::EmptyTestSet(1))));
        assert!(matches!(precision_at_k(&[list(5, &[1])], &test, 1), Err(Error::EmptyTestSet(5))));
    }

    #[test]
    fn recall_prefix_monotone() {
        let test = vec![ts(&[2, 4, 6]), ts(&[1])];
        let lists = vec![list(0, &[1, 2, 3, 4, 5, 6]), list(1, &[3, 1])];
        let mut last = 0.0;
        for k in 1..=7 {
            let r = recall_at_k(&lists, &test, k).unwrap();
            assert!(r >= last);
            last = r;
        }
        assert_eq!(last, 1.0);
    }

    #[test]
    fn timing_helpers() {
        let (v, secs) = run_timed(|| 7);
        assert_eq!(v, 7);
        assert!(secs >= 0.0);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0]), 2.5);
    }

    #[test]
    fn metrics_serialize_at_five_decimals() {
        let m = MetricsAtK { k: 5, recall: 0.119164999, precision: 1.0 / 3.0, f1: 0.0 };
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, r#"{"k":5,"recall":0.11916,"precision":0.33333,"f1":0.0}"#);
    }
}
