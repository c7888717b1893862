//! Cluster → floor mapping and evaluation metrics.
//!
//! Partition-comparison metrics (`ari`, `nmi`, `purity`) take any two label
//! vectors of the same length; the label types need only be ordered.

mod report;
mod stats;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::FloorLabel;

pub use report::{
    evaluate, read_predictions_csv, trajectory_consistent_view, write_predictions_csv, ConfusionMatrix, EvalConfig,
    EvaluationReport, PredictionRow, REPORT_SCHEMA_VERSION,
};
pub use stats::{bootstrap, bootstrap_ci, mcnemar, quantile, BootstrapCi, BootstrapConfig, ResampleUnit};

/// Majority-vote map from cluster id to floor label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterFloorMapping {
    map: BTreeMap<usize, FloorLabel>,
}

impl ClusterFloorMapping {
    pub fn get(&self, cluster: usize) -> Option<&FloorLabel> {
        self.map.get(&cluster)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &FloorLabel)> {
        self.map.iter().map(|(&c, l)| (c, l))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Mapped label of every node. Panics on a cluster the mapping never saw.
    pub fn predict(&self, assignment: &[usize]) -> Vec<FloorLabel> {
        assignment.iter().map(|c| self.map[c].clone()).collect()
    }
}

fn check_truth(assignment: &[usize], truth: &[FloorLabel]) -> Result<()> {
    if truth.len() < assignment.len() {
        return Err(Error::Precondition(format!("node {} has no ground-truth label", truth.len())));
    }
    if truth.len() > assignment.len() {
        return Err(Error::Precondition(format!(
            "ground truth has {} labels for {} assigned nodes",
            truth.len(),
            assignment.len()
        )));
    }
    Ok(())
}

/// Map each cluster to its most frequent true label; ties go to the
/// lexicographically smallest label.
pub fn map_clusters(assignment: &[usize], truth: &[FloorLabel]) -> Result<ClusterFloorMapping> {
    check_truth(assignment, truth)?;
    let mut counts: BTreeMap<usize, BTreeMap<&FloorLabel, usize>> = BTreeMap::new();
    for (&c, l) in assignment.iter().zip(truth) {
        *counts.entry(c).or_default().entry(l).or_default() += 1;
    }
    let map = counts
        .into_iter()
        .map(|(c, by_label)| {
            // BTreeMap iterates labels in ascending order, so `>` keeps the smallest on ties
            let mut best: Option<(&FloorLabel, usize)> = None;
            for (l, n) in by_label {
                if best.map_or(true, |(_, b)| n > b) {
                    best = Some((l, n));
                }
            }
            (c, best.unwrap().0.clone())
        })
        .collect();
    Ok(ClusterFloorMapping { map })
}

pub fn correct_flags(assignment: &[usize], mapping: &ClusterFloorMapping, truth: &[FloorLabel]) -> Vec<bool> {
    assignment.iter().zip(truth).map(|(c, t)| mapping.get(*c) == Some(t)).collect()
}

/// Fraction of nodes whose cluster's mapped label equals their true label.
pub fn mapped_accuracy(assignment: &[usize], mapping: &ClusterFloorMapping, truth: &[FloorLabel]) -> f64 {
    let flags = correct_flags(assignment, mapping, truth);
    if flags.is_empty() {
        return 0.0;
    }
    flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64
}

pub fn weighted_f1(assignment: &[usize], mapping: &ClusterFloorMapping, truth: &[FloorLabel]) -> f64 {
    let pred: Vec<Option<&FloorLabel>> = assignment.iter().map(|&c| mapping.get(c)).collect();
    let truth: Vec<&FloorLabel> = truth.iter().collect();
    weighted_f1_labels(&truth, &pred)
}

/// Support-weighted F1 over the true labels. A `None` prediction is wrong for
/// every label.
pub(crate) fn weighted_f1_labels<L: Ord>(truth: &[L], pred: &[Option<L>]) -> f64 {
    let n = truth.len();
    if n == 0 {
        return 0.0;
    }
    // (support, predicted, true positives)
    let mut per: BTreeMap<&L, (usize, usize, usize)> = BTreeMap::new();
    for t in truth {
        per.entry(t).or_default().0 += 1;
    }
    for (t, p) in truth.iter().zip(pred) {
        let Some(p) = p else { continue };
        if let Some(e) = per.get_mut(p) {
            e.1 += 1;
            if p == t {
                e.2 += 1;
            }
        }
    }
    let mut total = 0.0;
    for (support, predicted, tp) in per.into_values() {
        if tp == 0 {
            continue;
        }
        let precision = tp as f64 / predicted as f64;
        let recall = tp as f64 / support as f64;
        total += support as f64 * 2.0 * precision * recall / (precision + recall);
    }
    total / n as f64
}

/// Dense contingency table: rows index `a`'s labels, columns `b`'s.
fn contingency<A: Ord, B: Ord>(a: &[A], b: &[B]) -> Vec<Vec<u64>> {
    assert_eq!(a.len(), b.len(), "label vectors differ in length");
    fn index<T: Ord>(xs: &[T]) -> BTreeMap<&T, usize> {
        let mut m = BTreeMap::new();
        for x in xs {
            let next = m.len();
            m.entry(x).or_insert(next);
        }
        m
    }
    let (ia, ib) = (index(a), index(b));
    let mut t = vec![vec![0u64; ib.len()]; ia.len()];
    for (x, y) in a.iter().zip(b) {
        t[ia[x]][ib[y]] += 1;
    }
    t
}

fn pairs(n: u64) -> f64 {
    (n as f64) * (n as f64 - 1.0) / 2.0
}

/// Adjusted Rand index. Returns 1 when the chance-adjusted denominator
/// vanishes (both partitions trivial and identical in kind).
pub fn ari<A: Ord, B: Ord>(truth: &[A], pred: &[B]) -> f64 {
    let t = contingency(truth, pred);
    let n: u64 = t.iter().flatten().sum();
    if n < 2 {
        return 1.0;
    }
    let index: f64 = t.iter().flatten().map(|&x| pairs(x)).sum();
    let rows: f64 = t.iter().map(|r| pairs(r.iter().sum())).sum();
    let cols: f64 = (0..t[0].len()).map(|j| pairs(t.iter().map(|r| r[j]).sum())).sum();
    let expected = rows * cols / pairs(n);
    let max = 0.5 * (rows + cols);
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

fn entropy(counts: impl Iterator<Item = u64>, n: f64) -> f64 {
    counts.filter(|&c| c > 0).map(|c| c as f64 / n).map(|p| -p * p.ln()).sum()
}

/// Mutual information normalized by the arithmetic mean of the two entropies.
pub fn nmi<A: Ord, B: Ord>(truth: &[A], pred: &[B]) -> f64 {
    let t = contingency(truth, pred);
    let n: u64 = t.iter().flatten().sum();
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    let rows: Vec<u64> = t.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<u64> = (0..t[0].len()).map(|j| t.iter().map(|r| r[j]).sum()).collect();
    let mut mi = 0.0;
    for (i, r) in t.iter().enumerate() {
        for (j, &x) in r.iter().enumerate() {
            if x > 0 {
                let x = x as f64;
                mi += x / nf * (nf * x / (rows[i] as f64 * cols[j] as f64)).ln();
            }
        }
    }
    let norm = 0.5 * (entropy(rows.into_iter(), nf) + entropy(cols.into_iter(), nf));
    if norm <= 0.0 {
        return 0.0;
    }
    (mi / norm).clamp(0.0, 1.0)
}

/// Σ over predicted clusters of the dominant true-label count, over n.
pub fn purity<A: Ord, B: Ord>(truth: &[A], pred: &[B]) -> f64 {
    let t = contingency(pred, truth);
    let n: u64 = t.iter().flatten().sum();
    if n == 0 {
        return 0.0;
    }
    t.iter().map(|r| r.iter().max().copied().unwrap_or(0)).sum::<u64>() as f64 / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(xs: &[&str]) -> Vec<FloorLabel> {
        xs.iter().map(|s| FloorLabel::new(*s).unwrap()).collect()
    }

    #[test]
    fn majority_mapping() {
        let truth = labels(&["F1", "F1", "F2", "F2", "F1"]);
        let m = map_clusters(&[0, 0, 0, 1, 1], &truth).unwrap();
        assert_eq!(m.get(0).unwrap().as_str(), "F1");
        // {F2, F1} tie goes to F1
        assert_eq!(m.get(1).unwrap().as_str(), "F1");
        assert_eq!(mapped_accuracy(&[0, 0, 0, 1, 1], &m, &truth), 0.6);
    }

    #[test]
    fn missing_truth_names_node() {
        let err = map_clusters(&[0, 1, 1], &labels(&["F1", "F2"])).unwrap_err();
        assert!(err.to_string().contains("node 2"), "{err}");
    }

    #[test]
    fn single_cluster_accuracy_is_majority_share() {
        let truth = labels(&["A", "A", "A", "B"]);
        let a = [0; 4];
        let m = map_clusters(&a, &truth).unwrap();
        assert_eq!(mapped_accuracy(&a, &m, &truth), 0.75);
    }

    #[test]
    fn f1_of_constant_prediction() {
        let truth = labels(&["A", "A", "B", "B"]);
        let a = [0; 4];
        let m = map_clusters(&a, &truth).unwrap();
        assert!((weighted_f1(&a, &m, &truth) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_scores() {
        let truth = labels(&["A", "A", "B", "C"]);
        let a = [2, 2, 0, 1];
        let m = map_clusters(&a, &truth).unwrap();
        assert_eq!(mapped_accuracy(&a, &m, &truth), 1.0);
        assert_eq!(weighted_f1(&a, &m, &truth), 1.0);
        assert_eq!(ari(&truth, &a), 1.0);
        assert!((nmi(&truth, &a) - 1.0).abs() < 1e-12);
        assert_eq!(purity(&truth, &a), 1.0);
    }

    #[test]
    fn ari_hand_values() {
        assert!((ari(&[0, 0, 1, 1], &[0, 1, 0, 1]) + 0.5).abs() < 1e-12);
        assert_eq!(ari(&[0, 0, 1, 1, 2], &[0; 5]), 0.0);
    }

    #[test]
    fn nmi_of_single_cluster_is_zero() {
        assert_eq!(nmi(&[0, 1, 2, 0], &[5; 4]), 0.0);
    }

    #[test]
    fn purity_hand_value() {
        let truth = ["F0", "F0", "F1", "F1", "F1"];
        assert_eq!(purity(&truth, &[0, 0, 0, 1, 1]), 0.8);
        assert_eq!(purity(&truth, &[0, 1, 2, 3, 4]), 1.0);
    }

    #[test]
    fn relabeling_invariance() {
        let t = [0, 0, 1, 1, 2, 2, 2, 0];
        let p = [1, 1, 1, 0, 0, 2, 2, 0];
        let p2: Vec<i32> = p.iter().map(|x| 10 - x).collect();
        let t2: Vec<&str> = t.iter().map(|&x| ["x", "y", "z"][x]).collect();
        assert_eq!(ari(&t, &p), ari(&t2, &p2));
        assert!((nmi(&t, &p) - nmi(&t2, &p2)).abs() < 1e-15);
    }
}
