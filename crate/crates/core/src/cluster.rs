//! K-Means with k-means++ seeding and Calinski-Harabasz selection of `k`.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::exec::{map_range, rng_for, Exec, Rng as StreamRng};

/// Stand-in for an infinite CH value (zero within-group dispersion).
pub const CH_SENTINEL: f64 = f64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// Cluster per node, in `0..k`, numbered by first appearance.
    pub labels: Vec<usize>,
    pub k: usize,
    /// Within-group sum of squares.
    pub inertia: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iter: usize,
    /// Relative inertia change treated as convergence.
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig { restarts: 10, max_iter: 300, tol: 1e-6 }
    }
}

/// A single seeded Lloyd run with its per-iteration inertia trace.
#[derive(Debug, Clone)]
pub struct LloydRun {
    pub assignment: ClusterAssignment,
    pub trace: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kmeans_pp(x: &EmbeddingMatrix, k: usize, rng: &mut StreamRng) -> Vec<Vec<f64>> {
    let n = x.rows();
    let mut centers = vec![x.row(rng.gen_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = x.iter_rows().map(|r| sq_dist(r, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let u = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut idx = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > u {
                    idx = i;
                    break;
                }
            }
            idx
        } else {
            rng.gen_range(0..n)
        };
        let c = x.row(pick).to_vec();
        for (d, r) in d2.iter_mut().zip(x.iter_rows()) {
            *d = d.min(sq_dist(r, &c));
        }
        centers.push(c);
    }
    centers
}

fn means(x: &EmbeddingMatrix, labels: &[usize], k: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; x.dim()]; k];
    let mut counts = vec![0usize; k];
    for (r, &l) in x.iter_rows().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(r) {
            *s += v;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|v| *v /= c as f64);
        }
    }
    sums
}

/// Renumber labels by first appearance.
pub fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

fn check_k(x: &EmbeddingMatrix, k: usize) -> Result<()> {
    if k < 1 {
        return Err(Error::Validation("k must be at least 1".into()));
    }
    if k > x.rows() {
        return Err(Error::Validation(format!("k = {k} exceeds the {} points", x.rows())));
    }
    Ok(())
}

/// Lloyd's algorithm from a k-means++ start.
///
/// `trace[i]` is the inertia after the i-th assignment step (measured against
/// the centroids that step used); the last entry is the WGSS of the final
/// labels. Empty clusters take the point farthest from its own centroid.
pub fn lloyd(x: &EmbeddingMatrix, k: usize, cfg: &KMeansConfig, rng: &mut StreamRng) -> Result<LloydRun> {
    check_k(x, k)?;
    let n = x.rows();
    let mut centroids = kmeans_pp(x, k, rng);
    let mut labels = vec![usize::MAX; n];
    let mut dist = vec![0.0; n];
    let mut trace: Vec<f64> = Vec::new();
    for _ in 0..cfg.max_iter.max(1) {
        let mut changed = false;
        for (i, r) in x.iter_rows().enumerate() {
            let cur = labels[i];
            let (mut best, mut best_d) = if cur < k { (cur, sq_dist(r, &centroids[cur])) } else { (0, f64::INFINITY) };
            for (c, cent) in centroids.iter().enumerate() {
                let d = sq_dist(r, cent);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            changed |= best != cur;
            labels[i] = best;
            dist[i] = best_d;
        }
        let mut sizes = vec![0usize; k];
        labels.iter().for_each(|&l| sizes[l] += 1);
        while let Some(empty) = sizes.iter().position(|&s| s == 0) {
            let far = (0..n)
                .filter(|&i| sizes[labels[i]] > 1)
                .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
                .expect("k <= n leaves a cluster with two points");
            sizes[labels[far]] -= 1;
            sizes[empty] = 1;
            labels[far] = empty;
            dist[far] = 0.0;
            centroids[empty] = x.row(far).to_vec();
            changed = true;
        }
        let inertia: f64 = dist.iter().sum();
        let converged = match trace.last() {
            Some(&prev) => !changed || prev <= 0.0 || (prev - inertia).abs() <= cfg.tol * prev,
            None => false,
        };
        trace.push(inertia);
        centroids = means(x, &labels, k);
        if converged {
            break;
        }
    }
    let wgss: f64 = x.iter_rows().zip(&labels).map(|(r, &l)| sq_dist(r, &centroids[l])).sum();
    trace.push(wgss);
    Ok(LloydRun {
        assignment: ClusterAssignment { labels: canonical_labels(&labels), k, inertia: wgss },
        trace,
    })
}

/// Best of `restarts` seeded Lloyd runs by inertia (earlier restart on ties).
pub fn kmeans_with(x: &EmbeddingMatrix, k: usize, seed: u64, cfg: &KMeansConfig) -> Result<ClusterAssignment> {
    check_k(x, k)?;
    let mut best: Option<ClusterAssignment> = None;
    for r in 0..cfg.restarts.max(1) {
        let mut rng = rng_for(&[seed, k as u64, r as u64]);
        let run = lloyd(x, k, cfg, &mut rng)?.assignment;
        if best.as_ref().map_or(true, |b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.unwrap())
}

pub fn kmeans(x: &EmbeddingMatrix, k: usize, seed: u64) -> Result<ClusterAssignment> {
    kmeans_with(x, k, seed, &KMeansConfig::default())
}

/// Between-group, within-group and total sums of squares.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dispersion {
    pub bgss: f64,
    pub wgss: f64,
    pub total: f64,
}

pub fn dispersion(x: &EmbeddingMatrix, labels: &[usize], k: usize) -> Dispersion {
    let n = x.rows();
    let centroids = means(x, labels, k);
    let mut sizes = vec![0usize; k];
    labels.iter().for_each(|&l| sizes[l] += 1);
    let global: Vec<f64> = (0..x.dim()).map(|j| x.iter_rows().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let bgss = centroids.iter().zip(&sizes).map(|(c, &s)| s as f64 * sq_dist(c, &global)).sum();
    let wgss = x.iter_rows().zip(labels).map(|(r, &l)| sq_dist(r, &centroids[l])).sum();
    let total = x.iter_rows().map(|r| sq_dist(r, &global)).sum();
    Dispersion { bgss, wgss, total }
}

/// Calinski-Harabasz index `(BGSS / (k - 1)) / (WGSS / (n - k))`.
/// Zero within-group dispersion yields [`CH_SENTINEL`].
pub fn ch_index(x: &EmbeddingMatrix, assignment: &ClusterAssignment) -> Result<f64> {
    let (n, k) = (x.rows(), assignment.k);
    if k < 2 || k >= n {
        return Err(Error::Validation(format!("CH index undefined for k = {k} with n = {n}")));
    }
    if assignment.labels.len() != n {
        return Err(Error::Validation(format!("{} labels for {n} points", assignment.labels.len())));
    }
    let mut sizes = vec![0usize; k];
    for &l in &assignment.labels {
        if l >= k {
            return Err(Error::Validation(format!("label {l} outside 0..{k}")));
        }
        sizes[l] += 1;
    }
    if sizes.contains(&0) {
        return Err(Error::Validation("CH index needs every cluster non-empty".into()));
    }
    let d = dispersion(x, &assignment.labels, k);
    if d.wgss <= 0.0 {
        return Ok(CH_SENTINEL);
    }
    Ok((d.bgss / (k - 1) as f64) / (d.wgss / (n - k) as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub k: usize,
    pub ch: f64,
    pub assignment: ClusterAssignment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChSweep {
    pub entries: Vec<SweepEntry>,
    pub k_opt: usize,
    pub k_min: usize,
    pub k_max: usize,
}

impl ChSweep {
    pub fn best(&self) -> &ClusterAssignment {
        &self.entries.iter().find(|e| e.k == self.k_opt).expect("k_opt is in the sweep").assignment
    }

    /// `k,ch_value,inertia` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,ch_value,inertia\n");
        for e in &self.entries {
            let _ = writeln!(s, "{},{},{}", e.k, e.ch, e.assignment.inertia);
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Run K-Means for every `k` in `[k_min, k_max]` and keep the CH maximizer
/// (smallest `k` on ties).
pub fn auto_k(
    x: &EmbeddingMatrix,
    k_min: usize,
    k_max: usize,
    seed: u64,
    cfg: &KMeansConfig,
    exec: Exec,
) -> Result<ChSweep> {
    if k_min < 2 || k_min > k_max {
        return Err(Error::Validation(format!("invalid k range [{k_min}, {k_max}]")));
    }
    if k_max >= x.rows() {
        return Err(Error::Validation(format!("k_max = {k_max} needs at least {} points, have {}", k_max + 1, x.rows())));
    }
    let entries = map_range(exec, k_max - k_min + 1, |i| {
        let k = k_min + i;
        let assignment = kmeans_with(x, k, seed, cfg)?;
        let ch = ch_index(x, &assignment)?;
        Ok(SweepEntry { k, ch, assignment })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let k_opt = entries
        .iter()
        .fold(None::<&SweepEntry>, |best, e| match best {
            Some(b) if b.ch >= e.ch => Some(b),
            _ => Some(e),
        })
        .map(|e| e.k)
        .unwrap();
    Ok(ChSweep { entries, k_opt, k_min, k_max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn matrix(rows: &[Vec<f64>]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(rows).unwrap()
    }

    /// Gaussian blobs; returns points and generator labels.
    pub(crate) fn blobs(centers: &[Vec<f64>], per: usize, sigma: f64, seed: u64) -> (EmbeddingMatrix, Vec<usize>) {
        let mut rng = rng_for(&[seed]);
        let normal = Normal::new(0.0, sigma).unwrap();
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for (c, center) in centers.iter().enumerate() {
            for _ in 0..per {
                rows.push(center.iter().map(|m| m + normal.sample(&mut rng)).collect());
                truth.push(c);
            }
        }
        (matrix(&rows), truth)
    }

    #[test]
    fn k_equals_n_is_zero_inertia() {
        let x = matrix(&[vec![0.0, 1.0], vec![2.0, 5.0], vec![-1.0, 3.0]]);
        let a = kmeans(&x, 3, 1).unwrap();
        assert_eq!(a.inertia, 0.0);
        let mut l = a.labels.clone();
        l.sort();
        assert_eq!(l, vec![0, 1, 2]);
    }

    #[test]
    fn k_one_is_total_variance() {
        let x = matrix(&[vec![0.0, 0.0], vec![2.0, 0.0], vec![4.0, 6.0]]);
        let a = kmeans(&x, 1, 1).unwrap();
        // mean (2, 2): squared deviations 8 + 4 + 20
        assert!((a.inertia - 32.0).abs() < 1e-12);
        assert!(a.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn invalid_k() {
        let x = matrix(&[vec![0.0], vec![1.0]]);
        assert!(kmeans(&x, 0, 1).is_err());
        assert!(kmeans(&x, 3, 1).is_err());
    }

    #[test]
    fn ch_hand_example() {
        let x = matrix(&[vec![0.0, 0.0], vec![0.0, 1.0], vec![10.0, 0.0], vec![10.0, 1.0]]);
        let a = ClusterAssignment { labels: vec![0, 0, 1, 1], k: 2, inertia: 1.0 };
        assert_eq!(ch_index(&x, &a).unwrap(), 200.0);
        let d = dispersion(&x, &a.labels, 2);
        assert_eq!((d.bgss, d.wgss), (100.0, 1.0));
    }

    #[test]
    fn ch_zero_dispersion_sentinel_and_domain() {
        let x = matrix(&[vec![0.0], vec![0.0], vec![5.0], vec![5.0]]);
        let a = ClusterAssignment { labels: vec![0, 0, 1, 1], k: 2, inertia: 0.0 };
        assert_eq!(ch_index(&x, &a).unwrap(), CH_SENTINEL);
        let one = ClusterAssignment { labels: vec![0; 4], k: 1, inertia: 0.0 };
        assert!(ch_index(&x, &one).is_err());
        let all = ClusterAssignment { labels: vec![0, 1, 2, 3], k: 4, inertia: 0.0 };
        assert!(ch_index(&x, &all).is_err());
    }

    #[test]
    fn ch_translation_invariant() {
        let (x, truth) = blobs(&[vec![0.0, 0.0], vec![4.0, 1.0], vec![1.0, 5.0]], 15, 1.0, 4);
        let shifted: Vec<Vec<f64>> = x.iter_rows().map(|r| vec![r[0] + 100.0, r[1] - 37.5]).collect();
        let a = ClusterAssignment { labels: truth, k: 3, inertia: 0.0 };
        let (c1, c2) = (ch_index(&x, &a).unwrap(), ch_index(&matrix(&shifted), &a).unwrap());
        assert!((c1 - c2).abs() <= 1e-9 * c1);
    }

    #[test]
    fn separated_blobs_recovered() {
        for seed in 0..20 {
            let (x, truth) = blobs(&[vec![0.0, 0.0], vec![10.0, 0.0]], 20, 1.0, seed);
            let a = kmeans(&x, 2, seed).unwrap();
            let flip = a.labels[0] != truth[0];
            assert!(a.labels.iter().zip(&truth).all(|(&l, &t)| (l != t) == flip));
        }
    }

    #[test]
    fn auto_k_finds_five_blobs() {
        let centers: Vec<Vec<f64>> = (0..5).map(|i| vec![20.0 * i as f64, 10.0 * (i % 2) as f64]).collect();
        let (x, _) = blobs(&centers, 30, 0.5, 8);
        let sweep = auto_k(&x, 3, 20, 1, &KMeansConfig::default(), Exec::Parallel).unwrap();
        assert_eq!(sweep.k_opt, 5);
        assert_eq!(sweep.entries.len(), 18);
        assert_eq!(sweep, auto_k(&x, 3, 20, 1, &KMeansConfig::default(), Exec::Sequential).unwrap());
        let single = auto_k(&x, 3, 3, 1, &KMeansConfig::default(), Exec::Sequential).unwrap();
        assert_eq!(single.k_opt, 3);
        assert!(auto_k(&x, 1, 3, 1, &KMeansConfig::default(), Exec::Sequential).is_err());
        assert!(auto_k(&x, 5, 4, 1, &KMeansConfig::default(), Exec::Sequential).is_err());
    }

    #[test]
    fn sweep_csv_header() {
        let (x, _) = blobs(&[vec![0.0], vec![9.0], vec![20.0]], 5, 0.3, 1);
        let s = auto_k(&x, 2, 4, 0, &KMeansConfig::default(), Exec::Sequential).unwrap();
        let csv = s.to_csv();
        assert!(csv.starts_with("k,ch_value,inertia\n"));
        assert_eq!(csv.lines().count(), 4);
    }
}
