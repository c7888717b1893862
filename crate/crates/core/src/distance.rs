//! Pairwise distance estimates between fingerprints.
//!
//! Three sources feed graph construction: distances shipped with the dataset,
//! planar distances from known coordinates, and a log-distance path-loss
//! heuristic over raw RSSI. The heuristic sits behind [`DistanceProvider`] so
//! a trained estimator can replace it without touching graph code.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_range, map_range_init, Exec};
use crate::ingest::{Fingerprint, NodeId, RawDataset};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceRecord {
    pub id_a: NodeId,
    pub id_b: NodeId,
    pub meters: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceSourceKind {
    Provided,
    Geometric,
    Signal,
}

impl std::str::FromStr for DistanceSourceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "provided" => Ok(Self::Provided),
            "geometric" => Ok(Self::Geometric),
            "signal" => Ok(Self::Signal),
            other => Err(Error::Config(format!("unknown distance source {other:?}"))),
        }
    }
}

/// Estimates the physical distance in meters between two fingerprints.
pub trait DistanceProvider: Sync {
    fn distance(&self, a: &Fingerprint, b: &Fingerprint) -> Result<f64>;
}

/// Log-distance path-loss proxy: each shared AP's RSSI is inverted to a range
/// `10^((p0 - rssi) / (10 * gamma))`; the distance is the mean absolute range
/// difference over shared APs, clamped to `d_max`. Fingerprints without a
/// shared AP are `d_max` apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathLossHeuristic {
    pub p0: f64,
    pub gamma: f64,
    pub d_max: f64,
}

impl Default for PathLossHeuristic {
    fn default() -> Self {
        PathLossHeuristic { p0: -40.0, gamma: 3.0, d_max: 50.0 }
    }
}

impl PathLossHeuristic {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) || !self.p0.is_finite() {
            return Err(Error::Config("path-loss gamma must be positive and p0 finite".into()));
        }
        if !(self.d_max > 0.0 && self.d_max.is_finite()) {
            return Err(Error::Config("d_max must be positive".into()));
        }
        Ok(())
    }

    pub fn range(&self, rssi: i32) -> f64 {
        10f64.powf((self.p0 - rssi as f64) / (10.0 * self.gamma))
    }

    pub fn signal_distance(&self, a: &Fingerprint, b: &Fingerprint) -> Result<f64> {
        if a.rssi.is_empty() || b.rssi.is_empty() {
            return Err(Error::Precondition(format!(
                "signal distance needs non-empty rssi maps (fingerprints {} and {})",
                a.id, b.id
            )));
        }
        let (mut sum, mut shared) = (0.0, 0usize);
        for_each_shared(a, b, |ra, rb| {
            sum += (self.range(ra) - self.range(rb)).abs();
            shared += 1;
        });
        if shared == 0 {
            return Ok(self.d_max);
        }
        Ok((sum / shared as f64).min(self.d_max))
    }
}

impl DistanceProvider for PathLossHeuristic {
    fn distance(&self, a: &Fingerprint, b: &Fingerprint) -> Result<f64> {
        self.signal_distance(a, b)
    }
}

/// Merge-walk over the APs both scans observed, in AP order.
fn for_each_shared(a: &Fingerprint, b: &Fingerprint, mut f: impl FnMut(i32, i32)) {
    let (mut i, mut j) = (0, 0);
    while i < a.rssi.len() && j < b.rssi.len() {
        let (ap_a, ra) = a.rssi[i];
        let (ap_b, rb) = b.rssi[j];
        match ap_a.cmp(&ap_b) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                f(ra, rb);
                i += 1;
                j += 1;
            }
        }
    }
}

pub fn shared_ap_count(a: &Fingerprint, b: &Fingerprint) -> usize {
    let mut n = 0;
    for_each_shared(a, b, |_, _| n += 1);
    n
}

fn check_record(r: &DistanceRecord, n: usize) -> Result<()> {
    if r.id_a >= n || r.id_b >= n {
        return Err(Error::Integrity(format!("distance ({}, {}) references unknown fingerprint", r.id_a, r.id_b)));
    }
    if r.id_a == r.id_b {
        return Err(Error::Validation(format!("distance record pairs fingerprint {} with itself", r.id_a)));
    }
    if !(r.meters >= 0.0 && r.meters.is_finite()) {
        return Err(Error::Validation(format!("distance ({}, {}) = {} is not a non-negative number", r.id_a, r.id_b, r.meters)));
    }
    Ok(())
}

pub fn provided_distances(ds: &RawDataset) -> Result<Vec<DistanceRecord>> {
    let recs = ds.provided_distances.as_ref().ok_or_else(|| {
        Error::Config("dataset carries no provided distances; use the geometric or signal source".into())
    })?;
    for r in recs {
        check_record(r, ds.len())?;
    }
    Ok(recs.clone())
}

pub fn geometric_distances(ds: &RawDataset, pairs: &[(NodeId, NodeId)]) -> Result<Vec<DistanceRecord>> {
    let coords = ds
        .coordinates
        .as_ref()
        .ok_or_else(|| Error::Config("dataset has no coordinates; geometric distances unavailable".into()))?;
    pairs
        .iter()
        .map(|&(a, b)| {
            let pa = coords.get(a).ok_or_else(|| Error::Integrity(format!("no coordinate for fingerprint {a}")))?;
            let pb = coords.get(b).ok_or_else(|| Error::Integrity(format!("no coordinate for fingerprint {b}")))?;
            Ok(DistanceRecord { id_a: a, id_b: b, meters: (pa.0 - pb.0).hypot(pa.1 - pb.1) })
        })
        .collect()
}

/// Evaluate `provider` on every pair.
pub fn provider_distances(
    ds: &RawDataset,
    pairs: &[(NodeId, NodeId)],
    provider: &dyn DistanceProvider,
    exec: Exec,
) -> Result<Vec<DistanceRecord>> {
    map_range(exec, pairs.len(), |i| {
        let (a, b) = pairs[i];
        let meters = provider.distance(&ds.fingerprints[a], &ds.fingerprints[b])?;
        Ok(DistanceRecord { id_a: a, id_b: b, meters })
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairingPolicy {
    /// Signal-space neighbors added per fingerprint on top of consecutive pairs.
    pub knn_m: usize,
}

impl Default for PairingPolicy {
    fn default() -> Self {
        PairingPolicy { knn_m: 10 }
    }
}

/// Pairs that receive a distance estimate: consecutive pairs of every
/// trajectory, plus each fingerprint's `knn_m` nearest signal neighbors.
///
/// Neighbors must share at least one AP. They are ranked by shared-AP count
/// (more first), then by signal distance, then by id. Output pairs are
/// normalized to `a < b`, deduplicated and sorted.
pub fn candidate_pairs(
    ds: &RawDataset,
    policy: PairingPolicy,
    heuristic: &PathLossHeuristic,
    exec: Exec,
) -> Vec<(NodeId, NodeId)> {
    let n = ds.len();
    let mut pairs: Vec<(NodeId, NodeId)> = ds.consecutive_pairs().map(|(a, b)| (a.min(b), a.max(b))).collect();

    if policy.knn_m > 0 && n > 1 {
        let n_aps = ds.ap_names.len().max(
            ds.fingerprints.iter().flat_map(|f| f.rssi.last()).map(|&(a, _)| a as usize + 1).max().unwrap_or(0),
        );
        let mut by_ap: Vec<Vec<NodeId>> = vec![Vec::new(); n_aps];
        for fp in &ds.fingerprints {
            for &(ap, _) in &fp.rssi {
                by_ap[ap as usize].push(fp.id);
            }
        }
        let neighbors = map_range_init(
            exec,
            n,
            || (vec![0u32; n], Vec::<NodeId>::new()),
            |(counts, touched), i| {
                let fp = &ds.fingerprints[i];
                for &(ap, _) in &fp.rssi {
                    for &j in &by_ap[ap as usize] {
                        if j != i {
                            if counts[j] == 0 {
                                touched.push(j);
                            }
                            counts[j] += 1;
                        }
                    }
                }
                let mut scored: Vec<(u32, f64, NodeId)> = touched
                    .iter()
                    .map(|&j| {
                        let d = heuristic.signal_distance(fp, &ds.fingerprints[j]).unwrap_or(heuristic.d_max);
                        (counts[j], d, j)
                    })
                    .collect();
                for &j in touched.iter() {
                    counts[j] = 0;
                }
                touched.clear();
                let order = |x: &(u32, f64, NodeId), y: &(u32, f64, NodeId)| {
                    y.0.cmp(&x.0).then(x.1.total_cmp(&y.1)).then(x.2.cmp(&y.2))
                };
                let m = policy.knn_m.min(scored.len());
                if m < scored.len() {
                    scored.select_nth_unstable_by(m, order);
                    scored.truncate(m);
                }
                scored.into_iter().map(|(_, _, j)| (i.min(j), i.max(j))).collect::<Vec<_>>()
            },
        );
        pairs.extend(neighbors.into_iter().flatten());
    }
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

pub fn write_distances_csv(path: &Path, records: &[DistanceRecord]) -> Result<()> {
    let mut out = String::with_capacity(records.len() * 16);
    for r in records {
        out.push_str(&format!("{},{},{}\n", r.id_a, r.id_b, r.meters));
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

/// Read an `id1,id2,meters` file whose ids are dense node ids.
pub fn read_distances_csv(path: &Path) -> Result<Vec<DistanceRecord>> {
    let name = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = (f.len() == 3)
            .then(|| Some((f[0].parse().ok()?, f[1].parse().ok()?, f[2].parse().ok()?)))
            .flatten();
        match parsed {
            Some((id_a, id_b, meters)) => out.push(DistanceRecord { id_a, id_b, meters }),
            None if i == 0 => {}
            None => return Err(Error::parse(name, i + 1, format!("expected id1,id2,meters, got {line:?}"))),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Trajectory;
    use proptest::prelude::*;

    fn fp(id: usize, rssi: &[(u32, i32)]) -> Fingerprint {
        Fingerprint { id, trajectory_id: 0, timestamp: 0.0, rssi: rssi.to_vec() }
    }

    #[test]
    fn identical_scans_are_zero_apart() {
        let h = PathLossHeuristic::default();
        let a = fp(0, &[(1, -60), (4, -75)]);
        assert_eq!(h.signal_distance(&a, &a.clone()).unwrap(), 0.0);
    }

    #[test]
    fn disjoint_scans_fall_back_to_d_max() {
        let h = PathLossHeuristic::default();
        assert_eq!(h.signal_distance(&fp(0, &[(1, -60)]), &fp(1, &[(2, -60)])).unwrap(), 50.0);
    }

    #[test]
    fn single_ap_hand_value() {
        // ranges 10^0 = 1 m and 10^1 = 10 m
        let h = PathLossHeuristic::default();
        let d = h.signal_distance(&fp(0, &[(1, -40)]), &fp(1, &[(1, -70)])).unwrap();
        assert!((d - 9.0).abs() < 1e-12, "{d}");
    }

    #[test]
    fn empty_scan_is_precondition_error() {
        let h = PathLossHeuristic::default();
        assert!(matches!(h.signal_distance(&fp(0, &[]), &fp(1, &[(1, -40)])), Err(Error::Precondition(_))));
    }

    fn scan() -> impl Strategy<Value = Vec<(u32, i32)>> {
        proptest::collection::btree_map(0u32..12, -100i32..-20, 1..8).prop_map(|m| m.into_iter().collect())
    }

    proptest! {
        #[test]
        fn signal_distance_symmetric(a in scan(), b in scan()) {
            let h = PathLossHeuristic::default();
            let (fa, fb) = (fp(0, &a), fp(1, &b));
            let d = h.signal_distance(&fa, &fb).unwrap();
            prop_assert_eq!(d.to_bits(), h.signal_distance(&fb, &fa).unwrap().to_bits());
            prop_assert!((0.0..=50.0).contains(&d));
            prop_assert_eq!(h.signal_distance(&fa, &fa).unwrap(), 0.0);
        }

        #[test]
        fn geometric_triangle_inequality(pts in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 3)) {
            let ds = RawDataset { coordinates: Some(pts.clone()), ..Default::default() };
            let d = geometric_distances(&ds, &[(0, 1), (1, 2), (0, 2)]).unwrap();
            prop_assert!(d[2].meters <= d[0].meters + d[1].meters + 1e-9);
            let direct = ((pts[0].0 - pts[1].0).powi(2) + (pts[0].1 - pts[1].1).powi(2)).sqrt();
            prop_assert!((d[0].meters - direct).abs() <= 1e-9);
        }
    }

    #[test]
    fn geometric_345() {
        let ds = RawDataset { coordinates: Some(vec![(0.0, 0.0), (3.0, 4.0), (3.0, 4.0)]), ..Default::default() };
        let d = geometric_distances(&ds, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(d[0].meters, 5.0);
        assert_eq!(d[1].meters, 0.0);
        assert!(geometric_distances(&ds, &[(0, 7)]).is_err());
    }

    fn two_trajectories() -> RawDataset {
        let fps = (0..5).map(|i| Fingerprint { trajectory_id: usize::from(i >= 3), ..fp(i, &[(0, -50)]) }).collect();
        RawDataset {
            fingerprints: fps,
            trajectories: vec![
                Trajectory { id: 0, fingerprint_ids: vec![0, 1, 2] },
                Trajectory { id: 1, fingerprint_ids: vec![3, 4] },
            ],
            ap_names: vec!["a".into()],
            ..Default::default()
        }
    }

    #[test]
    fn consecutive_only_when_m_is_zero() {
        let ds = two_trajectories();
        let pairs = candidate_pairs(&ds, PairingPolicy { knn_m: 0 }, &PathLossHeuristic::default(), Exec::Sequential);
        assert_eq!(pairs, vec![(0, 1), (1, 2), (3, 4)]);
    }

    #[test]
    fn knn_pairs_are_deduplicated() {
        let ds = two_trajectories();
        let pairs = candidate_pairs(&ds, PairingPolicy { knn_m: 3 }, &PathLossHeuristic::default(), Exec::Parallel);
        let set: std::collections::BTreeSet<_> = pairs.iter().copied().collect();
        assert_eq!(set.len(), pairs.len());
        for &(a, b) in &pairs {
            assert!(a < b);
            assert!(!set.contains(&(b, a)));
        }
    }

    #[test]
    fn provided_validation() {
        let mut ds = two_trajectories();
        assert!(matches!(provided_distances(&ds), Err(Error::Config(_))));
        ds.provided_distances = Some(vec![DistanceRecord { id_a: 3, id_b: 4, meters: 2.5 }]);
        assert_eq!(provided_distances(&ds).unwrap()[0].meters, 2.5);
        ds.provided_distances = Some(vec![DistanceRecord { id_a: 3, id_b: 4, meters: -1.0 }]);
        assert!(matches!(provided_distances(&ds), Err(Error::Validation(_))));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let recs = vec![
            DistanceRecord { id_a: 3, id_b: 7, meters: 2.5 },
            DistanceRecord { id_a: 0, id_b: 1, meters: 0.1 + 0.2 },
        ];
        write_distances_csv(&path, &recs).unwrap();
        assert_eq!(read_distances_csv(&path).unwrap(), recs);
    }
}
