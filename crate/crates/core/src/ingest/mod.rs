//! Dataset ingest: the Huawei challenge directory layout and the UJIIndoorLoc
//! CSV layout, both normalized into a [`RawDataset`].

pub mod huawei;
mod uji;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::distance::DistanceRecord;
use crate::error::{Error, Result};

pub use huawei::parse_huawei;
pub use uji::{parse_uji, DEFAULT_DELTA_T, UJI_COLUMNS, UJI_MISSING_RSSI, UJI_WAP_COLUMNS};

pub type NodeId = usize;

/// Interned access-point identifier.
pub type ApId = u32;

/// Building/floor identity of a fingerprint, e.g. `B0-F3`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FloorLabel(String);

impl FloorLabel {
    pub fn new(label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if label.trim().is_empty() {
            return Err(Error::Validation("floor label must be non-empty".into()));
        }
        Ok(FloorLabel(label))
    }

    pub fn building_floor(building: i64, floor: i64) -> Self {
        FloorLabel(format!("B{building}-F{floor}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FloorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One timestamped Wi-Fi scan. A node of the trajectory graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Fingerprint {
    pub id: NodeId,
    pub trajectory_id: usize,
    pub timestamp: f64,
    /// `(ap, dBm)` pairs sorted by AP id, no duplicates, no sentinels.
    pub rssi: Vec<(ApId, i32)>,
}

impl Fingerprint {
    pub fn rssi_of(&self, ap: ApId) -> Option<i32> {
        self.rssi.binary_search_by_key(&ap, |&(a, _)| a).ok().map(|i| self.rssi[i].1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub id: usize,
    pub fingerprint_ids: Vec<NodeId>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawDataset {
    pub fingerprints: Vec<Fingerprint>,
    pub trajectories: Vec<Trajectory>,
    pub step_pairs: Vec<(NodeId, NodeId)>,
    pub elevation_pairs: Vec<(NodeId, NodeId)>,
    pub provided_distances: Option<Vec<DistanceRecord>>,
    /// Indexed by node id; covers every fingerprint when present.
    pub ground_truth: Option<Vec<FloorLabel>>,
    /// Planar coordinates in meters, indexed by node id.
    pub coordinates: Option<Vec<(f64, f64)>>,
    /// Interning table: `ap_names[ap as usize]` is the original identifier.
    pub ap_names: Vec<String>,
    /// Original identifiers of the fingerprints, indexed by node id.
    pub source_ids: Vec<String>,
}

impl RawDataset {
    pub fn len(&self) -> usize {
        self.fingerprints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fingerprints.is_empty()
    }

    /// Check the structural invariants every parser and generator must uphold.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        for (i, fp) in self.fingerprints.iter().enumerate() {
            if fp.id != i {
                return Err(Error::Integrity(format!("fingerprint at position {i} has id {}", fp.id)));
            }
            if fp.rssi.is_empty() {
                return Err(Error::Integrity(format!("fingerprint {i} has an empty rssi map")));
            }
            if fp.rssi.windows(2).any(|w| w[0].0 >= w[1].0) {
                return Err(Error::Integrity(format!("fingerprint {i} rssi map is not sorted")));
            }
            if fp.trajectory_id >= self.trajectories.len() {
                return Err(Error::Integrity(format!("fingerprint {i} references unknown trajectory")));
            }
        }
        let mut seen = vec![false; n];
        for (t, traj) in self.trajectories.iter().enumerate() {
            if traj.id != t || traj.fingerprint_ids.is_empty() {
                return Err(Error::Integrity(format!("trajectory {t} is malformed")));
            }
            for &id in &traj.fingerprint_ids {
                if id >= n || seen[id] || self.fingerprints[id].trajectory_id != t {
                    return Err(Error::Integrity(format!("trajectory {t} has bad member {id}")));
                }
                seen[id] = true;
            }
            for w in traj.fingerprint_ids.windows(2) {
                if self.fingerprints[w[1]].timestamp < self.fingerprints[w[0]].timestamp {
                    return Err(Error::Integrity(format!("trajectory {t} timestamps decrease")));
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Integrity(format!("fingerprint {missing} belongs to no trajectory")));
        }
        let bad_pair = |&(a, b): &(NodeId, NodeId)| a >= n || b >= n;
        if self.step_pairs.iter().chain(&self.elevation_pairs).any(bad_pair) {
            return Err(Error::Integrity("pair references unknown fingerprint".into()));
        }
        if let Some(gt) = &self.ground_truth {
            if gt.len() != n {
                return Err(Error::Integrity(format!("ground truth covers {} of {n} fingerprints", gt.len())));
            }
        }
        if let Some(c) = &self.coordinates {
            if c.len() != n {
                return Err(Error::Integrity(format!("coordinates cover {} of {n} fingerprints", c.len())));
            }
        }
        if let Some(d) = &self.provided_distances {
            if let Some(r) = d.iter().find(|r| r.id_a >= n || r.id_b >= n) {
                return Err(Error::Integrity(format!("distance ({}, {}) references unknown fingerprint", r.id_a, r.id_b)));
            }
        }
        Ok(())
    }

    /// Ground-truth labels, or an error naming the dataset as unlabeled.
    pub fn truth(&self) -> Result<&[FloorLabel]> {
        self.ground_truth
            .as_deref()
            .ok_or_else(|| Error::Config("dataset has no ground-truth labels".into()))
    }

    /// Consecutive pairs inside every trajectory, in trajectory order.
    pub fn consecutive_pairs(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.trajectories
            .iter()
            .flat_map(|t| t.fingerprint_ids.windows(2).map(|w| (w[0], w[1])))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub fingerprints: usize,
    pub trajectories: usize,
    pub access_points: usize,
    pub labels: usize,
    pub step_edges: usize,
    pub elevation_edges: usize,
    pub distance_records: usize,
}

pub fn dataset_summary(ds: &RawDataset) -> DatasetSummary {
    let aps: BTreeSet<ApId> = ds.fingerprints.iter().flat_map(|f| f.rssi.iter().map(|&(a, _)| a)).collect();
    let labels: BTreeSet<&FloorLabel> = ds.ground_truth.iter().flatten().collect();
    DatasetSummary {
        fingerprints: ds.fingerprints.len(),
        trajectories: ds.trajectories.len(),
        access_points: aps.len(),
        labels: labels.len(),
        step_edges: ds.step_pairs.len(),
        elevation_edges: ds.elevation_pairs.len(),
        distance_records: ds.provided_distances.as_ref().map_or(0, Vec::len),
    }
}

pub(crate) fn strip_bom(s: &str) -> &str {
    s.strip_prefix('\u{feff}').unwrap_or(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fp(id: usize, traj: usize) -> Fingerprint {
        Fingerprint { id, trajectory_id: traj, timestamp: id as f64, rssi: vec![(0, -50)] }
    }

    #[test]
    fn summary_of_empty_dataset_is_zero() {
        assert_eq!(dataset_summary(&RawDataset::default()), DatasetSummary::default());
    }

    #[test]
    fn summary_counts() {
        let ds = RawDataset {
            fingerprints: vec![fp(0, 0), fp(1, 0), fp(2, 1)],
            trajectories: vec![
                Trajectory { id: 0, fingerprint_ids: vec![0, 1] },
                Trajectory { id: 1, fingerprint_ids: vec![2] },
            ],
            step_pairs: vec![(0, 1)],
            ..Default::default()
        };
        ds.validate().unwrap();
        let s = dataset_summary(&ds);
        assert_eq!((s.fingerprints, s.trajectories, s.access_points, s.step_edges), (3, 2, 1, 1));
    }

    #[test]
    fn empty_label_rejected() {
        assert!(FloorLabel::new("  ").is_err());
        assert_eq!(FloorLabel::building_floor(1, 3).as_str(), "B1-F3");
    }
}
