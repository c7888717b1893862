//! Synthetic multistory buildings with known floor labels.
//!
//! Access points sit at random positions on every floor. Each trajectory is
//! a bounded random walk on one floor; with probability `elevator_prob` it
//! changes floor once, and the part after the change becomes a separate
//! trajectory linked to the first by an elevation pair. Readings follow a
//! log-distance path-loss model with a per-floor penalty and Gaussian noise.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{named_seed, rng_for};
use crate::ingest::{
    Fingerprint, FloorLabel, RawDataset, Trajectory, UJI_COLUMNS, UJI_MISSING_RSSI, UJI_WAP_COLUMNS,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticBuildingConfig {
    pub floors: usize,
    pub floor_width: f64,
    pub floor_depth: f64,
    pub floor_height: f64,
    pub aps_per_floor: usize,
    pub path_loss_exponent: f64,
    /// Received power at 1 m, dBm.
    pub tx_power: f64,
    /// dB lost per floor crossed.
    pub floor_attenuation: f64,
    pub noise_sigma: f64,
    /// Readings below this are not reported.
    pub detection_threshold: f64,
    pub trajectories: usize,
    pub steps_per_trajectory: usize,
    pub step_length: f64,
    pub elevator_prob: f64,
    pub seed: u64,
}

impl Default for SyntheticBuildingConfig {
    fn default() -> Self {
        SyntheticBuildingConfig {
            floors: 5,
            floor_width: 60.0,
            floor_depth: 40.0,
            floor_height: 3.0,
            aps_per_floor: 8,
            path_loss_exponent: 3.0,
            tx_power: -40.0,
            floor_attenuation: 15.0,
            noise_sigma: 2.0,
            detection_threshold: -95.0,
            trajectories: 30,
            steps_per_trajectory: 50,
            step_length: 1.5,
            elevator_prob: 0.1,
            seed: 0,
        }
    }
}

const RSSI_FLOOR: f64 = -100.0;

impl SyntheticBuildingConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.floors < 2 {
            return err(format!("need at least 2 floors, got {}", self.floors));
        }
        if self.aps_per_floor == 0 || self.trajectories == 0 || self.steps_per_trajectory == 0 {
            return err("aps_per_floor, trajectories and steps_per_trajectory must be positive".into());
        }
        for (name, v) in [
            ("floor_width", self.floor_width),
            ("floor_depth", self.floor_depth),
            ("floor_height", self.floor_height),
            ("step_length", self.step_length),
            ("path_loss_exponent", self.path_loss_exponent),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return err(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.noise_sigma >= 0.0) || !(self.floor_attenuation >= 0.0) {
            return err("noise_sigma and floor_attenuation must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.elevator_prob) {
            return err(format!("elevator_prob {} outside [0, 1]", self.elevator_prob));
        }
        if !self.tx_power.is_finite() || !self.detection_threshold.is_finite() {
            return err("tx_power and detection_threshold must be finite".into());
        }
        Ok(())
    }

    /// Noise-free received power at 3-D distance `d` (clamped to 1 m) across
    /// `floors_crossed` floors.
    pub fn mean_rssi(&self, d: f64, floors_crossed: usize) -> f64 {
        self.tx_power
            - 10.0 * self.path_loss_exponent * d.max(1.0).log10()
            - self.floor_attenuation * floors_crossed as f64
    }

    pub fn total_aps(&self) -> usize {
        self.floors * self.aps_per_floor
    }
}

#[derive(Debug, Clone, Copy)]
struct Point {
    x: f64,
    y: f64,
    floor: usize,
}

fn reading(cfg: &SyntheticBuildingConfig, at: Point, ap: Point) -> f64 {
    let dz = (at.floor as f64 - ap.floor as f64) * cfg.floor_height;
    let d = ((at.x - ap.x).powi(2) + (at.y - ap.y).powi(2) + dz * dz).sqrt();
    cfg.mean_rssi(d, at.floor.abs_diff(ap.floor))
}

/// Generate a labeled dataset. Fingerprint ids run along trajectories and
/// timestamps increase with id, so both file formats re-ingest to the same ids.
pub fn generate(cfg: &SyntheticBuildingConfig) -> Result<RawDataset> {
    cfg.validate()?;
    let mut rng = rng_for(&[named_seed(cfg.seed, "synth")]);
    let noise = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;

    let aps: Vec<Point> = (0..cfg.floors)
        .flat_map(|f| (0..cfg.aps_per_floor).map(move |_| f))
        .map(|floor| Point { x: rng.gen::<f64>() * cfg.floor_width, y: rng.gen::<f64>() * cfg.floor_depth, floor })
        .collect();

    let mut ds = RawDataset { ap_names: (1..=aps.len()).map(|i| format!("WAP{i:03}")).collect(), ..Default::default() };
    let (mut labels, mut coords) = (Vec::new(), Vec::new());
    let mut clock = 0.0;
    for t in 0..cfg.trajectories {
        let mut floor = t % cfg.floors;
        let jump_at = (rng.gen::<f64>() < cfg.elevator_prob && cfg.steps_per_trajectory > 1)
            .then(|| rng.gen_range(1..cfg.steps_per_trajectory));
        let mut pos = Point { x: rng.gen::<f64>() * cfg.floor_width, y: rng.gen::<f64>() * cfg.floor_depth, floor };
        let mut heading = rng.gen::<f64>() * std::f64::consts::TAU;
        // trajectories are an hour apart; steps two seconds apart
        clock += 3600.0;
        for s in 0..cfg.steps_per_trajectory {
            if Some(s) == jump_at {
                floor = if floor == 0 || (floor + 1 < cfg.floors && rng.gen::<bool>()) { floor + 1 } else { floor - 1 };
                pos.floor = floor;
                let last = ds.fingerprints.len() - 1;
                ds.elevation_pairs.push((last, last + 1));
            }
            if s == 0 || Some(s) == jump_at {
                ds.trajectories.push(Trajectory { id: ds.trajectories.len(), fingerprint_ids: Vec::new() });
            } else {
                heading += 0.5 * rng.sample::<f64, _>(rand_distr::StandardNormal);
                let (mut x, mut y) = (pos.x + cfg.step_length * heading.cos(), pos.y + cfg.step_length * heading.sin());
                if !(0.0..=cfg.floor_width).contains(&x) {
                    x = x.clamp(0.0, cfg.floor_width);
                    heading = std::f64::consts::PI - heading;
                }
                if !(0.0..=cfg.floor_depth).contains(&y) {
                    y = y.clamp(0.0, cfg.floor_depth);
                    heading = -heading;
                }
                pos.x = x;
                pos.y = y;
            }
            clock += 2.0;

            let mut rssi = Vec::new();
            let mut strongest = (0u32, f64::NEG_INFINITY);
            for (a, ap) in aps.iter().enumerate() {
                let v = (reading(cfg, pos, *ap) + noise.sample(&mut rng)).max(RSSI_FLOOR).round();
                if v > strongest.1 {
                    strongest = (a as u32, v);
                }
                if v >= cfg.detection_threshold {
                    rssi.push((a as u32, v as i32));
                }
            }
            if rssi.is_empty() {
                // a scan always reports something; keep the strongest AP
                rssi.push((strongest.0, strongest.1 as i32));
            }
            let id = ds.fingerprints.len();
            let traj = ds.trajectories.last_mut().unwrap();
            traj.fingerprint_ids.push(id);
            ds.fingerprints.push(Fingerprint { id, trajectory_id: traj.id, timestamp: clock, rssi });
            ds.source_ids.push(id.to_string());
            labels.push(floor_label(floor));
            coords.push((pos.x, pos.y));
        }
    }
    ds.step_pairs = ds.consecutive_pairs().collect();
    ds.ground_truth = Some(labels);
    ds.coordinates = Some(coords);
    ds.validate()?;
    Ok(ds)
}

pub fn floor_label(floor: usize) -> FloorLabel {
    FloorLabel::building_floor(0, floor as i64)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Write the Huawei challenge layout into `dir` (created if missing).
/// Fingerprint keys are the dense ids; one JSON record per line.
pub fn write_huawei_format(ds: &RawDataset, dir: &Path) -> Result<()> {
    use crate::ingest::huawei::{DISTANCES, ELEVATIONS, FINGERPRINTS, GROUND_TRUTH, STEPS};
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut fps = String::from("{\n");
    for (i, fp) in ds.fingerprints.iter().enumerate() {
        let readings: serde_json::Map<String, serde_json::Value> =
            fp.rssi.iter().map(|&(ap, v)| (ds.ap_names[ap as usize].clone(), v.into())).collect();
        let sep = if i + 1 < ds.len() { "," } else { "" };
        let _ = writeln!(fps, "\"{}\": {}{sep}", fp.id, serde_json::Value::Object(readings));
    }
    fps.push_str("}\n");
    write(&dir.join(FINGERPRINTS), &fps)?;

    let pairs = |pairs: &[(usize, usize)]| {
        let mut s = String::from("id1,id2\n");
        for (a, b) in pairs {
            let _ = writeln!(s, "{a},{b}");
        }
        s
    };
    write(&dir.join(STEPS), &pairs(&ds.step_pairs))?;
    write(&dir.join(ELEVATIONS), &pairs(&ds.elevation_pairs))?;

    let mut dist = String::from("id1,id2,distance\n");
    for r in ds.provided_distances.iter().flatten() {
        let _ = writeln!(dist, "{},{},{}", r.id_a, r.id_b, r.meters);
    }
    write(&dir.join(DISTANCES), &dist)?;

    if let Some(gt) = &ds.ground_truth {
        let map: serde_json::Map<String, serde_json::Value> =
            gt.iter().enumerate().map(|(i, l)| (i.to_string(), l.as_str().into())).collect();
        write(&dir.join(GROUND_TRUTH), &serde_json::to_string(&map)?)?;
    }
    Ok(())
}

/// Write a UJIIndoorLoc-style CSV. Needs labels of the form `B<b>-F<f>` and
/// at most 520 access points. Trajectories are laid out as one user/phone
/// with timestamps from the dataset, so segmentation relies on the gap and
/// floor rules.
pub fn write_uji_format(ds: &RawDataset, path: &Path) -> Result<()> {
    if ds.ap_names.len() > UJI_WAP_COLUMNS {
        return Err(Error::Validation(format!("{} access points exceed the {UJI_WAP_COLUMNS} WAP columns", ds.ap_names.len())));
    }
    let truth = ds.truth()?;
    let coords = ds.coordinates.as_deref();
    let mut out = String::new();
    let header: Vec<String> = (1..=UJI_WAP_COLUMNS)
        .map(|i| format!("WAP{i:03}"))
        .chain(
            ["LONGITUDE", "LATITUDE", "FLOOR", "BUILDINGID", "SPACEID", "RELATIVEPOSITION", "USERID", "PHONEID", "TIMESTAMP"]
                .map(String::from),
        )
        .collect();
    debug_assert_eq!(header.len(), UJI_COLUMNS);
    out.push_str(&header.join(","));
    out.push('\n');
    let mut cells = vec![UJI_MISSING_RSSI; UJI_WAP_COLUMNS];
    for (i, fp) in ds.fingerprints.iter().enumerate() {
        let (b, f) = parse_building_floor(&truth[i])?;
        cells.fill(UJI_MISSING_RSSI);
        for &(ap, v) in &fp.rssi {
            cells[ap as usize] = v;
        }
        for c in &cells {
            let _ = write!(out, "{c},");
        }
        let (x, y) = coords.map_or((0.0, 0.0), |c| c[i]);
        let _ = writeln!(out, "{x},{y},{f},{b},0,0,0,0,{}", fp.timestamp);
    }
    write(path, &out)
}

fn parse_building_floor(l: &FloorLabel) -> Result<(i64, i64)> {
    let bad = || Error::Validation(format!("label {l} is not of the form B<b>-F<f>"));
    let (b, f) = l.as_str().strip_prefix('B').and_then(|s| s.split_once("-F")).ok_or_else(bad)?;
    Ok((b.parse().map_err(|_| bad())?, f.parse().map_err(|_| bad())?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::PathLossHeuristic;
    use crate::ingest::{parse_huawei, parse_uji, DEFAULT_DELTA_T};

    fn small() -> SyntheticBuildingConfig {
        SyntheticBuildingConfig { floors: 3, trajectories: 6, steps_per_trajectory: 20, elevator_prob: 0.5, seed: 7, ..Default::default() }
    }

    #[test]
    fn path_loss_reference_values() {
        let cfg = SyntheticBuildingConfig { noise_sigma: 0.0, ..Default::default() };
        let ap = Point { x: 10.0, y: 10.0, floor: 1 };
        assert_eq!(reading(&cfg, Point { x: 11.0, y: 10.0, floor: 1 }, ap), -40.0);
        let below = reading(&cfg, Point { x: 10.0, y: 10.0, floor: 0 }, ap);
        assert!((below - (-69.3)).abs() < 0.05, "{below}");
    }

    #[test]
    fn structure_and_labels() {
        let cfg = small();
        let ds = generate(&cfg).unwrap();
        assert_eq!(ds.len(), cfg.trajectories * cfg.steps_per_trajectory);
        let labels: std::collections::BTreeSet<_> = ds.truth().unwrap().iter().collect();
        assert_eq!(labels.len(), cfg.floors);
        assert_eq!(ds.trajectories.len(), cfg.trajectories + ds.elevation_pairs.len());
        let truth = ds.truth().unwrap();
        for t in &ds.trajectories {
            assert!(t.fingerprint_ids.iter().all(|&v| truth[v] == truth[t.fingerprint_ids[0]]));
        }
        for &(a, b) in &ds.elevation_pairs {
            assert_ne!(truth[a], truth[b]);
            assert_eq!(b, a + 1);
        }
        for fp in &ds.fingerprints {
            assert!(fp.rssi.iter().all(|&(_, v)| (-95..=0).contains(&v) || fp.rssi.len() == 1));
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a.fingerprints, b.fingerprints);
        let c = generate(&SyntheticBuildingConfig { seed: 8, ..small() }).unwrap();
        assert_ne!(a.fingerprints, c.fingerprints);
    }

    #[test]
    fn invalid_configs() {
        for cfg in [
            SyntheticBuildingConfig { floors: 1, ..Default::default() },
            SyntheticBuildingConfig { elevator_prob: 1.5, ..Default::default() },
            SyntheticBuildingConfig { trajectories: 0, ..Default::default() },
            SyntheticBuildingConfig { noise_sigma: -1.0, ..Default::default() },
        ] {
            assert!(generate(&cfg).is_err());
        }
    }

    #[test]
    fn huawei_round_trip() {
        let ds = generate(&small()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_huawei_format(&ds, dir.path()).unwrap();
        let back = parse_huawei(dir.path()).unwrap();
        assert_eq!(back.len(), ds.len());
        assert_eq!(back.trajectories, ds.trajectories);
        assert_eq!(back.ground_truth, ds.ground_truth);
        assert_eq!(back.elevation_pairs, ds.elevation_pairs);
        let rssi = |d: &RawDataset| d.fingerprints.iter().map(|f| f.rssi.clone()).collect::<Vec<_>>();
        assert_eq!(rssi(&back), rssi(&ds));
    }

    #[test]
    fn uji_round_trip() {
        let ds = generate(&small()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("uji.csv");
        write_uji_format(&ds, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let first = text.lines().nth(1).unwrap();
        let cols: Vec<&str> = first.split(',').collect();
        assert_eq!(cols.len(), UJI_COLUMNS);
        let present = ds.fingerprints[0].rssi.len();
        assert_eq!(cols[..UJI_WAP_COLUMNS].iter().filter(|c| **c == "100").count(), UJI_WAP_COLUMNS - present);

        let back = parse_uji(&path, DEFAULT_DELTA_T).unwrap();
        assert_eq!(back.len(), ds.len());
        assert_eq!(back.trajectories, ds.trajectories);
        assert_eq!(back.ground_truth, ds.ground_truth);
    }

    #[test]
    fn same_floor_neighbors_look_closer() {
        let cfg = SyntheticBuildingConfig { floors: 4, trajectories: 12, steps_per_trajectory: 40, ..Default::default() };
        let ds = generate(&cfg).unwrap();
        let h = PathLossHeuristic::default();
        let truth = ds.truth().unwrap();
        let fps = &ds.fingerprints;
        let mean = |pairs: &[(usize, usize)]| {
            pairs.iter().map(|&(a, b)| h.signal_distance(&fps[a], &fps[b]).unwrap()).sum::<f64>() / pairs.len() as f64
        };
        let same: Vec<_> = ds.consecutive_pairs().collect();
        let mut rng = rng_for(&[1]);
        let cross: Vec<_> = std::iter::repeat_with(|| (rng.gen_range(0..ds.len()), rng.gen_range(0..ds.len())))
            .filter(|&(a, b)| truth[a] != truth[b])
            .take(same.len())
            .collect();
        let (s, c) = (mean(&same), mean(&cross));
        assert!(s < c, "same-floor {s} vs cross-floor {c}");
    }
}
