use std::fs;
use std::path::Path;

use super::{strip_bom, ApId, Fingerprint, FloorLabel, RawDataset, Trajectory};
use crate::error::{Error, Result};

pub const UJI_WAP_COLUMNS: usize = 520;
/// WAPs, LONGITUDE, LATITUDE, FLOOR, BUILDINGID, SPACEID, RELATIVEPOSITION,
/// USERID, PHONEID, TIMESTAMP.
pub const UJI_COLUMNS: usize = UJI_WAP_COLUMNS + 9;
pub const UJI_MISSING_RSSI: i32 = 100;
pub const DEFAULT_DELTA_T: f64 = 600.0;

const LONGITUDE: usize = UJI_WAP_COLUMNS;
const LATITUDE: usize = UJI_WAP_COLUMNS + 1;
const FLOOR: usize = UJI_WAP_COLUMNS + 2;
const BUILDING: usize = UJI_WAP_COLUMNS + 3;
const USER: usize = UJI_WAP_COLUMNS + 6;
const PHONE: usize = UJI_WAP_COLUMNS + 7;
const TIMESTAMP: usize = UJI_WAP_COLUMNS + 8;

struct Row {
    line: usize,
    rssi: Vec<(ApId, i32)>,
    lon: f64,
    lat: f64,
    floor: i64,
    building: i64,
    user: i64,
    phone: i64,
    timestamp: f64,
}

/// Parse a UJIIndoorLoc CSV and segment it into trajectories.
///
/// Rows are grouped by `(USERID, PHONEID)` and ordered by timestamp (file
/// position breaks ties). A trajectory ends when the gap to the next row
/// exceeds `delta_t` or the building/floor changes. Sentinel readings are
/// dropped, and rows left without any reading are dropped before
/// segmentation. Node ids follow the `(user, phone, timestamp, line)` order,
/// so the result does not depend on the row order of the file.
pub fn parse_uji(path: &Path, delta_t: f64) -> Result<RawDataset> {
    if !(delta_t >= 0.0) {
        return Err(Error::Config(format!("delta_t must be non-negative, got {delta_t}")));
    }
    let file = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(strip_bom(&text).as_bytes());

    let mut ap_names: Vec<String> = (1..=UJI_WAP_COLUMNS).map(|i| format!("WAP{i:03}")).collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 1;
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() != UJI_COLUMNS {
            return Err(Error::Format {
                file,
                msg: format!("row {line} has {} columns, expected {UJI_COLUMNS}", rec.len()),
            });
        }
        if line == 1 && rec[0].parse::<f64>().is_err() {
            ap_names = rec.iter().take(UJI_WAP_COLUMNS).map(str::to_owned).collect();
            continue;
        }
        let num = |col: usize| -> Result<f64> {
            rec[col]
                .parse::<f64>()
                .map_err(|_| Error::parse(file.as_str(), line, format!("column {} is not numeric: {:?}", col + 1, &rec[col])))
        };
        let mut rssi = Vec::new();
        for ap in 0..UJI_WAP_COLUMNS {
            let v = num(ap)?;
            if v.fract() != 0.0 {
                return Err(Error::parse(file.as_str(), line, format!("rssi column {} is not an integer", ap + 1)));
            }
            let v = v as i32;
            if v != UJI_MISSING_RSSI {
                rssi.push((ap as ApId, v));
            }
        }
        let row = Row {
            line,
            rssi,
            lon: num(LONGITUDE)?,
            lat: num(LATITUDE)?,
            floor: num(FLOOR)? as i64,
            building: num(BUILDING)? as i64,
            user: num(USER)? as i64,
            phone: num(PHONE)? as i64,
            timestamp: num(TIMESTAMP)?,
        };
        if !row.rssi.is_empty() {
            rows.push(row);
        }
    }

    rows.sort_by(|a, b| {
        (a.user, a.phone)
            .cmp(&(b.user, b.phone))
            .then(a.timestamp.total_cmp(&b.timestamp))
            .then(a.line.cmp(&b.line))
    });

    let mut fingerprints = Vec::with_capacity(rows.len());
    let mut trajectories: Vec<Trajectory> = Vec::new();
    let mut labels = Vec::with_capacity(rows.len());
    let mut coords = Vec::with_capacity(rows.len());
    let mut source_ids = Vec::with_capacity(rows.len());
    let mut prev: Option<&Row> = None;
    for (id, row) in rows.iter().enumerate() {
        let split = match prev {
            None => true,
            Some(p) => {
                (p.user, p.phone) != (row.user, row.phone)
                    || row.timestamp - p.timestamp > delta_t
                    || (p.building, p.floor) != (row.building, row.floor)
            }
        };
        if split {
            trajectories.push(Trajectory { id: trajectories.len(), fingerprint_ids: Vec::new() });
        }
        let traj = trajectories.last_mut().unwrap();
        traj.fingerprint_ids.push(id);
        fingerprints.push(Fingerprint {
            id,
            trajectory_id: traj.id,
            timestamp: row.timestamp,
            rssi: row.rssi.clone(),
        });
        labels.push(FloorLabel::building_floor(row.building, row.floor));
        coords.push((row.lon, row.lat));
        source_ids.push(format!("row{}", row.line));
        prev = Some(row);
    }

    let ds = RawDataset {
        fingerprints,
        trajectories,
        ground_truth: Some(labels),
        coordinates: Some(coords),
        ap_names,
        source_ids,
        ..Default::default()
    };
    ds.validate()?;
    Ok(ds)
}
