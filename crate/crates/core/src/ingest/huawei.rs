use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde_json::Value;

use super::{strip_bom, ApId, Fingerprint, FloorLabel, NodeId, RawDataset, Trajectory};
use crate::distance::DistanceRecord;
use crate::error::{Error, Result};

pub const FINGERPRINTS: &str = "fingerprints.json";
pub const STEPS: &str = "steps.csv";
pub const ELEVATIONS: &str = "elevations.csv";
pub const DISTANCES: &str = "estimated_wifi_distances.csv";
pub const GROUND_TRUTH: &str = "GT.json";

/// Parse a Huawei challenge directory.
///
/// Fingerprint keys are remapped to dense ids: numerically sorted when every
/// key is an integer, lexicographically otherwise. Trajectories are the
/// connected chains of the (undirected) step graph.
pub fn parse_huawei(dir: &Path) -> Result<RawDataset> {
    for name in [FINGERPRINTS, STEPS, ELEVATIONS, DISTANCES] {
        if !dir.join(name).is_file() {
            return Err(Error::MissingFile(dir.join(name)));
        }
    }

    let raw: BTreeMap<String, BTreeMap<String, Value>> = read_json(&dir.join(FINGERPRINTS))?;
    let mut keys: Vec<&String> = raw.keys().collect();
    if keys.iter().all(|k| k.trim().parse::<i64>().is_ok()) {
        keys.sort_by_key(|k| k.trim().parse::<i64>().unwrap());
    }
    let index: HashMap<&str, NodeId> = keys.iter().enumerate().map(|(i, k)| (k.trim(), i)).collect();

    let ap_names: Vec<String> = raw
        .values()
        .flat_map(|m| m.keys().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let ap_index: HashMap<&str, ApId> = ap_names.iter().enumerate().map(|(i, a)| (a.as_str(), i as ApId)).collect();

    let mut fingerprints = Vec::with_capacity(keys.len());
    for (id, key) in keys.iter().enumerate() {
        let mut rssi = Vec::with_capacity(raw[*key].len());
        for (ap, v) in &raw[*key] {
            let dbm = v
                .as_i64()
                .or_else(|| v.as_f64().map(|f| f.round() as i64))
                .ok_or_else(|| Error::Format { file: FINGERPRINTS.into(), msg: format!("fingerprint {key}: rssi for {ap} is not a number") })?;
            rssi.push((ap_index[ap.as_str()], dbm as i32));
        }
        rssi.sort_unstable();
        if rssi.is_empty() {
            return Err(Error::Integrity(format!("{FINGERPRINTS}: fingerprint {key} has no access points")));
        }
        fingerprints.push(Fingerprint { id, trajectory_id: 0, timestamp: 0.0, rssi });
    }

    let step_pairs = read_pairs(&dir.join(STEPS), STEPS, &index)?;
    let elevation_pairs = read_pairs(&dir.join(ELEVATIONS), ELEVATIONS, &index)?;
    let provided = read_distance_rows(&dir.join(DISTANCES), &index)?;

    let ground_truth = if dir.join(GROUND_TRUTH).is_file() {
        let gt: BTreeMap<String, Value> = read_json(&dir.join(GROUND_TRUTH))?;
        let mut labels: Vec<Option<FloorLabel>> = vec![None; keys.len()];
        let mut dangling = Vec::new();
        for (k, v) in &gt {
            let label = match v {
                Value::String(s) => s.clone(),
                Value::Number(n) => n.to_string(),
                other => {
                    return Err(Error::Format { file: GROUND_TRUTH.into(), msg: format!("label for {k} is {other}") })
                }
            };
            match index.get(k.trim()) {
                Some(&id) => labels[id] = Some(FloorLabel::new(label)?),
                None => dangling.push(k.clone()),
            }
        }
        if !dangling.is_empty() {
            return Err(Error::Integrity(format!("{GROUND_TRUTH}: unknown fingerprint ids {dangling:?}")));
        }
        let missing: Vec<&str> = labels.iter().zip(&keys).filter(|(l, _)| l.is_none()).map(|(_, k)| k.as_str()).collect();
        if !missing.is_empty() {
            return Err(Error::Integrity(format!("{GROUND_TRUTH}: no label for fingerprints {missing:?}")));
        }
        Some(labels.into_iter().map(Option::unwrap).collect())
    } else {
        None
    };

    let trajectories = chain_trajectories(fingerprints.len(), &step_pairs)?;
    for traj in &trajectories {
        for (pos, &id) in traj.fingerprint_ids.iter().enumerate() {
            fingerprints[id].trajectory_id = traj.id;
            fingerprints[id].timestamp = pos as f64;
        }
    }

    let ds = RawDataset {
        fingerprints,
        trajectories,
        step_pairs,
        elevation_pairs,
        provided_distances: Some(provided),
        ground_truth,
        coordinates: None,
        ap_names,
        source_ids: keys.iter().map(|k| k.to_string()).collect(),
    };
    ds.validate()?;
    Ok(ds)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(strip_bom(&text)).map_err(|e| Error::Format {
        file: path.file_name().unwrap_or_default().to_string_lossy().into_owned(),
        msg: e.to_string(),
    })
}

fn read_rows(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(strip_bom(&text).as_bytes());
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        rows.push(rec.iter().map(str::to_owned).collect());
    }
    Ok(rows)
}

fn read_pairs(path: &Path, name: &str, index: &HashMap<&str, NodeId>) -> Result<Vec<(NodeId, NodeId)>> {
    let rows = read_rows(path)?;
    let mut pairs = Vec::with_capacity(rows.len());
    let mut dangling = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        if row.len() < 2 {
            return Err(Error::parse(name, i + 1, "expected two id columns"));
        }
        match (index.get(row[0].as_str()), index.get(row[1].as_str())) {
            (Some(&a), Some(&b)) => pairs.push((a, b)),
            // a first row that resolves nothing is a header
            (None, None) if i == 0 => {}
            _ => dangling.push(i + 1),
        }
    }
    if !dangling.is_empty() {
        return Err(Error::Integrity(format!("{name}: dangling fingerprint ids on rows {dangling:?}")));
    }
    Ok(pairs)
}

fn read_distance_rows(path: &Path, index: &HashMap<&str, NodeId>) -> Result<Vec<DistanceRecord>> {
    let rows = read_rows(path)?;
    let mut out = Vec::with_capacity(rows.len());
    let mut dangling = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        if row.len() < 3 {
            return Err(Error::parse(DISTANCES, i + 1, "expected id1,id2,distance"));
        }
        let meters = match row[2].parse::<f64>() {
            Ok(m) => m,
            Err(_) if i == 0 => continue,
            Err(_) => return Err(Error::parse(DISTANCES, i + 1, format!("bad distance {:?}", row[2]))),
        };
        match (index.get(row[0].as_str()), index.get(row[1].as_str())) {
            (Some(&a), Some(&b)) => out.push(DistanceRecord { id_a: a, id_b: b, meters }),
            _ => dangling.push(i + 1),
        }
    }
    if !dangling.is_empty() {
        return Err(Error::Integrity(format!("{DISTANCES}: dangling fingerprint ids on rows {dangling:?}")));
    }
    Ok(out)
}

/// Split nodes into chains along undirected step adjacency.
///
/// Chains are started from their lowest-id endpoint and numbered in order of
/// their lowest member id. Branches and cycles are integrity errors.
pub(crate) fn chain_trajectories(n: usize, steps: &[(NodeId, NodeId)]) -> Result<Vec<Trajectory>> {
    let mut adj: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    for &(a, b) in steps {
        if a == b {
            return Err(Error::Integrity(format!("step edge ({a}, {a}) is a self-loop")));
        }
        if !adj[a].contains(&b) {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    let branched: Vec<NodeId> = (0..n).filter(|&v| adj[v].len() > 2).collect();
    if !branched.is_empty() {
        return Err(Error::Integrity(format!("step graph branches at fingerprints {branched:?}")));
    }

    let mut visited = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if visited[start] {
            continue;
        }
        // collect the component, then walk it from its smallest endpoint
        let mut comp = vec![start];
        visited[start] = true;
        let mut i = 0;
        while i < comp.len() {
            for &w in &adj[comp[i]] {
                if !visited[w] {
                    visited[w] = true;
                    comp.push(w);
                }
            }
            i += 1;
        }
        let head = comp
            .iter()
            .copied()
            .filter(|&v| adj[v].len() <= 1)
            .min()
            .ok_or_else(|| Error::Integrity(format!("step graph has a cycle through fingerprint {start}")))?;
        let mut chain = Vec::with_capacity(comp.len());
        let (mut prev, mut cur) = (usize::MAX, head);
        loop {
            chain.push(cur);
            match adj[cur].iter().find(|&&w| w != prev) {
                Some(&next) => {
                    prev = cur;
                    cur = next;
                }
                None => break,
            }
        }
        out.push(Trajectory { id: out.len(), fingerprint_ids: chain });
    }
    Ok(out)
}
