use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stats::{bootstrap, BootstrapConfig, ResampleUnit};
use super::{ari, correct_flags, map_clusters, mapped_accuracy, nmi, purity, weighted_f1, weighted_f1_labels};
use crate::error::{Error, Result};
use crate::ingest::{FloorLabel, NodeId, Trajectory};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub bootstrap: BootstrapConfig,
    pub resample_unit: ResampleUnit,
    /// Replace every node's cluster by its trajectory's modal cluster before scoring.
    pub trajectory_consistent: bool,
}

/// Counts with rows = true labels and columns = mapped predicted labels.
/// Both axes use the same sorted label list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<FloorLabel>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_predictions(truth: &[FloorLabel], pred: &[FloorLabel]) -> Self {
        let mut index: BTreeMap<&FloorLabel, usize> = truth.iter().chain(pred).map(|l| (l, 0)).collect();
        for (i, v) in index.values_mut().enumerate() {
            *v = i;
        }
        let mut counts = vec![vec![0; index.len()]; index.len()];
        for (t, p) in truth.iter().zip(pred) {
            counts[index[t]][index[p]] += 1;
        }
        ConfusionMatrix { labels: index.into_keys().cloned().collect(), counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// Header `truth,<label>...`, then one row per true label.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(std::iter::once("truth").chain(self.labels.iter().map(|l| l.as_str())))?;
        for (l, row) in self.labels.iter().zip(&self.counts) {
            w.write_record(std::iter::once(l.as_str().to_string()).chain(row.iter().map(u64::to_string)))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Validation(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        const NAME: &str = "confusion.csv";
        let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
        let mut records = r.records();
        let header = records.next().ok_or_else(|| Error::Format { file: NAME.into(), msg: "empty file".into() })??;
        let labels = header.iter().skip(1).map(FloorLabel::new).collect::<Result<Vec<_>>>()?;
        let mut counts = Vec::with_capacity(labels.len());
        for (i, rec) in records.enumerate() {
            let rec = rec?;
            if rec.len() != labels.len() + 1 || rec[0] != *labels.get(i).map_or("", |l| l.as_str()) {
                return Err(Error::parse(NAME, i + 2, "row does not match the header labels"));
            }
            let row = rec.iter().skip(1).map(|c| c.parse().map_err(|_| Error::parse(NAME, i + 2, "bad count")));
            counts.push(row.collect::<Result<Vec<u64>>>()?);
        }
        if counts.len() != labels.len() {
            return Err(Error::Format { file: NAME.into(), msg: "matrix is not square".into() });
        }
        Ok(ConfusionMatrix { labels, counts })
    }
}

/// Reassign every fingerprint of a trajectory to the trajectory's most
/// frequent cluster (smallest id on ties). Nodes outside all trajectories
/// keep their cluster.
pub fn trajectory_consistent_view(assignment: &[usize], trajectories: &[Trajectory]) -> Vec<usize> {
    let mut out = assignment.to_vec();
    for t in trajectories {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for &v in &t.fingerprint_ids {
            *counts.entry(assignment[v]).or_default() += 1;
        }
        let Some(mode) = counts.iter().fold(None, |best: Option<(usize, usize)>, (&c, &n)| match best {
            Some((_, bn)) if bn >= n => best,
            _ => Some((c, n)),
        }) else {
            continue;
        };
        for &v in &t.fingerprint_ids {
            out[v] = mode.0;
        }
    }
    out
}

/// One line of `predictions.csv`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub node_id: NodeId,
    pub cluster: usize,
    pub predicted: FloorLabel,
    pub truth: FloorLabel,
    pub correct: bool,
}

pub fn write_predictions_csv(path: &Path, rows: &[PredictionRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_predictions_csv(path: &Path) -> Result<Vec<PredictionRow>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<Result<Vec<PredictionRow>, _>>()?;
    if rows.iter().enumerate().any(|(i, r)| r.node_id != i) {
        return Err(Error::Format { file: path.display().to_string(), msg: "node ids must be 0..n in order".into() });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub method: String,
    pub n: usize,
    /// Number of distinct clusters in the scored assignment.
    pub clusters: usize,
    pub k_opt: Option<usize>,
    pub accuracy: f64,
    pub f1_weighted: f64,
    pub ari: f64,
    pub nmi: f64,
    pub purity: f64,
    pub ci_accuracy: (f64, f64),
    pub ci_f1: (f64, f64),
    #[serde(rename = "bootstrap_B")]
    pub bootstrap_b: usize,
    pub level: f64,
    pub resample_unit: ResampleUnit,
    pub trajectory_consistent: bool,
    pub confusion: ConfusionMatrix,
}

impl EvaluationReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Score a cluster assignment against ground truth.
pub fn evaluate(
    method: &str,
    assignment: &[usize],
    truth: &[FloorLabel],
    trajectories: &[Trajectory],
    cfg: &EvalConfig,
) -> Result<(EvaluationReport, Vec<PredictionRow>)> {
    let assignment =
        if cfg.trajectory_consistent { trajectory_consistent_view(assignment, trajectories) } else { assignment.to_vec() };
    let mapping = map_clusters(&assignment, truth)?;
    let pred = mapping.predict(&assignment);
    let flags = correct_flags(&assignment, &mapping, truth);

    let units: Vec<Vec<usize>> = match cfg.resample_unit {
        ResampleUnit::Fingerprint => (0..truth.len()).map(|i| vec![i]).collect(),
        ResampleUnit::Trajectory => {
            let mut covered = vec![false; truth.len()];
            let mut units: Vec<Vec<usize>> = trajectories.iter().map(|t| t.fingerprint_ids.clone()).collect();
            units.iter().flatten().for_each(|&v| covered[v] = true);
            units.extend((0..truth.len()).filter(|&v| !covered[v]).map(|v| vec![v]));
            units
        }
    };
    let acc_ci = bootstrap(&units, &cfg.bootstrap, |idx| {
        idx.iter().filter(|&&i| flags[i]).count() as f64 / idx.len() as f64
    })?;
    let f1_ci = bootstrap(&units, &cfg.bootstrap, |idx| {
        let t: Vec<&FloorLabel> = idx.iter().map(|&i| &truth[i]).collect();
        let p: Vec<Option<&FloorLabel>> = idx.iter().map(|&i| Some(&pred[i])).collect();
        weighted_f1_labels(&t, &p)
    })?;

    let clusters = assignment.iter().collect::<std::collections::BTreeSet<_>>().len();
    let report = EvaluationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        method: method.to_string(),
        n: truth.len(),
        clusters,
        k_opt: None,
        accuracy: mapped_accuracy(&assignment, &mapping, truth),
        f1_weighted: weighted_f1(&assignment, &mapping, truth),
        ari: ari(truth, &assignment),
        nmi: nmi(truth, &assignment),
        purity: purity(truth, &assignment),
        ci_accuracy: (acc_ci.lo, acc_ci.hi),
        ci_f1: (f1_ci.lo, f1_ci.hi),
        bootstrap_b: cfg.bootstrap.resamples,
        level: cfg.bootstrap.level,
        resample_unit: cfg.resample_unit,
        trajectory_consistent: cfg.trajectory_consistent,
        confusion: ConfusionMatrix::from_predictions(truth, &pred),
    };
    let rows = (0..truth.len())
        .map(|v| PredictionRow {
            node_id: v,
            cluster: assignment[v],
            predicted: pred[v].clone(),
            truth: truth[v].clone(),
            correct: flags[v],
        })
        .collect();
    Ok((report, rows))
}
