//! End-to-end runs: dataset → distances → graph → partition → evaluation.
//!
//! Every run writes into `<out>/<scenario>-<algorithm>-<hash12>`, where the
//! hash covers the resolved configuration (output location and execution
//! strategy excluded). All randomness derives from `RunConfig::seed` through
//! named substreams.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cluster::{auto_k, ChSweep, KMeansConfig};
use crate::community::{fast_greedy, label_propagation, leiden, louvain, Partition};
use crate::distance::{
    candidate_pairs, geometric_distances, provided_distances, provider_distances, DistanceRecord, DistanceSourceKind,
    PairingPolicy, PathLossHeuristic,
};
use crate::embed::{generate_walks, train_sgns, EmbeddingMatrix, SgnsConfig, WalkConfig};
use crate::error::{Error, Result, Stage};
use crate::eval::{evaluate, mcnemar, read_predictions_csv, write_predictions_csv, EvalConfig, EvaluationReport};
use crate::exec::{named_seed, Exec};
use crate::graph::{build_graph, ensure_connected, graph_stats, write_edge_list, BuildConfig, GraphStats, TrajectoryGraph};
use crate::ingest::{dataset_summary, parse_huawei, parse_uji, DatasetSummary, RawDataset, DEFAULT_DELTA_T};
use crate::synth::{generate, SyntheticBuildingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    #[serde(rename = "HW-Def")]
    HwDef,
    #[serde(rename = "HW-WBDE")]
    HwWbde,
    #[serde(rename = "UJI-Geo-T")]
    UjiGeoT,
    #[serde(rename = "UJI-Geo-V")]
    UjiGeoV,
    #[serde(rename = "UJI-WBDE-T")]
    UjiWbdeT,
    #[serde(rename = "UJI-WBDE-V")]
    UjiWbdeV,
    #[serde(rename = "SYNTH")]
    Synth,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::HwDef,
        Scenario::HwWbde,
        Scenario::UjiGeoT,
        Scenario::UjiGeoV,
        Scenario::UjiWbdeT,
        Scenario::UjiWbdeV,
        Scenario::Synth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::HwDef => "HW-Def",
            Scenario::HwWbde => "HW-WBDE",
            Scenario::UjiGeoT => "UJI-Geo-T",
            Scenario::UjiGeoV => "UJI-Geo-V",
            Scenario::UjiWbdeT => "UJI-WBDE-T",
            Scenario::UjiWbdeV => "UJI-WBDE-V",
            Scenario::Synth => "SYNTH",
        }
    }

    pub fn dataset_kind(self) -> DatasetKind {
        match self {
            Scenario::HwDef | Scenario::HwWbde => DatasetKind::Huawei,
            Scenario::Synth => DatasetKind::Synth,
            _ => DatasetKind::Uji,
        }
    }

    /// Distance sources this scenario may use.
    pub fn allowed_sources(self) -> &'static [DistanceSourceKind] {
        use DistanceSourceKind::*;
        match self {
            Scenario::HwDef => &[Provided],
            Scenario::HwWbde | Scenario::UjiWbdeT | Scenario::UjiWbdeV => &[Signal],
            Scenario::UjiGeoT | Scenario::UjiGeoV => &[Geometric],
            Scenario::Synth => &[Signal, Geometric],
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown scenario {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Huawei,
    Uji,
    Synth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Node2vec,
    Louvain,
    Leiden,
    FastGreedy,
    Lpa,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] =
        [Algorithm::Node2vec, Algorithm::Louvain, Algorithm::Leiden, Algorithm::FastGreedy, Algorithm::Lpa];
    pub const BASELINES: [Algorithm; 4] = [Algorithm::Louvain, Algorithm::Leiden, Algorithm::FastGreedy, Algorithm::Lpa];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Node2vec => "node2vec",
            Algorithm::Louvain => "louvain",
            Algorithm::Leiden => "leiden",
            Algorithm::FastGreedy => "fast_greedy",
            Algorithm::Lpa => "lpa",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.replace('-', "_");
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(&s))
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    /// Directory (Huawei) or CSV file (UJI). Unused for synthetic data.
    pub path: Option<PathBuf>,
    /// Trajectory gap threshold for UJI, seconds.
    pub delta_t: f64,
    pub synth: SyntheticBuildingConfig,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec { kind: DatasetKind::Synth, path: None, delta_t: DEFAULT_DELTA_T, synth: Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub dataset: DatasetSpec,
    pub distance_source: DistanceSourceKind,
    pub heuristic: PathLossHeuristic,
    pub pairing: PairingPolicy,
    pub graph: BuildConfig,
    pub walk: WalkConfig,
    pub sgns: SgnsConfig,
    pub kmeans: KMeansConfig,
    pub k_min: usize,
    pub k_max: usize,
    pub algorithms: Vec<Algorithm>,
    pub eval: EvalConfig,
    pub seed: u64,
    pub exec: Exec,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: Scenario::Synth,
            dataset: DatasetSpec::default(),
            distance_source: DistanceSourceKind::Signal,
            heuristic: PathLossHeuristic::default(),
            pairing: PairingPolicy::default(),
            graph: BuildConfig::default(),
            walk: WalkConfig::default(),
            sgns: SgnsConfig::default(),
            kmeans: KMeansConfig::default(),
            k_min: 3,
            k_max: 20,
            algorithms: vec![Algorithm::Node2vec],
            eval: EvalConfig::default(),
            seed: 0,
            exec: Exec::default(),
            out_dir: PathBuf::from("runs"),
        }
    }
}

impl RunConfig {
    /// Load a JSON or TOML file (by extension; JSON otherwise).
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dataset.kind != self.scenario.dataset_kind() {
            return Err(Error::Config(format!(
                "scenario {} needs a {:?} dataset, config has {:?}",
                self.scenario,
                self.scenario.dataset_kind(),
                self.dataset.kind
            )));
        }
        if !self.scenario.allowed_sources().contains(&self.distance_source) {
            return Err(Error::Config(format!(
                "scenario {} does not allow the {:?} distance source (allowed: {:?})",
                self.scenario,
                self.distance_source,
                self.scenario.allowed_sources()
            )));
        }
        if self.dataset.kind != DatasetKind::Synth && self.dataset.path.is_none() {
            return Err(Error::Config("dataset.path is required for real datasets".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("no algorithms selected".into()));
        }
        if self.k_min < 2 || self.k_min > self.k_max {
            return Err(Error::Config(format!("invalid k range [{}, {}]", self.k_min, self.k_max)));
        }
        self.heuristic.validate()?;
        self.graph.validate()?;
        self.walk.validate()?;
        self.sgns.validate()?;
        self.eval.bootstrap.validate()?;
        if self.dataset.kind == DatasetKind::Synth {
            self.dataset.synth.validate()?;
        }
        Ok(())
    }

    /// Named substream seeds derived from the top-level seed.
    pub fn seeds(&self) -> BTreeMap<&'static str, u64> {
        ["synth", "walks", "sgns", "kmeans", "louvain", "leiden", "lpa", "bootstrap"]
            .into_iter()
            .map(|name| (name, named_seed(self.seed, name)))
            .collect()
    }

    /// Copy with every sub-seed and execution strategy filled in.
    pub fn resolved(&self) -> RunConfig {
        let s = self.seeds();
        let mut c = self.clone();
        c.dataset.synth.seed = s["synth"];
        c.walk.seed = s["walks"];
        c.walk.exec = self.exec;
        c.sgns.seed = s["sgns"];
        c.eval.bootstrap.seed = s["bootstrap"];
        c.eval.bootstrap.exec = self.exec;
        c
    }

    /// First 12 hex digits of SHA-256 over the resolved config, with the
    /// output directory and execution strategy blanked.
    pub fn hash12(&self, algorithm: Algorithm) -> String {
        let mut c = self.resolved();
        c.out_dir = PathBuf::new();
        c.exec = Exec::Sequential;
        c.walk.exec = Exec::Sequential;
        c.eval.bootstrap.exec = Exec::Sequential;
        c.algorithms = vec![algorithm];
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&bytes).iter().take(6).map(|b| format!("{b:02x}")).collect()
    }

    pub fn run_dir(&self, algorithm: Algorithm) -> PathBuf {
        self.out_dir.join(format!("{}-{}-{}", self.scenario, algorithm, self.hash12(algorithm)))
    }
}

pub fn load_dataset(spec: &DatasetSpec) -> Result<RawDataset> {
    let path = || spec.path.as_deref().ok_or_else(|| Error::Config("dataset.path is required".into()));
    match spec.kind {
        DatasetKind::Huawei => parse_huawei(path()?),
        DatasetKind::Uji => parse_uji(path()?, spec.delta_t),
        DatasetKind::Synth => generate(&spec.synth),
    }
}

/// Distances for the configured source.
pub fn compute_distances(
    ds: &RawDataset,
    source: DistanceSourceKind,
    heuristic: &PathLossHeuristic,
    pairing: PairingPolicy,
    exec: Exec,
) -> Result<Vec<DistanceRecord>> {
    heuristic.validate()?;
    match source {
        DistanceSourceKind::Provided => provided_distances(ds),
        DistanceSourceKind::Geometric => geometric_distances(ds, &candidate_pairs(ds, pairing, heuristic, exec)),
        DistanceSourceKind::Signal => {
            provider_distances(ds, &candidate_pairs(ds, pairing, heuristic, exec), heuristic, exec)
        }
    }
}

/// Build the trajectory graph and join its components.
pub fn build_connected_graph(
    ds: &RawDataset,
    dists: &[DistanceRecord],
    cfg: &BuildConfig,
    heuristic: &PathLossHeuristic,
    exec: Exec,
) -> Result<TrajectoryGraph> {
    let g = build_graph(ds, dists, cfg)?;
    ensure_connected(&g, ds, heuristic, cfg, exec)
}

/// Dataset and graph shared by every algorithm of a run.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: RunConfig,
    pub dataset: RawDataset,
    pub graph: TrajectoryGraph,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    cfg.validate().map_err(|e| e.in_stage(Stage::Config))?;
    let cfg = cfg.resolved();
    let ds = load_dataset(&cfg.dataset).map_err(|e| e.in_stage(Stage::Ingest))?;
    prepare_with(&cfg, ds)
}

/// Like [`prepare`] for a dataset already in memory. `cfg` is resolved here.
pub fn prepare_with(cfg: &RunConfig, dataset: RawDataset) -> Result<Prepared> {
    let cfg = cfg.resolved();
    dataset.truth().map_err(|e| e.in_stage(Stage::Ingest))?;
    let dists = compute_distances(&dataset, cfg.distance_source, &cfg.heuristic, cfg.pairing, cfg.exec)
        .map_err(|e| e.in_stage(Stage::Distance))?;
    let graph = build_connected_graph(&dataset, &dists, &cfg.graph, &cfg.heuristic, cfg.exec)
        .map_err(|e| e.in_stage(Stage::Graph))?;
    Ok(Prepared { config: cfg, dataset, graph })
}

/// Everything one algorithm produced.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub algorithm: Algorithm,
    pub labels: Vec<usize>,
    pub embedding: Option<EmbeddingMatrix>,
    pub sweep: Option<ChSweep>,
    pub report: EvaluationReport,
    pub predictions: Vec<crate::eval::PredictionRow>,
}

/// Embed + auto-k K-Means; returns the embedding and the CH sweep.
pub fn node2vec_kmeans(
    g: &TrajectoryGraph,
    walk: &WalkConfig,
    sgns: &SgnsConfig,
    kmeans: &KMeansConfig,
    k_range: (usize, usize),
    kmeans_seed: u64,
    exec: Exec,
) -> Result<(EmbeddingMatrix, ChSweep)> {
    let walks = generate_walks(g, walk).map_err(|e| e.in_stage(Stage::Embed))?;
    let x = train_sgns(&walks, g.node_count(), sgns).map_err(|e| e.in_stage(Stage::Embed))?;
    let k_max = k_range.1.min(x.rows().saturating_sub(1));
    let sweep = auto_k(&x, k_range.0, k_max, kmeans_seed, kmeans, exec).map_err(|e| e.in_stage(Stage::Cluster))?;
    Ok((x, sweep))
}

pub fn run_community(g: &TrajectoryGraph, algorithm: Algorithm, seeds: &BTreeMap<&str, u64>) -> Result<Partition> {
    Ok(match algorithm {
        Algorithm::Louvain => louvain(g, seeds["louvain"]),
        Algorithm::Leiden => leiden(g, seeds["leiden"]),
        Algorithm::FastGreedy => fast_greedy(g),
        Algorithm::Lpa => label_propagation(g, seeds["lpa"]),
        Algorithm::Node2vec => {
            return Err(Error::Config("node2vec is not a community baseline".into()).in_stage(Stage::Community))
        }
    })
}

/// Run one algorithm on a prepared graph. Artifacts are written to `dir`
/// as soon as they exist, when a directory is given.
pub fn run_algorithm(prep: &Prepared, algorithm: Algorithm, dir: Option<&Path>) -> Result<RunResult> {
    let cfg = &prep.config;
    let seeds = cfg.seeds();
    let out = |name: &str| dir.map(|d| d.join(name));
    let output = |e: Error| e.in_stage(Stage::Output);
    if let Some(d) = dir {
        fs::create_dir_all(d).map_err(|e| output(Error::io(d, e)))?;
        write_edge_list(&prep.graph, &d.join("graph.edgelist")).map_err(output)?;
    }

    let (labels, embedding, sweep) = match algorithm {
        Algorithm::Node2vec => {
            let (x, sweep) = node2vec_kmeans(
                &prep.graph,
                &cfg.walk,
                &cfg.sgns,
                &cfg.kmeans,
                (cfg.k_min, cfg.k_max),
                seeds["kmeans"],
                cfg.exec,
            )?;
            if let Some(p) = out("embeddings.txt") {
                x.write(&p).map_err(output)?;
            }
            if let Some(p) = out("sweep.csv") {
                sweep.write_csv(&p).map_err(output)?;
            }
            (sweep.best().labels.clone(), Some(x), Some(sweep))
        }
        _ => (run_community(&prep.graph, algorithm, &seeds)?.labels().to_vec(), None, None),
    };
    let partition = Partition::from_labels(&labels);
    if let Some(p) = out("partition.csv") {
        partition.write_csv(&p).map_err(output)?;
    }

    let truth = prep.dataset.truth().map_err(|e| e.in_stage(Stage::Eval))?;
    let (mut report, predictions) =
        evaluate(algorithm.name(), partition.labels(), truth, &prep.dataset.trajectories, &cfg.eval)
            .map_err(|e| e.in_stage(Stage::Eval))?;
    report.k_opt = sweep.as_ref().map(|s| s.k_opt);
    if let Some(d) = dir {
        report.write(&d.join("report.json")).map_err(output)?;
        let csv = report.confusion.to_csv().map_err(output)?;
        fs::write(d.join("confusion.csv"), csv).map_err(|e| output(Error::io(d.join("confusion.csv"), e)))?;
        write_predictions_csv(&d.join("predictions.csv"), &predictions).map_err(output)?;
    }
    Ok(RunResult { algorithm, labels: partition.labels().to_vec(), embedding, sweep, report, predictions })
}

/// Reproducibility record written next to every run's artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub algorithm: Algorithm,
    pub config_hash: String,
    pub seeds: BTreeMap<String, u64>,
    pub config: RunConfig,
    pub dataset: DatasetSummary,
    pub graph: GraphStats,
    pub files: Vec<String>,
}

/// Output of [`run_pipeline`] for one algorithm.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub result: RunResult,
}

pub fn run_pipeline(cfg: &RunConfig) -> Result<Vec<RunOutcome>> {
    let prep = prepare(cfg)?;
    let mut outcomes = Vec::new();
    for &algorithm in &prep.config.algorithms {
        let dir = prep.config.run_dir(algorithm);
        let result = run_algorithm(&prep, algorithm, Some(&dir))?;
        let mut files: Vec<String> = fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e).in_stage(Stage::Output))?
            .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
            .filter(|n| n != "manifest.json")
            .collect();
        files.sort();
        let manifest = Manifest {
            algorithm,
            config_hash: prep.config.hash12(algorithm),
            seeds: prep.config.seeds().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            config: RunConfig { algorithms: vec![algorithm], ..prep.config.clone() },
            dataset: dataset_summary(&prep.dataset),
            graph: graph_stats(&prep.graph),
            files,
        };
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::from(e).in_stage(Stage::Output))?;
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e).in_stage(Stage::Output))?;
        outcomes.push(RunOutcome { dir, result });
    }
    Ok(outcomes)
}

/// One line of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub run: String,
    pub method: String,
    pub clusters: usize,
    pub accuracy: f64,
    pub f1_weighted: f64,
    pub ari: f64,
    pub nmi: f64,
    pub purity: f64,
    pub ci_accuracy_lo: f64,
    pub ci_accuracy_hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    /// `mcnemar[i][j]`: p-value of runs `i` and `j` on per-node correctness.
    pub mcnemar: Vec<Vec<f64>>,
}

impl Comparison {
    pub fn rows_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Validation(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("utf-8"))
    }

    pub fn parse_rows_csv(text: &str) -> Result<Vec<ComparisonRow>> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        Ok(r.deserialize().collect::<Result<Vec<_>, _>>()?)
    }

    pub fn mcnemar_csv(&self) -> String {
        let mut s = String::from("run");
        for r in &self.rows {
            s.push(',');
            s.push_str(&r.run);
        }
        s.push('\n');
        for (r, ps) in self.rows.iter().zip(&self.mcnemar) {
            s.push_str(&r.run);
            for p in ps {
                s.push_str(&format!(",{p}"));
            }
            s.push('\n');
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let rows = dir.join("comparison.csv");
        fs::write(&rows, self.rows_csv()?).map_err(|e| Error::io(&rows, e))?;
        let m = dir.join("mcnemar.csv");
        fs::write(&m, self.mcnemar_csv()).map_err(|e| Error::io(&m, e))
    }
}

/// Compare finished runs on the same dataset.
pub fn compare(run_dirs: &[PathBuf]) -> Result<Comparison> {
    if run_dirs.len() < 2 {
        return Err(Error::Config("compare needs at least two run directories".into()));
    }
    let mut rows = Vec::new();
    let mut flags: Vec<Vec<bool>> = Vec::new();
    let mut truth_ref = None;
    for dir in run_dirs {
        let report = EvaluationReport::read(&dir.join("report.json"))?;
        let preds = read_predictions_csv(&dir.join("predictions.csv"))?;
        let truth: Vec<_> = preds.iter().map(|p| p.truth.clone()).collect();
        match &truth_ref {
            None => truth_ref = Some(truth),
            Some(t) if *t == truth => {}
            Some(t) => {
                return Err(Error::Integrity(format!(
                    "{} has a different node set or ground truth ({} vs {} nodes)",
                    dir.display(),
                    truth.len(),
                    t.len()
                )))
            }
        }
        flags.push(preds.iter().map(|p| p.correct).collect());
        let run = dir.file_name().map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned());
        rows.push(ComparisonRow {
            run,
            method: report.method,
            clusters: report.clusters,
            accuracy: report.accuracy,
            f1_weighted: report.f1_weighted,
            ari: report.ari,
            nmi: report.nmi,
            purity: report.purity,
            ci_accuracy_lo: report.ci_accuracy.0,
            ci_accuracy_hi: report.ci_accuracy.1,
        });
    }
    let mut m = vec![vec![1.0; flags.len()]; flags.len()];
    for i in 0..flags.len() {
        for j in i + 1..flags.len() {
            let p = mcnemar(&flags[i], &flags[j])?;
            m[i][j] = p;
            m[j][i] = p;
        }
    }
    Ok(Comparison { rows, mcnemar: m })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> RunConfig {
        RunConfig {
            dataset: DatasetSpec {
                synth: SyntheticBuildingConfig { floors: 3, trajectories: 6, steps_per_trajectory: 15, ..Default::default() },
                ..Default::default()
            },
            walk: WalkConfig { walks_per_node: 4, walk_length: 20, ..Default::default() },
            sgns: SgnsConfig { dim: 8, window: 4, epochs: 1, ..Default::default() },
            k_min: 2,
            k_max: 5,
            eval: EvalConfig {
                bootstrap: crate::eval::BootstrapConfig { resamples: 50, ..Default::default() },
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn scenario_consistency() {
        let mut c = RunConfig { scenario: Scenario::HwWbde, ..Default::default() };
        c.dataset.kind = DatasetKind::Huawei;
        c.dataset.path = Some("x".into());
        c.distance_source = DistanceSourceKind::Provided;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.distance_source = DistanceSourceKind::Signal;
        c.validate().unwrap();
        c.dataset.kind = DatasetKind::Uji;
        assert!(c.validate().is_err());
    }

    #[test]
    fn scenario_names_round_trip() {
        for s in Scenario::ALL {
            assert_eq!(s.name().parse::<Scenario>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.name()));
        }
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
    }

    #[test]
    fn hash_ignores_location_and_exec() {
        let a = tiny();
        let b = RunConfig { out_dir: "elsewhere".into(), exec: Exec::Sequential, ..tiny() };
        assert_eq!(a.hash12(Algorithm::Node2vec), b.hash12(Algorithm::Node2vec));
        assert_ne!(a.hash12(Algorithm::Node2vec), a.hash12(Algorithm::Louvain));
        assert_ne!(a.hash12(Algorithm::Node2vec), RunConfig { seed: 1, ..tiny() }.hash12(Algorithm::Node2vec));
        assert_eq!(a.hash12(Algorithm::Lpa).len(), 12);
    }

    #[test]
    fn config_files_parse() {
        let dir = tempfile::tempdir().unwrap();
        let toml_path = dir.path().join("c.toml");
        fs::write(&toml_path, "scenario = \"SYNTH\"\nseed = 5\nalgorithms = [\"node2vec\", \"leiden\"]\n[dataset.synth]\nfloors = 4\n")
            .unwrap();
        let c = RunConfig::load(&toml_path).unwrap();
        assert_eq!((c.seed, c.dataset.synth.floors, c.algorithms.len()), (5, 4, 2));
        let json_path = dir.path().join("c.json");
        fs::write(&json_path, serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(RunConfig::load(&json_path).unwrap(), c);
    }

    #[test]
    fn pipeline_writes_artifacts_and_compares() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig { out_dir: dir.path().into(), algorithms: vec![Algorithm::Node2vec, Algorithm::Louvain], ..tiny() };
        let outs = run_pipeline(&cfg).unwrap();
        assert_eq!(outs.len(), 2);
        let n2v = &outs[0].dir;
        for f in ["graph.edgelist", "embeddings.txt", "sweep.csv", "partition.csv", "report.json", "confusion.csv", "predictions.csv", "manifest.json"] {
            assert!(n2v.join(f).is_file(), "{f}");
        }
        let report = fs::read_to_string(n2v.join("report.json")).unwrap();
        assert!(report.contains("\"k_opt\": "));

        let cmp = compare(&[outs[0].dir.clone(), outs[1].dir.clone()]).unwrap();
        assert_eq!(cmp.rows.len(), 2);
        assert_eq!(Comparison::parse_rows_csv(&cmp.rows_csv().unwrap()).unwrap(), cmp.rows);
        let same = compare(&[outs[0].dir.clone(), outs[0].dir.clone()]).unwrap();
        assert_eq!(same.mcnemar[0][1], 1.0);
    }

    #[test]
    fn stage_errors_carry_the_stage() {
        let cfg = RunConfig { scenario: Scenario::HwDef, ..tiny() };
        assert_eq!(prepare(&cfg).unwrap_err().stage(), Some(Stage::Config));
        let mut cfg = RunConfig { scenario: Scenario::HwWbde, ..tiny() };
        cfg.dataset.kind = DatasetKind::Huawei;
        cfg.dataset.path = Some("/nonexistent/dir".into());
        assert_eq!(prepare(&cfg).unwrap_err().stage(), Some(Stage::Ingest));
    }
}
