use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use floorsep::cluster::{auto_k, KMeansConfig};
use floorsep::community::Partition;
use floorsep::distance::{write_distances_csv, DistanceSourceKind, PairingPolicy, PathLossHeuristic};
use floorsep::embed::{generate_walks, train_sgns, write_walks, EmbeddingMatrix, SgnsConfig, TrainMode, WalkConfig};
use floorsep::eval::{evaluate, write_predictions_csv, BootstrapConfig, EvalConfig, ResampleUnit};
use floorsep::graph::{graph_stats, read_edge_list, write_edge_list, BuildConfig, ElevationPolicy};
use floorsep::ingest::{dataset_summary, DEFAULT_DELTA_T};
use floorsep::pipeline::{
    build_connected_graph, compare, compute_distances, load_dataset, run_community, run_pipeline, Algorithm,
    DatasetKind, DatasetSpec, RunConfig, Scenario,
};
use floorsep::synth::{generate, write_huawei_format, write_uji_format, SyntheticBuildingConfig};
use floorsep::{Error, Exec, Result, Stage};

#[derive(Parser)]
#[command(name = "floorsep", version, about = "Unsupervised floor separation of Wi-Fi fingerprint trajectories")]
struct Cli {
    /// Top-level seed; every random stage derives its own stream from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON or TOML config file (pipeline: RunConfig, synth: building config).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a dataset and print its summary.
    Ingest(DatasetArgs),
    /// Generate a synthetic building dataset.
    Synth(SynthArgs),
    /// Build the trajectory graph.
    Graph(GraphArgs),
    /// Node2Vec embedding of an edge list.
    Embed(EmbedArgs),
    /// K-Means over an embedding with CH-selected k.
    Cluster(ClusterArgs),
    /// Community-detection baseline on an edge list.
    Baseline(BaselineArgs),
    /// Score a partition against ground truth.
    Eval(EvalArgs),
    /// Compare finished pipeline runs.
    Compare(CompareArgs),
    /// Run the full pipeline.
    Pipeline(PipelineArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Huawei,
    Uji,
    Synth,
}

#[derive(Args, Clone)]
struct DatasetArgs {
    #[arg(long, value_enum, default_value = "huawei")]
    format: Format,
    /// Huawei directory or UJI CSV file.
    #[arg(long)]
    input: Option<PathBuf>,
    /// UJI trajectory gap threshold in seconds.
    #[arg(long, default_value_t = DEFAULT_DELTA_T)]
    delta_t: f64,
}

impl DatasetArgs {
    fn spec(&self, seed: u64) -> DatasetSpec {
        let kind = match self.format {
            Format::Huawei => DatasetKind::Huawei,
            Format::Uji => DatasetKind::Uji,
            Format::Synth => DatasetKind::Synth,
        };
        let synth = SyntheticBuildingConfig { seed, ..Default::default() };
        DatasetSpec { kind, path: self.input.clone(), delta_t: self.delta_t, synth }
    }
}

#[derive(Args, Clone)]
struct DistanceArgs {
    #[arg(long, default_value = "signal")]
    distance_source: DistanceSourceKind,
    #[arg(long, default_value_t = -40.0, allow_hyphen_values = true)]
    p0: f64,
    #[arg(long, default_value_t = 3.0)]
    gamma: f64,
    #[arg(long, default_value_t = 50.0)]
    dmax: f64,
    #[arg(long, default_value_t = 10)]
    knn_m: usize,
}

impl DistanceArgs {
    fn heuristic(&self) -> PathLossHeuristic {
        PathLossHeuristic { p0: self.p0, gamma: self.gamma, d_max: self.dmax }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    floors: Option<usize>,
    #[arg(long)]
    trajectories: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    /// Emit the Huawei layout, a UJI CSV, or both.
    #[arg(long, value_enum, default_value = "huawei")]
    emit: Emit,
}

#[derive(Clone, Copy, ValueEnum)]
enum Emit {
    Huawei,
    Uji,
    Both,
}

#[derive(Args)]
struct GraphArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    #[command(flatten)]
    distance: DistanceArgs,
    /// Kernel bandwidth in meters (median distance when omitted).
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, value_enum, default_value = "exclude-split")]
    elevation_policy: ElevationArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum ElevationArg {
    ExcludeSplit,
    Exclude,
    Include,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    #[arg(long, default_value_t = 10)]
    walks_per_node: usize,
    #[arg(long, default_value_t = 80)]
    walk_length: usize,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long, default_value_t = 10)]
    window: usize,
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    /// Lock-free multi-threaded SGD (not reproducible).
    #[arg(long)]
    hogwild: bool,
    /// Also write the walk corpus.
    #[arg(long)]
    save_walks: bool,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long, default_value_t = 3)]
    k_min: usize,
    #[arg(long, default_value_t = 20)]
    k_max: usize,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    graph: PathBuf,
    /// louvain, leiden, fast_greedy or lpa.
    #[arg(long)]
    algorithm: Algorithm,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    #[arg(long)]
    partition: PathBuf,
    #[arg(long, default_value_t = 1000)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, value_enum, default_value = "fingerprint")]
    resample_unit: UnitArg,
    #[arg(long)]
    trajectory_consistent: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum UnitArg {
    Fingerprint,
    Trajectory,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(required = true, num_args = 2..)]
    runs: Vec<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    /// HW-Def, HW-WBDE, UJI-Geo-T, UJI-Geo-V, UJI-WBDE-T, UJI-WBDE-V or SYNTH.
    #[arg(long)]
    scenario: Option<Scenario>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    distance_source: Option<DistanceSourceKind>,
    /// Comma-separated algorithm list.
    #[arg(long, value_delimiter = ',')]
    algorithms: Vec<Algorithm>,
    #[arg(long)]
    floors: Option<usize>,
}

fn stage<T>(stage: Stage, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(stage))
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    stage(Stage::Output, std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e }))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    stage(Stage::Output, std::fs::write(path, text).map_err(|e| Error::Io { path: path.into(), source: e }))
}

fn load_config<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
    if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    } else {
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

fn run(cli: &Cli) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };
    let out = out_dir(cli);
    match &cli.command {
        Command::Ingest(args) => {
            let ds = stage(Stage::Ingest, load_dataset(&args.spec(seed)))?;
            let summary = dataset_summary(&ds);
            println!("{}", serde_json::to_string_pretty(&summary)?);
            if cli.out.is_some() {
                ensure_dir(&out)?;
                write_json(&out.join("summary.json"), &summary)?;
            }
        }
        Command::Synth(args) => {
            let mut cfg: SyntheticBuildingConfig = stage(Stage::Config, load_config(cli.config.as_deref()))?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            cfg.floors = args.floors.unwrap_or(cfg.floors);
            cfg.trajectories = args.trajectories.unwrap_or(cfg.trajectories);
            cfg.steps_per_trajectory = args.steps.unwrap_or(cfg.steps_per_trajectory);
            let ds = stage(Stage::Ingest, generate(&cfg))?;
            ensure_dir(&out)?;
            if matches!(args.emit, Emit::Huawei | Emit::Both) {
                stage(Stage::Output, write_huawei_format(&ds, &out))?;
            }
            if matches!(args.emit, Emit::Uji | Emit::Both) {
                stage(Stage::Output, write_uji_format(&ds, &out.join("uji.csv")))?;
            }
            println!("{}", serde_json::to_string_pretty(&dataset_summary(&ds))?);
        }
        Command::Graph(args) => {
            let ds = stage(Stage::Ingest, load_dataset(&args.dataset.spec(seed)))?;
            let heuristic = args.distance.heuristic();
            let pairing = PairingPolicy { knn_m: args.distance.knn_m };
            let dists =
                stage(Stage::Distance, compute_distances(&ds, args.distance.distance_source, &heuristic, pairing, exec))?;
            let elevation_policy = match args.elevation_policy {
                ElevationArg::ExcludeSplit => ElevationPolicy::ExcludeSplit,
                ElevationArg::Exclude => ElevationPolicy::Exclude,
                ElevationArg::Include => ElevationPolicy::Include,
            };
            let cfg = BuildConfig { sigma: args.sigma, elevation_policy, d_max: args.distance.dmax, ..Default::default() };
            let g = stage(Stage::Graph, build_connected_graph(&ds, &dists, &cfg, &heuristic, exec))?;
            ensure_dir(&out)?;
            stage(Stage::Output, write_distances_csv(&out.join("distances.csv"), &dists))?;
            stage(Stage::Output, write_edge_list(&g, &out.join("graph.edgelist")))?;
            let stats = graph_stats(&g);
            write_json(&out.join("graph_stats.json"), &stats)?;
            println!("{}", serde_json::to_string_pretty(&stats)?);
        }
        Command::Embed(args) => {
            let g = stage(Stage::Ingest, read_edge_list(&args.graph))?;
            let walk = WalkConfig {
                p: args.p,
                q: args.q,
                walks_per_node: args.walks_per_node,
                walk_length: args.walk_length,
                seed: floorsep::exec::named_seed(seed, "walks"),
                exec,
            };
            let sgns = SgnsConfig {
                dim: args.dim,
                window: args.window,
                negatives: args.negatives,
                epochs: args.epochs,
                seed: floorsep::exec::named_seed(seed, "sgns"),
                mode: if args.hogwild { TrainMode::Hogwild } else { TrainMode::Deterministic },
                ..Default::default()
            };
            let walks = stage(Stage::Embed, generate_walks(&g, &walk))?;
            ensure_dir(&out)?;
            if args.save_walks {
                stage(Stage::Output, write_walks(&walks, &out.join("walks.txt")))?;
            }
            let x = stage(Stage::Embed, train_sgns(&walks, g.node_count(), &sgns))?;
            stage(Stage::Output, x.write(&out.join("embeddings.txt")))?;
        }
        Command::Cluster(args) => {
            let x = stage(Stage::Ingest, EmbeddingMatrix::read(&args.embeddings))?;
            let kseed = floorsep::exec::named_seed(seed, "kmeans");
            let sweep = stage(Stage::Cluster, auto_k(&x, args.k_min, args.k_max, kseed, &KMeansConfig::default(), exec))?;
            ensure_dir(&out)?;
            stage(Stage::Output, sweep.write_csv(&out.join("sweep.csv")))?;
            stage(Stage::Output, Partition::from_labels(&sweep.best().labels).write_csv(&out.join("partition.csv")))?;
            println!("k_opt = {}", sweep.k_opt);
        }
        Command::Baseline(args) => {
            let g = stage(Stage::Ingest, read_edge_list(&args.graph))?;
            let seeds = RunConfig { seed, ..Default::default() }.seeds();
            let p = stage(Stage::Community, run_community(&g, args.algorithm, &seeds))?;
            ensure_dir(&out)?;
            stage(Stage::Output, p.write_csv(&out.join("partition.csv")))?;
            println!("{} communities", p.count());
        }
        Command::Eval(args) => {
            let ds = stage(Stage::Ingest, load_dataset(&args.dataset.spec(seed)))?;
            let partition = stage(Stage::Ingest, Partition::read_csv(&args.partition))?;
            let truth = stage(Stage::Eval, ds.truth())?;
            let cfg = EvalConfig {
                bootstrap: BootstrapConfig {
                    resamples: args.bootstrap,
                    level: args.level,
                    seed: floorsep::exec::named_seed(seed, "bootstrap"),
                    exec,
                },
                resample_unit: match args.resample_unit {
                    UnitArg::Fingerprint => ResampleUnit::Fingerprint,
                    UnitArg::Trajectory => ResampleUnit::Trajectory,
                },
                trajectory_consistent: args.trajectory_consistent,
            };
            let method = args.partition.display().to_string();
            let (report, rows) = stage(Stage::Eval, evaluate(&method, partition.labels(), truth, &ds.trajectories, &cfg))?;
            ensure_dir(&out)?;
            stage(Stage::Output, report.write(&out.join("report.json")))?;
            let csv = stage(Stage::Output, report.confusion.to_csv())?;
            stage(Stage::Output, std::fs::write(out.join("confusion.csv"), csv).map_err(|e| Error::Io { path: out.join("confusion.csv"), source: e }))?;
            stage(Stage::Output, write_predictions_csv(&out.join("predictions.csv"), &rows))?;
            print!("{}", report.to_json()?);
        }
        Command::Compare(args) => {
            let cmp = stage(Stage::Eval, compare(&args.runs))?;
            stage(Stage::Output, cmp.write(&out))?;
            print!("{}", cmp.rows_csv()?);
        }
        Command::Pipeline(args) => {
            let mut cfg: RunConfig = match &cli.config {
                Some(p) => stage(Stage::Config, RunConfig::load(p))?,
                None => RunConfig::default(),
            };
            if let Some(s) = args.scenario {
                cfg.scenario = s;
                cfg.dataset.kind = s.dataset_kind();
                cfg.distance_source = s.allowed_sources()[0];
            }
            if let Some(d) = args.distance_source {
                cfg.distance_source = d;
            }
            if let Some(p) = &args.input {
                cfg.dataset.path = Some(p.clone());
            }
            if let Some(f) = args.floors {
                cfg.dataset.synth.floors = f;
            }
            if !args.algorithms.is_empty() {
                cfg.algorithms = args.algorithms.clone();
            }
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Some(o) = &cli.out {
                cfg.out_dir = o.clone();
            }
            if cli.sequential {
                cfg.exec = Exec::Sequential;
            }
            for o in run_pipeline(&cfg)? {
                let r = &o.result.report;
                println!(
                    "{}\taccuracy={:.4}\tari={:.4}\tclusters={}\t{}",
                    o.result.algorithm,
                    r.accuracy,
                    r.ari,
                    r.clusters,
                    o.dir.display()
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e.stage() {
                Some(s) => s.exit_code(),
                None => match e {
                    Error::Config(_) => Stage::Config.exit_code(),
                    _ => 1,
                },
            };
            ExitCode::from(code as u8)
        }
    }
}
