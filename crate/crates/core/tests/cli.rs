use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn floorsep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_floorsep")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = floorsep(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn stage_by_stage_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&["synth", "--floors", "3", "--trajectories", "6", "--steps", "15", "--emit", "both", "--seed", "4", "--out", s(&data)]);
    assert!(data.join("fingerprints.json").exists() && data.join("uji.csv").exists());

    let summary = ok(&["ingest", "--input", s(&data)]);
    assert!(summary.contains("\"fingerprints\": 90"), "{summary}");
    let uji = ok(&["ingest", "--format", "uji", "--input", s(&data.join("uji.csv"))]);
    assert!(uji.contains("\"fingerprints\": 90"), "{uji}");

    let g = tmp.path().join("graph");
    ok(&["graph", "--input", s(&data), "--out", s(&g)]);
    let edges = g.join("graph.edgelist");
    assert!(edges.exists() && g.join("distances.csv").exists());

    let e = tmp.path().join("embed");
    ok(&["embed", "--graph", s(&edges), "--walks-per-node", "3", "--walk-length", "20", "--epochs", "1", "--dim", "8", "--out", s(&e)]);
    let c = tmp.path().join("cluster");
    let k = ok(&["cluster", "--embeddings", s(&e.join("embeddings.txt")), "--k-max", "6", "--out", s(&c)]);
    assert!(k.starts_with("k_opt = "));
    assert_eq!(fs::read_to_string(c.join("sweep.csv")).unwrap().lines().count(), 5);

    let b = tmp.path().join("baseline");
    ok(&["baseline", "--graph", s(&edges), "--algorithm", "leiden", "--out", s(&b)]);

    let r = tmp.path().join("eval");
    let report = ok(&["eval", "--input", s(&data), "--partition", s(&b.join("partition.csv")), "--bootstrap", "50", "--out", s(&r)]);
    assert!(report.contains("\"schema_version\": 1"));
    for f in ["report.json", "confusion.csv", "predictions.csv"] {
        assert!(r.join(f).exists(), "{f}");
    }
}

#[test]
fn pipeline_and_compare() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.toml");
    fs::write(
        &config,
        "scenario = \"SYNTH\"\n[dataset.synth]\ntrajectories = 6\nsteps_per_trajectory = 15\n\
         [walk]\nwalks_per_node = 2\nwalk_length = 15\n[sgns]\nepochs = 1\n[eval.bootstrap]\nresamples = 50\n",
    )
    .unwrap();
    let runs = tmp.path().join("runs");
    let out = ok(&["--config", s(&config), "--out", s(&runs), "pipeline", "--floors", "3", "--algorithms", "node2vec,louvain,lpa"]);
    assert_eq!(out.lines().count(), 3, "{out}");
    let dirs: Vec<String> = out.lines().map(|l| l.rsplit('\t').next().unwrap().to_string()).collect();
    for d in &dirs {
        assert!(Path::new(d).join("manifest.json").exists());
    }
    let cmp = tmp.path().join("cmp");
    let mut args = vec!["compare", "--out", s(&cmp)];
    args.extend(dirs.iter().map(String::as_str));
    let rows = ok(&args);
    assert_eq!(rows.lines().count(), 4);
    assert!(cmp.join("comparison.csv").exists() && cmp.join("mcnemar.csv").exists());
}

#[test]
fn exit_codes_follow_failing_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| floorsep(args).status.code().unwrap();

    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "scenario = \"NOPE\"\n").unwrap();
    assert_eq!(code(&["--config", s(&bad), "pipeline"]), 2);
    assert_eq!(code(&["pipeline", "--scenario", "HW-Def"]), 2, "missing dataset path");

    assert_eq!(code(&["ingest", "--input", s(&tmp.path().join("missing"))]), 3);

    let emb = tmp.path().join("e.txt");
    fs::write(&emb, "4 2\n0 0\n0 1\n5 5\n5 6\n").unwrap();
    assert_eq!(code(&["cluster", "--embeddings", s(&emb), "--k-min", "3", "--k-max", "10"]), 7);
}
