use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_phnmf"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn synth_continuous_shape_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ok(&["synth", "--kind", "continuous", "--seed", "1", "--out-dir", s(&a)]);
    ok(&["synth", "--kind", "continuous", "--seed", "1", "--out-dir", s(&b)]);
    let x = fs::read_to_string(a.join("X.csv")).unwrap();
    assert_eq!(x.lines().count(), 1600);
    assert!(x.lines().all(|l| l.split(',').count() == 120));
    for name in ["X.csv", "labels.csv", "y.csv", "W_true.csv", "thetas.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let m = manifest(&a);
    assert_eq!(m["command"], "synth");
    assert_eq!(m["seed"], 1);
    assert!(m["artifacts"].as_array().unwrap().len() >= 7);
    assert_eq!(m["artifacts"], manifest(&b)["artifacts"]);
}

#[test]
fn synth_categorical_is_binary() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["synth", "--kind", "categorical", "--seed", "2", "--rows-per-group", "20", "--out-dir", s(tmp.path())]);
    let x = fs::read_to_string(tmp.path().join("X.csv")).unwrap();
    assert!(x.lines().flat_map(|l| l.split(',')).all(|t| t == "0" || t == "1"));
}

#[test]
fn phnmf_writes_tree_and_heatmap() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = tmp.path().join("tree");
    ok(&["synth", "--seed", "3", "--rows-per-group", "10", "--out-dir", s(&data)]);
    ok(&[
        "phnmf", "--input", s(&data.join("X.csv")), "--rank", "2", "--seeds", "4",
        "--max-depth", "3", "--out-dir", s(&out),
    ]);
    let pgm = fs::read(out.join("heatmap.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5 120 80 255\n"));
    assert_eq!(pgm.len(), "P5 120 80 255\n".len() + 80 * 120);
    let tree: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("tree.json")).unwrap()).unwrap();
    assert_eq!(tree["node_id"], "root");
    assert_eq!(tree["n_members"], 80);
    let assignments = fs::read_to_string(out.join("assignments.csv")).unwrap();
    assert_eq!(assignments.lines().count(), 81);
    let sorted = fs::read_to_string(out.join("X_sorted.csv")).unwrap();
    assert_eq!(sorted.lines().count(), 80);
    for name in ["tree.dot", "row_order.txt", "manifest.json"] {
        assert!(out.join(name).exists(), "{name}");
    }
}

#[test]
fn noise_with_beta_near_one_is_a_single_node() {
    let tmp = tempfile::tempdir().unwrap();
    let mut state = 12345u64;
    let mut text = String::new();
    for _ in 0..40 {
        let row: Vec<String> = (0..15)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                format!("{}", (state >> 11) as f64 / (1u64 << 53) as f64)
            })
            .collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    let input = tmp.path().join("noise.csv");
    fs::write(&input, text).unwrap();
    let out = tmp.path().join("t");
    ok(&["phnmf", "--input", s(&input), "--rank", "2", "--beta", "0.999", "--out-dir", s(&out)]);
    let tree: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("tree.json")).unwrap()).unwrap();
    assert!(tree["children"].as_array().unwrap().is_empty());
    assert_eq!(tree["leaf_reason"], "similarity_at_or_below_beta");
}

#[test]
fn f32_precision_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&["synth", "--seed", "4", "--rows-per-group", "8", "--out-dir", s(&data)]);
    let out = ok(&[
        "phnmf", "--input", s(&data.join("X.csv")), "--rank", "2", "--seeds", "3",
        "--max-depth", "1", "--precision", "f32", "--out-dir", s(&tmp.path().join("t")),
    ]);
    assert!(out.contains("leaves"));
}

#[test]
fn hnmf_and_rank_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&["synth", "--seed", "5", "--rows-per-group", "8", "--out-dir", s(&data)]);
    let x = data.join("X.csv");
    ok(&["hnmf", "--input", s(&x), "--min-docs", "20", "--rank", "2", "--out-dir", s(&tmp.path().join("h"))]);
    let members = fs::read_to_string(tmp.path().join("h/leaf_members.csv")).unwrap();
    assert!(members.starts_with("leaf,row\n"));

    let r = tmp.path().join("r");
    ok(&["rank", "--input", s(&x), "--k-min", "2", "--k-max", "4", "--seeds", "3", "--out-dir", s(&r)]);
    let rank: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(r.join("rank.json")).unwrap()).unwrap();
    assert_eq!(rank["candidate_scores"].as_object().unwrap().len(), 3);
    let k = rank["chosen_k"].as_u64().unwrap();
    assert!((2..=4).contains(&k));
    let sim: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(r.join("similarity.json")).unwrap()).unwrap();
    assert_eq!(sim["rank"].as_u64().unwrap(), k);
}

#[test]
fn single_replicate_accuracy_has_zero_standard_error() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["accuracy", "--replicates", "1", "--seeds", "3", "--seed", "8", "--out-dir", s(tmp.path())]);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["accuracy_assigned"]["std_error"], 0.0);
    assert_eq!(summary["accuracy_assigned"]["n"], 1);
    let csv = fs::read_to_string(tmp.path().join("accuracy.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().nth(2).unwrap().starts_with("mean,"));
}

#[test]
fn regression_table_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ok(&["regression", "--seeds", "3", "--seed", "2", "--out-dir", s(&a)]);
    ok(&["regression", "--seeds", "3", "--seed", "2", "--out-dir", s(&b)]);
    let table = fs::read_to_string(a.join("coefficients.csv")).unwrap();
    assert!(table.starts_with("replicate,seed,group,"));
    assert_eq!(table.lines().count(), 9);
    assert_eq!(table, fs::read_to_string(b.join("coefficients.csv")).unwrap());
}

#[test]
fn ingest_toy_survey() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&[
        "ingest", "--csv", s(&fixture("toy_survey.csv")), "--schema", s(&fixture("toy_schema.json")),
        "--out-dir", s(tmp.path()),
    ]);
    let x = fs::read_to_string(tmp.path().join("X.csv")).unwrap();
    assert_eq!(x.lines().count(), 20);
    assert!(x.lines().all(|l| l.split(',').count() == 10));
    let names = fs::read_to_string(tmp.path().join("feature_names.txt")).unwrap();
    assert!(!names.contains("age_band"));
    assert_eq!(names.lines().filter(|n| n.starts_with("comment:topic")).count(), 2);
    assert_eq!(manifest(tmp.path())["command"], "ingest");
}

#[test]
fn replay_reproduces_and_detects_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    ok(&[
        "ingest", "--csv", s(&fixture("toy_survey.csv")), "--schema", s(&fixture("toy_schema.json")),
        "--seed", "4", "--out-dir", s(&out),
    ]);
    let stdout = ok(&["replay", "--manifest", s(&out.join("manifest.json"))]);
    assert!(stdout.contains("replay ok"));
    assert_eq!(
        fs::read(out.join("X.csv")).unwrap(),
        fs::read(out.join("replay/X.csv")).unwrap()
    );

    let mut m = manifest(&out);
    m["artifacts"][0]["sha256"] = serde_json::Value::from("0".repeat(64));
    let tampered = tmp.path().join("tampered.json");
    fs::write(&tampered, serde_json::to_string(&m).unwrap()).unwrap();
    let res = run(&["replay", "--manifest", s(&tampered), "--out-dir", s(&tmp.path().join("again"))]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("content differs"));
}

#[test]
fn exit_codes_distinguish_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = run(&["phnmf", "--input", s(&tmp.path().join("none.csv")), "--out-dir", s(tmp.path())]);
    assert_eq!(missing.status.code(), Some(3));

    let neg = tmp.path().join("neg.csv");
    fs::write(&neg, "1,-2\n3,4\n").unwrap();
    let bad = run(&["phnmf", "--input", s(&neg), "--rank", "1", "--out-dir", s(tmp.path())]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("negative"));

    let not_manifest = tmp.path().join("m.json");
    fs::write(&not_manifest, "{}").unwrap();
    assert_eq!(run(&["replay", "--manifest", s(&not_manifest)]).status.code(), Some(2));

    let threads = bin()
        .env("PHNMF_THREADS", "zero")
        .args(["synth", "--out-dir", s(tmp.path())])
        .output()
        .unwrap();
    assert_eq!(threads.status.code(), Some(2));

    assert_eq!(run(&["phnmf", "--rank", "2", "--auto-rank"]).status.code(), Some(2));
}
