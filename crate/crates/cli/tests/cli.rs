use std::path::Path;
use std::process::{Command, Output};

fn mixwass(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixwass")).args(args).arg("--out").arg(out).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn gen_tree_writes_space_and_edges() {
    let dir = tempfile::tempdir().unwrap();
    let o = mixwass(&["gen", "tree", "--depth", "2", "--format", "csv"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("space.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert_eq!(csv.lines().next().unwrap(), "0,1,1,2,2,2,2");
    let edges = std::fs::read_to_string(dir.path().join("graph.txt")).unwrap();
    assert_eq!(edges.lines().filter(|l| !l.starts_with('#')).count(), 6);
}

#[test]
fn embed_then_report_is_within_the_constructive_bound() {
    let dir = tempfile::tempdir().unwrap();
    let space = dir.path().join("g");
    assert_eq!(code(&mixwass(&["gen", "two-hop", "--kind", "star", "--size", "4"], &space)), 0);
    let input = space.join("space.json");
    let emb = dir.path().join("e");
    let o = mixwass(&["embed", "--input", input.to_str().unwrap()], &emb);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rep = dir.path().join("r");
    let embedding = emb.join("embedding.json");
    let o = mixwass(&["report", "--input", input.to_str().unwrap(), "--embedding", embedding.to_str().unwrap()], &rep);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(rep.join("report.json")).unwrap()).unwrap();
    let d = report[0]["distortion_d"].as_f64().unwrap();
    assert!((1.0..=5f64.sqrt() + 1e-9).contains(&d), "{d}");
    let curve: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(rep.join("pac_curve.json")).unwrap()).unwrap();
    assert_eq!(curve.as_array().unwrap().last().unwrap()["fraction"].as_f64(), Some(1.0));
}

#[test]
fn pac_with_fixed_delta() {
    let dir = tempfile::tempdir().unwrap();
    let o = mixwass(&["pac", "--n", "10", "--delta", "0.5", "--format", "csv"], dir.path());
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(dir.path().join("pac.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with("n,delta,min_valid_delta,distortion,theta"));
}

#[test]
fn density_exports_a_grid() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("m.json"),
        r#"{"points":[3],"mixtures":[{"components":[{"w":1.0,"mean":0.0,"std":1.0}]}]}"#,
    )
    .unwrap();
    let input = dir.path().join("m.json");
    let o = mixwass(&["density", "--input", input.to_str().unwrap(), "--points", "32"], &dir.path().join("d"));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("d/density.csv")).unwrap();
    assert_eq!(csv.lines().count(), 33);
}

#[test]
fn validation_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "0,1\n2,0\n").unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["embed", "--input", bad.to_str().unwrap()],
        vec!["embed", "--input", "/nonexistent/space.csv"],
        vec!["pac", "--n", "1"],
        vec!["pac", "--n", "10", "--delta", "0.001"],
        vec!["gen", "two-hop", "--kind", "bipartite", "--size", "3"],
        vec!["train", "tree", "--lr", "-1"],
        vec!["embed", "--input", bad.to_str().unwrap(), "--alpha", "1.5"],
        vec!["frobnicate"],
    ];
    for args in cases {
        let o = mixwass(&args, &dir.path().join("out"));
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn non_finite_input_is_a_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("m.json");
    std::fs::write(&input, r#"{"points":[0],"mixtures":[{"components":[{"w":1.0,"mean":1e308,"std":1e308}]}]}"#).unwrap();
    let o = mixwass(&["density", "--input", input.to_str().unwrap(), "--points", "8"], &dir.path().join("d"));
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn train_custom_writes_model_and_history() {
    let dir = tempfile::tempdir().unwrap();
    let space = dir.path().join("g");
    assert_eq!(code(&mixwass(&["gen", "tree", "--depth", "2"], &space)), 0);
    let input = space.join("space.json");
    let out = dir.path().join("t");
    let o = mixwass(&["train", "custom", "--input", input.to_str().unwrap(), "--iters", "5", "--format", "csv"], &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let loss = std::fs::read_to_string(out.join("GM/loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 6);
    assert!(out.join("GM/model.json").exists());
    assert!(out.join("summary.csv").exists());
}
