use std::path::Path;
use std::process::{Command, Output};

use splatprune::camera::load_views;
use splatprune::model::load_ply;
use splatprune::quant::read_scores;

fn splatprune(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_splatprune")).args(args).output().expect("spawn")
}

fn ok(args: &[&str]) -> String {
    let out = splatprune(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, count: &str) {
    ok(&[
        "synth", "--seed", "2", "--count", count, "--out-scene", s(&dir.join("scene.ply")),
        "--out-views", s(&dir.join("views.json")),
    ]);
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn synth_writes_scene_views_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "30");
    assert_eq!(load_ply(d.join("scene.ply")).unwrap().len(), 30);
    assert_eq!(load_views(d.join("views.json")).unwrap().len(), 3);
    let m = json(&d.join("scene.manifest.json"));
    assert_eq!(m["command"], "synth");
    assert_eq!(m["parameters"]["count"], 30);
    assert!(m["wall_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn pipeline_quantify_prune_eval_audit() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "40");
    let scene = s(&d.join("scene.ply")).to_string();
    let views = s(&d.join("views.json")).to_string();

    ok(&["quantify", "--scene", &scene, "--views", &views, "--out", s(&d.join("scores.csv")),
        "--histogram", s(&d.join("hist.csv")), "--threads", "1"]);
    let scores = read_scores(d.join("scores.csv")).unwrap();
    assert_eq!(scores.len(), 40);
    assert!(scores.total() > 0.0);
    assert!(std::fs::read_to_string(d.join("hist.csv")).unwrap().starts_with("log10_edge,count\n"));
    assert_eq!(json(&d.join("scores.manifest.json"))["command"], "quantify");

    ok(&["prune", "--scene", &scene, "--views", &views, "--out", s(&d.join("half.ply")), "--ratio", "0.5",
        "--report", s(&d.join("half.json"))]);
    assert_eq!(load_ply(d.join("half.ply")).unwrap().len(), 20);
    let report = json(&d.join("half.json"));
    assert_eq!(report["final_count"], 20);

    let budget = format!("{}", 0.05 * scores.total());
    ok(&["prune", "--scene", &scene, "--views", &views, "--out", s(&d.join("iter.ply")), "--budget", &budget,
        "--cycles", "4", "--report", s(&d.join("iter.json"))]);
    let report = json(&d.join("iter.json"));
    assert_eq!(report["cycles"].as_array().unwrap().len(), 4);
    let kept = load_ply(d.join("iter.ply")).unwrap().len();
    assert_eq!(report["final_count"], kept);
    assert!(kept < 40);

    let table = ok(&["eval", "--scene-a", &scene, "--scene-b", s(&d.join("half.ply")), "--views", &views,
        "--out", s(&d.join("metrics.json"))]);
    assert!(table.contains("view_000"));
    let m = json(&d.join("metrics.json"));
    assert_eq!(m["view_count"], 3);
    assert!(m["mean_psnr"].as_f64().unwrap() > 10.0);

    let m = {
        ok(&["eval", "--scene-a", &scene, "--scene-b", &scene, "--views", &views, "--out", s(&d.join("same.json"))]);
        json(&d.join("same.json"))
    };
    assert_eq!(m["mean_psnr"], "inf");

    ok(&["audit", "--scene", &scene, "--views", &views, "--out", s(&d.join("oracle.csv")), "--precision", "f64"]);
    let summary = json(&d.join("oracle.json"));
    assert!(summary["max_rel_discrepancy"].as_f64().unwrap() <= 1e-6);
    let rows = std::fs::read_to_string(d.join("oracle.csv")).unwrap();
    assert!(rows.starts_with("gaussian_id,brute_se,analytic_se,rel_discrepancy,affected\n"));
    assert_eq!(rows.lines().count(), 41);

    ok(&["render", "--scene", &scene, "--views", &views, "--out-dir", s(&d.join("png"))]);
    ok(&["render", "--scene", &scene, "--views", &views, "--out-dir", s(&d.join("raw")), "--format", "raw"]);
    assert!(d.join("png/view_002.png").exists());
    assert_eq!(std::fs::metadata(d.join("raw/view_000.raw")).unwrap().len(), 64 * 64 * 3 * 4);
    assert_eq!(json(&d.join("raw/manifest.json"))["command"], "render");
}

#[test]
fn missing_scene_exits_2_and_names_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.ply");
    let out = splatprune(&["quantify", "--scene", s(&missing), "--views", "v.json", "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(s(&missing)));
}

#[test]
fn malformed_scene_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.ply");
    std::fs::write(&bad, b"ply\nformat ascii 1.0\nend_header\n").unwrap();
    let out = splatprune(&["quantify", "--scene", s(&bad), "--views", "v.json", "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.ply"));
}

#[test]
fn ratio_with_budget_is_usage_error() {
    let out = splatprune(&["prune", "--scene", "a", "--views", "b", "--out", "c", "--ratio", "0.5", "--budget", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_ratio_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "10");
    let out = splatprune(&["prune", "--scene", s(&d.join("scene.ply")), "--views", s(&d.join("views.json")),
        "--out", s(&d.join("p.ply")), "--ratio", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn audit_refuses_large_scenes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "30");
    let out = splatprune(&["audit", "--scene", s(&d.join("scene.ply")), "--views", s(&d.join("views.json")),
        "--out", s(&d.join("o.csv")), "--max-gaussians", "10"]);
    assert_eq!(out.status.code(), Some(2));
}
