use std::path::Path;
use std::process::{Command, Output};

use roomlayout::{Catalog, FeatureField, LayoutFile};

const T6_GT: &str = r#"{"topology_id": 6, "points": [[0, 55], [159, 62]]}"#;
const T6_LEVEL_GT: &str = r#"{"topology_id": 6, "points": [[0, 53], [159, 53]]}"#;

fn roomlayout(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roomlayout"))
        .args(args)
        .current_dir(dir)
        .env_remove("LAYOUT_CATALOG")
        .output()
        .unwrap()
}

fn ok(args: &[&str], dir: &Path) -> Output {
    let out = roomlayout(args, dir);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn synth_t6(dir: &Path, noise: &str) {
    synth_layout(dir, T6_GT, noise);
}

fn synth_layout(dir: &Path, layout: &str, noise: &str) {
    std::fs::write(dir.join("t6.json"), layout).unwrap();
    ok(
        &["synth", "--layout", "t6.json", "--w", "160", "--h", "120", "--sigma", "2", "--noise", noise, "--seed", "3", "--out", "f.lff"],
        dir,
    );
}

#[test]
fn synth_writes_field_and_gt_copy() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(
        d.join("box.json"),
        r#"{"topology_id": 1, "points": [[96, 96], [224, 96], [224, 224], [96, 224], [0, 32], [319, 32], [319, 288], [0, 288]]}"#,
    )
    .unwrap();
    let args = ["synth", "--layout", "box.json", "--w", "320", "--h", "320", "--sigma", "2", "--noise", "0.05", "--occ", "2", "--seed", "7", "--out"];
    ok(&[&args[..], &["f.lff"]].concat(), d);
    ok(&[&args[..], &["g.lff"]].concat(), d);
    let f = FeatureField::load(&d.join("f.lff")).unwrap();
    assert_eq!((f.width(), f.height()), (320, 320));
    assert_eq!(f.data().len(), 320 * 320 * 4);
    assert_eq!(std::fs::read(d.join("f.lff")).unwrap(), std::fs::read(d.join("g.lff")).unwrap());
    let copy = LayoutFile::load(&d.join("f.gt.json")).unwrap();
    assert_eq!(copy, LayoutFile::load(&d.join("box.json")).unwrap());
}

#[test]
fn synth_rejects_negative_sigma() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("t6.json"), T6_GT).unwrap();
    let out = roomlayout(&["synth", "--layout", "t6.json", "--w", "160", "--h", "120", "--sigma", "-1", "--out", "f.lff"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("sigma"));
    assert!(!d.join("f.lff").exists());
}

#[test]
fn infer_recovers_clean_t6() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth_layout(d, T6_LEVEL_GT, "0");
    ok(&["infer", "--field", "f.lff", "--method", "pio", "--out", "pio.json", "--report", "pio_report.json"], d);
    ok(&["infer", "--field", "f.lff", "--method", "no", "--out", "no.json", "--report", "no_report.json"], d);

    let pred = LayoutFile::load(&d.join("pio.json")).unwrap();
    assert_eq!(pred.topology_id, 6);
    ok(&["eval", "--pred", "pio.json", "--gt", "f.gt.json", "--w", "160", "--h", "120", "--out", "eval.json"], d);
    let e = json(&d.join("eval.json"));
    assert!(e["e_corner"].as_f64().unwrap() <= 0.02, "{e}");

    let pio = json(&d.join("pio_report.json"));
    let no = json(&d.join("no_report.json"));
    assert!(no["final_e"].as_f64().unwrap() <= pio["final_e"].as_f64().unwrap() + 1e-3);
    assert_eq!(pio["per_topology_e"].as_array().unwrap().len(), 11);
    for key in ["final_e", "iters", "elapsed"] {
        assert!(pio.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn infer_single_topology_with_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth_t6(d, "0.05");
    ok(&["infer", "--field", "f.lff", "--topology", "1", "--trace", "t.jsonl", "--out", "box.json", "--report", "r.json"], d);
    let text = std::fs::read_to_string(d.join("t.jsonl")).unwrap();
    let energies: Vec<f64> = text
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["e"].as_f64().unwrap())
        .collect();
    assert!(!energies.is_empty());
    // the last entry may be the rejected step
    let accepted = &energies[..energies.len().saturating_sub(1).max(1)];
    assert!(accepted.windows(2).all(|w| w[1] <= w[0]), "{energies:?}");
    assert_eq!(LayoutFile::load(&d.join("box.json")).unwrap().topology_id, 1);
    assert_eq!(json(&d.join("r.json"))["per_topology_e"].as_array().unwrap().len(), 1);
}

#[test]
fn infer_unknown_topology_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth_t6(d, "0");
    let out = roomlayout(&["infer", "--field", "f.lff", "--topology", "42", "--out", "x.json"], d);
    assert!(!out.status.success());
}

#[test]
fn catalog_env_overrides_default() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth_t6(d, "0");
    let mut doc: serde_json::Value = serde_json::from_str(roomlayout::layout::DEFAULT_CATALOG_JSON).unwrap();
    let list = doc["topologies"].as_array_mut().unwrap();
    list.retain(|t| t["id"] == 6 || t["id"] == 9);
    std::fs::write(d.join("small.json"), doc.to_string()).unwrap();
    assert_eq!(Catalog::load(&d.join("small.json")).unwrap().len(), 2);

    let out = Command::new(env!("CARGO_BIN_EXE_roomlayout"))
        .args(["infer", "--field", "f.lff", "--out", "p.json", "--report", "r.json"])
        .current_dir(d)
        .env("LAYOUT_CATALOG", "small.json")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let ids: Vec<u64> = json(&d.join("r.json"))["per_topology_e"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t["topology_id"].as_u64().unwrap())
        .collect();
    assert_eq!(ids, [6, 9]);

    let bad = Command::new(env!("CARGO_BIN_EXE_roomlayout"))
        .args(["infer", "--field", "f.lff", "--out", "p.json"])
        .current_dir(d)
        .env("LAYOUT_CATALOG", "missing.json")
        .output()
        .unwrap();
    assert!(!bad.status.success());
}

#[test]
fn eval_examples() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("a.json"), r#"{"topology_id": 6, "points": [[0, 60], [99, 60]]}"#).unwrap();
    std::fs::write(d.join("b.json"), r#"{"topology_id": 6, "points": [[0, 50], [99, 50]]}"#).unwrap();

    let same = ok(&["eval", "--pred", "a.json", "--gt", "a.json", "--w", "100", "--h", "100"], d);
    let v: serde_json::Value = serde_json::from_slice(&same.stdout).unwrap();
    assert_eq!(v["e_corner"], 0.0);
    assert_eq!(v["e_pixel"], 0.0);

    ok(&["eval", "--pred", "a.json", "--gt", "b.json", "--w", "100", "--h", "100", "--out", "m.json"], d);
    let m = json(&d.join("m.json"));
    assert!((m["e_pixel"].as_f64().unwrap() - 0.10).abs() < 1e-12);
    assert_eq!(m["matched_pairs"].as_array().unwrap().len(), 2);

    // x = 99 is off the image for a 50-wide frame
    let out = roomlayout(&["eval", "--pred", "a.json", "--gt", "b.json", "--w", "50", "--h", "100"], d);
    assert!(!out.status.success());
}

#[test]
fn bench_reports_and_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(&["make-suite", "--out", "cases", "--w", "64", "--h", "64", "--per-topology", "2", "--topologies", "6,8"], d);

    ok(&["bench", "--cases", "cases", "--report", "both.json"], d);
    let both = json(&d.join("both.json"));
    assert_eq!(both["summary"].as_array().unwrap().len(), 2);
    assert!(both["speedup"].as_f64().unwrap() > 0.0);
    let ids: Vec<&str> = both["cases"].as_array().unwrap().iter().map(|c| c["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["t06_000", "t06_001", "t08_000", "t08_001"]);

    ok(&["bench", "--cases", "cases", "--methods", "pio", "--report", "pio.json"], d);
    let pio = json(&d.join("pio.json"));
    assert_eq!(pio["summary"].as_array().unwrap().len(), 1);
    assert_eq!(pio["summary"][0]["method"], "PIO");
    assert!(pio["speedup"].is_null());

    std::fs::create_dir(d.join("empty")).unwrap();
    let out = roomlayout(&["bench", "--cases", "empty", "--report", "e.json"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no cases"));

    // a malformed case is skipped, reported, and makes the exit code nonzero
    std::fs::write(d.join("cases/t99_000.gt.json"), "{}").unwrap();
    let out = roomlayout(&["bench", "--cases", "cases", "--methods", "pio", "--report", "partial.json"], d);
    assert!(!out.status.success());
    let partial = json(&d.join("partial.json"));
    assert_eq!(partial["skipped"][0]["id"], "t99_000");
    assert_eq!(partial["cases"].as_array().unwrap().len(), 4);
}

#[test]
fn bench_select_mode_records_per_topology_energies() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(&["make-suite", "--out", "cases", "--w", "64", "--h", "64", "--per-topology", "1", "--topologies", "6"], d);
    ok(&["bench", "--cases", "cases", "--methods", "pio", "--select", "--report", "r.json"], d);
    let r = json(&d.join("r.json"));
    assert_eq!(r["select_topology"], true);
    assert_eq!(r["cases"][0]["results"][0]["per_topology_e"].as_array().unwrap().len(), 11);
}

#[test]
fn invalid_optimizer_flags_fail() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth_t6(d, "0");
    let out = roomlayout(&["infer", "--field", "f.lff", "--window", "0.5", "--out", "x.json"], d);
    assert!(!out.status.success());
    let out = roomlayout(&["infer", "--field", "f.lff", "--method", "sgd", "--out", "x.json"], d);
    assert!(!out.status.success());
}
