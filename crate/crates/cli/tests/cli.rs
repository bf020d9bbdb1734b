use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_microcavity"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, json: &str) -> String {
    let p = dir.join("run.json");
    std::fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_owned()
}

fn overlay(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("psos_overlay.json")).unwrap()).unwrap()
}

fn psos(dir: &Path, ecc: &str) -> serde_json::Value {
    let out = run(&["psos", "--ecc", ecc, "--n", "3.3", "--seeds", "12", "--bounces", "50", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    overlay(dir)
}

#[test]
fn schema_lists_every_csv() {
    let out = run(&["--schema"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["psos.csv", "modes.csv", "trajectories.csv", "self_energy.csv", "husimi.csv"] {
        assert!(text.contains(name), "{name} missing");
    }
    assert!(text.contains("e,m,l,kind,parity,re_kr,im_kr,residual"));
}

#[test]
fn circle_psos_is_horizontal_lines() {
    let dir = tempfile::tempdir().unwrap();
    let ov = psos(dir.path(), "0");
    assert!(ov["separatrix_max"].is_null());
    let csv = std::fs::read_to_string(dir.path().join("psos.csv")).unwrap();
    let mut first_p = std::collections::HashMap::new();
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let p: f64 = f[3].parse().unwrap();
        let p0 = *first_p.entry(f[0].to_owned()).or_insert(p);
        assert!((p - p0).abs() < 1e-9, "{line}");
    }
    assert_eq!(first_p.len(), 12);
    assert!(std::fs::read_to_string(dir.path().join("psos.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn separatrix_apex_meets_critical_line_at_inverse_index() {
    let dir = tempfile::tempdir().unwrap();
    let ov = psos(dir.path(), &format!("{}", 1.0 / 3.3));
    assert!(ov["apex_gap"].as_f64().unwrap().abs() < 1e-3);

    // The apex sits at p = e exactly, so at e = 0.30 it is 1/3.3 − 0.3 short.
    let ov = psos(dir.path(), "0.30");
    let gap = ov["apex_gap"].as_f64().unwrap();
    assert!((gap - (0.3 - 1.0 / 3.3)).abs() < 1e-12, "{gap}");

    let ov = psos(dir.path(), "0.45");
    assert!(ov["apex_gap"].as_f64().unwrap() > 0.1);
}

#[test]
fn unwritable_output_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = run(&["psos", "--ecc", "0.2", "--out", blocker.join("sub").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("sub"));
}

/// Circle resonances from an arbitrary-precision root finder on the exact
/// matching conditions, `n = 3.3`.
const OPEN_TM: [(u32, u32, f64, f64); 3] = [
    (0, 1, 0.252087272486378048, -0.122805006330310483),
    (3, 1, 1.51140613011551539, -0.0102448433785172731),
    (5, 5, 6.25095020597553268, -0.0643458478595082785),
];
const OPEN_TE: [(u32, u32, f64, f64); 3] = [
    (0, 1, 0.691803370037436682, -0.0670173648671758631),
    (3, 1, 1.84971074721919509, -0.0140418946500522154),
    (5, 5, 6.70586989289126629, -0.135328741588118023),
];
/// Bessel zeros divided by the index.
const CLOSED: [(u32, u32, f64); 3] =
    [(0, 1, 0.728735017483567506), (3, 1, 1.93338239270423743), (5, 5, 6.73266663532159632)];

const SMALL: &str = r#"{"labels": [[0,1],[3,1],[5,5]], "e_end": 0.01, "e_steps": 2}"#;

/// Checks the `e = 0` rows of a trajectory file against the circle values.
fn check_circle_rows(csv: &str, open: &[(u32, u32, f64, f64)]) {
    let mut checked = 0;
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f[0] != "0" {
            continue;
        }
        let (m, l): (u32, u32) = (f[1].parse().unwrap(), f[2].parse().unwrap());
        let (re, im): (f64, f64) = (f[5].parse().unwrap(), f[6].parse().unwrap());
        if f[3] == "open" {
            let &(_, _, r, i) = open.iter().find(|o| o.0 == m && o.1 == l).unwrap();
            assert!((re - r).abs() < 1e-4 && (im - i).abs() < 1e-4, "{line}");
        } else {
            let &(_, _, r) = CLOSED.iter().find(|o| o.0 == m && o.1 == l).unwrap();
            assert!((re - r).abs() < 1e-4 && im == 0.0, "{line}");
        }
        checked += 1;
    }
    assert_eq!(checked, 6);
}

#[test]
fn two_step_sweep_matches_circle_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, threads) in [(&a, "1"), (&b, "2")] {
        let o = run(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap(), "--threads", threads]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["trajectories.csv", "self_energy.csv", "crossings.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    check_circle_rows(&std::fs::read_to_string(a.join("trajectories.csv")).unwrap(), &OPEN_TE);
    let se = std::fs::read_to_string(a.join("self_energy.csv")).unwrap();
    assert_eq!(se.lines().next().unwrap(), "e,m,l,s_e");
    assert_eq!(se.lines().count(), 1 + 3 * 2);
}

#[test]
fn tm_polarization_is_selectable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("{", r#"{"polarization": "tm", "#));
    let o = run(&["sweep", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    check_circle_rows(&std::fs::read_to_string(dir.path().join("trajectories.csv")).unwrap(), &OPEN_TM);
}

#[test]
fn modes_reports_both_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"labels": [[3,1]]}"#);
    let o = run(&["modes", "--ecc", "0.05", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("modes.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].contains(",closed,") && rows[1].contains(",open,"));
}

#[test]
fn husimi_writes_normalized_map() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"labels": [[5,1]], "husimi_ns": 64, "husimi_np": 64}"#);
    let o = run(&["husimi", "--ecc", "0.2", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("husimi.csv")).unwrap();
    let cell = 2.0 / (64.0 * 64.0);
    let mass: f64 = csv.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap() * cell).sum();
    assert!((mass - 1.0).abs() < 1e-6, "{mass}");
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("husimi.json")).unwrap()).unwrap();
    assert_eq!(summary["class"], "WG");
}

#[test]
fn analyze_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"labels": [[3,1]], "pairs": []}"#);
    let o = run(&["analyze", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));

    let cfg = write_config(dir.path(), r#"{"labels": [[3,1]], "pairs": [[[3,1],[4,2]]]}"#);
    let o = run(&["analyze", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("config"));
}

#[test]
fn analyze_writes_pair_document() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"labels": [[3,1],[5,1]], "pairs": [[[3,1],[5,1]]], "e_end": 0.1, "e_steps": 3, "e_max": 0.1,
            "husimi_ns": 64, "husimi_np": 64}"#,
    );
    let o = run(&["analyze", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("pair_3_1__5_1.json")).unwrap()).unwrap();
    for key in ["labels", "e_grid", "delta_se", "d_b", "e_zero", "e_dbmin", "q_j", "q_k"] {
        assert!(doc.get(key).is_some(), "{key} missing");
    }
    assert_eq!(doc["e_grid"].as_array().unwrap().len(), 3);
    assert!(dir.path().join("analysis.svg").exists());
}

#[test]
fn invalid_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"e_end": 0.995}"#);
    let o = run(&["sweep", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("e_end"));
}
