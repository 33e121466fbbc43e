//! The `finsler` binary end to end: golden outputs, determinism and the
//! exit-code contract of every command.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_finsler"));
    c.env_remove("FINSLER_THREADS");
    c
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

/// Copy a golden scene into a fresh directory so its output lands there.
fn staged(scene: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(scene);
    std::fs::copy(golden(scene), &path).unwrap();
    (dir, path)
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn trace_matches_golden_files() {
    for (scene, files) in [
        ("scene_spin.json", vec![("ray_000.csv", "spin_ray_000.csv"), ("ray_001.csv", "spin_ray_001.csv")]),
        ("scene_geodesic.json", vec![("ray_000.csv", "geodesic_ray_000.csv")]),
    ] {
        let (dir, cfg) = staged(scene);
        let o = run(&["trace", cfg.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        for (out, expected) in files {
            assert_eq!(read(&dir.path().join("out").join(out)), read(&golden(expected)), "{scene}: {out}");
        }
    }
}

#[test]
fn golden_trajectories_are_physically_sensible() {
    // spin ray in a gradient along x1, launched in the x1–x3 plane: it bends
    // toward the gradient and drifts slightly out of plane
    let text = read(&golden("spin_ray_000.csv"));
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    let last = rows.last().unwrap();
    assert_eq!(last[0], 2.0);
    assert!(last[4] > rows[0][4], "u1 grows toward higher index");
    assert!(last[2] > 0.0 && last[2] < 1e-3);
    for r in &rows {
        assert!((r[7] - 1.0).abs() <= 1e-8);
        assert!((r[8] - 0.01).abs() < 1e-12);
    }
}

#[test]
fn trace_is_deterministic_across_thread_counts() {
    let (dir, cfg) = staged("scene_spin.json");
    let cfg = cfg.to_str().unwrap();
    assert_eq!(code(&run(&["--threads", "1", "trace", cfg])), 0);
    let one = read(&dir.path().join("out/ray_001.csv"));
    let o = bin().env("FINSLER_THREADS", "4").args(["trace", cfg]).output().unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(read(&dir.path().join("out/ray_001.csv")), one);
    let o = bin().env("FINSLER_THREADS", "zero").args(["trace", cfg]).output().unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn euclidean_trace_is_a_straight_line() {
    let dir = tempfile::tempdir().unwrap();
    let scene = |model: &str| {
        format!(
            r#"{{"medium": {{"type": "euclidean"}}, "model": "{model}", "rays": [{{"x0": [0, 0, 0], "u0": [0, 0, 2]}}],
                "integrator": {{"t_end": 3, "output_interval": 0.5}}, "output": {{"path": "{model}"}}}}"#
        )
    };
    for model in ["geodesic", "spin"] {
        let cfg = write(dir.path(), &format!("{model}.json"), &scene(model));
        assert_eq!(code(&run(&["trace", cfg.to_str().unwrap()])), 0);
    }
    let geo = read(&dir.path().join("geodesic/ray_000.csv"));
    let spin = read(&dir.path().join("spin/ray_000.csv"));
    let coords = |text: &str| -> Vec<String> {
        text.lines().skip(1).map(|l| l.split(',').take(8).collect::<Vec<_>>().join(",")).collect()
    };
    assert_eq!(coords(&geo), coords(&spin));
    for line in geo.lines().skip(1) {
        let v: Vec<&str> = line.split(',').collect();
        let t: f64 = v[0].parse().unwrap();
        assert!((v[3].parse::<f64>().unwrap() - t).abs() < 1e-12);
        assert_eq!(v[7], "1.0");
        assert_eq!((v[8], v[9]), ("", ""));
    }
}

#[test]
fn trace_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"medium": {"type": "conformal", "index": "1 + * x1"}, "model": "geodesic",
            "rays": [{"x0": [0, 0, 0], "u0": [0, 0, 1]}], "output": {"path": "o"}}"#,
    );
    let o = run(&["trace", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("byte 4"));

    let zero = write(
        dir.path(),
        "zero.json",
        r#"{"medium": {"type": "euclidean"}, "model": "geodesic",
            "rays": [{"x0": [0, 0, 0], "u0": [0, 0, 0]}], "output": {"path": "o"}}"#,
    );
    assert_eq!(code(&run(&["trace", zero.to_str().unwrap()])), 2);
    assert_eq!(code(&run(&["trace", dir.path().join("missing.json").to_str().unwrap()])), 2);

    let singular = write(
        dir.path(),
        "singular.json",
        r#"{"medium": {"type": "conformal", "index": "1 + 0.1*x1"}, "model": "spin",
            "constants": {"p": 0.1, "s": 1.0},
            "rays": [{"x0": [-0.5, 0, 0], "u0": [0, 0, 1]}], "output": {"path": "sing"}}"#,
    );
    let o = run(&["trace", singular.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert_eq!(json(&o)[0]["termination"]["reason"], "singular_locus");

    // one regular ray is enough for success
    let mixed = write(
        dir.path(),
        "mixed.json",
        r#"{"medium": {"type": "conformal", "index": "1 + 0.1*x1"}, "model": "spin",
            "constants": {"p": 0.1, "s": 1.0},
            "rays": [{"x0": [-0.5, 0, 0], "u0": [0, 0, 1]}, {"x0": [0, 0, 0], "u0": [0, 0, 1]}],
            "integrator": {"t_end": 1}, "output": {"path": "mixed"}}"#,
    );
    assert_eq!(code(&run(&["trace", mixed.to_str().unwrap()])), 0);
}

#[test]
fn verify_matches_golden_report() {
    let o = run(&["verify", golden("crystal.json").to_str().unwrap(), "--samples", "20", "--seed", "42"]);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8(o.stdout).unwrap(), read(&golden("verify_crystal_seed42.json")));
}

#[test]
fn verify_reports_every_identity() {
    let dir = tempfile::tempdir().unwrap();
    let euclid = write(dir.path(), "e.json", r#"{"type": "euclidean"}"#);
    let o = run(&["verify", euclid.to_str().unwrap(), "--samples", "100", "--seed", "3"]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    let keys: Vec<&str> = r["identities"].as_object().unwrap().keys().map(|k| k.as_str()).collect();
    let mut expected = [
        "Al=0",
        "Pl=0",
        "Bianchi-P=-Adot",
        "GammaSym",
        "Homogeneity",
        "Euler-gyy=F2",
        "KernelResidual",
        "RiemannianReduction",
        "SigmaConsistency",
    ];
    let mut sorted = keys.clone();
    sorted.sort();
    expected.sort();
    assert_eq!(sorted, expected);
    for (k, v) in r["identities"].as_object().unwrap() {
        assert_eq!(v["pass"], true, "{k}");
        assert!(v["max_residual"].as_f64().unwrap() < 1e-13, "{k}");
        assert_eq!(v["evaluated"], 100, "{k}");
    }

    let fe = write(dir.path(), "fe.json", r#"{"type": "uniaxial", "a": [1, 0, 0, 1, 0, 1], "b": [1.2, 0, 0, 1, 0, 1]}"#);
    let o = run(&["verify", fe.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert!(r["identities"]["KernelResidual"]["max_residual"].as_f64().unwrap() < 1e-7);
    // the Cartan tensor is nonzero, so the Riemannian comparison does not apply
    assert_eq!(r["identities"]["RiemannianReduction"]["evaluated"], 0);
}

#[test]
fn verify_flags_a_non_convex_metric() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"type": "uniaxial", "a": [1, 0, 0, 1, 0, 1], "b": [2.5, 0, 0, 1, 0, 1]}"#);
    let o = run(&["verify", bad.to_str().unwrap(), "--samples", "100", "--seed", "1"]);
    assert_eq!(code(&o), 1);
    let r = json(&o);
    assert_eq!(r["pass"], false);
    let failures = r["sample_failures"].as_array().unwrap();
    assert!(!failures.is_empty());
    assert!(failures[0]["error"].as_str().unwrap().contains("not positive-definite"));

    let broken = write(dir.path(), "broken.json", r#"{"type": "uniaxial", "a": [1, 0, 0]}"#);
    assert_eq!(code(&run(&["verify", broken.to_str().unwrap()])), 2);
}

#[test]
fn compare_reports_helicity_shifts() {
    let dir = tempfile::tempdir().unwrap();
    let scene = |medium: &str| {
        format!(
            r#"{{"medium": {medium}, "model": "spin", "constants": {{"p": 1, "s": -0.01}},
                "rays": [{{"x0": [0, 0, 0], "u0": [0.3, 0, 1]}}, {{"x0": [0, 0.1, 0], "u0": [0.3, 0, 1]}}],
                "integrator": {{"t_end": 10}}, "output": {{"path": "o"}}}}"#
        )
    };
    let vac = write(dir.path(), "vac.json", &scene(r#"{"type": "euclidean"}"#));
    let o = run(&["compare", vac.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    for rec in json(&o).as_array().unwrap() {
        assert!(rec["shift_magnitude"].as_f64().unwrap() < 1e-9);
    }
    let grad = write(dir.path(), "grad.json", &scene(r#"{"type": "conformal", "index": "1 + 0.1*x1"}"#));
    let o = run(&["compare", grad.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let recs = json(&o);
    let shift: Vec<f64> = recs[0]["shift"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!(shift[1] > 1e-4, "{shift:?}");
    assert!(shift[0].abs().max(shift[2].abs()) < 1e-8);
    // the sign of the configured spin does not matter: +|s| is compared with −|s|
    let flipped = write(dir.path(), "flip.json", &read(&grad).replace("-0.01", "0.01"));
    assert_eq!(json(&run(&["compare", flipped.to_str().unwrap()])), recs);

    let geodesic = write(dir.path(), "geo.json", &read(&grad).replace(r#""spin""#, r#""geodesic""#).replace(r#""constants": {"p": 1, "s": -0.01},"#, ""));
    assert_eq!(code(&run(&["compare", geodesic.to_str().unwrap()])), 2);
}

#[test]
fn compare_detects_mismatched_files() {
    let (dir, cfg) = staged("scene_spin.json");
    assert_eq!(code(&run(&["trace", cfg.to_str().unwrap()])), 0);
    let a = dir.path().join("out/ray_000.csv");
    let o = run(&["compare", "--plus", a.to_str().unwrap(), "--minus", a.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)[0]["shift_magnitude"], 0.0);

    let text = read(&a);
    let truncated: String = text.lines().take(4).map(|l| format!("{l}\n")).collect();
    let b = write(dir.path(), "short.csv", &truncated);
    let o = run(&["compare", "--plus", a.to_str().unwrap(), "--minus", b.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("grids do not match"));
    let other = dir.path().join("out/ray_001.csv");
    assert_eq!(code(&run(&["compare", "--plus", a.to_str().unwrap(), "--minus", other.to_str().unwrap()])), 2);
}

#[test]
fn tensors_examples() {
    let dir = tempfile::tempdir().unwrap();
    let euclid = write(dir.path(), "e.json", r#"{"type": "euclidean"}"#);
    let o = run(&["tensors", euclid.to_str().unwrap(), "--x", "0.5,-1,2", "--y", "0,0,1"]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert_eq!(r["g"], serde_json::json!([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]));
    for key in ["A", "G", "N", "Gamma", "R", "P", "Rhat", "Phat", "Qhat"] {
        let flat = r[key].to_string();
        assert!(flat.chars().filter(|c| c.is_ascii_digit() && *c != '0').count() == 0, "{key}: {flat}");
    }
    assert!(r.get("spin").is_none());
    // 17 significant digits on every number
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("1.0000000000000000e0"));

    let fermat = write(dir.path(), "f.json", r#"{"type": "conformal", "index": "1 + x1"}"#);
    let r = json(&run(&["tensors", fermat.to_str().unwrap(), "--x", "0,0,0", "--y", "0,0,1"]));
    let g: Vec<f64> = r["G"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!((g[0] + 1.0).abs() < 1e-14 && g[1].abs() < 1e-14 && g[2].abs() < 1e-14);

    let fe = write(dir.path(), "fe.json", r#"{"type": "uniaxial", "a": [1, 0, 0, 1, 0, 1], "b": [1.2, 0, 0, 1, 0, 1]}"#);
    let r = json(&run(&["tensors", fe.to_str().unwrap(), "--x", "0,0,0", "--y", "0,0,1", "--spin", "0.1", "--color", "2"]));
    assert!((r["g"][0][0].as_f64().unwrap() - 0.8).abs() < 1e-15);
    assert_eq!(r["spin"]["p"], 2.0);
    assert_eq!(r["spin"]["singular"], false);

    // x on the index's zero set, zero y, bad triples
    assert_eq!(code(&run(&["tensors", fermat.to_str().unwrap(), "--x", "-1,0,0", "--y", "0,0,1"])), 2);
    assert_eq!(code(&run(&["tensors", fe.to_str().unwrap(), "--x", "0,0,0", "--y", "0,0,0"])), 2);
    assert_eq!(code(&run(&["tensors", fe.to_str().unwrap(), "--x", "0,0", "--y", "0,0,1"])), 2);
    assert_eq!(code(&run(&["tensors", fe.to_str().unwrap(), "--x", "0,0,0", "--y", "0,0,1", "--spin", "0"])), 2);
}
