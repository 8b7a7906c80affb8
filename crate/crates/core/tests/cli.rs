use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::{json, Value};
use tempfile::TempDir;

use semiclassical_core::fields::io::{read_scalar, write_scalar};
use semiclassical_core::fields::ScalarField;

fn run(args: &[&str]) -> i32 {
    let out = Command::new(env!("CARGO_BIN_EXE_semiclassical")).args(args).output().expect("binary runs");
    out.status.code().expect("exit code")
}

fn run_stderr(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_semiclassical")).args(args).output().expect("binary runs");
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn cos_mode(lambda: f64, amplitude: f64, phase: f64) -> Value {
    json!({"kind": "plane_wave_superposition", "lambda": lambda, "wavevectors": [[lambda]],
           "amplitudes": [amplitude], "phases": [phase]})
}

fn dirichlet(n: usize, lo: f64, hi: f64) -> Value {
    json!({"dim": 1, "extents": [n], "origin": [lo], "spacing": [(hi - lo) / (n - 1) as f64], "boundary": "dirichlet_zero"})
}

fn headline() -> Value {
    let particles: Vec<Value> = (0..8).map(|k| json!({"x0": [-0.85 + 0.55 * k as f64 / 7.0]})).collect();
    json!({
        "id": "headline",
        "grid": dirichlet(512, -1.2, 1.2),
        "case": "stationary",
        "modes": {"R": cos_mode(1.0, 1.0, 0.0), "S_tilde": cos_mode(1.0, 1.0, -PI / 2.0)},
        "lambda": 1.0,
        "E": 0.0,
        "dynamics": {"dt": 1e-3, "T": 1.0, "particles": particles}
    })
}

fn write_config(dir: &Path, name: &str, config: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    path
}

fn generate(tmp: &TempDir, name: &str, config: &Value) -> (i32, PathBuf) {
    let cfg = write_config(tmp.path(), &format!("{name}.json"), config);
    let out = tmp.path().join(name);
    let code = run(&["generate", "--quiet", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    (code, out)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn free_particle_generates_and_verifies() {
    let tmp = TempDir::new().unwrap();
    let config = json!({
        "grid": dirichlet(33, 0.0, 1.0),
        "case": "stationary",
        "modes": {
            "R": {"kind": "harmonic", "lambda": 0.0, "wavevectors": [[0.0]], "amplitudes": [1.0]},
            "S_tilde": {"kind": "harmonic", "lambda": 0.0, "wavevectors": [[0.7]], "amplitudes": [0.0]}
        },
        "E": 0.245
    });
    let (code, out) = generate(&tmp, "free", &config);
    assert_eq!(code, 0);
    assert_eq!(run(&["verify", "--quiet", s(&out)]), 0);
    // V = E - p²/2 = 0 everywhere.
    let v = read_scalar(&out, "V").unwrap();
    assert!(v.max_abs() < 1e-12, "{}", v.max_abs());
    let header = read_json(&out.join("scenario.json"));
    assert_eq!(header["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn resonant_solve_fails_with_the_check_name() {
    let tmp = TempDir::new().unwrap();
    let n = 41;
    let h = PI / (n - 1) as f64;
    // Lowest discrete Dirichlet eigenvalue on [0, π].
    let lambda = (2.0 / h * (h / 2.0).sin()).abs();
    let config = json!({
        "grid": dirichlet(n, 0.0, PI),
        "case": "stationary",
        "modes": {"R": cos_mode(lambda, 1.0, 0.3), "S_tilde": "solve"},
        "lambda": lambda
    });
    let cfg = write_config(tmp.path(), "res.json", &config);
    let (code, err) = run_stderr(&["generate", "--config", s(&cfg), "--out", s(&tmp.path().join("res"))]);
    assert_eq!(code, 1);
    assert!(err.contains("resonance"), "{err}");
}

#[test]
fn cos2x_potential_matches_closed_form() {
    let tmp = TempDir::new().unwrap();
    let config = json!({
        "grid": dirichlet(401, -0.5, 0.5),
        "case": "stationary",
        "modes": {"R": cos_mode(2.0, 1.0, 0.0), "S_tilde": cos_mode(2.0, 1.0, -PI / 2.0)},
        "lambda": 2.0,
        "E": 0.0
    });
    let (code, out) = generate(&tmp, "cos2x", &config);
    assert_eq!(code, 0);
    let v = read_scalar(&out, "V").unwrap();
    let exact = ScalarField::from_fn(v.grid(), |x| -2.0 - 2.0 / (2.0 * x[0]).cos().powi(4)).unwrap();
    let err = v.values().iter().zip(exact.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-3, "{err}");
}

#[test]
fn corrupted_potential_fails_verification() {
    let tmp = TempDir::new().unwrap();
    let config = json!({
        "grid": dirichlet(241, -0.6, 0.6),
        "case": "stationary",
        "modes": {"R": cos_mode(2.0, 1.0, 0.0), "S_tilde": cos_mode(2.0, 1.0, -PI / 2.0)},
        "lambda": 2.0
    });
    let (code, out) = generate(&tmp, "corrupt", &config);
    assert_eq!(code, 0);
    assert_eq!(run(&["verify", "--quiet", s(&out)]), 0);
    let v = read_scalar(&out, "V").unwrap();
    let x = ScalarField::from_fn(v.grid(), |x| x[0]).unwrap();
    write_scalar(&out, "V", &v.axpby(1.0, &x, 0.1).unwrap()).unwrap();
    assert_eq!(run(&["verify", "--quiet", s(&out)]), 1);
    let report = read_json(&out.join("report.json"));
    let qhj = report["entries"].as_array().unwrap().iter().find(|e| e["name"] == "qhj_residual").unwrap();
    assert_eq!(qhj["status"], "fail");
}

#[test]
fn mask_heavy_scenario_is_inconclusive() {
    let tmp = TempDir::new().unwrap();
    let config = json!({
        "grid": dirichlet(201, -2.0 * PI, 2.0 * PI),
        "case": "stationary",
        "modes": {"R": cos_mode(1.0, 1.0, 0.0), "S_tilde": cos_mode(1.0, 1.0, -PI / 2.0)},
        "lambda": 1.0,
        "eps_node": 0.5
    });
    let (code, out) = generate(&tmp, "masked", &config);
    assert_eq!(code, 3);
    assert_eq!(run(&["verify", "--quiet", s(&out)]), 3);
}

#[test]
fn usage_errors_exit_two() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(run(&["evolve", s(&tmp.path().join("missing"))]), 2);
    assert_eq!(run(&["frobnicate"]), 2);
    assert_eq!(run(&["generate", "--config"]), 2);
    let mut bad = headline();
    bad["grid"]["colour"] = json!("red");
    assert_eq!(generate(&tmp, "unknown_key", &bad).0, 2);
    let mut bad = headline();
    bad["dynamics"]["dt"] = json!(-1e-3);
    assert_eq!(generate(&tmp, "negative_dt", &bad).0, 2);
    let (code, out) = generate(&tmp, "ok", &headline());
    assert_eq!(code, 0);
    assert_eq!(run(&["verify", "--quiet", "--override", "novalue", s(&out)]), 2);
}

#[test]
fn headline_pipeline_and_negative_control() {
    let tmp = TempDir::new().unwrap();
    let (code, out) = generate(&tmp, "headline", &headline());
    assert_eq!(code, 0);
    assert_eq!(run(&["evolve", "--quiet", s(&out)]), 0);
    let evo = read_json(&out.join("evolution/report.json"));
    assert!(evo["entries"][0]["measured"].as_f64().unwrap() <= 1e-3);
    assert_eq!(run(&["compare", "--quiet", s(&out)]), 0);
    let cmp = read_json(&out.join("evolution/comparison.json"));
    assert!(cmp["entries"][0]["measured"].as_f64().unwrap() <= 1e-3);
    assert_eq!(cmp["per_particle"].as_array().unwrap().len(), 8);
    let csv = fs::read_to_string(out.join("evolution/bohmian.csv")).unwrap();
    assert!(csv.starts_with("particle_id,t,x,flag"));
    assert_eq!(csv.lines().count(), 1 + 8 * 1001);

    let neg = tmp.path().join("neg");
    assert_eq!(run(&["compare", "--quiet", "--perturb", "0.1", "--out", s(&neg), s(&out)]), 1);

    // f ≡ 1 over T = 1 integrates to ζ(1) = -1.
    let g = tmp.path().join("g1");
    assert_eq!(run(&["gauge", "--quiet", "--constant", "1", "--out", s(&g), s(&out)]), 0);
    let zeta = read_json(&g.join("scenario.json"))["gauge"]["zeta"].as_array().unwrap().clone();
    assert!((zeta.last().unwrap().as_f64().unwrap() + 1.0).abs() < 1e-12);
    assert_eq!(run(&["verify", "--quiet", s(&g)]), 0);

    let k = tmp.path().join("gk");
    assert_eq!(run(&["gauge", "--quiet", "--add-quantum-potential", "--out", s(&k), s(&out)]), 0);
    let report = read_json(&k.join("report.json"));
    let names: Vec<&str> = report["entries"].as_array().unwrap().iter().map(|e| e["name"].as_str().unwrap()).collect();
    for name in [
        "gauge_q_unchanged",
        "gauge_v_shift",
        "gauge_zero_quantum_potential",
        "gauge_bohmian_velocity",
        "gauge_classical_paths",
    ] {
        assert!(names.contains(&name), "{name} missing");
    }
}

#[test]
fn zero_velocity_scenario_gives_constant_paths_and_unitary_runs() {
    let tmp = TempDir::new().unwrap();
    let n = 64;
    let particles: Vec<Value> = [0.3, 1.0, 2.5, 4.0].iter().map(|x| json!({"x0": [x]})).collect();
    let config = json!({
        "grid": {"dim": 1, "extents": [n], "origin": [0.0], "spacing": [2.0 * PI / n as f64], "boundary": "periodic"},
        "case": "stationary",
        "modes": {"R": cos_mode(1.0, 1.0, 0.0), "S_tilde": cos_mode(1.0, 0.5, 0.0)},
        "lambda": 1.0,
        "dynamics": {"dt": 2e-3, "T": 0.5, "snapshot_stride": 5, "particles": particles}
    });
    let (code, out) = generate(&tmp, "still", &config);
    assert_eq!(code, 0);
    assert_eq!(run(&["evolve", "--quiet", s(&out)]), 0);
    let half = tmp.path().join("half");
    assert_eq!(run(&["evolve", "--quiet", "--override", "dynamics.dt=0.001", "--out", s(&half), s(&out)]), 0);
    for dir in [out.join("evolution"), half.clone()] {
        let h = read_json(&dir.join("evolution.json"));
        assert_eq!(h["closed"], true);
        assert!(h["max_norm_drift"].as_f64().unwrap() <= 1e-10);
    }
    assert_eq!(run(&["compare", "--quiet", s(&out)]), 0);
    for name in ["classical.csv", "bohmian.csv"] {
        let csv = fs::read_to_string(out.join("evolution").join(name)).unwrap();
        let mut start = std::collections::HashMap::new();
        for line in csv.lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            let x: f64 = cols[2].parse().unwrap();
            let x0 = *start.entry(cols[0].to_string()).or_insert(x);
            assert!((x - x0).abs() < 1e-12, "{name}: {line}");
        }
    }
}

#[test]
fn zero_gauge_leaves_payloads_bitwise_equal() {
    let tmp = TempDir::new().unwrap();
    let times: Vec<f64> = (0..11).map(|k| k as f64 * 0.01).collect();
    let config = json!({
        "grid": dirichlet(129, -1.2, 1.2),
        "case": "time_dependent",
        "modes": {"R": cos_mode(1.0, 1.0, 0.0), "phi_tilde": cos_mode(1.0, 1.0, -PI / 2.0)},
        "lambda_schedule": {"times": times, "values": vec![1.0; 11]},
        "dynamics": {"dt": 1e-3, "T": 0.1, "particles": [{"x0": [-0.4]}, {"x0": [0.2]}]}
    });
    let (code, out) = generate(&tmp, "td", &config);
    assert_eq!(code, 0);
    let g = tmp.path().join("g0");
    assert_eq!(run(&["gauge", "--quiet", "--constant", "0", "--out", s(&g), s(&out)]), 0);
    for name in ["R.bin", "phi_tilde.bin", "V.bin"] {
        assert_eq!(fs::read(out.join(name)).unwrap(), fs::read(g.join(name)).unwrap(), "{name}");
    }
}

fn tree_bytes(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn identical_config_and_seed_give_identical_artifacts() {
    let tmp = TempDir::new().unwrap();
    let mut config = headline();
    config["grid"] = dirichlet(129, -1.2, 1.2);
    config["dynamics"] = json!({"dt": 2e-3, "T": 0.2, "particles": {"count": 5, "lo": [-0.8], "hi": [-0.3]}});
    config["seed"] = json!(11);
    let mut trees = Vec::new();
    for name in ["a", "b"] {
        let (code, out) = generate(&tmp, name, &config);
        assert_eq!(code, 0);
        assert_eq!(run(&["evolve", "--quiet", s(&out)]), 0);
        assert_eq!(run(&["compare", "--quiet", s(&out)]), 0);
        trees.push(tree_bytes(&out));
    }
    assert!(!trees[0].is_empty());
    assert_eq!(trees[0], trees[1]);
    config["seed"] = json!(12);
    let (_, out) = generate(&tmp, "c", &config);
    assert_eq!(run(&["evolve", "--quiet", s(&out)]), 0);
    assert_eq!(run(&["compare", "--quiet", s(&out)]), 0);
    let csv = |d: &Path| fs::read(d.join("evolution/classical.csv")).unwrap();
    assert_ne!(csv(&out), csv(&tmp.path().join("a")));
}
