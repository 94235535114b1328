use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;
use wavelab_core::forcing::Forcing;
use wavelab_core::shooting::solve_classical_wave_1d;

fn wavelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wavelab"))
        .args(args)
        .output()
        .unwrap()
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn cosine_config(dim: usize, n: usize, a0: f64, amp: f64, command: &str) -> String {
    let k = if dim == 1 { "[1]" } else { "[1, 0]" };
    format!(
        r#"{{"dimension": {dim}, "resolution": {n}, "forcing": {{"a0": {a0}, "modes": [{{"k": {k}, "cos": {amp}, "sin": 0.0}}]}}, "command": {command}}}"#
    )
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        cmd,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--quiet",
    ];
    args.extend_from_slice(extra);
    wavelab(&args)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn check_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let constant = configs_dir().join("constant.json");
    let o = run("check", &constant, &out, &[]);
    assert_eq!(o.status.code(), Some(0));
    let r = json(&out.join("check.json"));
    assert_eq!(r["gcondition"]["witness"]["measure"], 1.0);
    assert_eq!(r["existence_verified"], true);

    let cos = write_config(
        tmp.path(),
        "cos.json",
        &cosine_config(1, 64, 0.0, 1.0, "{}"),
    );
    let o = run("check", &cos, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(
        json(&out.join("check.json"))["gcondition"]["witness"],
        Value::Null
    );
}

#[test]
fn malformed_and_invalid_configs_exit_1() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let broken = write_config(
        tmp.path(),
        "broken.json",
        "{\n  \"dimension\": 1,\n  \"resolution\": ,\n}",
    );
    let o = run("check", &broken, &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&o.stderr);
    assert!(msg.contains("line 3 column"), "{msg}");

    let unknown = write_config(
        tmp.path(),
        "unknown.json",
        r#"{"dimension": 1, "resolution": 64, "forcing": {"a0": 1.0, "modes": []}, "command": {"sigma": 0.1}}"#,
    );
    assert_eq!(run("speed", &unknown, &out, &[]).status.code(), Some(1));

    let mismatch = write_config(
        tmp.path(),
        "mismatch.json",
        &cosine_config(1, 64, 1.0, 0.5, "{}").replace("[1]", "[1, 1]"),
    );
    let o = run("crosscheck", &mismatch, &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dimension mismatch"));

    assert_eq!(
        run("check", &tmp.path().join("missing.json"), &out, &[])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(wavelab(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(wavelab(&["--help"]).status.code(), Some(0));
}

#[test]
fn speed_command() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = run("speed", &configs_dir().join("constant.json"), &out, &[]);
    assert_eq!(o.status.code(), Some(0));
    let c = json(&out.join("speed.json"))["speed"].as_f64().unwrap();
    assert!((c - 1.0).abs() <= 1e-3);

    let cfg = write_config(
        tmp.path(),
        "classical.json",
        &cosine_config(1, 512, 1.0, 0.5, "{}"),
    );
    assert_eq!(run("speed", &cfg, &out, &[]).status.code(), Some(0));
    let r = json(&out.join("speed.json"));
    let c = r["speed"].as_f64().unwrap();
    let oracle = solve_classical_wave_1d(&Forcing::<f64>::cosine_1d(1.0, 0.5), 1e-10).unwrap();
    assert!((1.0..=1.5).contains(&c));
    assert!((c - oracle.c).abs() <= 1e-2, "{c} vs {}", oracle.c);
    assert!(out
        .join(r["sample"]["minimizer"].as_str().unwrap())
        .exists());

    let cos = write_config(
        tmp.path(),
        "cos.json",
        &cosine_config(1, 64, 0.0, 1.0, "{}"),
    );
    let o = run("speed", &cos, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(json(&out.join("speed.json"))["refused"], true);
}

#[test]
fn generalized_wave_round_trip() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("wave");
    let cfg = write_config(
        tmp.path(),
        "gen.json",
        &cosine_config(1, 128, 0.5, 8.0, "{}"),
    );
    assert_eq!(run("wave", &cfg, &out, &[]).status.code(), Some(0));
    let header = json(&out.join("wave.json"));
    assert_eq!(header["support"]["full"], false);
    assert_eq!(header["support"]["components"].as_array().unwrap().len(), 1);
    assert_eq!(header["boundary"]["vacuous"], false);
    let csv = std::fs::read_to_string(out.join("profile.csv")).unwrap();
    assert!(csv.lines().any(|l| l.ends_with(",-inf")));

    let verify_cmd = format!(r#"{{"verify": "{}"}}"#, out.join("wave.json").display());
    let verify = write_config(
        tmp.path(),
        "verify.json",
        &cosine_config(1, 128, 0.5, 8.0, &verify_cmd),
    );
    let check_out = tmp.path().join("verify");
    let o = run("wave", &verify, &check_out, &[]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );
    let v = json(&check_out.join("verify.json"));
    assert_eq!(v["bit_stable"], true);
    assert_eq!(v["profile_residual"], header["profile_residual"]);

    // a 1D wave cannot be re-verified against a 2D config
    let verify2 = write_config(
        tmp.path(),
        "verify2.json",
        &cosine_config(2, 128, 0.5, 8.0, &verify_cmd),
    );
    let o = run("wave", &verify2, &check_out, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dimension mismatch"));
}

#[test]
fn empty_support_exits_1() {
    let tmp = TempDir::new().unwrap();
    let stored = tmp.path().join("stored");
    std::fs::create_dir_all(&stored).unwrap();
    let mut csv = String::from("index,y1,psi\n");
    for i in 0..16 {
        csv.push_str(&format!("{i},{},-inf\n", i as f64 / 16.0));
    }
    std::fs::write(stored.join("profile.csv"), csv).unwrap();
    std::fs::write(
        stored.join("wave.json"),
        r#"{"speed": 1.0, "dimension": 1, "resolution": 16, "threshold": 0.001, "profile": "profile.csv"}"#,
    )
    .unwrap();
    let verify_cmd = format!(r#"{{"verify": "{}"}}"#, stored.join("wave.json").display());
    let cfg = write_config(
        tmp.path(),
        "cfg.json",
        &cosine_config(1, 16, 1.0, 0.5, &verify_cmd),
    );
    let o = run("wave", &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("empty support"));
}

#[test]
fn evolve_traces() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("const");
    let cfg = write_config(
        tmp.path(),
        "const.json",
        r#"{"dimension": 1, "resolution": 32, "forcing": {"a0": 1.0, "modes": []}, "command": {"final_time": 2.0, "speed": 1.0}}"#,
    );
    assert_eq!(run("evolve", &cfg, &out, &[]).status.code(), Some(0));
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("t,M,F_c,wt_sup"));
    for line in lines {
        let m: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(m, 0.0);
    }

    // generalized regime: M(t) - log(1 + t) / c stays bounded
    let out = tmp.path().join("gen");
    let cfg = write_config(
        tmp.path(),
        "gen.json",
        &cosine_config(
            1,
            64,
            0.5,
            8.0,
            r#"{"final_time": 5.0, "scheme": "upwind"}"#,
        ),
    );
    assert_eq!(run("evolve", &cfg, &out, &[]).status.code(), Some(0));
    let r = json(&out.join("evolve.json"));
    assert!(r["log_bound"]["sup_excess"].as_f64().unwrap().is_finite());
}

#[test]
fn artifacts_are_deterministic() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "seeded.json",
        &cosine_config(
            1,
            32,
            1.0,
            0.5,
            r#"{"final_time": 1.0, "seed": 42, "initial_amplitude": 0.3, "snapshot_stride": 50}"#,
        ),
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        assert_eq!(run("evolve", &cfg, out, &[]).status.code(), Some(0));
    }
    for file in ["trace.csv", "evolve.json"] {
        assert_eq!(
            std::fs::read(a.join(file)).unwrap(),
            std::fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
    let other = write_config(
        tmp.path(),
        "other.json",
        &cosine_config(
            1,
            32,
            1.0,
            0.5,
            r#"{"final_time": 1.0, "seed": 43, "initial_amplitude": 0.3, "snapshot_stride": 50}"#,
        ),
    );
    let c = tmp.path().join("c");
    assert_eq!(run("evolve", &other, &c, &[]).status.code(), Some(0));
    assert_ne!(
        std::fs::read(a.join("trace.csv")).unwrap(),
        std::fs::read(c.join("trace.csv")).unwrap()
    );
}

/// Expected cross-check matrix of the shipped configs: every suite passes.
#[test]
fn canonical_crosscheck_matrix() {
    let expected_suites = [
        "oracle_speed",
        "oracle_profile",
        "lyapunov_decrease",
        "lyapunov_floor",
        "comparison_min",
        "comparison_max",
        "convergence",
    ];
    let tmp = TempDir::new().unwrap();
    for name in ["constant", "classical", "three_cos"] {
        let out = tmp.path().join(name);
        let o = run(
            "crosscheck",
            &configs_dir().join(format!("{name}.json")),
            &out,
            &[],
        );
        assert_eq!(
            o.status.code(),
            Some(0),
            "{name}: {}",
            String::from_utf8_lossy(&o.stdout)
        );
        let r = json(&out.join("crosscheck.json"));
        let suites: Vec<(&str, bool)> = r["suites"]
            .as_array()
            .unwrap()
            .iter()
            .map(|s| (s["name"].as_str().unwrap(), s["pass"].as_bool().unwrap()))
            .collect();
        assert_eq!(
            suites.iter().map(|s| s.0).collect::<Vec<_>>(),
            expected_suites,
            "{name}"
        );
        assert!(suites.iter().all(|s| s.1), "{name}");
        assert_eq!(r["support_full"], true, "{name}");
        // every reported artifact exists
        for file in r["artifacts"]
            .as_object()
            .unwrap()
            .values()
            .filter_map(Value::as_str)
        {
            assert!(out.join(file).exists(), "{name}: {file}");
        }
    }
}

#[test]
fn skip_oracle_flag() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "cfg.json",
        &cosine_config(1, 64, 1.0, 0.5, r#"{"final_time": 3.0}"#),
    );
    assert_eq!(
        run("crosscheck", &cfg, &out, &["--skip-oracle"])
            .status
            .code(),
        Some(0)
    );
    let r = json(&out.join("crosscheck.json"));
    assert_eq!(r["oracle_skipped"], true);
    assert_eq!(r["c_oracle"], Value::Null);
    assert!(!out.join("oracle.json").exists());
    assert!(r["suites"]
        .as_array()
        .unwrap()
        .iter()
        .all(|s| !s["name"].as_str().unwrap().starts_with("oracle")));
}

#[test]
fn generalized_crosscheck_uses_boundary_suites() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "gen.json",
        &cosine_config(
            1,
            128,
            0.5,
            8.0,
            r#"{"final_time": 3.0, "scheme": "upwind"}"#,
        ),
    );
    let o = run("crosscheck", &cfg, &out, &[]);
    let r = json(&out.join("crosscheck.json"));
    let names: Vec<&str> = r["suites"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["name"].as_str().unwrap())
        .collect();
    for name in [
        "regime_consistency",
        "perimeter_identity",
        "support_endpoints",
        "log_bound",
    ] {
        assert!(names.contains(&name), "{names:?}");
    }
    assert_eq!(json(&out.join("oracle.json"))["classical"], false);
    assert_eq!(o.status.code(), Some(if r["pass"] == true { 0 } else { 2 }));
}
