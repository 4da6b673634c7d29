use std::path::Path;
use std::process::{Command, Output};

fn bdf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bdf")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn small_config(z: f64) -> String {
    format!(
        r#"{{"alpha": 0.1, "lambda": 2, "grid.points_per_axis": 4, "grid.spacing": 1,
            "source.profile": "gaussian", "source.z": {z}, "source.sigma": 0.8, "tol": 1e-10}}"#
    )
}

/// Cutoff 3 on a box wide enough to hold it.
fn wide(cfg: String) -> String {
    cfg.replace("\"lambda\": 2", "\"lambda\": 3").replace("\"grid.spacing\": 1", "\"grid.spacing\": 1.5")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn solve_without_source_has_zero_energy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "zero.json", &small_config(0.0));
    let out = dir.path().join("out");
    let o = bdf(&["solve", "--config", &cfg, "--out", out.to_str().unwrap(), "--quiet"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let report = json(&out.join("report.json"));
    // only eigensolver roundoff survives
    assert!(report["energy"]["total"].as_f64().unwrap().abs() < 1e-12);
    assert_eq!(report["verdict"], "converged");
    let manifest = json(&out.join("manifest.json"));
    let outputs: Vec<&str> = manifest["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    for f in ["trace.csv", "report.json", "manifest.json"] {
        assert!(outputs.iter().any(|o| o.ends_with(f)), "{f} missing from manifest");
    }
}

#[test]
fn solve_is_deterministic_and_embeds_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &wide(small_config(1.0)));
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = bdf(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stdout).contains("verdict"));
        out
    };
    let a = run("a");
    let b = run("b");
    for f in ["report.json", "trace.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let report = json(&a.join("report.json"));
    let cert = &report["certificate"];
    let alpha = 0.1;
    let n = report["source_c_norm"].as_f64().unwrap();
    let b = cert["b"].as_f64().unwrap();
    assert!((b - 2.0 * std::f64::consts::PI.sqrt() * alpha * n).abs() < 1e-12);
    assert!(report["verification"]["pass"].as_bool().unwrap());
    let trace = std::fs::read_to_string(a.join("trace.csv")).unwrap();
    assert!(trace.starts_with("iter,x_increment,energy_total,energy_kinetic,energy_direct,energy_exchange,charge,min_abs_eig"));
}

#[test]
fn checkpoint_restart_resumes_at_fixed_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &small_config(1.0));
    let ck = dir.path().join("state.bin");
    let out = dir.path().join("first");
    let o = bdf(&["solve", "--config", &cfg, "--out", out.to_str().unwrap(), "--checkpoint", ck.to_str().unwrap(), "--quiet"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let first = json(&out.join("report.json"));
    let out2 = dir.path().join("second");
    let o = bdf(&["solve", "--config", &cfg, "--out", out2.to_str().unwrap(), "--restart", ck.to_str().unwrap(), "--quiet"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let second = json(&out2.join("report.json"));
    assert!(second["records"].as_array().unwrap().len() <= 2);
    let (e1, e2) = (first["energy"]["total"].as_f64().unwrap(), second["energy"]["total"].as_f64().unwrap());
    assert!((e1 - e2).abs() <= 1e-9 * e1.abs().max(1e-12));

    // restart on another lattice is a usage error
    let other = write_config(dir.path(), "o.json", &small_config(1.0).replace("\"grid.spacing\": 1", "\"grid.spacing\": 0.5"));
    let o = bdf(&["solve", "--config", &other, "--out", out2.to_str().unwrap(), "--restart", ck.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn required_certificate_failure_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // cutoff below 3: no certificate can be issued
    let cfg = write_config(dir.path(), "c.json", &small_config(1.0));
    let o = bdf(&["solve", "--config", &cfg, "--out", dir.path().to_str().unwrap(), "--require-certificate"]);
    assert_eq!(o.status.code(), Some(1));
    // strong coupling at a valid cutoff fails the conditions
    let strong = small_config(1.0).replace("\"alpha\": 0.1", "\"alpha\": 0.9").replace("\"lambda\": 2", "\"lambda\": 3");
    let cfg = write_config(dir.path(), "s.json", &wide(strong));
    let o = bdf(&["solve", "--config", &cfg, "--out", dir.path().to_str().unwrap(), "--require-certificate"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn response_table_has_monotone_column() {
    let dir = tempfile::tempdir().unwrap();
    let o = bdf(&["response", "--lambda", "100", "--kmax", "5", "--points", "50", "--out", dir.path().to_str().unwrap(), "--quiet"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("response.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(headers.iter().collect::<Vec<_>>(), ["k_abs", "lambda", "B_1d", "B_3d", "rel_diff"]);
    let rows: Vec<Vec<f64>> = rdr.records().map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 50);
    for w in rows.windows(2) {
        assert!(w[1][2] < w[0][2] && w[1][3] < w[0][3]);
    }
    assert!(rows.iter().all(|r| r[4] < 1e-4));
}

#[test]
fn validate_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = bdf(&["validate", "--samples", "100000", "--seed", "0", "--out", dir.path().to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&dir.path().join("validate.json"));
    assert!(v["pass"].as_bool().unwrap());
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["violations"] == 0));
}

#[test]
fn constants_with_config_reports_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &small_config(1.0).replace("\"alpha\": 0.1", "\"alpha\": 0.001"));
    let o = bdf(&["constants", "--lambda", "10", "--config", &cfg, "--out", dir.path().to_str().unwrap(), "--quiet"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let c = json(&dir.path().join("constants.json"));
    assert_eq!(c["table"]["kappa_n"].as_array().unwrap().len(), 10);
    assert!((c["table"]["c_m"].as_f64().unwrap() - 2.1589).abs() < 5e-4);
    assert_eq!(c["certificate"]["alpha"].as_f64().unwrap(), 0.001);
    // below the smallest supported cutoff
    let o = bdf(&["constants", "--lambda", "2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn lattice_info_prints_json() {
    let o = bdf(&["lattice-info", "--points", "8", "--spacing", "1", "--lambda", "4"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["num_modes"], 257);
    assert_eq!(v["spinor_dimension"], 1028);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = small_config(1.0).replace("\"tol\"", "\"tolerance\"");
    let cfg = write_config(dir.path(), "u.json", &unknown);
    assert_eq!(bdf(&["solve", "--config", &cfg]).status.code(), Some(2));
    let cfg = write_config(dir.path(), "m.json", "{\"alpha\": ");
    assert_eq!(bdf(&["solve", "--config", &cfg]).status.code(), Some(2));
    let odd = small_config(1.0).replace("\"grid.points_per_axis\": 4", "\"grid.points_per_axis\": 5");
    let cfg = write_config(dir.path(), "o.json", &odd);
    assert_eq!(bdf(&["solve", "--config", &cfg]).status.code(), Some(2));
    assert_eq!(bdf(&["solve", "--config", "/nonexistent/config.json"]).status.code(), Some(2));
    assert_eq!(bdf(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(bdf(&["response", "--lambda", "10", "--kmax", "1", "--points", "3", "--bogus"]).status.code(), Some(2));
    assert_eq!(bdf(&["--help"]).status.code(), Some(0));
    assert_eq!(bdf(&["--version"]).status.code(), Some(0));
}
