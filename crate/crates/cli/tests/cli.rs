use std::path::Path;
use std::process::{Command, Output};

fn kzwork(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kzwork")).args(args).output().expect("binary runs")
}

/// Header and numeric rows of a CSV written by the tool, comments dropped.
fn table(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn identity_protocol_has_no_excess_work() {
    let out = stdout(&kzwork(&["cumulants", "--lambda0", "1", "--lambda1", "1", "--v", "0.05", "--method", "ode"]));
    let (header, rows) = table(&out);
    let excess = header.iter().position(|h| h.starts_with("kappa1_excess")).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(num(&rows[0][excess]).abs() < 1e-12);
}

#[test]
fn half_quench_rejects_nonzero_endpoint() {
    let out = kzwork(&["cumulants", "--v", "0.05", "--method", "lz_half", "--lambda1", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lz_half"));
}

#[test]
fn empty_rate_grid_is_a_config_error() {
    let out = kzwork(&["sweep", "--v-min", "0.1", "--v-max", "0.01", "--v-points", "6"]);
    assert_eq!(out.status.code(), Some(2));
    let out = kzwork(&["sweep", "--v-min", "0.01", "--v-max", "0.1", "--v-points", "3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_method_and_keys_are_rejected() {
    assert_eq!(kzwork(&["cumulants", "--v", "0.1", "--method", "magic"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[protocol]\nlambda0 = -4.0\nlamda1 = 1.0\n").unwrap();
    let out = kzwork(&["cumulants", "--config", cfg.to_str().unwrap(), "--v", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn predict_reports_log_correction() {
    let out = stdout(&kzwork(&["predict", "1", "1", "1", "3", "--critical"]));
    assert_eq!(out.trim(), "2 (log correction)");
    let out = stdout(&kzwork(&["predict", "1", "1", "1", "2"]));
    assert_eq!(num(out.trim()), 0.5);
}

#[test]
fn cfw_is_hermitian_and_vanishes_at_origin() {
    let out = stdout(&kzwork(&["cfw", "--v", "0.05", "--u-min", "-1", "--u-max", "1", "--u-points", "9"]));
    let (header, rows) = table(&out);
    assert_eq!(header[3], "branch_flags(-)");
    assert_eq!(rows.len(), 9);
    let mid = &rows[4];
    assert_eq!(num(&mid[0]), 0.0);
    assert_eq!(num(&mid[1]), 0.0);
    assert_eq!(num(&mid[2]), 0.0);
    assert_eq!(mid[3], "clean");
    for i in 0..4 {
        let (a, b) = (&rows[i], &rows[8 - i]);
        assert_eq!(num(&a[0]), -num(&b[0]));
        assert!((num(&a[1]) - num(&b[1])).abs() < 1e-10);
        assert!((num(&a[2]) + num(&b[2])).abs() < 1e-10);
    }
}

#[test]
fn rate_function_vanishes_at_the_mean() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("rate.csv");
    let out = stdout(&kzwork(&["rate-function", "--v", "0.05", "--w-points", "7", "--out", csv_path.to_str().unwrap()]));
    let mean: f64 = out.trim().rsplit(' ').next().unwrap().parse().unwrap();
    let (_, rows) = table(&std::fs::read_to_string(&csv_path).unwrap());
    let at_mean = rows.iter().find(|r| (num(&r[0]) - mean).abs() < 1e-9 * mean).expect("mean on grid");
    assert!(num(&at_mean[1]).abs() < 1e-10);
    assert!(rows.iter().all(|r| num(&r[1]) >= 0.0));
    assert!(!dir.path().join("rate.json").exists());
}

#[test]
fn dqpt_zeros_exist_for_full_quench() {
    let out = stdout(&kzwork(&["dqpt", "--v", "0.05", "--u-max", "5"]));
    let (_, rows) = table(&out);
    assert!(!rows.is_empty());
    for r in &rows {
        assert!((num(&r[1]) - 0.5).abs() < 1e-10);
        assert!(num(&r[5]) < 1e-8);
    }
}

#[test]
fn dqpt_needs_the_continuum() {
    assert_eq!(kzwork(&["dqpt", "--v", "0.05", "--N", "100"]).status.code(), Some(2));
}

#[test]
fn sweep_writes_csv_json_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let svg = dir.path().join("sweep.svg");
    stdout(&kzwork(&[
        "sweep",
        "--v-min",
        "0.01",
        "--v-max",
        "0.1",
        "--v-points",
        "6",
        "--out",
        out.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
    ]));
    let (header, rows) = table(&std::fs::read_to_string(&out).unwrap());
    assert_eq!(rows.len(), 6);
    assert_eq!(header[0], "v(energy)");
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);
    let fits = json["result"]["fits"].as_array().unwrap();
    assert!(fits.iter().all(|f| (f["power_law"]["exponent"].as_f64().unwrap() - 0.5).abs() < 0.02));
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

fn run_to(dir: &Path, name: &str, args: &[&str]) -> Vec<u8> {
    let path = dir.join(name);
    let mut full: Vec<&str> = args.to_vec();
    let p = path.to_str().unwrap().to_string();
    full.extend(["--out", &p]);
    stdout(&kzwork(&full));
    std::fs::read(&path).unwrap()
}

#[test]
fn output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["cumulants", "--v", "0.07", "--method", "ode", "--n-max", "4"];
    let a = run_to(dir.path(), "a.csv", &args);
    let b = run_to(dir.path(), "a.csv", &args);
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("# schema_version: 1\n"));
    assert!(text.contains("# config_sha256: "));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[protocol]\nlambda0 = -4.0\nlambda1 = 1.0\nv = 0.2\nmethod = \"lz_full\"\nn_max = 2\n").unwrap();
    let c = cfg.to_str().unwrap();
    let (_, from_file) = table(&stdout(&kzwork(&["cumulants", "--config", c])));
    assert_eq!(num(&from_file[0][0]), 0.2);
    let (_, overridden) = table(&stdout(&kzwork(&["cumulants", "--config", c, "--v", "0.1"])));
    assert_eq!(num(&overridden[0][0]), 0.1);
}

#[test]
fn finite_chain_ode_matches_continuum() {
    let args = |n: &'static str| ["cumulants", "--v", "0.1", "--method", "ode", "--n-max", "2", "--N", n];
    let (_, finite) = table(&stdout(&kzwork(&args("1000"))));
    let (_, cont) = table(&stdout(&kzwork(&args("continuum"))));
    for c in 1..finite[0].len() {
        let (a, b) = (num(&finite[0][c]), num(&cont[0][c]));
        assert!((a - b).abs() <= 1e-3 * b.abs().max(1e-3), "column {c}: {a} vs {b}");
    }
}
