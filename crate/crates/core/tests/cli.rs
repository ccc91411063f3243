//! End-to-end runs of the `symld` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const POINTS: &str = r#"[{"id": "a", "coords": [0.0]}, {"id": "b", "coords": [1.0]}]"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_symld"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn fixtures(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let mu = write(
        dir,
        "mu.json",
        &format!(r#"{{"points": {POINTS}, "weights": {{"a": {{"num": 1, "den": 2}}, "b": {{"num": 1, "den": 2}}}}}}"#),
    );
    let target = write(
        dir,
        "target.json",
        &format!(r#"{{"points": {POINTS}, "weights": {{"a,a": 0.45, "a,b": 0.05, "b,a": 0.05, "b,b": 0.45}}}}"#),
    );
    let sample = write(dir, "x.json", &format!(r#"{{"points": {POINTS}, "sample": ["a", "a", "b", "b"]}}"#));
    (mu, target, sample)
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn error_body(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stderr).expect("JSON error body on stderr")
}

#[test]
fn exact_ld_reports_rate_gap() {
    let dir = tempfile::tempdir().unwrap();
    let (mu, target, _) = fixtures(dir.path());
    let o = run(bin().args(["exact-ld", "--n", "100"]).arg("--mu").arg(&mu).arg("--target").arg(&target));
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "n,m_0_0,m_0_1,m_1_0,m_1_1,log_prob_exact,rate_gap");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..5], &["100", "45", "5", "5", "45"]);
    let gap: f64 = row[6].parse().unwrap();
    assert!(gap > 0.0 && gap <= 9.0 * 101f64.ln() / 100.0);
    assert!(!text.contains('\r'));
}

#[test]
fn malformed_config_leaves_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", r#"{"schema_version": 1, "seed": 1, "command": {"verify": {}}, "oops": true}"#);
    let out = dir.path().join("result.csv");
    let o = run(bin().arg("--config").arg(&cfg).arg("--out").arg(&out));
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_body(&o)["error"], "config");
    assert!(!out.exists());
    let garbage = write(dir.path(), "garbage.json", "{ not json");
    let o = run(bin().arg("--config").arg(&garbage).arg("--out").arg(&out));
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn same_seed_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (mu, _, _) = fixtures(dir.path());
    let layer = format!("iid:{}", mu.display());
    let mut outs = Vec::new();
    for (i, seed) in ["11", "11", "12"].iter().enumerate() {
        let out = dir.path().join(format!("s{i}.csv"));
        let o = run(bin().args(["sample", "--n", "6", "--draws", "50", "--layer1", &layer, "--seed", seed]).arg("--out").arg(&out));
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outs.push(std::fs::read(&out).unwrap());
        assert!(dir.path().join(format!("s{i}.csv.record.json")).exists());
    }
    assert_eq!(outs[0], outs[1]);
    assert_ne!(outs[0], outs[2]);
    let text = String::from_utf8(outs[0].clone()).unwrap();
    assert!(text.starts_with("draw_id,p_0_0,p_0_1,p_1_0,p_1_1\n"));
    for line in text.lines().skip(1) {
        let cells: Vec<u64> = line.split(',').skip(1).map(|c| c.parse().unwrap()).collect();
        assert_eq!(cells.iter().sum::<u64>(), 6);
    }
}

#[test]
fn config_file_and_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let (mu, target, _) = fixtures(dir.path());
    let cfg = serde_json::json!({
        "schema_version": 1,
        "format": "json",
        "command": {"exact-ld": {"mu": mu, "n": [50, 100], "target": target}},
    });
    let cfg = write(dir.path(), "cfg.json", &cfg.to_string());
    let o = run(bin().arg("--config").arg(&cfg));
    assert!(o.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["result"]["rows"].as_array().unwrap().len(), 2);
    assert!(doc["record"]["inputs_digest"].as_str().unwrap().len() == 64);
    let o = run(bin().arg("--config").arg(&cfg).args(["--format", "csv"]));
    assert!(stdout(&o).starts_with("n,"));
}

#[test]
fn seed_is_required_for_random_commands() {
    let dir = tempfile::tempdir().unwrap();
    let (_, _, sample) = fixtures(dir.path());
    let o = run(bin().args(["sample", "--n", "4", "--layer1"]).arg(format!("fixed:{}", sample.display())));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn caps_use_their_own_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let (mu, target, _) = fixtures(dir.path());
    let o = run(bin().args(["exact-ld", "--n", "1000"]).arg("--mu").arg(&mu).arg("--target").arg(&target));
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_body(&o)["exit_code"], 3);
}

#[test]
fn rate_and_transport_commands() {
    let dir = tempfile::tempdir().unwrap();
    let (mu, target, sample) = fixtures(dir.path());
    let o = run(bin().args(["rate", "--rate", "I"]).arg("--nu").arg(&target).arg("--mu").arg(&mu));
    let v: f64 = stdout(&o).lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    let closed = 2f64.ln() + 0.9 * 0.9f64.ln() + 0.1 * 0.1f64.ln();
    assert!((v - closed).abs() < 1e-12);
    let o = run(bin().args(["transport", "wasserstein"]).arg("--rho").arg(&target).arg("--nu").arg(&target));
    assert_eq!(stdout(&o), "distance\n0\n");
    let atoms = write(
        dir.path(),
        "atoms.json",
        &format!(r#"{{"points": {POINTS}, "atoms": [["a","a"],["a","b"],["b","a"],["b","b"]]}}"#),
    );
    let o = run(bin().args(["transport", "project", "--seed", "3", "--format", "json"]).arg("--atoms").arg(&atoms).arg("--sample").arg(&sample));
    assert!(o.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["result"]["distance"], 0.0);
}

#[test]
fn project_emits_minimizer_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let (mu, _, _) = fixtures(dir.path());
    let obs = write(dir.path(), "obs.json", r#"[{"g": [1, 0, 0, 1], "target": 0.9}]"#);
    let o = run(bin().args(["project", "--format", "json"]).arg("--mu").arg(&mu).arg("--observables").arg(&obs));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let r = &doc["result"];
    let closed = 2f64.ln() + 0.9 * 0.9f64.ln() + 0.1 * 0.1f64.ln();
    assert!((r["value"].as_f64().unwrap() - closed).abs() < 1e-8);
    assert_eq!(r["certified"], true);
    assert!(r["residuals"]["marginal_l1"].as_f64().unwrap() < 1e-10);
    let infeasible = write(dir.path(), "inf.json", r#"[{"g": [1, 0, 0, 1], "target": 1.5}]"#);
    let o = run(bin().arg("project").arg("--mu").arg(&mu).arg("--observables").arg(&infeasible));
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_body(&o)["error"], "infeasible");
}

#[test]
fn bridge_rows() {
    let dir = tempfile::tempdir().unwrap();
    let (mu, _, _) = fixtures(dir.path());
    let o = run(bin()
        .args(["bridge", "--seed", "5", "--beta", "1", "--grid", "4", "--n", "8,16", "--draws", "500", "--phi", "quad:1@0.5"])
        .arg("--layer1")
        .arg(format!("iid:{}", mu.display())));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("n,lambda_n_exact,lambda_n_mc,lambda_limit,gap,stderr\n"));
    assert_eq!(text.lines().count(), 3);
    let o = run(bin()
        .args(["bridge", "--seed", "5", "--beta", "1", "--grid", "4", "--n", "8", "--draws", "10", "--phi", "quad:1@0.3"])
        .arg("--layer1")
        .arg(format!("iid:{}", mu.display())));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_oracle_and_fault_injection() {
    let o = run(bin().args(["verify", "--suite", "oracle", "--seed", "1"]));
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.lines().skip(1).all(|l| l.split(',').nth(1) == Some("true")), "{text}");
    let o = run(bin().args(["verify", "--suite", "oracle", "--seed", "1", "--inject-fault"]));
    assert!(o.status.success());
    let text = stdout(&o);
    let first = text.lines().nth(1).unwrap();
    assert!(first.starts_with("1,false"), "{text}");
}
