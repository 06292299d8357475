use std::fs;
use std::process::{Command, Output};

fn polalign(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polalign")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn plan_matches_table_rows() {
    let o = polalign(&["plan", "--snr-db", "-10", "--mt", "32", "--epsilon", "0.60", "--alpha-sq", "0.5"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("L = 93\n"));
    let o = polalign(&["plan", "--snr-db", "2", "--mt", "64"]);
    assert!(stdout(&o).starts_with("L = 32\n"));
    let o = polalign(&["plan", "--snr-db", "-10", "--epsilon", "0.9999"]);
    assert!(stdout(&o).starts_with("L = 16\n"));
}

#[test]
fn plan_rejects_unreachable_target() {
    let o = polalign(&["plan", "--snr-db", "-10", "--epsilon", "1e-12", "--alpha-sq", "1e-9"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not reachable"));
}

#[test]
fn plan_appends_csv_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("plans.csv");
    let csv_arg = csv.to_str().unwrap();
    for snr in ["-10", "-8"] {
        assert!(polalign(&["plan", "--snr-db", snr, "--csv", csv_arg]).status.success());
    }
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("snr_db,mt,"));
    assert!(lines[1].starts_with("-10,32,") && lines[1].contains(",93,93,"));
    assert!(lines[2].starts_with("-8,32,") && lines[2].contains(",59,59,"));
}

#[test]
fn run_table1_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = polalign(&["run", "--preset", "table1", "--out", out, "--set", "snr_db=-10,-8"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("table1.csv")).unwrap();
    let l_final: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(6).unwrap()).collect();
    assert_eq!(l_final, ["93", "59", "129", "81"]);
    let manifest = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("override.0=snr_db=-10,-8\n"));
    assert!(manifest.contains("experiment.snr_db=-10,-8\n"));
}

#[test]
fn run_fig7_small() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = polalign(&["run", "--preset", "fig7", "--trials", "2000", "--set", "mt=32", "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("fig7.csv")).unwrap();
    assert!(csv.starts_with("mt,snr_db,l,x,metric,mean,ci95\n"));
    let ks: Vec<f64> = csv
        .lines()
        .filter(|l| l.contains(",ks_distance,"))
        .map(|l| l.split(',').nth(5).unwrap().parse().unwrap())
        .collect();
    assert_eq!(ks.len(), 2);
    assert!(ks.iter().all(|&k| k < 0.05));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = polalign(&["run", "--preset", "fig4", "--set", "bogus_key=1", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus_key"));
    assert_eq!(polalign(&["run", "--preset", "nope", "--out", out]).status.code(), Some(2));
    assert_eq!(polalign(&["run", "--out", out]).status.code(), Some(2));
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[experiment]\nunknown = 3\n").unwrap();
    assert_eq!(polalign(&["run", "--config", bad.to_str().unwrap(), "--out", out]).status.code(), Some(2));
}

#[test]
fn io_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = polalign(&["run", "--preset", "table1", "--out", blocker.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let missing = dir.path().join("missing.toml");
    assert_eq!(polalign(&["run", "--config", missing.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn validate_reports_per_check() {
    let o = polalign(&["validate", "welch"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("PASS gram(M_t=32, L=16)"));
    // L from M_t/2 to 3·M_t for M_t = 32 and 64
    assert!(text.trim_end().ends_with("welch: 242/242 checks passed"));
    let o = polalign(&["validate", "pmis"]);
    assert!(o.status.success());
    assert_eq!(polalign(&["validate", "nonsense"]).status.code(), Some(2));
}

#[test]
fn dump_codebook_csv() {
    let o = polalign(&["dump-codebook", "--mt", "16", "--level", "2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    // level 2 holds 2·M_t codewords of dimension M_t/2
    assert_eq!(lines.len(), 1 + 32);
    assert_eq!(lines[0].split(',').count(), 2 + 2 * 8);
}

#[test]
fn dump_trial_json_and_csv() {
    let o = polalign(&["dump-trial", "--preset", "fig4", "--mt", "32", "--snr-db", "-8", "--l", "32", "--trial", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["l"], 32);
    assert_eq!(v["observations"]["streams"].as_array().unwrap().len(), 4);
    assert_eq!(v["alignment"]["round1_scores"].as_array().unwrap().len(), 16);
    let ratio = v["metrics"]["bf_gain_ratio"].as_f64().unwrap();
    assert!(ratio > 0.0 && ratio <= 1.0);

    let o = polalign(&["dump-trial", "--preset", "fig4", "--mt", "32", "--snr-db", "-8", "--l", "32", "--format", "csv"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 1 + 4 * 32);

    let o = polalign(&["dump-trial", "--preset", "fig4", "--snr-db", "-7"]);
    assert_eq!(o.status.code(), Some(2));
}
