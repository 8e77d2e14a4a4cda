use std::path::Path;
use std::process::{Command, Output};

use swipt_cli::CliError;
use swipt_core::report::{read_csv, CSV_HEADER};
use swipt_core::SimError;

fn sim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swipt-sim"))
        .args(args)
        .current_dir(dir)
        .env_remove(swipt_cli::OUT_DIR_ENV)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_one_row_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["run", "--policy", "srs", "--n", "5", "--eta", "0.5", "--rate", "1.0", "--messages", "3000"];
    let o = sim(dir.path(), &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let first = std::fs::read(dir.path().join("results/run.csv")).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    let lines: Vec<&str> = text.split_terminator('\n').collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], CSV_HEADER);

    assert!(sim(dir.path(), &args).status.success());
    assert_eq!(std::fs::read(dir.path().join("results/run.csv")).unwrap(), first);
    assert!(dir.path().join("results/run.manifest.json").exists());
}

#[test]
fn sweep_rows_follow_axis_order() {
    let dir = tempfile::tempdir().unwrap();
    let o = sim(dir.path(), &["sweep", "--n", "5", "--eta", "0.5", "--rates", "0.5,1,1.5,2", "--messages", "2000"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_csv(std::fs::File::open(dir.path().join("results/sweep.csv")).unwrap()).unwrap();
    let rates: Vec<f64> = rows.iter().map(|r| r.rate).collect();
    assert_eq!(rates, vec![0.5, 1.0, 1.5, 2.0]);
    assert!(rows.windows(2).all(|w| w[0].p_out <= w[1].p_out));
}

#[test]
fn validation_errors_exit_one_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let o = sim(dir.path(), &["run", "--policy", "mrs"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("m required for mrs"));

    let o = sim(dir.path(), &["run", "--eta", "1.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("eta"));

    let o = sim(dir.path(), &["run", "--m", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("m requires the mrs policy"));

    std::fs::write(dir.path().join("bad.cfg"), "n = 4\nlambda = 2\n").unwrap();
    let o = sim(dir.path(), &["run", "--config", "bad.cfg"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("lambda"));

    let o = sim(dir.path(), &["run", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.cfg"), "# scenario\npolicy = mrs\nm = 2\nn = 4\neta = 0.2\nmessages = 1000\n")
        .unwrap();
    let o = sim(dir.path(), &["run", "--config", "s.cfg", "--eta", "0.3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_csv(std::fs::File::open(dir.path().join("results/run.csv")).unwrap()).unwrap();
    assert_eq!((rows[0].n, rows[0].m, rows[0].eta), (4, Some(2), 0.3));
}

#[test]
fn opt_m_prints_m_star() {
    let dir = tempfile::tempdir().unwrap();
    let o = sim(dir.path(), &["opt-m", "--n", "10", "--eta", "0.05", "--rate", "1.0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let m_star: usize = out
        .lines()
        .find_map(|l| l.strip_prefix("m_star = "))
        .expect("m_star line")
        .parse()
        .unwrap();
    assert!((1..=10).contains(&m_star));
    let rows = read_csv(std::fs::File::open(dir.path().join("results/opt-m.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 10);
    let best = rows.iter().map(|r| r.p_out).fold(f64::INFINITY, f64::min);
    assert_eq!(rows.iter().find(|r| r.p_out == best).unwrap().m, Some(m_star));
}

#[test]
fn compare_reports_ordering() {
    let dir = tempfile::tempdir().unwrap();
    let o = sim(dir.path(), &["compare", "--n", "10", "--eta", "0.05", "--messages", "4000", "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("MRS(1) <= SRS at every rate: true"));
    let doc: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("results/compare.json")).unwrap()).unwrap();
    assert_eq!(doc["mrs_single_beats_srs"], true);
    assert_eq!(doc["rows"].as_array().unwrap().len(), 21);
    assert_eq!(doc["manifest"]["command"], "compare");
}

#[test]
fn trace_replays_and_tampering_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    let o = sim(
        dir.path(),
        &["run", "--policy", "mrs", "--m", "2", "--eta", "0.1", "--messages", "300", "--trace", "trace.log"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let o = sim(dir.path(), &["replay", "trace.log"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let text = std::fs::read_to_string(dir.path().join("trace.log")).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut rec: serde_json::Value = serde_json::from_str(&lines[11]).unwrap();
    let b = rec["batteries"][0].as_f64().unwrap();
    rec["batteries"][0] = serde_json::json!(b + 1e-6);
    lines[11] = rec.to_string();
    std::fs::write(dir.path().join("tampered.log"), lines.join("\n") + "\n").unwrap();
    let o = sim(dir.path(), &["replay", "tampered.log"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("slot 10"), "{}", stderr(&o));
}

#[test]
fn rerun_from_manifest_reproduces_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = sim(dir.path(), &["sweep", "--policy", "mrs", "--ms", "1,3", "--rates", "0.5,1", "--messages", "1500"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let original = std::fs::read(dir.path().join("results/sweep.csv")).unwrap();
    let o = sim(dir.path(), &["rerun", "results/sweep.manifest.json", "--out", "again"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(dir.path().join("again/sweep.csv")).unwrap(), original);
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_swipt-sim"))
        .args(["run", "--messages", "500"])
        .current_dir(dir.path())
        .env(swipt_cli::OUT_DIR_ENV, "custom")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("custom/run.csv").exists());
}

#[test]
fn unwritable_destination_fails() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("blocker"), "not a directory").unwrap();
    let o = sim(dir.path(), &["run", "--messages", "500", "--out", "blocker/sub"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn invariant_failures_map_to_exit_two() {
    let e: CliError = SimError::Invariant { slot: 3, detail: "x".into() }.into();
    assert_eq!(e.exit_code(), 2);
    let e: CliError = swipt_core::ConfigError::new("eta", "bad").into();
    assert_eq!(e.exit_code(), 1);
}
