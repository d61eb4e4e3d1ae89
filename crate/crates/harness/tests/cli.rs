use std::path::Path;
use std::process::{Command, Output};

fn pct(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pct"))
        .args(args)
        .current_dir(cwd)
        .env_remove("PCT_OUT_DIR")
        .output()
        .unwrap()
}

const FAILING: &str = r#"
name = "impossible"
ticks = 50

[world]
kind = "thermostat"
ambient = 10.0
leak = 0.1
heater_gain = 0.1

[experiment]
kind = "loop"
reference = 20.0
pid = { kp = 2.0, ki = 0.5, kd = 0.0 }

[[expect]]
metric = "final_abs_error"
stat = "max"
op = "lt"
value = -1.0
"#;

#[test]
fn list_prints_every_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let out = pct(&["list"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 13);
    assert!(text.starts_with("thermostat_tracking"));
}

#[test]
fn run_writes_outputs_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = pct(&["run", "thermostat_tracking", "--out", "results"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("results/thermostat_tracking.trace.csv").exists());
    assert!(dir.path().join("results/thermostat_tracking.summary.json").exists());
}

#[test]
fn output_directory_defaults_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_pct"))
        .args(["run", "light_switch", "--seeds", "0..5"])
        .current_dir(dir.path())
        .env("PCT_OUT_DIR", "elsewhere")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "5 seeds cannot meet the 10000-seed mean");
    let summary = std::fs::read_to_string(dir.path().join("elsewhere/light_switch.summary.json")).unwrap();
    assert!(summary.contains("\"seeds\": 5"));
}

#[test]
fn single_seed_flag_overrides_the_range() {
    let dir = tempfile::tempdir().unwrap();
    pct(&["run", "disturbance_rejection", "--seed", "7"], dir.path());
    let trace = std::fs::read_to_string(dir.path().join("out/disturbance_rejection.trace.csv")).unwrap();
    assert!(trace.lines().skip(1).all(|l| l.contains(",s7,") || l.contains(",s7/") || l.starts_with("7,metrics,")));
}

#[test]
fn failed_expectation_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), FAILING).unwrap();
    let out = pct(&["run", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stdout).unwrap().contains("FAIL final_abs_error"));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("typo.toml"), FAILING.replace("leak =", "leek =")).unwrap();
    let out = pct(&["run", "typo.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("leek"));
    assert_eq!(pct(&["run", "no_such_scenario"], dir.path()).status.code(), Some(2));
    let out = pct(&["sweep", "thermostat_tracking", "--param", "experiment.pid.kq", "--values", "1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_prints_one_row_per_value_and_metric() {
    let dir = tempfile::tempdir().unwrap();
    let out = pct(
        &["sweep", "comm_self_as_other", "--param", "world.substitution_prob", "--values", "0,0.1,0.25"],
        dir.path(),
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("world.substitution_prob,metric,mean,stddev,min,max,pass\n"));
    let accuracy: Vec<&str> = text.lines().filter(|l| l.contains(",accuracy,")).collect();
    assert_eq!(accuracy.len(), 3);
    assert!(accuracy[0].starts_with("0,accuracy,1,"));
    assert_eq!(out.status.code(), Some(1), "noisy values miss the perfect-accuracy expectation");
}
