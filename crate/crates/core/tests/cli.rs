use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn v2x(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_v2x-edge"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_is_deterministic_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = v2x(&["run", "--seed", "7", "--override", "run.t_end=300", "--output", path_str(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let first = fs::read(&a).unwrap();
    assert_eq!(first, fs::read(&b).unwrap());
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("slots,seed,avg_queue_tasks"));
    assert!(text.lines().nth(1).unwrap().starts_with("300,7,"));
}

#[test]
fn no_arrivals_means_nothing_to_do() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.csv");
    let o = v2x(&[
        "run",
        "--override",
        "compute.arrival_rate=0",
        "--override",
        "run.t_end=200",
        "--output",
        path_str(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(row[0], 200.0);
    assert!(row[2..].iter().all(|&v| v == 0.0), "{row:?}");
}

#[test]
fn trace_has_one_row_per_slot() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let o = v2x(&["run", "--override", "run.t_end=50", "--trace", path_str(&trace)]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(&trace).unwrap().lines().count(), 51);
}

#[test]
fn unknown_axis_is_a_config_error() {
    let o = v2x(&["sweep", "--axis", "bandwidth", "--values", "1,2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bandwidth"));
}

#[test]
fn bad_override_is_a_config_error() {
    let o = v2x(&["run", "--override", "no_such_key=1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = v2x(&["run", "--override", "compute.arrival_rate=-1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn eta_sweep_writes_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = v2x(&[
        "sweep",
        "--axis",
        "eta",
        "--values",
        "0,1e13,1e14,1e15",
        "--override",
        "run.t_end=200",
        "--output",
        path_str(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("axis_value,"));
    let values: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(values, [0.0, 1e13, 1e14, 1e15]);
}

#[test]
fn interference_sweep_reports_frontier() {
    let o = v2x(&[
        "sweep",
        "--axis",
        "interference_temperature_db",
        "--values",
        "0,15,30",
        "--override",
        "run.t_end=100",
    ]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("frontier inversions"));
}

#[test]
fn show_config_output_loads_back() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("effective.toml");
    let o = v2x(&["show-config", "--override", "control.eta=5e13", "--seed", "99"]);
    assert!(o.status.success());
    fs::write(&file, &o.stdout).unwrap();
    let again = v2x(&["show-config", "--config", path_str(&file)]);
    assert!(again.status.success(), "{}", String::from_utf8_lossy(&again.stderr));
    assert_eq!(o.stdout, again.stdout);
}

#[test]
fn interference_cap_check_passes_on_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cap.txt");
    let o = v2x(&["validate-lemma2", "--draws", "2000", "--output", path_str(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(fs::read_to_string(&out).unwrap().contains("result: PASS"));
}
