use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = r#"
[network]
nodes = 120

[simulation]
num_runs = 2
num_payments = 150

[probe]
balance_step = 400000

[game_oracle]
paths = 200
"#;

fn lnfee(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lnfee"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = lnfee(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn workspace() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    dir
}

fn read(path: PathBuf) -> String {
    fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn seed_is_required() {
    let dir = workspace();
    let out = lnfee(dir.path(), &["simulate", "--config", "small.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
}

#[test]
fn unknown_flag_is_rejected() {
    let dir = workspace();
    let out = lnfee(dir.path(), &["probe", "--seed", "1", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_files_fail_with_a_message() {
    let dir = workspace();
    let out = lnfee(
        dir.path(),
        &["simulate", "--seed", "1", "--config", "nope.toml"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.toml"));
    let out = lnfee(
        dir.path(),
        &["simulate", "--seed", "1", "--snapshot", "nope.json"],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn invalid_config_is_rejected() {
    let dir = workspace();
    fs::write(dir.path().join("bad.toml"), "[simulation]\nnum_run = 3\n").unwrap();
    let out = lnfee(
        dir.path(),
        &["simulate", "--seed", "1", "--config", "bad.toml"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("num_run"));

    fs::write(
        dir.path().join("zero.toml"),
        "[simulation]\npool_size = 1\n",
    )
    .unwrap();
    let out = lnfee(
        dir.path(),
        &["simulate", "--seed", "1", "--config", "zero.toml"],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_writes_metrics_and_records() {
    let dir = workspace();
    ok(
        dir.path(),
        &[
            "simulate",
            "--seed",
            "7",
            "--config",
            "small.toml",
            "--out",
            "out",
            "--model",
            "incentivized",
        ],
    );
    let metrics = read(dir.path().join("out/metrics.csv"));
    let mut lines = metrics.lines();
    assert_eq!(lines.next(), Some("run,SR,LR,F_I,F_S,F_I_prime,F_S_prime"));
    assert_eq!(lines.count(), 2);
    let records = read(dir.path().join("out/records.jsonl"));
    assert_eq!(records.lines().count(), 300);
    let first: serde_json::Value = serde_json::from_str(records.lines().next().unwrap()).unwrap();
    assert_eq!(first["run"], 0);
}

#[test]
fn flags_override_the_config() {
    let dir = workspace();
    ok(
        dir.path(),
        &[
            "simulate",
            "--seed",
            "7",
            "--config",
            "small.toml",
            "--runs",
            "3",
            "--payments",
            "20",
        ],
    );
    assert_eq!(read(dir.path().join("metrics.csv")).lines().count(), 4);
    assert_eq!(read(dir.path().join("records.jsonl")).lines().count(), 60);
}

#[test]
fn json_config_is_accepted() {
    let dir = workspace();
    let json = r#"{"network": {"nodes": 80}, "simulation": {"num_runs": 2, "num_payments": 10}}"#;
    fs::write(dir.path().join("c.json"), json).unwrap();
    // JSON is also picked up without the extension, after TOML fails.
    fs::write(dir.path().join("c.cfg"), json).unwrap();
    ok(
        dir.path(),
        &[
            "simulate", "--seed", "3", "--config", "c.json", "--out", "a",
        ],
    );
    ok(
        dir.path(),
        &["simulate", "--seed", "3", "--config", "c.cfg", "--out", "b"],
    );
    assert_eq!(read(dir.path().join("a/records.jsonl")).lines().count(), 20);
    assert_eq!(
        read(dir.path().join("a/metrics.csv")),
        read(dir.path().join("b/metrics.csv"))
    );
}

#[test]
fn compare_pairs_all_models() {
    let dir = workspace();
    ok(
        dir.path(),
        &["compare", "--seed", "7", "--config", "small.toml"],
    );
    let table = read(dir.path().join("comparison.csv"));
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("model,SR_mean,SR_std,LR_mean,LR_std,F_I_mean"));
    assert!(rows[1].starts_with("Original,"));
    assert!(rows[2].starts_with("ModGuaranteed,"));
    assert!(rows[3].starts_with("ModIncentivized,"));
    // The original model never pays non-refundable fees.
    assert!(rows[1].ends_with(",0,0,0,0"));
}

#[test]
fn probe_writes_cost_curve() {
    let dir = workspace();
    let args = [
        "probe",
        "--seed",
        "1",
        "--capacity",
        "4600000",
        "--timelock",
        "144",
        "--risk",
        "1.5e-7",
    ];
    ok(
        dir.path(),
        &[&args[..], &["--model", "guaranteed", "--out", "g"]].concat(),
    );
    ok(
        dir.path(),
        &[&args[..], &["--model", "original", "--out", "o"]].concat(),
    );
    let guaranteed = read(dir.path().join("g/cost_curve.csv"));
    assert_eq!(
        guaranteed.lines().next(),
        Some("B,iterations,cost_sat,window_mean_cost")
    );
    let costs: Vec<u64> = guaranteed
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(costs.len(), 93);
    assert!(costs.iter().sum::<u64>() > 0);
    let original = read(dir.path().join("o/cost_curve.csv"));
    assert!(original
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(2) == Some("0")));
}

#[test]
fn run_mode_matches_subcommand() {
    let dir = workspace();
    ok(
        dir.path(),
        &[
            "probe",
            "--seed",
            "5",
            "--config",
            "small.toml",
            "--out",
            "a",
        ],
    );
    ok(
        dir.path(),
        &[
            "run",
            "--mode",
            "probe",
            "--seed",
            "5",
            "--config",
            "small.toml",
            "--out",
            "b",
        ],
    );
    assert_eq!(
        read(dir.path().join("a/cost_curve.csv")),
        read(dir.path().join("b/cost_curve.csv"))
    );
}

#[test]
fn game_oracle_and_trace_outputs() {
    let dir = workspace();
    let out = ok(
        dir.path(),
        &["game-oracle", "--seed", "2", "--config", "small.toml"],
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("0 mismatches"));
    let table = read(dir.path().join("game_oracle.csv"));
    assert!(table.lines().skip(1).all(|l| {
        let cols: Vec<&str> = l.split(',').collect();
        cols[9] == cols[10]
    }));

    fs::write(
        dir.path().join("bribe.toml"),
        "[htlc2]\nattempts = 3\nscript = { script = \"bribed_successor\", at = 2 }\n",
    )
    .unwrap();
    let out = ok(
        dir.path(),
        &["htlc2-trace", "--seed", "2", "--config", "bribe.toml"],
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("closed channels: [1]"));
    let trace = read(dir.path().join("htlc2_trace.jsonl"));
    let events: Vec<serde_json::Value> = trace
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(events.iter().any(|e| e["event"] == "channel_closed"));
    assert!(events.iter().any(|e| e["event"] == "main_rejected"));
}

#[test]
fn generated_snapshot_reproduces_the_implicit_network() {
    let dir = workspace();
    ok(
        dir.path(),
        &["generate-snapshot", "--seed", "9", "--config", "small.toml"],
    );
    ok(
        dir.path(),
        &[
            "simulate",
            "--seed",
            "9",
            "--config",
            "small.toml",
            "--snapshot",
            "snapshot.json",
            "--out",
            "a",
        ],
    );
    ok(
        dir.path(),
        &[
            "simulate",
            "--seed",
            "9",
            "--config",
            "small.toml",
            "--out",
            "b",
        ],
    );
    assert_eq!(
        read(dir.path().join("a/records.jsonl")),
        read(dir.path().join("b/records.jsonl"))
    );
}

#[test]
fn identical_invocations_are_byte_identical() {
    let dir = workspace();
    let runs: [(&[&str], &[&str]); 5] = [
        (&["simulate"], &["metrics.csv", "records.jsonl"]),
        (&["compare"], &["comparison.csv"]),
        (&["probe"], &["cost_curve.csv"]),
        (&["game-oracle"], &["game_oracle.csv"]),
        (&["htlc2-trace"], &["htlc2_trace.jsonl"]),
    ];
    for (command, files) in runs {
        for out in ["first", "second"] {
            ok(
                dir.path(),
                &[
                    command,
                    &["--seed", "11", "--config", "small.toml", "--out", out],
                ]
                .concat(),
            );
        }
        for file in files {
            let a = fs::read(dir.path().join("first").join(file)).unwrap();
            let b = fs::read(dir.path().join("second").join(file)).unwrap();
            assert!(!a.is_empty(), "{file} is empty");
            assert_eq!(a, b, "{file} differs between identical runs");
        }
    }
    // A different seed changes the simulation.
    ok(
        dir.path(),
        &[
            "simulate",
            "--seed",
            "12",
            "--config",
            "small.toml",
            "--out",
            "third",
        ],
    );
    assert_ne!(
        fs::read(dir.path().join("first/records.jsonl")).unwrap(),
        fs::read(dir.path().join("third/records.jsonl")).unwrap()
    );
}
