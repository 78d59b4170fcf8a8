//! End-to-end checks of the `parascope` binary.

use std::path::Path;
use std::process::{Command, Output};

fn parascope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parascope"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

#[test]
fn reproduce_tables_run_and_match_published_values() {
    for table in ["models", "hardware", "speed", "memory", "clusters"] {
        let out = parascope(&["reproduce", table]);
        assert!(out.status.success(), "reproduce {table} failed: {out:?}");
        assert!(!stdout(&out).is_empty());
    }

    let models = stdout(&parascope(&["reproduce", "models"]));
    assert!(models.contains("X_160"));
    assert!(models.contains("GPT-3"));

    let hardware = stdout(&parascope(&["reproduce", "hardware"]));
    assert!(hardware.contains("NVLink"));
    assert!(hardware.contains("4.8429e2"), "{hardware}");

    let speed = stdout(&parascope(&["reproduce", "speed"]));
    assert!(speed.contains("38640"), "3d improved row:\n{speed}");
    assert!(speed.contains("6.8 d"));
}

#[test]
fn reproduce_rejects_unknown_table() {
    let out = parascope(&["reproduce", "prices"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn analyze_named_plans() {
    let out = parascope(&["analyze", "--x", "160", "--plan", "3d-improved"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("38640"), "{text}");
    assert!(text.contains("6.8 d"));

    let out = parascope(&["analyze", "--x", "160", "--plan", "none"]);
    let text = stdout(&out);
    assert!(text.contains("632 y") || text.contains("630 y"), "{text}");
    assert!(
        text.contains("61.3 K") || text.contains("61.2 K"),
        "offloadable memory:\n{text}"
    );
}

#[test]
fn analyze_explicit_plan_and_errors() {
    let out = parascope(&[
        "analyze", "--x", "160", "--method", "improved", "--nb", "483", "--nl", "5", "--na", "16",
        "--nmu", "5", "--bmu", "1",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("0.88"));

    assert_eq!(
        parascope(&["analyze", "--x", "160", "--plan", "warp"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        parascope(&["analyze", "--x", "160", "--profile", "h100"])
            .status
            .code(),
        Some(1),
        "unknown profile must be an input error"
    );
    assert_eq!(parascope(&["analyze", "--x", "3"]).status.code(), Some(1));
}

#[test]
fn optimize_tiny_model_stays_on_one_node() {
    let out = parascope(&[
        "optimize",
        "--x",
        "2",
        "--strategy",
        "improved",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let gpus: u64 = text
        .lines()
        .nth(1)
        .and_then(|line| line.split(',').nth(6))
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| panic!("no plan row in:\n{text}"));
    assert!(gpus <= 16, "X_2 should fit one node, got {gpus} devices");
}

#[test]
fn optimize_deadline_matches_reference_row() {
    let out = parascope(&[
        "optimize",
        "--x",
        "160",
        "--strategy",
        "improved",
        "--deadline-days",
        "180",
        "--max-na",
        "1",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let gpus: f64 = text
        .lines()
        .nth(1)
        .and_then(|line| line.split(',').nth(6))
        .and_then(|v| v.parse().ok())
        .unwrap();
    assert!((gpus - 1310.0).abs() / 1310.0 <= 0.10, "gpus = {gpus}");
}

#[test]
fn optimize_strict_signals_infeasibility() {
    // A 1-day deadline on one GPU is impossible.
    let out = parascope(&[
        "optimize",
        "--x",
        "160",
        "--strategy",
        "improved",
        "--deadline-days",
        "1",
        "--max-gpus",
        "1",
        "--strict",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_reports_bubble_idle_fractions() {
    let out = parascope(&[
        "simulate",
        "--x",
        "8",
        "--nl",
        "4",
        "--nmu",
        "8",
        "--schedule",
        "std-pipe",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let idle: f64 = text
        .lines()
        .nth(1)
        .and_then(|line| line.split(',').nth(2))
        .and_then(|v| v.parse().ok())
        .unwrap();
    assert!((idle - 3.0 / 11.0).abs() <= 0.01, "idle = {idle}");

    let out = parascope(&[
        "simulate",
        "--x",
        "8",
        "--nl",
        "1",
        "--nmu",
        "4",
        "--schedule",
        "std-pipe",
        "--format",
        "csv",
    ]);
    let text = stdout(&out);
    let idle: f64 = text
        .lines()
        .nth(1)
        .and_then(|line| line.split(',').nth(2))
        .and_then(|v| v.parse().ok())
        .unwrap();
    assert!(idle <= 1e-9, "single stage should not idle, got {idle}");
}

#[test]
fn simulate_writes_trace_records() {
    let dir = std::env::temp_dir().join("parascope-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let trace = dir.join("trace.csv");
    let out = parascope(&[
        "simulate",
        "--x",
        "8",
        "--nl",
        "4",
        "--nmu",
        "8",
        "--schedule",
        "modular-pipe",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&trace).unwrap();
    assert!(text.starts_with("schedule,device,stream,kind,layer,micro_batch,start_s,end_s"));
    assert!(text.lines().count() > 8 * 8);
    std::fs::remove_file(&trace).ok();
}

#[test]
fn outputs_are_deterministic() {
    let first = stdout(&parascope(&["reproduce", "speed", "--format", "csv"]));
    let second = stdout(&parascope(&["reproduce", "speed", "--format", "csv"]));
    assert_eq!(first, second);
}

#[test]
fn scenario_config_file_drives_optimize() {
    let dir = std::env::temp_dir().join("parascope-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let config = dir.join("scenario.toml");
    std::fs::write(
        &config,
        r#"
strategies = ["improved"]

[model]
x = 160

[constraints]
deadline_days = 32
"#,
    )
    .unwrap();
    let out = parascope(&[
        "optimize",
        "--config",
        config.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert!(out.status.success(), "{out:?}");
    let text = stdout(&out);
    let gpus: f64 = text
        .lines()
        .nth(1)
        .and_then(|line| line.split(',').nth(6))
        .and_then(|v| v.parse().ok())
        .unwrap();
    assert!((gpus - 7400.0).abs() / 7400.0 <= 0.10, "gpus = {gpus}");
    std::fs::remove_file(&config).ok();

    assert_eq!(
        parascope(&[
            "optimize",
            "--config",
            Path::new("/nonexistent.toml").to_str().unwrap()
        ])
        .status
        .code(),
        Some(1)
    );
}

#[test]
fn sweep_single_point_matches_optimize() {
    let sweep = stdout(&parascope(&[
        "sweep",
        "--x",
        "160",
        "--strategy",
        "improved",
        "--format",
        "csv",
    ]));
    let optimize = stdout(&parascope(&[
        "optimize",
        "--x",
        "160",
        "--strategy",
        "improved",
        "--format",
        "csv",
    ]));
    let sweep_gpus = sweep
        .lines()
        .nth(1)
        .and_then(|l| l.split(',').nth(3))
        .unwrap()
        .to_string();
    let opt_gpus = optimize
        .lines()
        .nth(1)
        .and_then(|l| l.split(',').nth(6))
        .unwrap()
        .to_string();
    assert_eq!(sweep_gpus, opt_gpus);
}

#[test]
fn sweep_rejects_bad_ranges() {
    assert_eq!(
        parascope(&["sweep", "--x-range", "512..8"]).status.code(),
        Some(1)
    );
    assert_eq!(parascope(&["sweep"]).status.code(), Some(1));
}
