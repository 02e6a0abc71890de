//! End-to-end tests of the compiled `journeys` binary.

use std::path::Path;
use std::process::{Command, Output};

fn journeys() -> Command {
    Command::new(env!("CARGO_BIN_EXE_journeys"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// A walk scenario with an idle lead and tail; detected as one journey.
fn write_walk_scenario(path: &Path) {
    std::fs::write(
        path,
        r#"{
  "start_lat": 35.9,
  "start_lon": 14.45,
  "noise": {"sigma_deg": 1.2e-5, "canyon_prob": 0.0, "canyon_mag_deg": 3e-4},
  "legs": [
    {"mode": "idle", "duration_s": 180.0},
    {"mode": "walk", "duration_s": 600.0, "speed_mps": 1.5, "heading_deg": 45.0},
    {"mode": "idle", "duration_s": 400.0}
  ]
}"#,
    )
    .unwrap();
}

fn synth_trace(dir: &Path, scenario: &Path, seed: u64) {
    run_ok(journeys().args([
        "synth",
        "--scenario",
        scenario.to_str().unwrap(),
        "--seed",
        &seed.to_string(),
        "--out",
        dir.to_str().unwrap(),
    ]));
}

#[test]
fn segment_golden_walk_yields_one_journey_and_validates_fully() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = tmp.path().join("walk.json");
    write_walk_scenario(&scenario);
    let trace_dir = tmp.path().join("trace");
    synth_trace(&trace_dir, &scenario, 7);
    assert!(trace_dir.join("gps.csv").exists());
    assert!(trace_dir.join("accel.csv").exists());
    assert!(trace_dir.join("diary.csv").exists());

    let journeys_path = tmp.path().join("journeys.json");
    let spool_path = tmp.path().join("segments.jsonl");
    run_ok(journeys().args([
        "segment",
        trace_dir.to_str().unwrap(),
        "--out",
        journeys_path.to_str().unwrap(),
        "--spool",
        spool_path.to_str().unwrap(),
    ]));
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&journeys_path).unwrap()).unwrap();
    assert_eq!(parsed.as_array().unwrap().len(), 1);
    let journey = &parsed[0];
    assert!(journey["path_length_m"].as_f64().unwrap() > 500.0);
    assert!(!spool_path.to_str().unwrap().is_empty());
    let spool_text = std::fs::read_to_string(&spool_path).unwrap();
    assert!(spool_text.lines().count() >= 1);
    let first: serde_json::Value = serde_json::from_str(spool_text.lines().next().unwrap()).unwrap();
    assert!(first.get("cause").is_some());

    // The detected journey fully covers the diary entry.
    let report_path = tmp.path().join("report.json");
    run_ok(journeys().args([
        "validate",
        "--journeys",
        journeys_path.to_str().unwrap(),
        "--diary",
        trace_dir.join("diary.csv").to_str().unwrap(),
        "--out",
        report_path.to_str().unwrap(),
    ]));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["full_fraction"].as_f64().unwrap(), 1.0);
}

#[test]
fn segment_missing_trace_fails_with_diagnostic() {
    let out = journeys().args(["segment", "/nonexistent/trace"]).output().unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("error"), "stderr: {stderr}");
}

#[test]
fn cli_outputs_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = tmp.path().join("walk.json");
    write_walk_scenario(&scenario);
    let mut outputs = Vec::new();
    for run in 0..2 {
        let trace_dir = tmp.path().join(format!("trace{run}"));
        synth_trace(&trace_dir, &scenario, 21);
        let out_path = tmp.path().join(format!("journeys{run}.json"));
        run_ok(journeys().args([
            "segment",
            trace_dir.to_str().unwrap(),
            "--out",
            out_path.to_str().unwrap(),
        ]));
        outputs.push(std::fs::read(&out_path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1], "same seed and flags must be byte-identical");
}

#[test]
fn battery_aware_segment_timeline_feeds_simulation() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = tmp.path().join("walk.json");
    write_walk_scenario(&scenario);
    let trace_dir = tmp.path().join("trace");
    synth_trace(&trace_dir, &scenario, 9);

    let timeline = tmp.path().join("timeline.csv");
    run_ok(journeys().args([
        "segment",
        trace_dir.to_str().unwrap(),
        "--battery-aware",
        "--out",
        tmp.path().join("j.json").to_str().unwrap(),
        "--timeline",
        timeline.to_str().unwrap(),
    ]));
    let tl_text = std::fs::read_to_string(&timeline).unwrap();
    assert!(tl_text.starts_with("t_s,state\n"));
    assert!(tl_text.contains("gps"));

    let curve = tmp.path().join("curve.csv");
    run_ok(journeys().args([
        "simulate-battery",
        "--timeline",
        timeline.to_str().unwrap(),
        "--profile",
        "s2",
        "--out",
        curve.to_str().unwrap(),
    ]));
    let curve_text = std::fs::read_to_string(&curve).unwrap();
    let mut levels = curve_text.lines().skip(1).map(|l| {
        l.split(',').nth(1).unwrap().parse::<f64>().unwrap()
    });
    let first = levels.next().unwrap();
    let last = levels.last().unwrap();
    assert_eq!(first, 100.0);
    assert!(last < first, "battery must discharge");
}

#[test]
fn simulate_battery_fit_mode_reports_rate() {
    let tmp = tempfile::tempdir().unwrap();
    let battery = tmp.path().join("battery.csv");
    let mut text = String::from("t_ms,level_pct\n");
    for i in 0..200i64 {
        let h = i as f64 * 0.25;
        text.push_str(&format!("{},{}\n", i * 900_000, 100.0 - 2.17 * h));
    }
    std::fs::write(&battery, text).unwrap();
    let out_path = tmp.path().join("fit.csv");
    // --timeline is required by the parser but unused in fit mode.
    let tl = tmp.path().join("unused.csv");
    std::fs::write(&tl, "t_s,state\n0,gps\n10,off\n").unwrap();
    run_ok(journeys().args([
        "simulate-battery",
        "--timeline",
        tl.to_str().unwrap(),
        "--profile",
        "s2",
        "--fit",
        battery.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]));
    let text = std::fs::read_to_string(&out_path).unwrap();
    let rate: f64 =
        text.lines().nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
    assert!((rate - 2.17).abs() < 1e-6, "fitted {rate}");
}

#[test]
fn tune_finds_separating_params_on_tiny_corpus() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("runs");
    std::fs::create_dir(&dir).unwrap();
    let mut labels = String::from("file,label,onset_t_ms\n");
    for i in 0..4 {
        let mut motion = String::from("t_ms,ax,ay,az\n");
        let mut still = String::from("t_ms,ax,ay,az\n");
        for k in 0..80i64 {
            // Deviation ~4 m/s^2 for motion, ~0.05 for still.
            motion.push_str(&format!("{},0,0,{}\n", k * 200, 9.81 + 4.0 + (k % 3) as f64 * 0.1));
            still.push_str(&format!("{},0,0,{}\n", k * 200, 9.81 + 0.05));
        }
        std::fs::write(dir.join(format!("m{i}.csv")), motion).unwrap();
        std::fs::write(dir.join(format!("s{i}.csv")), still).unwrap();
        labels.push_str(&format!("m{i}.csv,motion,0\n"));
        labels.push_str(&format!("s{i}.csv,still,\n"));
    }
    std::fs::write(dir.join("labels.csv"), labels).unwrap();

    let out_path = tmp.path().join("best.json");
    run_ok(journeys().args([
        "tune",
        "--runs",
        dir.to_str().unwrap(),
        "--epochs",
        "400",
        "--seed",
        "3",
        "--out",
        out_path.to_str().unwrap(),
    ]));
    let best: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    let p = &best["params"];
    let n1 = p["first_len"].as_u64().unwrap();
    assert!((1..=20).contains(&n1));
    assert_eq!(best["outcome"]["fnr"].as_f64().unwrap(), 0.0);
    assert_eq!(best["outcome"]["fpr"].as_f64().unwrap(), 0.0);
    assert!(best["cost"].as_f64().unwrap() < 16.0);
}

#[test]
fn noise_subcommands_emit_csv() {
    let tmp = tempfile::tempdir().unwrap();

    // Static: a small scatter around a fixed point.
    let gps = tmp.path().join("static.csv");
    let mut text = String::from("t_ms,lat,lon,sats\n");
    for i in 0..60i64 {
        let dev = (i % 5) as f64 * 1e-5 - 2e-5;
        text.push_str(&format!("{},{},{},11\n", i * 2000, 35.9 + dev, 14.45 - dev));
    }
    std::fs::write(&gps, text).unwrap();
    let out_path = tmp.path().join("static_stats.csv");
    run_ok(journeys().args([
        "noise",
        "static",
        "--gps",
        gps.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]));
    let stats = std::fs::read_to_string(&out_path).unwrap();
    assert!(stats.starts_with("mean_lat,mean_lon,max_dev_lat,max_dev_lon\n"));

    // Dynamic: one noiseless straight-line run; deviation ~0 for every w.
    let runs = tmp.path().join("runs");
    std::fs::create_dir(&runs).unwrap();
    let mut text = String::from("t_ms,lat,lon,sats\n");
    for i in 0..120i64 {
        text.push_str(&format!("{},{},14.45,11\n", i * 1000, 35.9 + 1.3 * i as f64 / 111_194.926_7));
    }
    std::fs::write(runs.join("run0.csv"), text).unwrap();
    std::fs::write(runs.join("runs.csv"), "file,nominal_mps\nrun0.csv,1.3\n").unwrap();
    let sweep_path = tmp.path().join("sweep.csv");
    run_ok(journeys().args([
        "noise",
        "dynamic",
        "--runs",
        runs.to_str().unwrap(),
        "--out",
        sweep_path.to_str().unwrap(),
    ]));
    let sweep = std::fs::read_to_string(&sweep_path).unwrap();
    let rows: Vec<&str> = sweep.lines().skip(1).collect();
    assert_eq!(rows.len(), 10);
    for row in rows {
        let dev: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert!(dev < 1e-3, "noiseless run should have ~zero deviation: {row}");
    }
}

#[test]
fn params_file_overrides_and_validates() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = tmp.path().join("walk.json");
    write_walk_scenario(&scenario);
    let trace_dir = tmp.path().join("trace");
    synth_trace(&trace_dir, &scenario, 4);

    // A high-threshold config suppresses detection entirely.
    let params = tmp.path().join("params.conf");
    std::fs::write(&params, "v_inst = 4.5\nv_cum = 4.5\n").unwrap();
    let out_path = tmp.path().join("none.json");
    run_ok(journeys().args([
        "segment",
        trace_dir.to_str().unwrap(),
        "--params",
        params.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]));
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(parsed.as_array().unwrap().len(), 0);

    // Unknown keys are rejected with a nonzero exit.
    std::fs::write(&params, "velocity = 1\n").unwrap();
    let out = journeys()
        .args(["segment", trace_dir.to_str().unwrap(), "--params", params.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key"));
}
