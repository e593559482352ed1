use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hrtf-graph"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("spawn hrtf-graph")
}

fn ok(out: &Path, args: &[&str]) {
    let o = bin(out, args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
}

fn synth(dir: &Path, extra: &[&str]) -> String {
    let mut args = vec!["synth", "--grid", "fib:48", "--samples", "128"];
    args.extend_from_slice(extra);
    ok(dir, &args);
    dir.join("container").display().to_string()
}

#[test]
fn synth_then_toa_writes_every_output() {
    let tmp = tempfile::tempdir().unwrap();
    let c = synth(tmp.path(), &[]);
    let out = tmp.path().join("toa");
    ok(&out, &["toa", &c, "--algo", "simp", "--weight", "corr", "--minphase", "--cross", "--dump-graph"]);
    for f in ["toa.csv", "diagnostics.json", "timing.json", "graph.json", "aligned/meta.json", "aligned/config.json"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let csv = fs::read_to_string(out.join("toa.csv")).unwrap();
    assert!(csv.starts_with("# config: "));
    assert_eq!(csv.lines().count(), 2 + 48);
    let diag: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["config"]["toa"]["algorithm"], "SIMP");
    assert!(diag["diagnostics"].get("solve_time_s").is_none());
}

#[test]
fn inspect_reports_container_shape() {
    let tmp = tempfile::tempdir().unwrap();
    let c = synth(tmp.path(), &[]);
    let o = bin(&tmp.path().join("i"), &["inspect", &c]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["num_directions"], 48);
    assert_eq!(v["num_samples"], 128);
}

#[test]
fn missing_input_exits_with_usage_code() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin(tmp.path(), &["toa", "/definitely/not/here"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_options_exit_with_usage_code() {
    let tmp = tempfile::tempdir().unwrap();
    let c = synth(tmp.path(), &[]);
    let o = bin(tmp.path(), &["experiment", "phase", &c, "--methods", "magic"]);
    assert_eq!(o.status.code(), Some(2));
    let o = bin(tmp.path(), &["unwrap", &c, "--method", "freq", "--prealign"]);
    assert_eq!(o.status.code(), Some(2));
    let o = bin(tmp.path(), &["toa", &c, "--algo", "nope"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn identical_runs_give_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let ca = synth(&a, &["--snr", "30"]);
    let cb = synth(&b, &["--snr", "30"]);
    for (dir, c) in [(&a, &ca), (&b, &cb)] {
        ok(&dir.join("noise"), &["experiment", "noise", c, "--snr", "12,inf", "--grid", "single", "--seed", "7"]);
    }
    for f in ["container/data.f32le", "container/meta.json", "truth.csv", "noise/report.csv", "noise/report.json"] {
        let fa = fs::read(a.join(f)).unwrap();
        let fb = fs::read(b.join(f)).unwrap();
        if f.ends_with(".csv") || f.ends_with(".json") {
            // the config line names the input path, which differs by directory
            let strip = |x: &[u8]| String::from_utf8_lossy(x).replace(&a.display().to_string(), "").replace(&b.display().to_string(), "");
            assert_eq!(strip(&fa), strip(&fb), "{f} differs");
        } else {
            assert_eq!(fa, fb, "{f} differs");
        }
    }
}

#[test]
fn experiment_rerun_reuses_finished_cells() {
    let tmp = tempfile::tempdir().unwrap();
    let c = synth(tmp.path(), &[]);
    let out = tmp.path().join("phase");
    let args = ["experiment", "phase", &c, "--methods", "freq,joint", "--orders", "2"];
    ok(&out, &args);
    let cells: Vec<_> = fs::read_dir(out.join("cells")).unwrap().map(|e| e.unwrap().path()).filter(|p| !p.display().to_string().ends_with(".timing.json")).collect();
    assert_eq!(cells.len(), 2);
    let stamps: Vec<_> = cells.iter().map(|p| fs::metadata(p).unwrap().modified().unwrap()).collect();
    let report = fs::read_to_string(out.join("report.csv")).unwrap();
    ok(&out, &args);
    let again: Vec<_> = cells.iter().map(|p| fs::metadata(p).unwrap().modified().unwrap()).collect();
    assert_eq!(stamps, again);
    assert_eq!(report, fs::read_to_string(out.join("report.csv")).unwrap());
    assert!(report.contains("phase_delay_error_us"));
}

#[test]
fn unwrap_writes_long_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let c = synth(tmp.path(), &[]);
    let out = tmp.path().join("u");
    ok(&out, &["unwrap", &c, "--prealign", "--ear", "right", "--fft-size", "256"]);
    let phase = fs::read_to_string(out.join("unwrapped_phase.csv")).unwrap();
    assert_eq!(phase.lines().nth(1), Some("direction_index,freq_hz,value"));
    assert_eq!(phase.lines().count(), 2 + 48 * 129);
    let delay = fs::read_to_string(out.join("phase_delay.csv")).unwrap();
    assert_eq!(delay.lines().count(), 2 + 48 * 128);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("unwrap.json")).unwrap()).unwrap();
    assert!(summary["sum_abs_k"].as_u64().is_some() || summary["sum_abs_k"].as_i64().is_some());
}

#[test]
fn synthetic_snr_is_met() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &["synth", "--grid", "fib:32", "--samples", "2048", "--snr", "60", "--seed", "3"]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("synth.json")).unwrap()).unwrap();
    let snr = v["measured_snr_db"].as_f64().unwrap();
    assert!((snr - 60.0).abs() <= 1.0, "measured {snr} dB");
}

#[test]
fn single_bin_unwrap_is_accepted() {
    let tmp = tempfile::tempdir().unwrap();
    let c = synth(tmp.path(), &[]);
    let out = tmp.path().join("u");
    for method in ["freq", "spherical", "joint"] {
        ok(&out, &["unwrap", &c, "--method", method, "--bins", "1"]);
        let phase = fs::read_to_string(out.join("unwrapped_phase.csv")).unwrap();
        assert_eq!(phase.lines().count(), 2 + 48);
        assert_eq!(fs::read_to_string(out.join("phase_delay.csv")).unwrap().lines().count(), 2);
    }
    assert_eq!(bin(&out, &["unwrap", &c, "--bins", "0"]).status.code(), Some(2));
}

#[test]
fn zero_radius_head_gives_equal_delays() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &["synth", "--grid", "fib:100", "--radius", "0"]);
    let truth = fs::read_to_string(tmp.path().join("truth.csv")).unwrap();
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(truth.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 100);
    for r in &rows {
        assert_eq!(&r[3], "32.0");
        assert_eq!(&r[4], "32.0");
    }
}

#[test]
fn coarse_grid_mode_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let c = synth(tmp.path(), &[]);
    let out = tmp.path().join("t");
    ok(&out, &["--oversample", "1", "toa", &c, "--algo", "edgy", "--weight", "exp", "--minphase", "--cross"]);
    let diag: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["config"]["toa"]["oversample_factor"], 1);
    assert_eq!(bin(&out, &["--oversample", "0", "toa", &c]).status.code(), Some(2));
}

#[test]
fn full_grid_emits_one_row_per_configuration() {
    let tmp = tempfile::tempdir().unwrap();
    let c = synth(tmp.path(), &[]);
    let out = tmp.path().join("r");
    ok(&out, &["--oversample", "2", "experiment", "recon", &c]);
    let report = fs::read_to_string(out.join("report.csv")).unwrap();
    let itd_rows = report.lines().filter(|l| l.contains(",itd_distortion_us,")).count();
    assert_eq!(itd_rows, 36);
    let timing = fs::read_to_string(out.join("timing.csv")).unwrap();
    assert_eq!(timing.lines().count(), 2 + 36);
    assert!(!report.contains("solve_time_s"));
}
