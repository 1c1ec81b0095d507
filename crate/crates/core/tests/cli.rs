use std::path::Path;
use std::process::{Command, Output};

fn dirmusic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dirmusic"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_str(&stdout(o)).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

#[test]
fn fit_pattern_demo_writes_converged_fit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fit.toml");
    let o = dirmusic(&["fit-pattern", "--demo", "-k", "3", "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = json(&o);
    assert_eq!(report["converged"], true);
    assert!(report["rmse"].as_f64().unwrap() < 0.02);
    let fitted = dirmusic::io::read_pattern(&out).unwrap();
    assert_eq!(fitted.len(), 3);
}

#[test]
fn fit_pattern_round_trips_generated_samples() {
    let dir = tempfile::tempdir().unwrap();
    let samples = dir.path().join("samples.csv");
    let truth = dirmusic::pattern::GaussianMixturePattern::reference();
    dirmusic::io::write_samples(&samples, &dirmusic::pattern::sample_pattern(&truth, 1.0).unwrap()).unwrap();
    let out = dir.path().join("fit.toml");
    let o = dirmusic(&["fit-pattern", p(&samples), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let fitted = dirmusic::io::read_pattern(&out).unwrap();
    let worst = (0..360)
        .map(|d| (fitted.gain(d as f64).unwrap() - truth.gain(d as f64).unwrap()).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-3, "{worst}");
}

#[test]
fn fit_pattern_usage_and_io_errors() {
    let o = dirmusic(&["fit-pattern", "--demo", "-k", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = dirmusic(&["fit-pattern"]);
    assert_eq!(o.status.code(), Some(2));
    let o = dirmusic(&["fit-pattern", "/definitely/missing.csv"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("/definitely/missing.csv"));
}

#[test]
fn manifold_dump_matches_library() {
    let o = dirmusic(&["manifold", "--elements", "4", "--grid-step", "90"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "angle_deg,g1,g2,g3,g4");
    assert_eq!(lines.len(), 5);
    let g = dirmusic::pattern::GaussianMixturePattern::reference();
    let first: Vec<f64> = lines[1].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first[0], 0.0);
    assert_eq!(first[2], g.gain(90.0).unwrap());
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = dirmusic(&["simulate", "--trials", "40", "--snr-db", "0", "--seed", "7", "--out", p(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["trials.csv", "summary.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
    }
    let trials = std::fs::read_to_string(a.join("trials.csv")).unwrap();
    assert!(trials.starts_with("trial,true_deg,estimated_deg,error_deg,success\n"));
    assert_eq!(trials.lines().count(), 41);
}

#[test]
fn sweep_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "schema_version = 1\nseed = 3\ntrials = 30\n[array]\noffsets_deg = [0.0, 60.0, 120.0, 180.0]\n[sweep]\nsnr_db = [10.0, 0.0]\n",
    )
    .unwrap();
    let out = dir.path().join("sweep");
    let o = dirmusic(&["sweep-snr", "--config", p(&cfg), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "setting,accuracy,mean_err,std_err,min_err,max_err,n");
    assert!(lines[1].starts_with("10,"));
    assert!(lines[2].starts_with("0,"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["parameter"], "snr_db");
    assert_eq!(summary["template"]["array"]["offsets_deg"].as_array().unwrap().len(), 4);
}

#[test]
fn empty_sweep_list_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "schema_version = 1\n[sweep]\nsnr_db = []\n").unwrap();
    let o = dirmusic(&["sweep-snr", "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn bad_config_is_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "schema_version = 1\nseeed = 3\n").unwrap();
    let o = dirmusic(&["manifold", "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn estimate_synthetic_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("rec.csv");
    let o = dirmusic(&[
        "synthesize", "--elements", "4", "--theta-deg", "93", "--snr-db", "10", "--tone-hz", "948e6",
        "--tone-deg", "250", "--seed", "11", "--out", p(&rec),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let spectrum = dir.path().join("spec.csv");
    let o = dirmusic(&["estimate", p(&rec), "--elements", "4", "--spectrum", p(&spectrum)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(&o);
    let theta = r["theta_hat_deg"].as_f64().unwrap();
    assert!((theta - 93.0).abs() <= 2.0, "{theta}");
    assert_eq!(r["n_elements"], 4);
    assert!(r["window_end_s"].as_f64().unwrap() > r["window_start_s"].as_f64().unwrap());
    let s = std::fs::read_to_string(&spectrum).unwrap();
    assert!(s.starts_with("angle_deg,p_mu\n"));
    assert_eq!(s.lines().count(), 361);
}

#[test]
fn estimate_rejects_mismatch_and_bad_header() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("rec.csv");
    let o = dirmusic(&["synthesize", "--elements", "4", "--theta-deg", "10", "--out", p(&rec)]);
    assert!(o.status.success());
    let o = dirmusic(&["estimate", p(&rec), "--elements", "6"]);
    assert_eq!(o.status.code(), Some(6));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "time_s,ch1,channel2\n0,1,1\n1e-10,1,1\n").unwrap();
    let o = dirmusic(&["estimate", p(&bad), "--elements", "2"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("`channel2`"), "{}", stderr(&o));
}

#[test]
fn flat_recording_reports_no_pulse() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("flat.csv");
    let mut text = String::from("time_s,ch1,ch2\n");
    for t in 0..1000 {
        text.push_str(&format!("{},0,0\n", t as f64 * 1e-10));
    }
    std::fs::write(&rec, text).unwrap();
    let o = dirmusic(&["estimate", p(&rec), "--elements", "2"]);
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
}
