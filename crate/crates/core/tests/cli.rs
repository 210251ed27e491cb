use std::path::Path;
use std::process::{Command, Output};

use sptrack::harness::{read_results_csv, synthetic_sequence, write_otb, SyntheticSpec};
use sptrack::TrackerConfig;

fn sptrack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sptrack")).args(args).output().expect("run sptrack")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn quick_config(dir: &Path) -> std::path::PathBuf {
    let p = dir.join("quick.txt");
    std::fs::write(&p, "# small run\nparticles = 40\nnegatives = 20\ndictionary_size = 20\nrng_seed = 3\n").unwrap();
    p
}

fn short_sequence(dir: &Path) -> std::path::PathBuf {
    let spec = SyntheticSpec {
        frames: 8,
        ..SyntheticSpec::default()
    };
    let (frames, gt) = synthetic_sequence(&spec).unwrap();
    let seq = dir.join("short");
    write_otb(&seq, &frames, &gt).unwrap();
    seq
}

#[test]
fn default_config_parses_back() {
    let out = sptrack(&["default-config"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(TrackerConfig::from_str_flat(&text).unwrap(), TrackerConfig::default());
}

#[test]
fn track_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let seq = short_sequence(dir.path());
    let cfg = quick_config(dir.path());
    let results = dir.path().join("results");
    let run = results.join("short");
    let out = sptrack(&["track", "--seq", path(&seq), "--config", path(&cfg), "--out", path(&run), "--overlay"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("8 frames"));

    let rows = read_results_csv(run.join("results.csv")).unwrap();
    assert_eq!(rows.len(), 8);
    assert_eq!(rows[0].iou, 1.0);
    assert_eq!(std::fs::read_to_string(run.join("diagnostics.jsonl")).unwrap().lines().count(), 7);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["frames"], 8);
    assert!(run.join("overlay").join("0008.png").is_file());
    let saved = TrackerConfig::load(run.join("config.txt")).unwrap();
    assert_eq!(saved.particles, 40);

    let report = dir.path().join("report");
    let out = sptrack(&["eval", "--results", path(&results), "--out", path(&report)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let success = std::fs::read_to_string(report.join("success.csv")).unwrap();
    assert_eq!(success.lines().count(), 52);
    assert!(success.starts_with("threshold,short,mean"));
    assert_eq!(std::fs::read_to_string(report.join("precision.csv")).unwrap().lines().count(), 52);
}

#[test]
fn seed_override_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let seq = short_sequence(dir.path());
    let cfg = quick_config(dir.path());
    let mut csvs = Vec::new();
    for name in ["a", "b"] {
        let run = dir.path().join(name);
        let out = sptrack(&["track", "--seq", path(&seq), "--config", path(&cfg), "--out", path(&run), "--seed", "11"]);
        assert!(out.status.success());
        csvs.push(std::fs::read(run.join("results.csv")).unwrap());
        assert_eq!(TrackerConfig::load(run.join("config.txt")).unwrap().rng_seed, 11);
    }
    assert_eq!(csvs[0], csvs[1]);
}

#[test]
fn synth_writes_otb_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("syn");
    let out = sptrack(&["synth", "--out", path(&out_dir), "--scale-change"]);
    assert!(out.status.success());
    let seq = sptrack::harness::load_sequence(&out_dir).unwrap();
    assert_eq!(seq.frames.len(), 60);
    assert_eq!(seq.ground_truth[29].w, 20.0);
    assert_eq!(seq.ground_truth[30].w, 26.0);
}

#[test]
fn failures_exit_nonzero_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing");
    let out = sptrack(&["track", "--seq", path(&missing), "--out", path(&dir.path().join("o"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("sptrack: error:"));

    let bad_cfg = dir.path().join("bad.txt");
    std::fs::write(&bad_cfg, "gamma = 3\n").unwrap();
    let seq = short_sequence(dir.path());
    let out = sptrack(&["track", "--seq", path(&seq), "--config", path(&bad_cfg), "--out", path(&dir.path().join("o"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamma"));

    let out = sptrack(&["eval", "--results", path(dir.path()), "--out", path(&dir.path().join("r"))]);
    assert!(!out.status.success());

    let out = sptrack(&["track"]);
    assert!(!out.status.success());
}
