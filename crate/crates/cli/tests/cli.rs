use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_anderson-spectra"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&read(dir, "manifest.json")).unwrap()
}

#[test]
fn poisson_outputs_are_identical_across_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let mut digests = Vec::new();
    let mut data = Vec::new();
    for workers in ["1", "3", "1"] {
        let out = tmp.path().join(format!("p{}", data.len()));
        let o = run(&[
            "poisson", "--dist", "uniform:0,1", "--n", "500", "--l", "20", "--r", "150", "--seed", "7", "--workers", workers,
            "--quiet", "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.code().is_some(), "terminated by signal");
        for f in ["summary.json", "data.csv", "manifest.json", "gaps.csv", "points.csv"] {
            assert!(out.join(f).exists(), "{f} missing");
        }
        data.push(read(&out, "data.csv"));
        digests.push(manifest(&out)["summary_digest"].as_str().unwrap().to_string());
    }
    assert!(data.windows(2).all(|w| w[0] == w[1]));
    assert!(digests.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn manifest_lists_artifact_hashes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("w");
    let o = run(&["wegner", "--r", "100", "--quiet", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), out.to_str().unwrap());
    let m = manifest(&out);
    assert_eq!(m["master_seed"], 0);
    assert_eq!(m["experiment"], "wegner");
    let artifacts = m["artifacts"].as_array().unwrap();
    assert_eq!(artifacts.len(), 2);
    assert_eq!(m["summary_digest"], artifacts[0]["sha256"]);
    assert!(m["config"].as_str().unwrap().contains("r = 100\n"));
}

#[test]
fn summary_json_round_trips_byte_identically() {
    let tmp = tempfile::tempdir().unwrap();
    for (exp, extra) in [("wegner", vec!["--r", "200"]), ("separation", vec!["--n", "40,80", "--r", "30"]), ("interlace", vec!["--r", "50"])] {
        let out = tmp.path().join(exp);
        let mut args = vec![exp, "--quiet", "--out", out.to_str().unwrap()];
        args.extend(extra);
        assert_eq!(run(&args).status.code(), Some(0), "{exp}");
        let text = read(&out, "summary.json");
        let parsed: anderson_spectra::ensemble::EnsembleSummary = serde_json::from_str(&text).unwrap();
        let mut again = serde_json::to_string_pretty(&parsed).unwrap();
        again.push('\n');
        assert_eq!(text, again, "{exp}");
    }
}

#[test]
fn check_flag_exits_3_on_saturated_wegner_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("w");
    let o = run(&["wegner", "--delta", "2,1,0.5,0.25,0.125,0.0625", "--r", "100", "--check", "--quiet", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    // artifacts are still written
    assert!(out.join("summary.json").exists());
    let o = run(&["wegner", "--delta", "2,1,0.5,0.25,0.125,0.0625", "--r", "100", "--quiet", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn dos_grid_rows_and_monotone_ids() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("d");
    let o = run(&["dos", "--dist", "uniform:0,1", "--n", "1000", "--dos-r", "20", "--grid", "-3:3:601", "--quiet", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(out.join("data.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let ids_col = headers.iter().position(|h| h == "ids").unwrap();
    let ids: Vec<f64> = rdr.records().map(|r| r.unwrap()[ids_col].parse().unwrap()).collect();
    assert_eq!(ids.len(), 601);
    assert!(ids.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(ids[0], 0.0);
    assert_eq!(ids[600], 1.0);
}

#[test]
fn unknown_flag_and_unknown_key_exit_2() {
    assert_eq!(run(&["wegner", "--bogus", "1"]).status.code(), Some(2));
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.cfg");
    fs::write(&cfg, "r = 10\nbogus = 1\n").unwrap();
    let o = run(&["wegner", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`bogus`: unknown key"));
    assert!(!tmp.path().join("x").exists());
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.cfg");
    fs::write(&cfg, "r = 300\nseed = 5\n").unwrap();
    let o = run(&["validate", cfg.to_str().unwrap(), "--experiment", "wegner", "--seed", "9"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("\nr = 300\n"));
    assert!(text.contains("\nseed = 9\n"));
}

#[test]
fn validate_fills_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.cfg");
    fs::write(&cfg, "dist = uniform:0,1\nn = 1000\n").unwrap();
    let o = run(&["validate", cfg.to_str().unwrap(), "--experiment", "poisson"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("\nr = 1000\n"));
    let defaults = text.lines().find(|l| l.starts_with("# defaults filled:")).unwrap();
    assert!(defaults.split([':', ',']).any(|k| k.trim() == "r"));
    assert!(!defaults.split([':', ',']).any(|k| k.trim() == "n"));
}

#[test]
fn validate_rejects_bad_probability() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.cfg");
    fs::write(&cfg, "dist = bernoulli:1.5\n").unwrap();
    let o = run(&["validate", cfg.to_str().unwrap(), "--experiment", "separation"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("probability out of range"), "{err}");
    assert!(err.contains("line 1"), "{err}");
}

#[test]
fn validate_cites_partition_constraint() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.cfg");
    fs::write(&cfg, "k = 4\nk1 = 1\n").unwrap();
    let o = run(&["validate", cfg.to_str().unwrap(), "--experiment", "blocks"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("K >= 8·K1"));
}

#[test]
fn output_root_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = bin().args(["interlace", "--r", "20", "--quiet"]).env("ANDERSON_SPECTRA_OUT", tmp.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let printed = String::from_utf8(o.stdout).unwrap();
    let dir = Path::new(printed.trim());
    assert!(dir.starts_with(tmp.path()));
    assert!(dir.file_name().unwrap().to_str().unwrap().starts_with("interlace-"));
    assert!(dir.join("manifest.json").exists());
}
