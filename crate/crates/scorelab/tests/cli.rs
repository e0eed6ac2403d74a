//! End-to-end checks of the command-line surface: each subcommand runs on
//! a small config, writes its outputs, and exits zero; result CSVs are
//! byte-identical across repeated runs with the same seed.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_scorelab"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn tmpdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("scorelab_cli_{tag}_{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

const MIXTURE_TARGET: &str = "\
c = 1.0
a = 1.0
family = gaussian_mixture
weights = 0.5 0.5
mean.0 = -1.0
mean.1 = 1.0
var.0 = 0.25
var.1 = 0.25
";

#[test]
fn sample_writes_snapshots_and_manifest() {
    let dir = tmpdir("sample");
    let cfg = write(
        &dir,
        "target.cfg",
        &format!("{MIXTURE_TARGET}t_final = 4.0\nn_steps = 40\nn_paths = 500\nrecord = 0 20\n"),
    );
    let out = dir.join("out");
    let status = bin()
        .args(["sample", "--config"])
        .arg(&cfg)
        .args(["--seed", "7", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("samples_t4.000000.csv").exists());
    assert!(out.join("samples_t0.000000.csv").exists());
    assert!(out.join("sample.manifest.txt").exists());
    let manifest = std::fs::read_to_string(out.join("sample.manifest.txt")).unwrap();
    assert!(manifest.contains("config_hash ="));
}

#[test]
fn w2_compares_two_sample_files() {
    let dir = tmpdir("w2");
    // two snapshot files from the sampler
    let cfg = write(
        &dir,
        "target.cfg",
        &format!("{MIXTURE_TARGET}t_final = 4.0\nn_steps = 40\nn_paths = 256\n"),
    );
    for seed in ["1", "2"] {
        let out = dir.join(format!("run{seed}"));
        assert!(bin()
            .args(["sample", "--config"])
            .arg(&cfg)
            .args(["--seed", seed, "--out"])
            .arg(&out)
            .status()
            .unwrap()
            .success());
    }
    let w2cfg = write(
        &dir,
        "w2.cfg",
        &format!(
            "method = assignment\na = {}\nb = {}\n",
            dir.join("run1/samples_t4.000000.csv").display(),
            dir.join("run2/samples_t4.000000.csv").display()
        ),
    );
    let output = bin().args(["w2", "--config"]).arg(&w2cfg).output().unwrap();
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(text.contains("w2[assignment]"), "{text}");
}

#[test]
fn sweep_csv_is_deterministic() {
    let dir = tmpdir("sweep");
    let cfg = write(
        &dir,
        "exp.cfg",
        "c = 1.0\na = 0.5\nfamily = gaussian_mixture\nweights = 1.0\nmean.0 = 2.0\nvar.0 = 0.5\n\
         experiment = tau_sweep\nt_final = 8.0\ntau_grid = 0.2 0.1 0.05\n",
    );
    let mut csvs = Vec::new();
    for run in 0..2 {
        let out = dir.join(format!("out{run}"));
        assert!(bin()
            .args(["sweep", "--config"])
            .arg(&cfg)
            .args(["--seed", "11", "--out"])
            .arg(&out)
            .status()
            .unwrap()
            .success());
        csvs.push(std::fs::read(out.join("tau_sweep.csv")).unwrap());
        assert!(out.join("tau_sweep.svg").exists());
    }
    assert_eq!(csvs[0], csvs[1], "same spec + seed must give byte-identical CSVs");
}

#[test]
fn plan_and_verify_bounds_run() {
    let dir = tmpdir("plan");
    let cfg = write(
        &dir,
        "plan.cfg",
        "c = 1.0\na = 0.5\nfamily = gaussian_mixture\nweights = 1.0\nmean.0 = 2.0\nvar.0 = 0.5\n\
         eps0 = 0.1\nmode = standard\n",
    );
    let out = dir.join("out");
    let output = bin()
        .args(["plan", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(text.contains("K1"), "{text}");
    assert!(out.join("plan.csv").exists());
    assert!(out.join("constants.csv").exists());

    let target = write(&dir, "target.cfg", MIXTURE_TARGET);
    let output = bin()
        .args(["verify-bounds", "--config"])
        .arg(&target)
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(text.contains("modified-score decay"), "{text}");
}

#[test]
fn verify_bounds_probe_override_stays_consistent() {
    // enlarging the probe box must enlarge the measured constants with it:
    // the decay checks stay green because the same grid feeds both sides
    let dir = tmpdir("probe");
    let cfg = write(
        &dir,
        "cloud.cfg",
        "c = 1.0\na = 1.0\nfamily = mollified_point_cloud\n\
         atom.0 = -1.0\natom.1 = 1.0\nsigma2 = 1.0\n\
         probe_lo = -12.0\nprobe_hi = 12.0\nprobe_per_axis = 241\n",
    );
    let output = bin()
        .args(["verify-bounds", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(output.status.success(), "{text}");
    assert!(!text.contains("VIOLATED"), "{text}");
    assert!(text.contains("mollified bounds"), "{text}");
}

#[test]
fn accept_subset_reports_verdicts() {
    let dir = tmpdir("accept");
    let cfg = write(&dir, "accept.cfg", "criteria = 1 2 14\n");
    let out = dir.join("out");
    let output = bin()
        .args(["accept", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    assert_eq!(text.matches("PASS").count(), 3, "{text}");
    let csv = std::fs::read_to_string(out.join("acceptance.csv")).unwrap();
    assert!(csv.starts_with("criterion,name,passed"));
}

#[test]
fn bad_config_exits_nonzero() {
    let dir = tmpdir("bad");
    let cfg = write(&dir, "bad.cfg", "family = unknown_family\nc = 1.0\n");
    let output = bin().args(["sample", "--config"]).arg(&cfg).output().unwrap();
    assert!(!output.status.success());
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("unknown target family"), "{err}");
}
