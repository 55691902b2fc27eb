use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use swarm_density::pgm::GrayImage;
use swarm_density::scenario::Scenario;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_swarm-density"))
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn metrics_column(path: &Path, col: usize) -> Vec<f64> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(col).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn lenna_scenario_loads_with_a_supplied_image() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(example("lenna.scn"), dir.path().join("lenna.scn")).unwrap();
    let side = 512;
    let pixels = (0..side * side).map(|k| ((k % side + k / side) % 256) as u16).collect();
    GrayImage::new(side, side, 255, pixels)
        .unwrap()
        .write_p5(dir.path().join("lenna.pgm"))
        .unwrap();
    let s = Scenario::load(dir.path().join("lenna.scn")).unwrap();
    assert_eq!(s.n, 1000);
    assert_eq!(s.diffusion, 5.0);
    assert_eq!(s.bandwidth, swarm_density::scenario::BandwidthSpec::Fixed(0.05));
    assert_eq!(s.domain.size().x / 20.0, 0.05);
}

#[test]
fn lenna_without_its_image_fails_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(example("lenna.scn"), dir.path().join("lenna.scn")).unwrap();
    let out = run(&[
        "run",
        "--scenario",
        dir.path().join("lenna.scn").to_str().unwrap(),
        "--out",
        "unused",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("desired.image"));
}

#[test]
fn shipped_scenarios_parse() {
    for name in ["bimodal.scn", "heat.scn"] {
        Scenario::load(example(name)).unwrap();
    }
}

#[test]
fn constraint_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.scn",
        "name = bad\ndesired.kind = uniform\ncontrol.D = -1\n",
    );
    let out = run(&[
        "run",
        "--scenario",
        bad.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("control.D"));

    let typo = write(
        dir.path(),
        "typo.scn",
        "name = typo\ndesired.kind = uniform\ncontrol.d = 5\n",
    );
    let out = run(&[
        "run",
        "--scenario",
        typo.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("control.d"));
}

#[test]
fn zero_horizon_writes_manifest_and_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let scn = write(
        dir.path(),
        "t0.scn",
        "name = t0\ndesired.kind = uniform\nsim.N = 100\nsim.T = 0\n",
    );
    let out_dir = dir.path().join("out");
    let out = run(&[
        "run",
        "--scenario",
        scn.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("manifest.scn").is_file());
    let csv = std::fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn bimodal_error_falls_and_the_manifest_reproduces_it() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let out = run(&[
        "run",
        "--scenario",
        example("bimodal.scn").to_str().unwrap(),
        "--out",
        first.to_str().unwrap(),
        "--snapshot-every",
        "500",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let e = metrics_column(&first.join("metrics.csv"), 1);
    assert!(e[e.len() - 1] < 0.5 * e[0], "E {} -> {}", e[0], e[e.len() - 1]);
    let snaps: Vec<_> = std::fs::read_dir(first.join("snapshots")).unwrap().collect();
    assert_eq!(snaps.len(), 3 * 2, "three PGMs with sidecars");

    let second = dir.path().join("second");
    let out = run(&[
        "run",
        "--scenario",
        first.join("manifest.scn").to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
        "--threads",
        "3",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        std::fs::read(first.join("metrics.csv")).unwrap(),
        std::fs::read(second.join("metrics.csv")).unwrap()
    );
}

#[test]
fn heat_oracle_reports_the_eigenmode_rate() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "oracle",
        "heat",
        "--scenario",
        example("heat.scn").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("PASS oracle heat eigenmode")));
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 3);
    assert!(dir.path().join("oracle-heat.txt").is_file());
}

#[test]
fn continuity_oracle_passes_and_fails_by_resolution() {
    assert!(run(&["oracle", "continuity"]).status.success());
    let dir = tempfile::tempdir().unwrap();
    let coarse = write(
        dir.path(),
        "c.scn",
        "name = coarse\ndesired.kind = uniform\noracle.n = 4\n",
    );
    let out = run(&["oracle", "continuity", "--scenario", coarse.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL oracle continuity transformation"));
}

#[test]
fn crossval_and_kde_check_pass_on_the_bimodal_scenario() {
    let scn = example("bimodal.scn");
    for cmd in [&["oracle", "crossval"][..], &["kde-check"][..]] {
        let mut args = cmd.to_vec();
        args.extend(["--scenario", scn.to_str().unwrap()]);
        let out = run(&args);
        assert!(
            out.status.success(),
            "{:?}: {}",
            cmd,
            String::from_utf8_lossy(&out.stdout)
        );
    }
}

#[test]
fn zero_threads_is_an_error() {
    let out = run(&["kde-check", "--threads", "0"]);
    assert_eq!(out.status.code(), Some(2));
}
