use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/data")
        .join(name)
}

fn hjreach(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hjreach"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_writes_manifest_and_tube() {
    let out = tempfile::tempdir().unwrap();
    let scenario = data("integrator_1d.scn");
    let o = hjreach(&[
        "solve",
        "--scenario",
        path(&scenario),
        "--out",
        path(out.path()),
        "--threads",
        "2",
        "--record-every",
        "40",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("reference_linf = "), "{stdout}");
    let manifest = fs::read_to_string(out.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("record_every = 40"));
    for line in manifest.lines().filter(|l| l.starts_with("file = ")) {
        let f = out.path().join(&line["file = ".len()..]);
        assert!(fs::metadata(&f).unwrap().len() > 0, "{}", f.display());
    }
}

#[test]
fn same_scenario_twice_gives_identical_files_and_zero_diff() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let scenario = data("game_2d.scn");
    for (dir, threads) in [(&a, "1"), (&b, "4")] {
        let o = hjreach(&["solve", "--scenario", path(&scenario), "--out", path(dir.path()), "--threads", threads]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let index = fs::read_to_string(a.path().join("tube/index.csv")).unwrap();
    for line in index.lines().skip(1) {
        let name = line.split(',').nth(1).unwrap();
        let fa = fs::read(a.path().join("tube").join(name)).unwrap();
        let fb = fs::read(b.path().join("tube").join(name)).unwrap();
        assert_eq!(fa, fb, "{name}");
    }
    let o = hjreach(&["diff", path(&a.path().join("tube")), path(&b.path().join("tube")), "--tolerance", "0"]);
    assert!(o.status.success());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("linf = 0e0") && stdout.contains("mask_mismatch = 0"), "{stdout}");
}

#[test]
fn oracle_subcommand_reports_comparison() {
    let out = tempfile::tempdir().unwrap();
    let o = hjreach(&["oracle", "--scenario", path(&data("game_2d.scn")), "--out", path(out.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = fs::read_to_string(out.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("oracle_linf = "));
    assert!(manifest.contains("oracle_band_ok = true"));
}

#[test]
fn algorithm1_writes_conflict_report() {
    let out = tempfile::tempdir().unwrap();
    let o = hjreach(&[
        "algorithm1",
        "--scenario",
        path(&data("two_aircraft.scn")),
        "--out",
        path(out.path()),
        "--record-every",
        "25",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(out.path().join("conflicts.txt")).unwrap();
    let events: Vec<&str> = report.lines().filter(|l| !l.starts_with('#')).collect();
    assert!(!events.is_empty());
    assert!(events.iter().all(|l| l.split_whitespace().count() == 6));
    for name in ["east", "north"] {
        let dir = out.path().join(format!("aircraft_{name}"));
        assert!(dir.join("tube/index.csv").exists());
        assert!(dir.join("contours/frame_00000.csv").exists());
        assert!(dir.join("obstacle/index.csv").exists());
    }
}

#[test]
fn validation_errors_exit_2_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.scn");
    let text = fs::read_to_string(data("integrator_1d.scn"))
        .unwrap()
        .replace("t0 = 0", "t0 = 3");
    fs::write(&bad, text).unwrap();
    let out = dir.path().join("out");
    let o = hjreach(&["solve", "--scenario", path(&bad), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let diag = fs::read_to_string(out.join("error.txt")).unwrap();
    assert!(diag.contains("horizon") && diag.contains("kind = validation"), "{diag}");

    let o = hjreach(&["solve", "--scenario", path(&dir.path().join("missing.scn")), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(2));

    let o = hjreach(&["algorithm1", "--scenario", path(&data("integrator_1d.scn")), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("stiff.scn");
    fs::write(
        &scenario,
        "[problem]\nt0 = 0\nt_final = 1\ntarget = goal\n\
         [grid]\nmin = -2\nmax = 2\nnodes = 21\n\
         [dynamics]\nkind = affine\ndrift = 1e300*x0^3\ncontrol_matrix = 1\ncontrol_lower = -1\ncontrol_upper = 1\n\
         [shape.goal]\nkind = box\nlower = -0.5\nupper = 0.5\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = hjreach(&["solve", "--scenario", path(&scenario), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(3));
    let diag = fs::read_to_string(out.join("error.txt")).unwrap();
    assert!(diag.contains("kind = numerical"), "{diag}");
}
