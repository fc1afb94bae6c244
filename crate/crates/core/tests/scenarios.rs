use std::fs;
use std::path::{Path, PathBuf};

use hjreach::dynamics::FlightPhase;
use hjreach::reach_avoid::WindowKind;
use hjreach::runner::{diff, read_tube, run, Command, Manifest};
use hjreach::scenario::Scenario;
use hjreach::solver::{Mode, Scheme};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

#[test]
fn minimal_fixture_gets_defaults() {
    let s = Scenario::from_file(&data("integrator_1d.scn")).unwrap();
    assert_eq!(s.solver.cfl, 0.5);
    assert_eq!(s.solver.samples, 3);
    assert_eq!(s.solver.record_every, 1);
    assert_eq!(s.solver.mode, Mode::Terminal);
    assert_eq!(s.solver.scheme, Scheme::LaxFriedrichs1);
    assert!(!s.is_multi_aircraft());
}

#[test]
fn two_aircraft_fixture() {
    let s = Scenario::from_file(&data("two_aircraft.scn")).unwrap();
    let setups = s.aircraft_setups().unwrap();
    assert_eq!(setups.len(), 2);
    assert_eq!(setups[1].entry_time - setups[0].entry_time, 30.0);
    assert_eq!(s.separation.horizontal, 9260.0);
    assert!((s.separation.height - 609.6).abs() < 1e-9);
    for a in &setups {
        assert_eq!(a.model.wind_bound()[0], 12.0);
        assert_eq!(a.model.wind_bound()[1], 12.0);
        assert_eq!(a.window.kind, WindowKind::Adjacent);
        assert_eq!(a.window.waypoint, a.model.waypoints().len() - 1);
        assert_eq!(a.grid.axis(0).nodes, 101);
        assert_eq!(a.grid.axis(1).nodes, 51);
    }
    assert_eq!(setups[0].model.phase(0), FlightPhase::Climb);
    assert_eq!(setups[0].model.phase(1), FlightPhase::Cruise);
    // The plans cross at the middle waypoint.
    let a = setups[0].model.position_along(setups[0].model.waypoint_offset(1), 10_000.0);
    let b = setups[1].model.position_along(setups[1].model.waypoint_offset(1), 10_000.0);
    assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-6));
}

#[test]
fn fixtures_round_trip() {
    for name in ["integrator_1d.scn", "game_2d.scn", "two_aircraft.scn"] {
        let a = Scenario::from_file(&data(name)).unwrap();
        let b = Scenario::parse_str(&a.serialize(), &a.base_dir).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn missing_profile_is_reported() {
    let text = fs::read_to_string(data("two_aircraft.scn"))
        .unwrap()
        .replacen("profile = a320_speed_profiles.txt", "profile = nowhere.txt", 1);
    let err = Scenario::parse_str(&text, &data("")).unwrap_err().to_string();
    assert!(err.contains("nowhere.txt"), "{err}");
}

fn csv_bytes(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "csv" || x == "txt") && !p.ends_with("manifest.txt") {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn oracle_manifest_and_byte_identical_reruns() {
    let s = Scenario::from_file(&data("game_2d.scn")).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ma = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| run(Command::Solve, &s, a.path()))
        .unwrap();
    rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap()
        .install(|| run(Command::Solve, &s, b.path()))
        .unwrap();
    let linf: f64 = ma.get("oracle_linf").unwrap().parse().unwrap();
    assert!(linf <= 0.1, "{linf}");
    assert_eq!(ma.get("oracle_band_ok"), Some("true"));
    assert!(ma.get("oracle_mask_mismatch").is_some());
    let files: Vec<&str> = ma.get_all("file").collect();
    assert!(files.contains(&"tube/index.csv"));
    for f in &files {
        assert!(fs::metadata(a.path().join(f)).unwrap().len() > 0, "{f}");
    }
    let on_disk = Manifest::parse(&fs::read_to_string(a.path().join("manifest.txt")).unwrap());
    assert_eq!(on_disk, ma);
    assert_eq!(csv_bytes(a.path()), csv_bytes(b.path()));
    assert_eq!(diff(&a.path().join("tube"), &b.path().join("tube")).unwrap(), (0.0, 0));
}

#[test]
fn analytic_reference_in_manifest() {
    let s = Scenario::from_file(&data("integrator_1d.scn")).unwrap();
    let out = tempfile::tempdir().unwrap();
    let m = run(Command::Solve, &s, out.path()).unwrap();
    let err: f64 = m.get("reference_linf").unwrap().parse().unwrap();
    // First-order scheme, 401 nodes: the error sits near 3 cells.
    assert!(err < 0.05, "{err}");
    assert_eq!(m.get("reference_tau"), Some("1.0"));
    let tube = read_tube(&out.path().join("tube")).unwrap();
    assert_eq!(tube.times().first(), Some(&1.0));
    assert_eq!(tube.times().last(), Some(&0.0));
}

#[test]
fn oracle_command_exports_dp_tube() {
    let s = Scenario::from_file(&data("game_2d.scn")).unwrap();
    let out = tempfile::tempdir().unwrap();
    let m = run(Command::Oracle, &s, out.path()).unwrap();
    assert!(m.get("oracle_linf").is_some());
    let tube = read_tube(&out.path().join("tube")).unwrap();
    assert_eq!(tube.len(), 21);
}

#[test]
fn commands_reject_the_wrong_scenario_form() {
    let single = Scenario::from_file(&data("integrator_1d.scn")).unwrap();
    let out = tempfile::tempdir().unwrap();
    assert!(run(Command::Algorithm1, &single, out.path()).is_err());
    let multi = Scenario::from_file(&data("two_aircraft.scn")).unwrap();
    assert!(run(Command::Solve, &multi, out.path()).is_err());
}
