use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(verb: &str, scenario: &str, dir: &Path, extra: &[&str]) -> Output {
    let path = dir.join("scenario.json");
    fs::write(&path, scenario).unwrap();
    Command::new(env!("CARGO_BIN_EXE_fractalflux"))
        .arg(verb)
        .arg("--scenario")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .env_remove("FRACTALFLUX_MAX_DOF")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn data_rows(path: &Path) -> usize {
    let text = fs::read_to_string(path).unwrap();
    text.lines().filter(|l| !l.starts_with('#')).count() - 1
}

const FLAT: &str = r#"{"geometry": {"family": "flat", "generation": 0},
 "problem": {"lambda": 1, "T": 0.01, "dt": 0.001},
 "mesh": {"h": 0.125}}"#;

#[test]
fn generate_flat_writes_three_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("generate", FLAT, dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut names: Vec<_> = fs::read_dir(dir.path().join("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["interface.txt", "measure.txt", "mesh.txt"]);
    assert!(stdout(&o).contains("admissible: yes"));
}

#[test]
fn generation_beyond_cap_names_the_cap() {
    let dir = tempfile::tempdir().unwrap();
    let s = r#"{"geometry": {"family": "koch", "generation": 12, "max_generation": 5},
      "problem": {"lambda": 1, "T": 0.01, "dt": 0.001}, "mesh": {"h": 0.125}}"#;
    let o = run("generate", s, dir.path(), &[]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("cap 5"), "{}", stderr(&o));
}

#[test]
fn dof_cap_from_environment_is_enforced() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scenario.json");
    fs::write(&path, FLAT).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_fractalflux"))
        .args(["generate", "--scenario"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path())
        .env("FRACTALFLUX_MAX_DOF", "10")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("FRACTALFLUX_MAX_DOF"));
}

#[test]
fn rerun_is_byte_identical() {
    let s = r#"{"geometry": {"family": "minkowski", "generation": 1},
      "problem": {"lambda": 2, "T": 0.01, "dt": 0.002},
      "mesh": {"h": 0.0625}, "outputs": {"snapshot_stride": 2, "formats": ["csv", "vtk"]}}"#;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run("solve", s, a.path(), &["--threads", "1"]).status.success());
    assert!(run("solve", s, b.path(), &["--threads", "3"]).status.success());
    let mut names: Vec<_> = fs::read_dir(a.path().join("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() > 4);
    for n in names {
        let x = fs::read(a.path().join("out").join(&n)).unwrap();
        let y = fs::read(b.path().join("out").join(&n)).unwrap();
        assert!(x == y, "{n:?} differs between runs");
    }
}

#[test]
fn insulated_solve_reports_small_residual() {
    let dir = tempfile::tempdir().unwrap();
    let s = FLAT.replace(r#""lambda": 1"#, r#""lambda": 0"#);
    let o = run("solve", &s, dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let last = out.lines().last().unwrap();
    let r: f64 = last.rsplit(' ').next().unwrap().parse().unwrap();
    assert!(r <= 1e-10, "{last}");
}

#[test]
fn dt_larger_than_t_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let s = FLAT.replace(r#""dt": 0.001"#, r#""dt": 0.5"#);
    let o = run("solve", &s, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("problem.dt"));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let s = FLAT.replace(r#""h": 0.125"#, r#""h": 0.125, "refine": true"#);
    let o = run("generate", &s, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("refine"));
}

#[test]
fn stride_zero_keeps_first_and_last_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let s = FLAT.replace(r#""mesh""#, r#""outputs": {"snapshot_stride": 0, "formats": ["vtk"]}, "mesh""#);
    let o = run("solve", &s, dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut vtk: Vec<_> = fs::read_dir(dir.path().join("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".vtk"))
        .collect();
    vtk.sort();
    assert_eq!(vtk, ["snapshot_000000.vtk", "snapshot_000010.vtk"]);
}

#[test]
fn mosco_three_generations_gives_three_rows() {
    let dir = tempfile::tempdir().unwrap();
    let s = r#"{"geometry": {"family": "minkowski"},
      "problem": {"lambda": 1, "T": 0.01, "dt": 0.002}, "mesh": {"h_ratio": 2}}"#;
    let o = run("mosco", s, dir.path(), &["--generations", "0,1,2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(data_rows(&dir.path().join("out/sweep.csv")), 3);
    assert!(stdout(&o).contains("energy convergence"));
}

#[test]
fn single_candidate_optimize_ranks_one() {
    let dir = tempfile::tempdir().unwrap();
    let s = r#"{"geometry": {"family": "minkowski"},
      "problem": {"lambda": 1, "T": 0.01, "dt": 0.002}, "mesh": {"h": 0.0625},
      "optimize": {"generations": [0]}}"#;
    let o = run("optimize", s, dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(data_rows(&dir.path().join("out/ranking.csv")), 1);
}

#[test]
fn empty_admissible_family_fails() {
    let dir = tempfile::tempdir().unwrap();
    let s = r#"{"geometry": {"family": "minkowski"},
      "problem": {"lambda": 1, "T": 0.01, "dt": 0.002}, "mesh": {"h": 0.0625},
      "admissibility": {"class": "lipschitz", "c_hat": 1.5},
      "optimize": {"generations": [0, 1]}}"#;
    let o = run("optimize", s, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stdout(&o).contains("no admissible candidates"));
}

#[test]
fn trace_check_flat_passes() {
    let dir = tempfile::tempdir().unwrap();
    let s = FLAT.replace(r#""h": 0.125"#, r#""h": 0.25"#);
    let o = run("trace-check", &s, dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.lines().any(|l| l.starts_with("PASS")));
    assert!(!out.lines().any(|l| l.starts_with("FAIL")));
}
