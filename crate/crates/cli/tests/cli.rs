use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cgrasp::artifacts::{decode, QualityRow, TrajectoryRow, QUALITY_MAP, TRAJECTORY};

fn cgrasp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cgrasp")).args(args).output().expect("spawn cgrasp")
}

fn ok(args: &[&str]) -> String {
    let out = cgrasp(args);
    assert!(out.status.success(), "cgrasp {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str]) -> String {
    let out = cgrasp(args);
    assert_eq!(out.status.code(), Some(1), "cgrasp {args:?} should fail");
    String::from_utf8(out.stderr).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_str().unwrap().to_string(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

const TINY_GRASP: &str = r#"
spec_version = 1
name = "tiny_grasp"

[object]
kind = "circle"
radius = 5.0

[arm]
length_fraction = 0.6666666666666666

[task]
kind = "optimal_grasp"
chi = 10.0
rho0 = 5.0
alpha0 = 1.6

[task.solver]
steps = 400
max_iterations = 40
"#;

const TINY_MAP: &str = r#"
spec_version = 1
name = "tiny_map"

[object]
kind = "circle"
radius = 5.0

[arm]
length_fraction = 0.5

[task]
kind = "quality_map"
chi = 10.0

[task.disc]
d_min = 3.0
d_max = 5.0
n_d = 2
n_psi = 4

[task.solver]
steps = 300
max_iterations = 400
"#;

fn bundled() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut v: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

#[test]
fn bundled_scenarios_validate() {
    let all = bundled();
    assert!(all.len() >= 8);
    for p in all {
        let out = ok(&["validate", "--config", p.to_str().unwrap()]);
        assert!(out.starts_with("valid: "), "{out}");
    }
}

#[test]
fn missing_required_key_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "s.toml", &TINY_GRASP.replace("chi = 10.0\n", ""));
    let err = fails(&["validate", "--config", &cfg]);
    assert!(err.contains("chi"), "{err}");
}

#[test]
fn unknown_key_and_bad_version_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "a.toml", &TINY_GRASP.replace("chi = 10.0", "chi = 10.0\nchii = 1.0"));
    assert!(fails(&["validate", "--config", &cfg]).contains("chii"));
    let cfg = write(tmp.path(), "b.toml", &TINY_GRASP.replace("spec_version = 1", "spec_version = 2"));
    assert!(fails(&["validate", "--config", &cfg]).contains("spec_version"));
}

#[test]
fn subcommand_must_match_task() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "s.toml", TINY_GRASP);
    let err = fails(&["feedback", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert!(err.contains("cgrasp solve"), "{err}");
}

#[test]
fn grasp_run_is_deterministic_and_rerenders_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "s.toml", TINY_GRASP);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let sa = ok(&["solve", "--config", &cfg, "--out", a.to_str().unwrap()]);
    let sb = ok(&["solve", "--config", &cfg, "--out", b.to_str().unwrap(), "--threads", "2"]);
    assert_eq!(sa, sb);
    assert!(sa.contains("final cost J"), "{sa}");
    let first = files(&a);
    assert_eq!(first, files(&b));
    let names: Vec<_> = first.iter().map(|(n, _)| n.as_str()).collect();
    for want in ["arm.csv", "cost.csv", "grasp.svg", "object.csv", "reference.csv", "trajectory.csv"] {
        assert!(names.contains(&want), "{names:?}");
    }
    assert!(names.iter().all(|n| !n.contains(".tmp")));

    ok(&["render", "--out", a.to_str().unwrap()]);
    assert_eq!(first, files(&a));

    let rows: Vec<TrajectoryRow> = decode(TRAJECTORY, fs::File::open(a.join(TRAJECTORY)).unwrap()).unwrap();
    assert_eq!(rows.len(), 401);
    assert!((rows[0].rho - 5.0).abs() < 1e-12 && (rows[0].alpha - 1.6).abs() < 1e-12);
}

#[test]
fn quiet_suppresses_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "s.toml", TINY_GRASP);
    assert_eq!(ok(&["validate", "--config", &cfg, "--quiet"]), "");
}

#[test]
fn feedback_tracks_circle_equilibrium() {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/circle_feedback.toml");
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(&["feedback", "--config", p.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    let out = out.trim_end();
    let err: Vec<f64> = out.split(" = ").skip(1).map(|t| t.split([',', ' ']).next().unwrap().parse().unwrap()).collect();
    assert_eq!(err.len(), 2, "{out}");
    assert!(err.iter().all(|e| *e < 1e-6), "{out}");
    assert!(tmp.path().join("feedback.svg").exists());
}

#[test]
fn tiny_quality_map_writes_grid_and_heatmaps() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "s.toml", TINY_MAP);
    let out = tmp.path().join("o");
    let summary = ok(&["quality-map", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(summary.contains("of 8 cells missing"), "{summary}");
    let rows: Vec<QualityRow> = decode(QUALITY_MAP, fs::File::open(out.join(QUALITY_MAP)).unwrap()).unwrap();
    assert_eq!(rows.len(), 8);
    for m in ["quality_Q1.svg", "quality_Q2.svg", "quality_Q3.svg"] {
        let svg = fs::read_to_string(out.join(m)).unwrap();
        assert!(svg.starts_with("<?xml") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("class=\"cell\"").count(), 8, "{m}");
    }
}

#[test]
fn tiny_maximize_is_seeded() {
    let tmp = tempfile::tempdir().unwrap();
    let text = TINY_MAP
        .replace("\"quality_map\"", "\"maximize_quality\"\nmetrics = [\"Q1\"]")
        .replace("n_psi = 4", "n_psi = 4\n\n[task.search]\nstarts = 1\nmax_iterations = 3");
    let cfg = write(tmp.path(), "s.toml", &text);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let sa = ok(&["maximize", "--config", &cfg, "--out", a.to_str().unwrap(), "--seed", "3"]);
    let sb = ok(&["maximize", "--config", &cfg, "--out", b.to_str().unwrap(), "--seed", "3"]);
    assert_eq!(sa, sb);
    assert!(sa.contains("best Q1"), "{sa}");
    assert_eq!(files(&a), files(&b));
    assert!(a.join("optimum.csv").exists() && a.join("arm_Q1.csv").exists());
}
