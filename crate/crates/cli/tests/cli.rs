use std::path::Path;
use std::process::{Command, Output};

use sphereqc::mesh::{icosphere, save_mesh, MeshFormat};
use sphereqc_cli::report::Report;

fn sphereqc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sphereqc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_icosphere(dir: &Path, level: usize) -> std::path::PathBuf {
    let p = dir.join("ico.off");
    save_mesh(&icosphere(level).unwrap(), &p, MeshFormat::Off).unwrap();
    p
}

#[test]
fn identity_check_is_clean() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = write_icosphere(dir.path(), 3);
    let out = dir.path().join("run");
    let o = sphereqc(&[
        "register",
        "--mode",
        "identity-check",
        "--moving",
        s(&mesh),
        "--rings",
        "8",
        "--out",
        s(&out),
        "--quiet",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = Report::load(&out.join("report.json")).unwrap();
    assert!(report.breakdown.total < 1e-6, "{:?}", report.breakdown);
    assert_eq!(report.metrics.quality.folds, 0);
    assert!(report.metrics.quality.max_mu < 1e-6);
    assert!(out.join("deformed.off").exists() && out.join("face_mu.csv").exists() && out.join("loss.csv").exists());
}

#[test]
fn negative_weight_is_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = write_icosphere(dir.path(), 1);
    let o = sphereqc(&[
        "register",
        "--mode",
        "identity-check",
        "--moving",
        s(&mesh),
        "--weights",
        "smooth=-0.5",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("smooth"), "{err}");
}

#[test]
fn non_sphere_input_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = icosphere(1).unwrap();
    m.vertices[3] = [0.0, 0.0, 2.0];
    let p = dir.path().join("bad.off");
    save_mesh(&m, &p, MeshFormat::Off).unwrap();
    let o = sphereqc(&["register", "--mode", "identity-check", "--moving", s(&p)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("vertex 3"));
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for case in ["twist", "i-to-c", "random-smooth-field"] {
        let (a, b) = (dir.path().join(format!("{case}-a")), dir.path().join(format!("{case}-b")));
        for d in [&a, &b] {
            let o = sphereqc(&["synth", case, "--n", "3", "--seed", "7", "--out", s(d)]);
            assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        }
        for entry in std::fs::read_dir(&a).unwrap() {
            let name = entry.unwrap().file_name();
            let (x, y) = (std::fs::read(a.join(&name)).unwrap(), std::fs::read(b.join(&name)).unwrap());
            assert!(x == y, "{case}: {name:?} differs");
        }
        assert!(a.join("register.json").exists() && a.join("sphere.off").exists());
    }
    let other = dir.path().join("other");
    sphereqc(&["synth", "twist", "--seed", "8", "--out", s(&other)]);
    let twist_a = dir.path().join("twist-a");
    sphereqc(&["synth", "twist", "--seed", "7", "--out", s(&twist_a)]);
    assert_ne!(
        std::fs::read(other.join("landmarks.json")).unwrap(),
        std::fs::read(twist_a.join("landmarks.json")).unwrap()
    );
}

#[test]
fn short_synth_run_round_trips_through_verify() {
    let dir = tempfile::tempdir().unwrap();
    let case = dir.path().join("case");
    sphereqc(&["synth", "twist", "--seed", "2", "--out", s(&case)]);
    let out = dir.path().join("run");
    let o = sphereqc(&[
        "register",
        "--config",
        s(&case.join("register.json")),
        "--rings",
        "6",
        "--max-iters",
        "40",
        "--out",
        s(&out),
        "--quiet",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = sphereqc(&["verify", "--report", s(&out.join("report.json"))]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    let dev: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("max deviation from report "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(dev < 1e-9, "{text}");
}

#[test]
fn verify_identity_and_folded_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = write_icosphere(dir.path(), 2);
    let o = sphereqc(&["verify", "--reference", s(&mesh), "--deformed", s(&mesh)]);
    assert_eq!(o.status.code(), Some(0));
    let row = String::from_utf8_lossy(&o.stdout).lines().nth(1).unwrap().to_string();
    assert!(row.starts_with("0 "), "{row}");

    let mut folded = icosphere(2).unwrap();
    let v = folded.vertices[0];
    folded.vertices[0] = [-v[0], -v[1], -v[2]];
    let p = dir.path().join("folded.off");
    save_mesh(&folded, &p, MeshFormat::Off).unwrap();
    let o = sphereqc(&["verify", "--reference", s(&mesh), "--deformed", s(&p)]);
    assert_eq!(o.status.code(), Some(2));

    let other = dir.path().join("coarse.off");
    save_mesh(&icosphere(1).unwrap(), &other, MeshFormat::Off).unwrap();
    let o = sphereqc(&["verify", "--reference", s(&mesh), "--deformed", s(&other)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("connectivity"));
}

#[test]
fn resample_writes_uniform_aligned_curves() {
    let dir = tempfile::tempdir().unwrap();
    let case = dir.path().join("case");
    sphereqc(&["synth", "twist", "--seed", "4", "--out", s(&case)]);
    let out = dir.path().join("resampled.json");
    let o = sphereqc(&[
        "resample",
        "--spec",
        s(&case.join("landmarks.json")),
        "--moving",
        s(&case.join("sphere.off")),
        "--points",
        "12",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let spec = sphereqc::LandmarkSpec::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    for c in &spec.curves {
        assert_eq!(c.target.len(), 12);
        let sphereqc::losses::CurvePoints::Points(m) = &c.moving else {
            panic!("moving curves are written as points")
        };
        assert_eq!(m.len(), 12);
        for p in m.iter().chain(&c.target) {
            assert!(((p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() - 1.0).abs() < 1e-12);
        }
    }
    // index curves need the moving mesh
    let o = sphereqc(&["resample", "--spec", s(&case.join("landmarks.json"))]);
    assert_eq!(o.status.code(), Some(1));
}
