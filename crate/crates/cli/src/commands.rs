//! `synth`, `verify` and `resample`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sphereqc::mesh::{save_mesh, save_scalar_field, MeshFormat};
use sphereqc::metrics::{quality, QualityRow};
use sphereqc::resample::{resample_spec, Resampled};
use sphereqc::{synth, LandmarkSpec, LossWeights, TriMesh};

use crate::config::{Mode, RunConfig};
use crate::register::{load_sphere_mesh, load_spec};
use crate::report::Report;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SynthCase {
    Twist,
    #[value(name = "i-to-c")]
    ItoC,
    RandomSmoothField,
}

/// Files written by `synth`.
#[derive(Clone, Debug)]
pub struct SynthFiles {
    pub mesh: PathBuf,
    /// A ready-to-run registration config referencing the other files.
    pub config: PathBuf,
    pub landmarks: Option<PathBuf>,
    pub fields: Vec<PathBuf>,
}

fn write_spec(spec: &LandmarkSpec, path: &Path) -> Result<()> {
    std::fs::write(path, spec.to_json()?).with_context(|| format!("writing {}", path.display()))
}

pub fn synth(case: SynthCase, n: usize, seed: u64, out: &Path) -> Result<SynthFiles> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mesh_path = out.join("sphere.off");
    let mut files = SynthFiles {
        mesh: mesh_path.clone(),
        config: out.join("register.json"),
        landmarks: None,
        fields: Vec::new(),
    };
    let mut cfg = RunConfig {
        mode: Mode::Landmarks,
        moving: "sphere.off".into(),
        fixed: None,
        landmarks: None,
        fields: BTreeMap::new(),
        weights: LossWeights::default(),
        rings: 24,
        max_iters: 3000,
        lr: 1e-2,
        seed,
        out: None,
    };
    let mesh: TriMesh = match case {
        SynthCase::Twist => {
            let t = synth::twist(n, seed)?;
            let p = out.join("landmarks.json");
            write_spec(&t.spec, &p)?;
            files.landmarks = Some(p);
            cfg.landmarks = Some("landmarks.json".into());
            t.mesh
        }
        SynthCase::ItoC | SynthCase::RandomSmoothField => {
            let c = if case == SynthCase::ItoC {
                synth::i_to_c(seed)?
            } else {
                synth::random_smooth_field(seed)?
            };
            for (name, values) in [("moving", &c.moving), ("fixed", &c.fixed)] {
                let p = out.join(format!("{name}.csv"));
                save_scalar_field(values, &p)?;
                cfg.fields.insert(name.into(), format!("{name}.csv").into());
                files.fields.push(p);
            }
            cfg.fixed = Some("sphere.off".into());
            cfg.mode = Mode::Intensity;
            if let Some(spec) = &c.landmarks {
                let p = out.join("landmarks.json");
                write_spec(spec, &p)?;
                files.landmarks = Some(p);
                cfg.landmarks = Some("landmarks.json".into());
                cfg.mode = Mode::Hybrid;
            }
            c.mesh
        }
    };
    save_mesh(&mesh, &mesh_path, MeshFormat::Off)?;
    std::fs::write(&files.config, serde_json::to_string_pretty(&cfg)?)
        .with_context(|| format!("writing {}", files.config.display()))?;
    Ok(files)
}

/// What `verify` measured.
#[derive(Clone, Debug)]
pub struct Verification {
    pub row: QualityRow,
    /// Largest difference from the report's stored metrics, when verifying
    /// a report.
    pub report_deviation: Option<f64>,
}

impl Verification {
    /// Folds absent and every face strictly quasiconformal.
    pub fn passed(&self) -> bool {
        self.row.folds == 0 && self.row.max_mu < 1.0
    }
}

pub fn verify_meshes(reference: &TriMesh, deformed: &TriMesh, spec: Option<&LandmarkSpec>) -> Result<QualityRow> {
    if reference.faces != deformed.faces || reference.num_vertices() != deformed.num_vertices() {
        bail!("deformed mesh does not share the reference mesh's connectivity");
    }
    Ok(quality(reference, &deformed.vertices, spec)?)
}

fn row_deviation(a: &QualityRow, b: &QualityRow) -> f64 {
    let opt = |x: Option<f64>, y: Option<f64>| match (x, y) {
        (Some(x), Some(y)) => (x - y).abs(),
        (None, None) => 0.0,
        _ => f64::INFINITY,
    };
    let folds = if a.folds == b.folds { 0.0 } else { f64::INFINITY };
    folds
        .max((a.mean_mu - b.mean_mu).abs())
        .max((a.max_mu - b.max_mu).abs())
        .max(opt(a.landmark_mse, b.landmark_mse))
        .max(opt(a.chamfer, b.chamfer))
}

/// Recomputes the quality row of a finished run from the files it names.
pub fn verify_report(path: &Path) -> Result<Verification> {
    let report = Report::load(path)?;
    let reference = load_sphere_mesh(&report.config.moving)?;
    let deformed = sphereqc::mesh::load_mesh(&report.files.deformed, MeshFormat::Off)
        .with_context(|| format!("loading {}", report.files.deformed.display()))?;
    let spec = report.config.landmarks.as_deref().map(load_spec).transpose()?;
    let row = verify_meshes(&reference, &deformed, spec.as_ref())?;
    Ok(Verification {
        report_deviation: Some(row_deviation(&row, &report.metrics.quality)),
        row,
    })
}

pub fn resample(spec_path: &Path, moving: Option<&Path>, points: usize) -> Result<Resampled> {
    let spec = load_spec(spec_path)?;
    let vertices = match moving {
        Some(p) => load_sphere_mesh(p)?.vertices,
        None => Vec::new(),
    };
    Ok(resample_spec(&spec, &vertices, points)?)
}
