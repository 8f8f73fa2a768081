//! `register`: load inputs, run the optimization, write results.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sphereqc::boost::{IntensityTask, LabelTask, LandmarkTask, LossBreakdown};
use sphereqc::losses::dice_loss;
use sphereqc::mesh::{load_mesh, load_scalar_field, locate_on_sphere, save_mesh, MeshFormat};
use sphereqc::metrics::{field_ncc, quality};
use sphereqc::{
    BoostState, LandmarkSpec, Registration, RegistrationResult, SolverConfig, StandardSphere, StopConfig,
    TaskContext, TriMesh,
};

use crate::config::RunConfig;
use crate::report::{ChartDistortion, FinalMetrics, OutputFiles, Report};

/// Largest allowed deviation of a vertex norm from 1 for sphere inputs.
const UNIT_SPHERE_TOL: f64 = 1e-6;

pub fn load_sphere_mesh(path: &Path) -> Result<TriMesh> {
    let m = load_mesh(path, MeshFormat::from_path(path)).with_context(|| format!("loading mesh {}", path.display()))?;
    for (i, v) in m.vertices.iter().enumerate() {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if (n - 1.0).abs() > UNIT_SPHERE_TOL {
            bail!("{}: vertex {i} has norm {n}; expected a unit-sphere mesh", path.display());
        }
    }
    Ok(m)
}

pub fn load_spec(path: &Path) -> Result<LandmarkSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    LandmarkSpec::from_json(&text).with_context(|| format!("parsing landmark spec {}", path.display()))
}

fn load_field(path: &Path) -> Result<Vec<f64>> {
    load_scalar_field(path).with_context(|| format!("loading field {}", path.display()))
}

fn load_labels(path: &Path) -> Result<Vec<usize>> {
    load_field(path)?
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            if v >= 0.0 && v.fract() == 0.0 && v < u32::MAX as f64 {
                Ok(v as usize)
            } else {
                bail!("{}: entry {i} is {v}, not a label", path.display())
            }
        })
        .collect()
}

/// Hard labels of `fixed_mesh` read at `points` (label of the heaviest
/// corner of the containing face).
fn pull_labels(fixed_mesh: &TriMesh, fixed: &[usize], points: &[sphereqc::Vec3]) -> Result<Vec<usize>> {
    if fixed.len() != fixed_mesh.num_vertices() {
        bail!(
            "label field has {} entries for a mesh with {} vertices",
            fixed.len(),
            fixed_mesh.num_vertices()
        );
    }
    Ok(locate_on_sphere(fixed_mesh, points)?
        .iter()
        .map(|h| {
            let f = fixed_mesh.faces[h.face];
            let j = (0..3).max_by(|&a, &b| h.weights[a].total_cmp(&h.weights[b])).expect("three corners");
            fixed[f[j]]
        })
        .collect())
}

struct Inputs {
    moving_mesh: TriMesh,
    fixed_mesh: Option<TriMesh>,
    spec: Option<LandmarkSpec>,
    intensity: Option<(Vec<f64>, Vec<f64>)>,
    labels: Option<(Vec<usize>, Vec<usize>)>,
}

impl Inputs {
    fn load(cfg: &RunConfig) -> Result<Self> {
        let moving_mesh = load_sphere_mesh(&cfg.moving)?;
        let fixed_mesh = cfg.fixed.as_deref().map(load_sphere_mesh).transpose()?;
        let spec = cfg.landmarks.as_deref().map(load_spec).transpose()?;
        let field = |n: &str| cfg.fields.get(n);
        let intensity = match (field("moving"), field("fixed")) {
            (Some(m), Some(f)) => Some((load_field(m)?, load_field(f)?)),
            _ => None,
        };
        let labels = match (field("moving_labels"), field("fixed_labels")) {
            (Some(m), Some(f)) => Some((load_labels(m)?, load_labels(f)?)),
            _ => None,
        };
        Ok(Self {
            moving_mesh,
            fixed_mesh,
            spec,
            intensity,
            labels,
        })
    }

    fn task(&self, sphere: &StandardSphere) -> Result<TaskContext> {
        let mut task = TaskContext::identity();
        if let Some(spec) = &self.spec {
            task.landmarks = Some(LandmarkTask::new(sphere, spec.clone(), &self.moving_mesh.vertices)?);
        }
        let fixed_mesh = || self.fixed_mesh.as_ref().context("field matching needs the fixed mesh");
        if let Some((m, f)) = &self.intensity {
            task.intensity = Some(
                IntensityTask::new(sphere, &self.moving_mesh, m, fixed_mesh()?, f).context("transferring fields")?,
            );
        }
        if let Some((m, f)) = &self.labels {
            task.labels =
                Some(LabelTask::new(sphere, &self.moving_mesh, m, fixed_mesh()?, f).context("transferring labels")?);
        }
        Ok(task)
    }

    fn metrics(&self, deformed: &[sphereqc::Vec3]) -> Result<FinalMetrics> {
        let quality = quality(&self.moving_mesh, deformed, self.spec.as_ref())?;
        let ident = &self.moving_mesh.vertices;
        let (mut ncc, mut ncc_identity, mut dice, mut dice_identity) = (None, None, None, None);
        if let (Some((m, f)), Some(fm)) = (&self.intensity, &self.fixed_mesh) {
            ncc = Some(field_ncc(deformed, m, fm, f)?);
            ncc_identity = Some(field_ncc(ident, m, fm, f)?);
        }
        if let (Some((m, f)), Some(fm)) = (&self.labels, &self.fixed_mesh) {
            let parcels = m.iter().chain(f).max().map_or(0, |x| x + 1);
            let score = |pts: &[sphereqc::Vec3]| -> Result<f64> {
                let pulled = pull_labels(fm, f, pts)?;
                Ok(1.0 - dice_loss(m, &pulled, parcels)?.0)
            };
            dice = Some(score(deformed)?);
            dice_identity = Some(score(ident)?);
        }
        Ok(FinalMetrics {
            quality,
            ncc,
            ncc_identity,
            dice,
            dice_identity,
        })
    }
}

/// Everything a finished registration produced.
pub struct Outcome {
    pub report: Report,
    pub result: RegistrationResult,
    pub report_path: PathBuf,
}

/// Runs one registration and writes its outputs to `cfg.out` (or the
/// current directory). `progress` sees every evaluated breakdown.
pub fn run(cfg: &RunConfig, mut progress: impl FnMut(usize, &LossBreakdown)) -> Result<Outcome> {
    let inputs = Inputs::load(cfg)?;
    let sphere = StandardSphere::new(cfg.rings)?;
    let task = inputs.task(&sphere)?;
    let nv = sphere.disk.num_vertices();
    let mut reg = Registration::new(sphere, task, cfg.weights, SolverConfig::default())?;
    let mut state = BoostState::identity(nv, cfg.lr)?;
    let stop = StopConfig {
        max_iters: cfg.max_iters,
        ..StopConfig::default()
    };
    let result = reg.optimize(&mut state, stop, &mut progress)?;
    let (deformed, face_mu) = result.extract_map(&inputs.moving_mesh)?;
    let metrics = inputs.metrics(&deformed)?;

    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let files = OutputFiles {
        deformed: out.join("deformed.off"),
        face_mu: out.join("face_mu.csv"),
        loss_history: out.join("loss.csv"),
    };
    let mesh = TriMesh::new(deformed, inputs.moving_mesh.faces.clone(), sphereqc::mesh::Dim::Three)?;
    save_mesh(&mesh, &files.deformed, MeshFormat::Off)?;
    write_face_mu(&files.face_mu, &face_mu)?;
    write_history(&files.loss_history, &result.history)?;

    let report = Report {
        config: cfg.clone(),
        iterations: result.iterations,
        converged: result.converged,
        failed: result.failed,
        seconds: result.seconds,
        breakdown: result.breakdown,
        metrics,
        chart: ChartDistortion {
            mean_mu: result.mean_mu(),
            max_mu: result.max_mu(),
        },
        files,
        history: result.history.clone(),
    };
    let report_path = out.join("report.json");
    report.save(&report_path)?;
    Ok(Outcome {
        report,
        result,
        report_path,
    })
}

fn write_face_mu(path: &Path, mu: &[f64]) -> Result<()> {
    let mut s = String::from("face,mu\n");
    for (i, m) in mu.iter().enumerate() {
        let _ = writeln!(s, "{i},{m:?}");
    }
    std::fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

fn write_history(path: &Path, history: &[LossBreakdown]) -> Result<()> {
    let mut s = String::from("iteration,task,bm,folding,bs,bc,smooth,total,folds\n");
    for (i, b) in history.iter().enumerate() {
        let _ = writeln!(
            s,
            "{i},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{}",
            b.task, b.bm, b.folding, b.bs, b.bc, b.smooth, b.total, b.folds
        );
    }
    std::fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}
