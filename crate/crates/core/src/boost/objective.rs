use serde::{Deserialize, Serialize};

use crate::charts::ChartId;
use crate::diffmap::{vjp, ChartGrads, ChartMap, ChartOperator, ChartParams, ForwardTape};
use crate::geom::{Vec3, C64};
use crate::losses::{
    boundary_matching, folding_penalty, landmark_task_grad, ncc_grad, soft_dice_grad, BcSmoothness, LossWeights,
    SeamSmoothness,
};
use crate::lsqc::SolverConfig;
use crate::{Error, Result};

use super::sphere::{SeamMesh, StandardSphere};
use super::task::{Sample, TaskContext};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Unweighted value of every term, their weighted sum and the fold count.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub task: f64,
    pub bm: f64,
    pub folding: f64,
    pub bs: f64,
    pub bc: f64,
    pub smooth: f64,
    pub total: f64,
    pub folds: usize,
}

impl LossBreakdown {
    /// Weighted sum of the six terms.
    pub fn recombine(&self, w: &LossWeights) -> f64 {
        w.task * self.task + w.bm * self.bm + w.folding * self.folding + w.bs * self.bs + w.bc * self.bc
            + w.smooth * self.smooth
    }
}

/// One evaluation of the objective at a pair of chart parameters.
#[derive(Debug)]
pub struct Evaluation {
    pub breakdown: LossBreakdown,
    pub south: ChartMap,
    pub north: ChartMap,
    /// Glued sphere positions.
    pub positions: Vec<Vec3>,
    /// Gradients `(south, north)` when requested.
    pub grads: Option<(ChartGrads, ChartGrads)>,
}

/// The fixed parts of a registration problem: standard sphere, task data,
/// weights, and one chart operator per hemisphere.
#[derive(Debug)]
pub struct Registration {
    pub sphere: StandardSphere,
    pub task: TaskContext,
    pub weights: LossWeights,
    seam_mesh: SeamMesh,
    seam: SeamSmoothness,
    smooth: BcSmoothness,
    south_op: ChartOperator,
    north_op: ChartOperator,
}

struct Cotangents {
    south: Vec<C64>,
    north: Vec<C64>,
}

impl Cotangents {
    fn chart(&mut self, c: ChartId) -> &mut Vec<C64> {
        match c {
            ChartId::South => &mut self.south,
            ChartId::North => &mut self.north,
        }
    }
}

impl Registration {
    pub fn new(sphere: StandardSphere, task: TaskContext, weights: LossWeights, solver: SolverConfig) -> Result<Self> {
        weights.validate()?;
        let seam_mesh = sphere.seam_mesh()?;
        let seam = SeamSmoothness::new(&seam_mesh.mesh, &seam_mesh.seam)?;
        let smooth = BcSmoothness::new(&sphere.disk)?;
        let south_op = ChartOperator::new(sphere.disk.clone(), solver)?;
        let north_op = ChartOperator::new(sphere.disk.clone(), solver)?;
        Ok(Self {
            sphere,
            task,
            weights,
            seam_mesh,
            seam,
            smooth,
            south_op,
            north_op,
        })
    }

    pub fn num_disk_vertices(&self) -> usize {
        self.sphere.disk.num_vertices()
    }

    /// Runs both chart maps, glues them and evaluates every loss term, with
    /// gradients for both parameter sets when `with_grad` is set.
    pub fn evaluate(&mut self, south: &ChartParams, north: &ChartParams, with_grad: bool) -> Result<Evaluation> {
        let (fs, tape_s) = self.south_op.forward(south)?;
        let (fn_, tape_n) = self.north_op.forward(north)?;
        let nd = self.num_disk_vertices();
        let w = self.weights;
        let mut cot = Cotangents {
            south: vec![ZERO; nd],
            north: vec![ZERO; nd],
        };
        let mut b = LossBreakdown::default();
        let (xs, xn) = (&fs.positions, &fn_.positions);

        let positions = self.sphere.glue(xs, xn);

        // boundary matching
        let (bm, gs, gn) = boundary_matching(xs, xn, &self.sphere.seam_pairs)?;
        b.bm = bm;
        axpy(&mut cot.south, w.bm, &gs);
        axpy(&mut cot.north, w.bm, &gn);

        // folding on the glued sphere
        let (fold, g3, folds) = folding_penalty(&self.sphere.sphere.faces, &positions);
        b.folding = fold;
        b.folds = folds;
        if w.folding > 0.0 {
            for (v, g) in g3.iter().enumerate() {
                if *g == [0.0; 3] {
                    continue;
                }
                let (c, d) = self.sphere.sources[v];
                let x = if c == ChartId::South { xs[d] } else { xn[d] };
                cot.chart(c)[d] += c.lift_vjp(x, *g) * w.folding;
            }
        }

        // seam smoothness in the north chart
        let planar = self.sphere.seam_positions(&self.seam_mesh.sphere_of, xs, xn)?;
        let (bs, gp) = self.seam.evaluate(&planar);
        b.bs = bs;
        for (i, g) in gp.iter().enumerate() {
            let (c, d) = self.sphere.sources[self.seam_mesh.sphere_of[i]];
            let g = match c {
                ChartId::North => *g,
                // q = 1/w, dq/dw = −q²
                ChartId::South => (-planar[i] * planar[i]).conj() * g,
            };
            cot.chart(c)[d] += g * w.bs;
        }

        // coefficient regularizers
        let (bc, mus, mun) = crate::losses::bc_magnitude(&tape_s.mu_vertex, &tape_n.mu_vertex)?;
        b.bc = bc;
        let (sm, ss, sn) = self.smooth.evaluate(&tape_s.mu_vertex, &tape_n.mu_vertex);
        b.smooth = sm;
        let mu_cot_s: Vec<C64> = mus.iter().zip(&ss).map(|(a, c)| a * w.bc + c * w.smooth).collect();
        let mu_cot_n: Vec<C64> = mun.iter().zip(&sn).map(|(a, c)| a * w.bc + c * w.smooth).collect();

        b.task = self.task_loss(xs, xn, &mut cot, w.task)?;
        b.total = b.recombine(&w);

        let grads = if with_grad {
            Some((
                finish(&tape_s, &cot.south, &mu_cot_s)?,
                finish(&tape_n, &cot.north, &mu_cot_n)?,
            ))
        } else {
            None
        };
        Ok(Evaluation {
            breakdown: b,
            south: fs,
            north: fn_,
            positions,
            grads,
        })
    }

    /// Sum of the task terms present; adds `scale ×` their cotangents.
    fn task_loss(&self, xs: &[C64], xn: &[C64], cot: &mut Cotangents, scale: f64) -> Result<f64> {
        let sphere = &self.sphere;
        let mut total = 0.0;
        if let Some(lm) = &self.task.landmarks {
            let mut coords = Vec::with_capacity(lm.points.len());
            let mut curves = Vec::with_capacity(lm.points.len());
            for pts in &lm.points {
                let (c, p): (Vec<C64>, Vec<Vec3>) = pts.iter().map(|h| h.deform(&sphere.disk, xs, xn)).unzip();
                coords.push(c);
                curves.push(p);
            }
            let (v, g) = landmark_task_grad(&lm.spec, &curves)?;
            total += v;
            for ((pts, ws), gs) in lm.points.iter().zip(&coords).zip(&g) {
                for ((h, &wz), &g3) in pts.iter().zip(ws).zip(gs) {
                    let gw = h.chart.lift_vjp(wz, g3) * scale;
                    let f = sphere.disk.faces[h.at.face];
                    let target = cot.chart(h.chart);
                    for j in 0..3 {
                        target[f[j]] += gw * h.at.weights[j];
                    }
                }
            }
        }
        let needs_samples = self.task.intensity.is_some() || self.task.labels.is_some();
        if needs_samples {
            let samples: Vec<(Sample, ChartId, usize)> = sphere
                .sources
                .iter()
                .map(|&(c, d)| {
                    let x = if c == ChartId::South { xs[d] } else { xn[d] };
                    Sample::at(sphere, c, x).map(|s| (s, c, d))
                })
                .collect::<Result<_>>()?;
            if let Some(it) = &self.task.intensity {
                let (vals, grads): (Vec<f64>, Vec<C64>) =
                    samples.iter().map(|(s, _, _)| s.read(sphere, &it.fixed)).unzip();
                let (r, dr) = ncc_grad(&it.moving, &vals)?;
                total += 1.0 - r;
                for (((_, c, d), g), dri) in samples.iter().zip(&grads).zip(&dr) {
                    cot.chart(*c)[*d] += g * (-dri * scale);
                }
            }
            if let Some(lb) = &self.task.labels {
                let mut fixed = Vec::with_capacity(lb.parcels);
                let mut fgrads = Vec::with_capacity(lb.parcels);
                for t in &lb.fixed {
                    let (v, g): (Vec<f64>, Vec<C64>) = samples.iter().map(|(s, _, _)| s.read(sphere, t)).unzip();
                    fixed.push(v);
                    fgrads.push(g);
                }
                let (v, dl) = soft_dice_grad(&lb.moving, &fixed)?;
                total += v;
                for (dp, gp) in dl.iter().zip(&fgrads) {
                    for (((_, c, d), g), dli) in samples.iter().zip(gp).zip(dp) {
                        cot.chart(*c)[*d] += g * (dli * scale);
                    }
                }
            }
        }
        Ok(total)
    }
}

fn axpy(y: &mut [C64], a: f64, x: &[C64]) {
    if a == 0.0 {
        return;
    }
    for (y, x) in y.iter_mut().zip(x) {
        *y += x * a;
    }
}

fn finish(tape: &ForwardTape, cot: &[C64], mu_cot: &[C64]) -> Result<ChartGrads> {
    if let Some(i) = cot.iter().chain(mu_cot).position(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::NonFiniteGradient(format!("loss cotangent entry {i}")));
    }
    vjp(tape, cot, Some(mu_cot))
}
