use std::collections::VecDeque;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diffmap::{ChartGrads, ChartParams};
use crate::geom::{normalize, Vec3, C64};
use crate::lsqc::DiskMap;
use crate::metrics::{count_folds, face_distortion, triangle_distortion};
use crate::mesh::TriMesh;
use crate::{Error, Result};

use super::objective::{Evaluation, LossBreakdown, Registration};
use super::sphere::StandardSphere;

/// Lower bound applied to temperatures and the similarity scale after each
/// update.
pub const MIN_POSITIVE_PARAM: f64 = 1e-3;

/// Changes of the total below this count as no change.
const ABS_CHANGE_FLOOR: f64 = 1e-12;

/// Totals at or below this are treated as the global minimum.
const GLOBAL_MIN_TOTAL: f64 = 1e-16;

/// Adaptive moment estimation over a flat parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(len: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / b1t;
            let vh = self.v[i] / b2t;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

/// Parameters of both charts plus optimizer state.
#[derive(Clone, Debug, PartialEq)]
pub struct BoostState {
    pub theta_south: ChartParams,
    pub theta_north: ChartParams,
    pub adam: Adam,
    pub iteration: usize,
    pub history: VecDeque<f64>,
    history_len: usize,
}

impl BoostState {
    /// Both charts at the identity map.
    pub fn identity(num_disk_vertices: usize, lr: f64) -> Result<Self> {
        if !(lr > 0.0) {
            return Err(Error::InvalidArgument(format!("step size must be positive, got {lr}")));
        }
        let len = 2 * ChartParams::flat_len(num_disk_vertices);
        Ok(Self {
            theta_south: ChartParams::identity(num_disk_vertices),
            theta_north: ChartParams::identity(num_disk_vertices),
            adam: Adam::new(len, lr),
            iteration: 0,
            history: VecDeque::new(),
            history_len: 64,
        })
    }

    fn flatten(&self) -> Vec<f64> {
        let mut v = self.theta_south.flatten();
        v.extend(self.theta_north.flatten());
        v
    }

    fn set_flat(&mut self, v: &[f64]) -> Result<()> {
        let nv = self.theta_south.mu_raw.len();
        let half = ChartParams::flat_len(nv);
        self.theta_south = ChartParams::unflatten(nv, &v[..half])?;
        self.theta_north = ChartParams::unflatten(nv, &v[half..])?;
        for p in [&mut self.theta_south, &mut self.theta_north] {
            p.temp_bc = p.temp_bc.max(MIN_POSITIVE_PARAM);
            p.temp_pin = p.temp_pin.max(MIN_POSITIVE_PARAM);
            p.scale = p.scale.max(MIN_POSITIVE_PARAM);
        }
        Ok(())
    }

    fn record(&mut self, total: f64) {
        self.history.push_back(total);
        while self.history.len() > self.history_len {
            self.history.pop_front();
        }
    }

    /// Applies one optimizer update from chart gradients.
    pub fn apply(&mut self, south: &ChartGrads, north: &ChartGrads) -> Result<()> {
        let mut g = south.flatten();
        g.extend(north.flatten());
        let mut x = self.flatten();
        self.adam.update(&mut x, &g);
        self.set_flat(&x)?;
        self.iteration += 1;
        Ok(())
    }
}

/// Stopping rule: relative change of the total over `window` iterations
/// below `rel_tol`, no folds, and boundary matching below `bm_tol`; or
/// `max_iters` updates. A total at round-off level stops at once.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopConfig {
    pub max_iters: usize,
    pub window: usize,
    pub rel_tol: f64,
    pub bm_tol: f64,
}

impl Default for StopConfig {
    fn default() -> Self {
        Self {
            max_iters: 3000,
            window: 50,
            rel_tol: 1e-6,
            bm_tol: 1e-5,
        }
    }
}

impl StopConfig {
    fn satisfied(&self, state: &BoostState, b: &LossBreakdown) -> bool {
        if b.folds > 0 || b.bm >= self.bm_tol {
            return false;
        }
        // every term is nonnegative, so a total at round-off is a global minimum
        if b.total <= GLOBAL_MIN_TOTAL {
            return true;
        }
        let h = &state.history;
        if h.len() <= self.window {
            return false;
        }
        let now = h[h.len() - 1];
        let then = h[h.len() - 1 - self.window];
        let scale = now.abs().max(then.abs());
        // relative change is meaningless for totals at round-off level
        (now - then).abs() <= self.rel_tol * scale + ABS_CHANGE_FLOOR
    }
}

/// The glued deformation of the standard sphere.
#[derive(Clone, Debug)]
pub struct SphericalMap {
    pub sphere: TriMesh,
    pub positions: Vec<Vec3>,
    pub seam: Vec<usize>,
    pub south: DiskMap,
    pub north: DiskMap,
}

#[derive(Clone, Debug)]
pub struct RegistrationResult {
    pub map: SphericalMap,
    /// Per-face `|μ|` of each final chart map on the standard disk.
    pub mu_south: Vec<f64>,
    pub mu_north: Vec<f64>,
    pub folds: usize,
    /// Breakdown at the returned iterate.
    pub breakdown: LossBreakdown,
    pub iterations: usize,
    pub seconds: f64,
    pub converged: bool,
    /// Set when the run ended with folds remaining.
    pub failed: bool,
    pub history: Vec<LossBreakdown>,
    pub theta_south: ChartParams,
    pub theta_north: ChartParams,
    standard: StandardSphere,
}

impl RegistrationResult {
    pub fn mean_mu(&self) -> f64 {
        let n = (self.mu_south.len() + self.mu_north.len()).max(1) as f64;
        self.mu_south.iter().chain(&self.mu_north).sum::<f64>() / n
    }

    pub fn max_mu(&self) -> f64 {
        self.mu_south.iter().chain(&self.mu_north).copied().fold(0.0, f64::max)
    }

    /// Carries the deformation to a user sphere mesh. Each user vertex is
    /// located in its hemisphere's chart, moved by the interpolated chart map
    /// and lifted back; also returns the per-face `|μ|` of the result.
    pub fn extract_map(&self, user: &TriMesh) -> Result<(Vec<Vec3>, Vec<f64>)> {
        let s = &self.standard;
        let deformed = user
            .vertices
            .iter()
            .map(|&p| {
                let q = if p[2].abs() < 1e-12 { [p[0], p[1], 0.0] } else { p };
                let h = s.locate(q)?;
                let (_, x) = h.deform(&s.disk, &self.map.south.positions, &self.map.north.positions);
                Ok(normalize(x))
            })
            .collect::<Result<Vec<_>>>()?;
        let mu = face_distortion(user, &deformed);
        Ok((deformed, mu))
    }
}

fn chart_distortion(disk: &TriMesh, positions: &[C64]) -> Vec<f64> {
    disk.faces
        .iter()
        .map(|f| triangle_distortion(f.map(|v| disk.point2(v)), f.map(|v| positions[v])))
        .collect()
}

impl Registration {
    /// Evaluates the objective and its gradient, records the total, and
    /// applies one optimizer update.
    pub fn step(&mut self, state: &mut BoostState) -> Result<Evaluation> {
        let ev = self.evaluate(&state.theta_south.clone(), &state.theta_north.clone(), true)?;
        state.record(ev.breakdown.total);
        let (gs, gn) = ev.grads.as_ref().expect("gradients requested");
        state.apply(gs, gn)?;
        Ok(ev)
    }

    /// Runs the optimization loop from `state` until `stop` holds. The
    /// observer sees every evaluated breakdown. A run that hits `max_iters`
    /// returns its lowest-total fold-free iterate when that beats the last
    /// one.
    pub fn optimize(
        &mut self,
        state: &mut BoostState,
        stop: StopConfig,
        mut observer: impl FnMut(usize, &LossBreakdown),
    ) -> Result<RegistrationResult> {
        let start = Instant::now();
        let mut history = Vec::new();
        let mut used = 0;
        // lowest fold-free total seen, with its parameters
        let mut best: Option<(f64, ChartParams, ChartParams)> = None;
        let (mut ev, converged) = loop {
            let ev = self.evaluate(&state.theta_south.clone(), &state.theta_north.clone(), true)?;
            state.record(ev.breakdown.total);
            history.push(ev.breakdown);
            observer(used, &ev.breakdown);
            if stop.satisfied(state, &ev.breakdown) {
                break (ev, true);
            }
            let b = ev.breakdown;
            if b.folds == 0 && best.as_ref().is_none_or(|(t, _, _)| b.total < *t) {
                best = Some((b.total, state.theta_south.clone(), state.theta_north.clone()));
            }
            if used >= stop.max_iters {
                break (ev, false);
            }
            let (gs, gn) = ev.grads.as_ref().expect("gradients requested");
            state.apply(gs, gn)?;
            used += 1;
        };
        let (theta_south, theta_north) = match best {
            Some((total, s, n)) if !converged && total < ev.breakdown.total => {
                ev = self.evaluate(&s, &n, false)?;
                (s, n)
            }
            _ => (state.theta_south.clone(), state.theta_north.clone()),
        };
        let folds = count_folds(&self.sphere.sphere.faces, &ev.positions);
        debug_assert_eq!(folds, ev.breakdown.folds);
        let disk = &self.sphere.disk;
        Ok(RegistrationResult {
            mu_south: chart_distortion(disk, &ev.south.positions),
            mu_north: chart_distortion(disk, &ev.north.positions),
            map: SphericalMap {
                sphere: self.sphere.sphere.clone(),
                positions: ev.positions,
                seam: self.sphere.seam_pairs.iter().map(|&(s, _)| s).collect(),
                south: DiskMap {
                    positions: ev.south.positions,
                },
                north: DiskMap {
                    positions: ev.north.positions,
                },
            },
            folds,
            breakdown: ev.breakdown,
            iterations: used,
            seconds: start.elapsed().as_secs_f64(),
            converged,
            failed: folds > 0,
            history,
            theta_south,
            theta_north,
            standard: self.sphere.clone(),
        })
    }
}
