//! The differentiable chart map: activated Beltrami coefficients and pins go
//! through the two-pin least-squares solve, then a similarity `x ↦ ϕe^{iφ}x + r`.
//! Gradients come from one adjoint solve with the forward factorization.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::geom::C64;
use crate::lsqc::{DiskMap, FaceStencils, Factorization, LsqcSolver, SolverConfig};
use crate::mesh::TriMesh;
use crate::{Error, Result};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Largest vertex coefficient modulus after activation. Face means of such
/// values stay inside the solver's admissibility margin.
pub const VERTEX_BC_CAP: f64 = 1.0 - 2e-6;

/// `tanh(|x|/T)·e^{i arg x}`, with `0 ↦ 0`.
pub fn activate(x: C64, temperature: f64) -> C64 {
    let s = x.norm();
    if s / temperature > 1e-3 {
        // keep the modulus strictly below one after rounding
        return x * ((s / temperature).tanh().min(1.0 - 1e-15) / s);
    }
    x * ratio(s, temperature).0
}

/// `h(s) = tanh(s/T)/s` and `h'(s)/s`, with series near `s = 0`.
fn ratio(s: f64, t: f64) -> (f64, f64) {
    let u = s / t;
    if u < 1e-3 {
        let u2 = u * u;
        (
            (1.0 - u2 / 3.0 + 2.0 * u2 * u2 / 15.0) / t,
            (-2.0 / 3.0 + 8.0 * u2 / 15.0) / (t * t * t),
        )
    } else {
        let th = u.tanh();
        let sech2 = 1.0 - th * th;
        (th / s, (s * sech2 / t - th) / (s * s * s))
    }
}

/// Pulls a cotangent on `activate(x, T)` back to `(x, T)`.
pub fn activate_vjp(x: C64, temperature: f64, g: C64) -> (C64, f64) {
    let s = x.norm();
    let (h, dh_over_s) = ratio(s, temperature);
    let gx = g * h + x * (dh_over_s * (g.conj() * x).re);
    let u = s / temperature;
    let sech2 = 1.0 / u.cosh().powi(2);
    let dy_dt = -x * (sech2 / (temperature * temperature));
    (gx, (g.conj() * dy_dt).re)
}

/// Activation with the modulus capped at [`VERTEX_BC_CAP`]; the flag reports
/// whether the cap was hit.
fn activate_capped(x: C64, temperature: f64) -> (C64, bool) {
    let y = activate(x, temperature);
    let m = y.norm();
    if m > VERTEX_BC_CAP {
        (y * (VERTEX_BC_CAP / m), true)
    } else {
        (y, false)
    }
}

fn activate_capped_vjp(x: C64, temperature: f64, capped: bool, g: C64) -> (C64, f64) {
    if !capped {
        return activate_vjp(x, temperature, g);
    }
    // y = cap·x/|x|: only the angular part survives
    let s = x.norm();
    let gx = g * (VERTEX_BC_CAP / s) - x * (VERTEX_BC_CAP * (g.conj() * x).re / (s * s * s));
    (gx, 0.0)
}

/// Trainable parameters of one chart.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ChartParams {
    pub mu_raw: Vec<C64>,
    pub temp_bc: f64,
    pub pins_raw: [C64; 2],
    pub temp_pin: f64,
    pub rot: f64,
    pub scale: f64,
    pub trans: C64,
}

/// Raw value whose activation lands just inside the unit circle on the
/// positive real axis at temperature 1.
pub fn boundary_pin_raw() -> f64 {
    (1.0 - 1e-12f64).atanh()
}

impl ChartParams {
    /// Parameters of the identity map: zero coefficients, pins at the center
    /// and at `+1`, unit temperatures, identity similarity.
    pub fn identity(num_vertices: usize) -> Self {
        Self {
            mu_raw: vec![ZERO; num_vertices],
            temp_bc: 1.0,
            pins_raw: [ZERO, C64::new(boundary_pin_raw(), 0.0)],
            temp_pin: 1.0,
            rot: 0.0,
            scale: 1.0,
            trans: ZERO,
        }
    }

    /// Number of real parameters in [`Self::flatten`].
    pub fn flat_len(num_vertices: usize) -> usize {
        2 * num_vertices + 10
    }

    /// Real layout: `μ̃` (re, im per vertex), `T_BC`, two pins (re, im),
    /// `T_pin`, `φ`, `ϕ`, `r` (re, im).
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(Self::flat_len(self.mu_raw.len()));
        for m in &self.mu_raw {
            v.push(m.re);
            v.push(m.im);
        }
        v.push(self.temp_bc);
        for p in &self.pins_raw {
            v.push(p.re);
            v.push(p.im);
        }
        v.extend([self.temp_pin, self.rot, self.scale, self.trans.re, self.trans.im]);
        v
    }

    pub fn unflatten(num_vertices: usize, v: &[f64]) -> Result<Self> {
        if v.len() != Self::flat_len(num_vertices) {
            return Err(Error::SizeMismatch {
                what: "flat chart parameters",
                expected: Self::flat_len(num_vertices),
                got: v.len(),
            });
        }
        let n = 2 * num_vertices;
        let t = &v[n..];
        Ok(Self {
            mu_raw: v[..n].chunks(2).map(|c| C64::new(c[0], c[1])).collect(),
            temp_bc: t[0],
            pins_raw: [C64::new(t[1], t[2]), C64::new(t[3], t[4])],
            temp_pin: t[5],
            rot: t[6],
            scale: t[7],
            trans: C64::new(t[8], t[9]),
        })
    }

    pub fn similarity(&self) -> C64 {
        C64::from_polar(self.scale, self.rot)
    }

    fn validate(&self, num_vertices: usize) -> Result<()> {
        if self.mu_raw.len() != num_vertices {
            return Err(Error::SizeMismatch {
                what: "raw Beltrami coefficients",
                expected: num_vertices,
                got: self.mu_raw.len(),
            });
        }
        if !(self.temp_bc > 0.0 && self.temp_pin > 0.0) {
            return Err(Error::InvalidArgument("temperatures must be positive".into()));
        }
        if !(self.scale > 0.0) {
            return Err(Error::InvalidArgument("similarity scale must be positive".into()));
        }
        let finite = self.flatten().iter().all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidArgument("non-finite chart parameter".into()));
        }
        Ok(())
    }
}

/// Gradient of a scalar loss with respect to every [`ChartParams`] field.
/// Complex entries hold `∂/∂Re + i ∂/∂Im`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartGrads {
    pub mu_raw: Vec<C64>,
    pub temp_bc: f64,
    pub pins_raw: [C64; 2],
    pub temp_pin: f64,
    pub rot: f64,
    pub scale: f64,
    pub trans: C64,
}

impl ChartGrads {
    pub fn zeros(num_vertices: usize) -> Self {
        Self {
            mu_raw: vec![ZERO; num_vertices],
            temp_bc: 0.0,
            pins_raw: [ZERO; 2],
            temp_pin: 0.0,
            rot: 0.0,
            scale: 0.0,
            trans: ZERO,
        }
    }

    /// Same layout as [`ChartParams::flatten`].
    pub fn flatten(&self) -> Vec<f64> {
        ChartParams {
            mu_raw: self.mu_raw.clone(),
            temp_bc: self.temp_bc,
            pins_raw: self.pins_raw,
            temp_pin: self.temp_pin,
            rot: self.rot,
            scale: self.scale,
            trans: self.trans,
        }
        .flatten()
    }

    /// Name of the first non-finite group, if any.
    pub fn non_finite(&self) -> Option<&'static str> {
        let bad = |z: &C64| !(z.re.is_finite() && z.im.is_finite());
        if self.mu_raw.iter().any(bad) {
            Some("mu_raw")
        } else if !self.temp_bc.is_finite() {
            Some("temp_bc")
        } else if self.pins_raw.iter().any(bad) {
            Some("pins_raw")
        } else if !self.temp_pin.is_finite() {
            Some("temp_pin")
        } else if !self.rot.is_finite() {
            Some("rot")
        } else if !self.scale.is_finite() {
            Some("scale")
        } else if bad(&self.trans) {
            Some("trans")
        } else {
            None
        }
    }
}

/// Output of one chart: the solved disk map and its similarity image.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartMap {
    pub positions: Vec<C64>,
    pub solved: DiskMap,
    pub rot: f64,
    pub scale: f64,
    pub trans: C64,
}

/// Everything [`vjp`] needs from a forward pass.
#[derive(Debug)]
pub struct ForwardTape {
    pub mu_vertex: Vec<C64>,
    pub mu_face: Vec<C64>,
    pub pin_vertices: [usize; 2],
    pub pin_targets: [C64; 2],
    pub solution: Vec<C64>,
    capped: Vec<bool>,
    params: ChartParams,
    stencils: Arc<FaceStencils>,
    factorization: Factorization,
    generation: u64,
    clock: Arc<AtomicU64>,
}

/// Nearest mesh vertex to each pin, ties within `1e-12` going to the lower
/// index.
pub fn pin_snap(pins: [C64; 2], mesh: &TriMesh) -> Result<[usize; 2]> {
    let nearest = |p: C64| -> Result<usize> {
        if !(p.re.is_finite() && p.im.is_finite()) {
            return Err(Error::InvalidArgument("non-finite pin".into()));
        }
        let mut best = (f64::INFINITY, usize::MAX);
        for i in 0..mesh.num_vertices() {
            let d = (mesh.point2(i) - p).norm();
            if d < best.0 - 1e-12 {
                best = (d, i);
            }
        }
        if best.1 == usize::MAX {
            return Err(Error::InvalidArgument("mesh has no vertices".into()));
        }
        Ok(best.1)
    };
    let a = nearest(pins[0])?;
    let b = nearest(pins[1])?;
    if a == b {
        return Err(Error::CoincidentPins(a));
    }
    Ok([a, b])
}

/// A chart map bound to one disk mesh. Keeps the solver's symbolic
/// factorization across calls.
#[derive(Debug)]
pub struct ChartOperator {
    mesh: TriMesh,
    solver: LsqcSolver,
    stencils: Arc<FaceStencils>,
    clock: Arc<AtomicU64>,
}

impl ChartOperator {
    pub fn new(disk: TriMesh, config: SolverConfig) -> Result<Self> {
        let solver = LsqcSolver::new(&disk, config)?;
        let stencils = Arc::new(solver.stencils().clone());
        Ok(Self {
            mesh: disk,
            solver,
            stencils,
            clock: Arc::new(AtomicU64::new(0)),
        })
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    /// Evaluates the chart map. Any tape from an earlier call becomes stale.
    pub fn forward(&mut self, params: &ChartParams) -> Result<(ChartMap, ForwardTape)> {
        let nv = self.mesh.num_vertices();
        params.validate(nv)?;
        let mut mu_vertex = Vec::with_capacity(nv);
        let mut capped = Vec::with_capacity(nv);
        for &x in &params.mu_raw {
            let (y, c) = activate_capped(x, params.temp_bc);
            mu_vertex.push(y);
            capped.push(c);
        }
        let mu_face: Vec<C64> = self
            .mesh
            .faces
            .iter()
            .map(|f| (mu_vertex[f[0]] + mu_vertex[f[1]] + mu_vertex[f[2]]) / 3.0)
            .collect();
        let pin_targets = params.pins_raw.map(|p| activate(p, params.temp_pin));
        let pin_vertices = pin_snap(pin_targets, &self.mesh)?;
        let (solved, factorization) = self.solver.solve(
            &mu_face,
            [(pin_vertices[0], pin_targets[0]), (pin_vertices[1], pin_targets[1])],
        )?;
        let alpha = params.similarity();
        let positions = solved.positions.iter().map(|u| alpha * u + params.trans).collect();
        let generation = self.clock.fetch_add(1, Ordering::SeqCst) + 1;
        let tape = ForwardTape {
            mu_vertex,
            mu_face,
            pin_vertices,
            pin_targets,
            solution: solved.positions.clone(),
            capped,
            params: params.clone(),
            stencils: Arc::clone(&self.stencils),
            factorization,
            generation,
            clock: Arc::clone(&self.clock),
        };
        let map = ChartMap {
            positions,
            solved,
            rot: params.rot,
            scale: params.scale,
            trans: params.trans,
        };
        Ok((map, tape))
    }
}

/// One-shot forward pass on `mesh`.
pub fn forward(mesh: &TriMesh, params: &ChartParams) -> Result<(ChartMap, ForwardTape)> {
    ChartOperator::new(mesh.clone(), SolverConfig::default())?.forward(params)
}

/// Exact gradient of `⟨cotangent, output⟩` (plus `⟨mu_cotangent, μ_v⟩` when
/// given, a cotangent on the activated vertex coefficients) with respect to
/// every chart parameter.
pub fn vjp(tape: &ForwardTape, cotangent: &[C64], mu_cotangent: Option<&[C64]>) -> Result<ChartGrads> {
    if tape.clock.load(Ordering::SeqCst) != tape.generation {
        return Err(Error::StaleTape);
    }
    let nv = tape.solution.len();
    if cotangent.len() != nv {
        return Err(Error::SizeMismatch {
            what: "output cotangent",
            expected: nv,
            got: cotangent.len(),
        });
    }
    if let Some(m) = mu_cotangent {
        if m.len() != nv {
            return Err(Error::SizeMismatch {
                what: "coefficient cotangent",
                expected: nv,
                got: m.len(),
            });
        }
    }
    let p = &tape.params;
    let alpha = p.similarity();
    let u = &tape.solution;

    // similarity
    let mut grad_alpha = ZERO;
    let mut grads = ChartGrads::zeros(nv);
    for (g, x) in cotangent.iter().zip(u) {
        grads.trans += g;
        grad_alpha += g * x.conj();
    }
    let e = C64::from_polar(1.0, p.rot);
    grads.scale = (grad_alpha.conj() * e).re;
    grads.rot = (grad_alpha.conj() * C64::new(0.0, 1.0) * alpha).re;
    let g_u: Vec<C64> = cotangent.iter().map(|g| alpha.conj() * g).collect();

    // adjoint solve on free vertices
    let fact = &tape.factorization;
    let free = fact.free_vertices();
    let mut lambda: Vec<C64> = free.iter().map(|&v| g_u[v]).collect();
    fact.solve_in_place(&mut lambda)?;
    let mut lam_full = vec![ZERO; nv];
    for (c, &v) in free.iter().enumerate() {
        lam_full[v] = lambda[c];
    }

    let st = &tape.stencils;
    let mut grad_mu_face = vec![ZERO; st.faces.len()];
    let mut grad_pin_vertex = [g_u[tape.pin_vertices[0]], g_u[tape.pin_vertices[1]]];
    for (t, f) in st.faces.iter().enumerate() {
        let w = st.row(t, tape.mu_face[t]);
        let a = &st.scaled_edges[t];
        let (mut r, mut s, mut au, mut bl) = (ZERO, ZERO, ZERO, ZERO);
        for j in 0..3 {
            r += w[j] * u[f[j]];
            s += w[j] * lam_full[f[j]];
            au += a[j].conj() * u[f[j]];
            bl += a[j].conj() * lam_full[f[j]];
        }
        let k = r.conj() * bl + s.conj() * au;
        grad_mu_face[t] = -k.conj();
        for j in 0..3 {
            for (slot, &pv) in tape.pin_vertices.iter().enumerate() {
                if f[j] == pv {
                    grad_pin_vertex[slot] -= w[j].conj() * s;
                }
            }
        }
    }

    // face mean, then activation
    let mut grad_mu_vertex = match mu_cotangent {
        Some(m) => m.to_vec(),
        None => vec![ZERO; nv],
    };
    for (t, f) in st.faces.iter().enumerate() {
        let g = grad_mu_face[t] / 3.0;
        for &v in f {
            grad_mu_vertex[v] += g;
        }
    }
    for v in 0..nv {
        let (gx, gt) = activate_capped_vjp(p.mu_raw[v], p.temp_bc, tape.capped[v], grad_mu_vertex[v]);
        grads.mu_raw[v] = gx;
        grads.temp_bc += gt;
    }
    for i in 0..2 {
        let (gx, gt) = activate_vjp(p.pins_raw[i], p.temp_pin, grad_pin_vertex[i]);
        grads.pins_raw[i] = gx;
        grads.temp_pin += gt;
    }
    if let Some(name) = grads.non_finite() {
        return Err(Error::NonFiniteGradient(name.into()));
    }
    Ok(grads)
}
