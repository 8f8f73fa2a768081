use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::charts::ChartId;
use crate::geom::{cross, dot, norm, norm_sq, scale, sub, Vec3, C64};
use crate::mesh::{cotangent_laplacian, CotanLaplacian, TriMesh};
use crate::{Error, Result};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Weights of the six terms of the total objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub task: f64,
    pub bm: f64,
    pub folding: f64,
    pub bs: f64,
    pub bc: f64,
    pub smooth: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            task: 5.0,
            bm: 1.0,
            folding: 20.0,
            bs: 0.5,
            bc: 0.1,
            smooth: 0.01,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.named() {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "loss weight '{name}' must be a finite nonnegative number, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn named(&self) -> [(&'static str, f64); 6] {
        [
            ("task", self.task),
            ("bm", self.bm),
            ("folding", self.folding),
            ("bs", self.bs),
            ("bc", self.bc),
            ("smooth", self.smooth),
        ]
    }

    /// Parses `name=value` pairs separated by commas over the defaults.
    pub fn parse_overrides(&self, text: &str) -> Result<Self> {
        let mut w = *self;
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("expected name=value, got '{item}'")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("loss weight '{}' is not a number", k.trim())))?;
            let slot = match k.trim() {
                "task" => &mut w.task,
                "bm" => &mut w.bm,
                "folding" => &mut w.folding,
                "bs" => &mut w.bs,
                "bc" => &mut w.bc,
                "smooth" => &mut w.smooth,
                other => return Err(Error::InvalidArgument(format!("unknown loss weight '{other}'"))),
            };
            *slot = v;
        }
        w.validate()?;
        Ok(w)
    }
}

/// Mean squared 3D distance between the south-chart and north-chart lifts of
/// each seam pair `(south vertex, north vertex)`. Returns the value and the
/// cotangents on both charts' positions.
pub fn boundary_matching(
    south: &[C64],
    north: &[C64],
    pairs: &[(usize, usize)],
) -> Result<(f64, Vec<C64>, Vec<C64>)> {
    if pairs.is_empty() {
        return Err(Error::EmptySet);
    }
    let n = pairs.len() as f64;
    let mut gs = vec![ZERO; south.len()];
    let mut gn = vec![ZERO; north.len()];
    let mut value = 0.0;
    for &(s, t) in pairs {
        let (ws, wn) = (south[s], north[t]);
        let d = sub(ChartId::South.lift(ws), ChartId::North.lift(wn));
        value += norm_sq(d);
        let g = scale(d, 2.0 / n);
        gs[s] += ChartId::South.lift_vjp(ws, g);
        gn[t] += ChartId::North.lift_vjp(wn, scale(g, -1.0));
    }
    Ok((value / n, gs, gn))
}

/// Signed face areas against the outward reference orientation, the mean
/// hinge `max(0, −A)`, its gradient, and the number of negative faces.
pub fn folding_penalty(faces: &[[usize; 3]], positions: &[Vec3]) -> (f64, Vec<Vec3>, usize) {
    let mut grad = vec![[0.0; 3]; positions.len()];
    let mut value = 0.0;
    let mut folds = 0;
    let nf = faces.len().max(1) as f64;
    for &[i, j, k] in faces {
        let a = sub(positions[i], positions[k]);
        let b = sub(positions[j], positions[i]);
        let n = cross(a, b);
        if dot(n, positions[i]) >= 0.0 {
            continue;
        }
        folds += 1;
        let len = norm(n);
        value += 0.5 * len;
        if len == 0.0 {
            continue;
        }
        let u = scale(n, 1.0 / len);
        let bn = cross(b, u);
        let na = cross(u, a);
        let c = 0.5 / nf;
        for d in 0..3 {
            grad[i][d] += c * (bn[d] - na[d]);
            grad[k][d] -= c * bn[d];
            grad[j][d] += c * na[d];
        }
    }
    (value / nf, grad, folds)
}

/// `Σ_s |Δ²x_s|² + 0.1 |Δx_s|²` over seam vertices `s` of a planar seam
/// mesh, with cotangent weights frozen at the reference embedding.
#[derive(Clone, Debug)]
pub struct SeamSmoothness {
    laplacian: CotanLaplacian,
    seam: Vec<usize>,
}

impl SeamSmoothness {
    /// `mesh` is the planar seam mesh at its reference positions. Every seam
    /// vertex and every neighbor of one needs a closed one-ring.
    pub fn new(mesh: &TriMesh, seam: &[usize]) -> Result<Self> {
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for f in &mesh.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let open: HashSet<usize> = count
            .iter()
            .filter(|&(_, &c)| c == 1)
            .flat_map(|(&(a, b), _)| [a, b])
            .collect();
        let laplacian = cotangent_laplacian(mesh)?;
        for &s in seam {
            if s >= mesh.num_vertices() {
                return Err(Error::IncompleteOneRing(s));
            }
            if open.contains(&s) {
                return Err(Error::IncompleteOneRing(s));
            }
            if let Some((v, _)) = laplacian.row(s).find(|(v, _)| open.contains(v)) {
                return Err(Error::IncompleteOneRing(v));
            }
        }
        Ok(Self {
            laplacian,
            seam: seam.to_vec(),
        })
    }

    pub fn seam(&self) -> &[usize] {
        &self.seam
    }

    fn transpose_apply(&self, y: &BTreeMap<usize, C64>, out: &mut BTreeMap<usize, C64>) {
        for (&i, &v) in y {
            *out.entry(i).or_default() += v * self.laplacian.diagonal(i);
            for (j, w) in self.laplacian.row(i) {
                *out.entry(j).or_default() += v * w;
            }
        }
    }

    /// Value and gradient with respect to the planar positions.
    pub fn evaluate(&self, positions: &[C64]) -> (f64, Vec<C64>) {
        let l = &self.laplacian;
        let mut lx: BTreeMap<usize, C64> = BTreeMap::new();
        for &s in &self.seam {
            lx.entry(s).or_insert_with(|| l.apply_at(positions, s));
            for (j, _) in l.row(s) {
                lx.entry(j).or_insert_with(|| l.apply_at(positions, j));
            }
        }
        let mut value = 0.0;
        let mut y2: BTreeMap<usize, C64> = BTreeMap::new();
        let mut y1: BTreeMap<usize, C64> = BTreeMap::new();
        for &s in &self.seam {
            let d = lx[&s];
            let dd = l.row(s).fold(ZERO, |acc, (j, w)| acc + (lx[&j] - d) * w);
            value += dd.norm_sqr() + 0.1 * d.norm_sqr();
            *y2.entry(s).or_default() += dd * 2.0;
            *y1.entry(s).or_default() += d * 0.2;
        }
        // grad = Lᵀ(Lᵀ y2 + y1)
        let mut mid = y1;
        self.transpose_apply(&y2, &mut mid);
        let mut out = BTreeMap::new();
        self.transpose_apply(&mid, &mut out);
        let mut grad = vec![ZERO; positions.len()];
        for (i, g) in out {
            grad[i] += g;
        }
        (value, grad)
    }
}

/// `(1/|V|) Σ_v (|μ_S(v)|² + |μ_N(v)|²)` with gradients.
pub fn bc_magnitude(mu_south: &[C64], mu_north: &[C64]) -> Result<(f64, Vec<C64>, Vec<C64>)> {
    if mu_south.len() != mu_north.len() {
        return Err(Error::SizeMismatch {
            what: "per-vertex Beltrami fields",
            expected: mu_south.len(),
            got: mu_north.len(),
        });
    }
    if mu_south.is_empty() {
        return Err(Error::EmptySet);
    }
    let n = mu_south.len() as f64;
    let value = mu_south.iter().chain(mu_north).map(|m| m.norm_sqr()).sum::<f64>() / n;
    let g = |m: &[C64]| m.iter().map(|x| x * (2.0 / n)).collect();
    Ok((value, g(mu_south), g(mu_north)))
}

/// Mean over faces of the squared gradient of the piecewise-linear
/// interpolant of a per-vertex complex field, both charts summed.
#[derive(Clone, Debug)]
pub struct BcSmoothness {
    faces: Vec<[usize; 3]>,
    basis: Vec<[C64; 3]>,
}

impl BcSmoothness {
    pub fn new(mesh: &TriMesh) -> Result<Self> {
        let mut basis = Vec::with_capacity(mesh.num_faces());
        for (t, f) in mesh.faces.iter().enumerate() {
            let p = f.map(|v| mesh.point2(v));
            let d = mesh.face_double_area(t);
            if !(d.abs() > 0.0) {
                return Err(Error::DegenerateFace { face: t });
            }
            let i = C64::new(0.0, 1.0);
            basis.push(std::array::from_fn(|j| i * (p[(j + 2) % 3] - p[(j + 1) % 3]) / d));
        }
        Ok(Self {
            faces: mesh.faces.clone(),
            basis,
        })
    }

    fn one(&self, mu: &[C64], grad: &mut [C64]) -> f64 {
        let nf = self.faces.len() as f64;
        let mut value = 0.0;
        for (f, b) in self.faces.iter().zip(&self.basis) {
            let mut gx = ZERO;
            let mut gy = ZERO;
            for j in 0..3 {
                gx += mu[f[j]] * b[j].re;
                gy += mu[f[j]] * b[j].im;
            }
            value += gx.norm_sqr() + gy.norm_sqr();
            for j in 0..3 {
                grad[f[j]] += (gx * b[j].re + gy * b[j].im) * (2.0 / nf);
            }
        }
        value / nf
    }

    pub fn evaluate(&self, mu_south: &[C64], mu_north: &[C64]) -> (f64, Vec<C64>, Vec<C64>) {
        let mut gs = vec![ZERO; mu_south.len()];
        let mut gn = vec![ZERO; mu_north.len()];
        let v = self.one(mu_south, &mut gs) + self.one(mu_north, &mut gn);
        (v, gs, gn)
    }
}

/// [`BcSmoothness`] as a one-shot function.
pub fn bc_smoothness(mesh: &TriMesh, mu_south: &[C64], mu_north: &[C64]) -> Result<f64> {
    Ok(BcSmoothness::new(mesh)?.evaluate(mu_south, mu_north).0)
}
