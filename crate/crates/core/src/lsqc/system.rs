use super::{BeltramiField, Site};
use crate::geom::C64;
use crate::mesh::TriMesh;
use crate::{Error, Result};

/// Coefficients must satisfy `|μ| < 1 − ADMISSIBILITY_MARGIN`.
pub const ADMISSIBILITY_MARGIN: f64 = 1e-6;

/// Geometry-only part of the per-face stencil: oriented opposite edges
/// `e_j = p_{j+2} − p_{j+1}` scaled by `1/√d_T`.
///
/// The energy row of face `T` for coefficient `μ` is `a_j + μ·ā_j`.
#[derive(Clone, Debug)]
pub struct FaceStencils {
    pub faces: Vec<[usize; 3]>,
    pub scaled_edges: Vec<[C64; 3]>,
    pub double_areas: Vec<f64>,
    pub num_vertices: usize,
}

impl FaceStencils {
    pub fn new(mesh: &TriMesh) -> Result<Self> {
        let mut scaled_edges = Vec::with_capacity(mesh.num_faces());
        let mut double_areas = Vec::with_capacity(mesh.num_faces());
        for (fi, f) in mesh.faces.iter().enumerate() {
            let d = mesh.face_double_area(fi);
            if !(d > 0.0) {
                return Err(Error::DegenerateFace { face: fi });
            }
            let s = 1.0 / d.sqrt();
            let p = [mesh.point2(f[0]), mesh.point2(f[1]), mesh.point2(f[2])];
            scaled_edges.push(std::array::from_fn(|j| (p[(j + 2) % 3] - p[(j + 1) % 3]) * s));
            double_areas.push(d);
        }
        Ok(Self {
            faces: mesh.faces.clone(),
            scaled_edges,
            double_areas,
            num_vertices: mesh.num_vertices(),
        })
    }

    #[inline]
    pub fn row(&self, face: usize, mu: C64) -> [C64; 3] {
        let a = &self.scaled_edges[face];
        [a[0] + mu * a[0].conj(), a[1] + mu * a[1].conj(), a[2] + mu * a[2].conj()]
    }

    /// Checks length and `|μ_T| < 1 − margin` for every face.
    pub fn check_admissible(&self, mu_face: &[C64]) -> Result<()> {
        if mu_face.len() != self.faces.len() {
            return Err(Error::SizeMismatch {
                what: "per-face Beltrami field",
                expected: self.faces.len(),
                got: mu_face.len(),
            });
        }
        for (face, m) in mu_face.iter().enumerate() {
            let modulus = m.norm();
            if !(modulus < 1.0 - ADMISSIBILITY_MARGIN) {
                return Err(Error::InadmissibleBeltrami { face, modulus });
            }
        }
        Ok(())
    }
}

pub(crate) fn check_pins(num_vertices: usize, pins: &[(usize, C64); 2]) -> Result<()> {
    for &(v, t) in pins {
        if v >= num_vertices {
            return Err(Error::InvalidArgument(format!(
                "pinned vertex {v} outside 0..{num_vertices}"
            )));
        }
        if !(t.re.is_finite() && t.im.is_finite()) {
            return Err(Error::InvalidArgument(format!("pin target for vertex {v} is not finite")));
        }
    }
    if pins[0].0 == pins[1].0 {
        return Err(Error::CoincidentPins(pins[0].0));
    }
    Ok(())
}

/// Weighted complex system `ℳ` (one row of three entries per face) and the
/// two pinned vertices with their targets.
#[derive(Clone, Debug)]
pub struct LsqcSystem {
    pub num_vertices: usize,
    pub faces: Vec<[usize; 3]>,
    pub rows: Vec<[C64; 3]>,
    pub pins: [(usize, C64); 2],
}

/// Real form `‖𝒜u − b‖²` of the pinned problem with
/// `u = (Re U_f, Im U_f)`; `free` lists vertex indices in column order.
#[derive(Clone, Debug)]
pub struct RealBlocks {
    pub rows: usize,
    pub cols: usize,
    pub a: Vec<(usize, usize, f64)>,
    pub b: Vec<f64>,
    pub free: Vec<usize>,
}

impl LsqcSystem {
    /// `ℳU` per face.
    pub fn residual(&self, positions: &[C64]) -> Vec<C64> {
        self.faces
            .iter()
            .zip(&self.rows)
            .map(|(f, w)| w[0] * positions[f[0]] + w[1] * positions[f[1]] + w[2] * positions[f[2]])
            .collect()
    }

    pub fn energy(&self, positions: &[C64]) -> f64 {
        self.residual(positions).iter().map(|r| r.norm_sqr()).sum()
    }

    pub fn free_vertices(&self) -> Vec<usize> {
        (0..self.num_vertices)
            .filter(|&v| v != self.pins[0].0 && v != self.pins[1].0)
            .collect()
    }

    pub fn real_blocks(&self) -> RealBlocks {
        let free = self.free_vertices();
        let mut col = vec![usize::MAX; self.num_vertices];
        for (k, &v) in free.iter().enumerate() {
            col[v] = k;
        }
        let nf = free.len();
        let nt = self.faces.len();
        let mut a = Vec::with_capacity(12 * nt);
        let mut b = vec![0.0; 2 * nt];
        for (t, (f, w)) in self.faces.iter().zip(&self.rows).enumerate() {
            for j in 0..3 {
                let (m1, m2) = (w[j].re, w[j].im);
                let c = col[f[j]];
                if c != usize::MAX {
                    a.push((t, c, m1));
                    a.push((t, nf + c, -m2));
                    a.push((nt + t, c, m2));
                    a.push((nt + t, nf + c, m1));
                } else {
                    let u = self.pins.iter().find(|p| p.0 == f[j]).map(|p| p.1).unwrap();
                    b[t] -= m1 * u.re - m2 * u.im;
                    b[nt + t] -= m2 * u.re + m1 * u.im;
                }
            }
        }
        RealBlocks {
            rows: 2 * nt,
            cols: 2 * nf,
            a,
            b,
            free,
        }
    }
}

impl RealBlocks {
    /// `‖𝒜u − b‖²` for a full vertex map.
    pub fn residual_sq(&self, positions: &[C64]) -> f64 {
        let nf = self.free.len();
        let mut u = vec![0.0; self.cols];
        for (k, &v) in self.free.iter().enumerate() {
            u[k] = positions[v].re;
            u[nf + k] = positions[v].im;
        }
        let mut r: Vec<f64> = self.b.iter().map(|x| -x).collect();
        for &(i, j, x) in &self.a {
            r[i] += x * u[j];
        }
        r.iter().map(|x| x * x).sum()
    }
}

fn face_values<'a>(mesh: &TriMesh, mu: &'a BeltramiField) -> Result<&'a [C64]> {
    if mu.site != Site::PerFace {
        return Err(Error::InvalidArgument("expected a per-face Beltrami field".into()));
    }
    if mu.values.len() != mesh.num_faces() {
        return Err(Error::SizeMismatch {
            what: "per-face Beltrami field",
            expected: mesh.num_faces(),
            got: mu.values.len(),
        });
    }
    Ok(&mu.values)
}

/// Builds `ℳ` with rows `W_j / √d_T`, `W_j = e_j + μ_T ē_j`.
pub fn assemble(mesh: &TriMesh, mu: &BeltramiField, pins: [(usize, C64); 2]) -> Result<LsqcSystem> {
    let values = face_values(mesh, mu)?;
    let st = FaceStencils::new(mesh)?;
    st.check_admissible(values)?;
    check_pins(mesh.num_vertices(), &pins)?;
    Ok(LsqcSystem {
        num_vertices: mesh.num_vertices(),
        rows: (0..mesh.num_faces()).map(|t| st.row(t, values[t])).collect(),
        faces: st.faces,
        pins,
    })
}

/// `Σ_T (1/d_T)|Σ_j W_j U_j|²`.
pub fn energy(mesh: &TriMesh, mu: &BeltramiField, positions: &[C64]) -> Result<f64> {
    let values = face_values(mesh, mu)?;
    if positions.len() != mesh.num_vertices() {
        return Err(Error::SizeMismatch {
            what: "map positions",
            expected: mesh.num_vertices(),
            got: positions.len(),
        });
    }
    let st = FaceStencils::new(mesh)?;
    Ok((0..mesh.num_faces())
        .map(|t| {
            let w = st.row(t, values[t]);
            let f = st.faces[t];
            (w[0] * positions[f[0]] + w[1] * positions[f[1]] + w[2] * positions[f[2]]).norm_sqr()
        })
        .sum())
}
