use super::{BeltramiField, Site};
use crate::geom::{double_area, C64};
use crate::mesh::TriMesh;
use crate::{Error, Result};

/// Wirtinger derivatives `(f_z, f_z̄)` of the linear map sending triangle `p`
/// to `u`.
///
/// With oriented opposite edges `e_j = p_{j+2} − p_{j+1}` and `d` twice the
/// signed area, `f_z̄ = (i / 2d) Σ e_j u_j` and `f_z = (−i / 2d) Σ ē_j u_j`.
#[inline]
pub fn face_wirtinger(p: [C64; 3], u: [C64; 3]) -> (C64, C64) {
    let d = double_area(p[0], p[1], p[2]);
    let mut s = C64::new(0.0, 0.0);
    let mut sc = C64::new(0.0, 0.0);
    for j in 0..3 {
        let e = p[(j + 2) % 3] - p[(j + 1) % 3];
        s += e * u[j];
        sc += e.conj() * u[j];
    }
    let k = 0.5 / d;
    (C64::new(0.0, -k) * sc, C64::new(0.0, k) * s)
}

/// Per-face `μ = f_z̄ / f_z` of the piecewise-linear map `positions`.
pub fn bc_from_map(mesh: &TriMesh, positions: &[C64]) -> Result<BeltramiField> {
    if positions.len() != mesh.num_vertices() {
        return Err(Error::SizeMismatch {
            what: "map positions",
            expected: mesh.num_vertices(),
            got: positions.len(),
        });
    }
    let mut out = Vec::with_capacity(mesh.num_faces());
    for (fi, f) in mesh.faces.iter().enumerate() {
        let p = [mesh.point2(f[0]), mesh.point2(f[1]), mesh.point2(f[2])];
        if double_area(p[0], p[1], p[2]) == 0.0 {
            return Err(Error::DegenerateFace { face: fi });
        }
        let (fz, fzb) = face_wirtinger(p, [positions[f[0]], positions[f[1]], positions[f[2]]]);
        if fz.norm_sqr() == 0.0 {
            return Err(Error::DegenerateConformalFactor { face: fi });
        }
        let mu = fzb / fz;
        if !(mu.re.is_finite() && mu.im.is_finite()) {
            return Err(Error::DegenerateConformalFactor { face: fi });
        }
        out.push(mu);
    }
    Ok(BeltramiField::per_face(out))
}

/// Face value = mean of its three vertex values.
pub fn face_bc_from_vertex_bc(mesh: &TriMesh, mu: &BeltramiField) -> Result<BeltramiField> {
    if mu.site != Site::PerVertex {
        return Err(Error::InvalidArgument("expected a per-vertex Beltrami field".into()));
    }
    if mu.values.len() != mesh.num_vertices() {
        return Err(Error::SizeMismatch {
            what: "per-vertex Beltrami field",
            expected: mesh.num_vertices(),
            got: mu.values.len(),
        });
    }
    let v = &mu.values;
    Ok(BeltramiField::per_face(
        mesh.faces
            .iter()
            .map(|f| (v[f[0]] + v[f[1]] + v[f[2]]) / 3.0)
            .collect(),
    ))
}
