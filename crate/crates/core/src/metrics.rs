//! Registration quality measures computed from geometry alone.

use serde::{Deserialize, Serialize};

use crate::charts::ChartId;
use crate::geom::{normalize, Vec3, C64};
use crate::boost::transfer_field;
use crate::losses::{chamfer, landmark_l2, ncc, LandmarkSpec};
use crate::lsqc::face_wirtinger;
use crate::mesh::{locate_on_sphere, signed_face_areas_with_normals, TriMesh};
use crate::{Error, Result};

/// Number of faces whose signed area at `positions` is negative.
pub fn count_folds(faces: &[[usize; 3]], positions: &[Vec3]) -> usize {
    signed_face_areas_with_normals(faces, positions)
        .iter()
        .filter(|&&a| a < 0.0)
        .count()
}

/// `|f_z̄ / f_z|` of a piecewise-linear planar map on one triangle, infinite
/// when the map collapses the triangle's conformal part.
pub fn triangle_distortion(reference: [C64; 3], image: [C64; 3]) -> f64 {
    let (fz, fzb) = face_wirtinger(reference, image);
    let m = fzb.norm() / fz.norm();
    if m.is_finite() {
        m
    } else {
        f64::INFINITY
    }
}

/// Per-face Beltrami modulus of a sphere deformation, measured in the
/// stereographic chart centered on each reference face (south chart for
/// faces whose centroid has `z ≥ 0`).
pub fn face_distortion(reference: &TriMesh, deformed: &[Vec3]) -> Vec<f64> {
    reference
        .faces
        .iter()
        .map(|f| {
            let r = f.map(|v| reference.vertices[v]);
            let z = r[0][2] + r[1][2] + r[2][2];
            let chart = if z >= 0.0 { ChartId::South } else { ChartId::North };
            let proj = |p: Vec3| chart.project(normalize(p)).ok();
            let a = r.map(proj);
            let b = f.map(|v| proj(deformed[v]));
            match (a, b) {
                ([Some(a0), Some(a1), Some(a2)], [Some(b0), Some(b1), Some(b2)]) => {
                    triangle_distortion([a0, a1, a2], [b0, b1, b2])
                }
                _ => f64::INFINITY,
            }
        })
        .collect()
}

/// The four quality columns plus the largest distortion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityRow {
    pub folds: usize,
    pub mean_mu: f64,
    pub max_mu: f64,
    /// Mean squared landmark distance, when every curve has as many points
    /// as its target.
    pub landmark_mse: Option<f64>,
    /// Mean chamfer distance over landmark curves.
    pub chamfer: Option<f64>,
}

impl QualityRow {
    pub fn header() -> &'static str {
        "folds  mean|mu|      max|mu|       landmark_mse  chamfer"
    }

    pub fn format_row(&self) -> String {
        let opt = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"));
        format!(
            "{:<6} {:<13.6e} {:<13.6e} {:<13} {}",
            self.folds,
            self.mean_mu,
            self.max_mu,
            opt(self.landmark_mse),
            opt(self.chamfer)
        )
    }
}

/// Deformed landmark curves: each moving point is located on the reference
/// sphere and carried by the interpolated deformation.
pub fn deformed_curves(reference: &TriMesh, deformed: &[Vec3], spec: &LandmarkSpec) -> Result<Vec<Vec<Vec3>>> {
    spec.curves
        .iter()
        .map(|c| {
            let pts = c.moving.resolve(&reference.vertices)?;
            let handles = locate_on_sphere(reference, &pts)?;
            Ok(handles
                .iter()
                .map(|h| {
                    let f = reference.faces[h.face];
                    let mut p = [0.0; 3];
                    for j in 0..3 {
                        for k in 0..3 {
                            p[k] += h.weights[j] * deformed[f[j]][k];
                        }
                    }
                    normalize(p)
                })
                .collect())
        })
        .collect()
}

/// Correlation between a moving field and a fixed field pulled back through
/// the deformation: the fixed field is read at each deformed vertex.
pub fn field_ncc(deformed: &[Vec3], moving: &[f64], fixed_mesh: &TriMesh, fixed: &[f64]) -> Result<f64> {
    let pulled = transfer_field(fixed_mesh, fixed, deformed)?;
    ncc(moving, &pulled)
}

/// Recomputes the quality row from a reference sphere and its deformation.
pub fn quality(reference: &TriMesh, deformed: &[Vec3], spec: Option<&LandmarkSpec>) -> Result<QualityRow> {
    if deformed.len() != reference.num_vertices() {
        return Err(Error::SizeMismatch {
            what: "deformed positions",
            expected: reference.num_vertices(),
            got: deformed.len(),
        });
    }
    let mu = face_distortion(reference, deformed);
    let folds = count_folds(&reference.faces, deformed);
    let mean_mu = mu.iter().sum::<f64>() / mu.len().max(1) as f64;
    let max_mu = mu.iter().copied().fold(0.0, f64::max);
    let (mut landmark_mse, mut chamfer_mean) = (None, None);
    if let Some(spec) = spec {
        let curves = deformed_curves(reference, deformed, spec)?;
        if spec.curves.iter().zip(&curves).all(|(c, d)| c.target.len() == d.len()) {
            let flat: Vec<Vec3> = curves.iter().flatten().copied().collect();
            landmark_mse = Some(landmark_l2(&flat, &spec.all_targets())?);
        }
        let mut s = 0.0;
        for (c, d) in spec.curves.iter().zip(&curves) {
            s += chamfer(d, &c.target)?;
        }
        chamfer_mean = Some(s / spec.curves.len() as f64);
    }
    Ok(QualityRow {
        folds,
        mean_mu,
        max_mu,
        landmark_mse,
        chamfer: chamfer_mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{add, scale, sub};
    use crate::mesh::icosphere;

    #[test]
    fn identity_has_no_distortion() {
        let m = icosphere(3).unwrap();
        let q = quality(&m, &m.vertices, None).unwrap();
        assert_eq!(q.folds, 0);
        assert!(q.mean_mu < 1e-8 && q.max_mu < 1e-8);
    }

    #[test]
    fn rotation_is_conformal() {
        let m = icosphere(2).unwrap();
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let rot: Vec<Vec3> = m.vertices.iter().map(|p| [c * p[0] - s * p[2], p[1], s * p[0] + c * p[2]]).collect();
        let q = quality(&m, &rot, None).unwrap();
        assert_eq!(q.folds, 0);
        // chordal triangles are not exactly conformal images, but close
        assert!(q.max_mu < 0.05, "{}", q.max_mu);
    }

    #[test]
    fn field_ncc_undoes_rotation() {
        let m = icosphere(3).unwrap();
        let rot = |p: Vec3, a: f64| [a.cos() * p[0] - a.sin() * p[1], a.sin() * p[0] + a.cos() * p[1], p[2]];
        let f = |p: Vec3| (2.0 * p[0]).sin() + p[1] * p[2];
        let moving: Vec<f64> = m.vertices.iter().map(|&p| f(p)).collect();
        let fixed: Vec<f64> = m.vertices.iter().map(|&p| f(rot(p, -0.3))).collect();
        let carried: Vec<Vec3> = m.vertices.iter().map(|&p| rot(p, 0.3)).collect();
        let at_identity = field_ncc(&m.vertices, &moving, &m, &fixed).unwrap();
        let aligned = field_ncc(&carried, &moving, &m, &fixed).unwrap();
        assert!(aligned > 0.999 && aligned > at_identity, "{aligned} {at_identity}");
    }

    #[test]
    fn reflected_vertex_folds() {
        let m = icosphere(2).unwrap();
        let mut x = m.vertices.clone();
        let (v, u) = (m.faces[0][0], m.faces[0][1]);
        x[v] = normalize(add(x[v], scale(sub(x[u], x[v]), 2.5)));
        assert!(count_folds(&m.faces, &x) >= 1);
    }
}
