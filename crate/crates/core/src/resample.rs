//! Landmark curve preparation: uniform arc-length resampling and rigid
//! alignment of the moving curves onto their targets.

use nalgebra::{Matrix3, Vector3};

use crate::geom::{add, norm, normalize, scale, sub, Vec3};
use crate::losses::{CurvePoints, LandmarkCurve, LandmarkSpec};
use crate::{Error, Result};

/// `count` points evenly spaced by arc length along the polyline `points`,
/// including both ends.
pub fn resample_polyline(points: &[Vec3], count: usize) -> Result<Vec<Vec3>> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "curve needs at least 2 points, got {}",
            points.len()
        )));
    }
    if count < 2 {
        return Err(Error::InvalidArgument(format!("resample count must be at least 2, got {count}")));
    }
    let mut cum = Vec::with_capacity(points.len());
    cum.push(0.0);
    for w in points.windows(2) {
        cum.push(cum.last().unwrap() + norm(sub(w[1], w[0])));
    }
    let total = *cum.last().unwrap();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("curve has zero length".into()));
    }
    let mut out = Vec::with_capacity(count);
    let mut seg = 0;
    for k in 0..count {
        let s = total * k as f64 / (count - 1) as f64;
        while seg + 2 < cum.len() && cum[seg + 1] < s {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let t = if len > 0.0 { ((s - cum[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
        out.push(add(points[seg], scale(sub(points[seg + 1], points[seg]), t)));
    }
    // pin the ends exactly
    out[0] = points[0];
    out[count - 1] = points[points.len() - 1];
    Ok(out)
}

pub type Rotation = [[f64; 3]; 3];

pub fn apply_rotation(r: &Rotation, p: Vec3) -> Vec3 {
    std::array::from_fn(|i| r[i][0] * p[0] + r[i][1] * p[1] + r[i][2] * p[2])
}

/// The rotation `R` minimizing `Σ |R·moving_i − target_i|²` (no translation,
/// no reflection).
pub fn best_rotation(moving: &[Vec3], target: &[Vec3]) -> Result<Rotation> {
    if moving.len() != target.len() {
        return Err(Error::SizeMismatch {
            what: "rotation correspondences",
            expected: target.len(),
            got: moving.len(),
        });
    }
    if moving.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut h = Matrix3::<f64>::zeros();
    for (p, q) in moving.iter().zip(target) {
        h += Vector3::from(*q) * Vector3::from(*p).transpose();
    }
    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let r = u * d * v_t;
    Ok(std::array::from_fn(|i| std::array::from_fn(|j| r[(i, j)])))
}

/// Result of preparing a landmark spec.
#[derive(Clone, Debug)]
pub struct Resampled {
    pub spec: LandmarkSpec,
    /// Rotation applied to the moving sphere.
    pub rotation: Rotation,
}

/// Resamples every moving and target curve to `count` points, then rotates
/// the moving points to minimize the mean squared distance to their targets.
/// Indexed moving curves are read from `moving_vertices`; the output stores
/// explicit points.
pub fn resample_spec(spec: &LandmarkSpec, moving_vertices: &[Vec3], count: usize) -> Result<Resampled> {
    let mut moving = Vec::with_capacity(spec.curves.len());
    let mut targets = Vec::with_capacity(spec.curves.len());
    for (i, c) in spec.curves.iter().enumerate() {
        let with_curve = |e: Error| Error::InvalidArgument(format!("landmark curve {i}: {e}"));
        let pts = c.moving.resolve(moving_vertices)?;
        moving.push(resample_polyline(&pts, count).map_err(with_curve)?);
        targets.push(resample_polyline(&c.target, count).map_err(with_curve)?);
    }
    let flat_m: Vec<Vec3> = moving.iter().flatten().copied().collect();
    let flat_t: Vec<Vec3> = targets.iter().flatten().copied().collect();
    let rotation = best_rotation(&flat_m, &flat_t)?;
    let curves = spec
        .curves
        .iter()
        .zip(moving.into_iter().zip(targets))
        .map(|(c, (m, t))| LandmarkCurve {
            moving: CurvePoints::Points(m.into_iter().map(|p| normalize(apply_rotation(&rotation, p))).collect()),
            target: t.into_iter().map(normalize).collect(),
            endpoints: c.endpoints,
        })
        .collect();
    Ok(Resampled {
        spec: LandmarkSpec {
            curves,
            distance: spec.distance,
        },
        rotation,
    })
}
