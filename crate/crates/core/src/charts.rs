//! The two stereographic charts of the unit sphere and the rules that move
//! Beltrami coefficients between them.
//!
//! The north chart projects from `(0,0,1)`, the south chart from `(0,0,−1)`
//! with a complex conjugation, so both charts induce the same orientation and
//! the change of coordinates between them is `z ↦ 1/z`.

use crate::geom::{Vec3, C64};
use crate::lsqc::{BeltramiField, Site};
use crate::mesh::{PointLocator, TriMesh};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartId {
    North,
    South,
}

impl ChartId {
    pub fn other(self) -> Self {
        match self {
            ChartId::North => ChartId::South,
            ChartId::South => ChartId::North,
        }
    }

    pub fn project(self, p: Vec3) -> Result<C64> {
        match self {
            ChartId::North => stereo_north(p),
            ChartId::South => stereo_south(p),
        }
    }

    pub fn lift(self, z: C64) -> Vec3 {
        match self {
            ChartId::North => stereo_north_inv(z),
            ChartId::South => stereo_south_inv(z),
        }
    }

    /// Pulls a 3D cotangent on `lift(z)` back to a complex cotangent on `z`.
    pub fn lift_vjp(self, z: C64, g: Vec3) -> C64 {
        let (a, b) = (z.re, z.im);
        let d = 1.0 + a * a + b * b;
        let (d1, d2) = (2.0 / d, 4.0 / (d * d));
        // Jacobian columns of the north lift; the south lift flips y and z
        let da = [d1 - d2 * a * a, -d2 * a * b, d2 * a];
        let db = [-d2 * a * b, d1 - d2 * b * b, d2 * b];
        let g = match self {
            ChartId::North => g,
            ChartId::South => [g[0], -g[1], -g[2]],
        };
        let dot = |u: [f64; 3]| u[0] * g[0] + u[1] * g[1] + u[2] * g[2];
        C64::new(dot(da), dot(db))
    }
}

const POLE_TOLERANCE: f64 = 1e-12;

fn check_unit(p: Vec3) -> Result<()> {
    let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "point ({}, {}, {}) is not on the unit sphere (norm {n})",
            p[0], p[1], p[2]
        )));
    }
    Ok(())
}

/// `(x + iy) / (1 − z)`.
pub fn stereo_north(p: Vec3) -> Result<C64> {
    check_unit(p)?;
    let d = 1.0 - p[2];
    if d <= POLE_TOLERANCE {
        return Err(Error::ProjectionSingular(p[0], p[1], p[2]));
    }
    Ok(C64::new(p[0] / d, p[1] / d))
}

/// `(x − iy) / (1 + z)`.
pub fn stereo_south(p: Vec3) -> Result<C64> {
    check_unit(p)?;
    let d = 1.0 + p[2];
    if d <= POLE_TOLERANCE {
        return Err(Error::ProjectionSingular(p[0], p[1], p[2]));
    }
    Ok(C64::new(p[0] / d, -p[1] / d))
}

pub fn stereo_north_inv(w: C64) -> Vec3 {
    let r2 = w.norm_sqr();
    let d = 1.0 + r2;
    [2.0 * w.re / d, 2.0 * w.im / d, (r2 - 1.0) / d]
}

pub fn stereo_south_inv(w: C64) -> Vec3 {
    let r2 = w.norm_sqr();
    let d = 1.0 + r2;
    [2.0 * w.re / d, -2.0 * w.im / d, (1.0 - r2) / d]
}

/// `1/z`, the coordinate change between the two charts (in either direction).
pub fn transition(z: C64) -> Result<C64> {
    if z == C64::new(0.0, 0.0) {
        return Err(Error::ZeroArgument);
    }
    Ok(z.inv())
}

/// Vertex sets `(upper, lower)` by the sign of `z`; vertices within `1e-12`
/// of the equator belong to both.
pub fn split_hemispheres(sphere: &TriMesh) -> (Vec<usize>, Vec<usize>) {
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for (i, v) in sphere.vertices.iter().enumerate() {
        if v[2] >= -POLE_TOLERANCE {
            upper.push(i);
        }
        if v[2] <= POLE_TOLERANCE {
            lower.push(i);
        }
    }
    (upper, lower)
}

/// Carries a coefficient sampled in one chart at `1/z` into the other chart at `z`:
/// `μ · (z / z̄)²`.
pub fn transform_bc(mu_at_transition: C64, z: C64) -> Result<C64> {
    if z == C64::new(0.0, 0.0) {
        return Err(Error::ZeroArgument);
    }
    let u = z / z.conj();
    Ok(mu_at_transition * u * u)
}

/// Beltrami coefficients of a sphere self-map expressed in both charts.
#[derive(Clone, Debug)]
pub struct SbdPair {
    pub mu_north: BeltramiField,
    pub mu_south: BeltramiField,
    pub overlap_tolerance: f64,
}

impl SbdPair {
    pub fn is_admissible(&self) -> bool {
        self.mu_north.max_modulus() < 1.0 && self.mu_south.max_modulus() < 1.0
    }
}

/// Annulus of the south chart where the two charts are compared.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OverlapBand {
    pub inner: f64,
    pub outer: f64,
}

impl Default for OverlapBand {
    fn default() -> Self {
        Self {
            inner: 0.8,
            outer: 1.0,
        }
    }
}

fn sample(mesh: &TriMesh, field: &BeltramiField, face: usize, w: [f64; 3]) -> C64 {
    match field.site {
        Site::PerFace => field.values[face],
        Site::PerVertex => {
            let f = mesh.faces[face];
            field.values[f[0]] * w[0] + field.values[f[1]] * w[1] + field.values[f[2]] * w[2]
        }
    }
}

/// Largest `|μ_S(z) − transform_bc(μ_N(1/z), z)|` over face centroids of the
/// standard disk mesh inside `band`.
///
/// `1/z` lies outside the closed unit disk for `|z| < 1`; the north field is
/// sampled at its radial projection onto the disk there (the nearest mesh point
/// where the polygonal boundary cuts inside the circle).
pub fn check_sbd_compatibility(disk: &TriMesh, pair: &SbdPair, band: OverlapBand) -> Result<f64> {
    for (what, f) in [("north field", &pair.mu_north), ("south field", &pair.mu_south)] {
        let expected = match f.site {
            Site::PerFace => disk.num_faces(),
            Site::PerVertex => disk.num_vertices(),
        };
        if f.values.len() != expected {
            return Err(Error::SizeMismatch {
                what,
                expected,
                got: f.values.len(),
            });
        }
    }
    if !(band.inner > 0.0 && band.inner <= band.outer && band.inner <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "overlap band [{}, {}] lies outside both charts",
            band.inner, band.outer
        )));
    }
    let locator = PointLocator::new(disk);
    let mut worst: Option<f64> = None;
    for (fi, f) in disk.faces.iter().enumerate() {
        let z = (disk.point2(f[0]) + disk.point2(f[1]) + disk.point2(f[2])) / 3.0;
        let r = z.norm();
        if r < band.inner || r > band.outer {
            continue;
        }
        let mu_s = sample(disk, &pair.mu_south, fi, [1.0 / 3.0; 3]);
        let mut w = transition(z)?;
        if w.norm() > 1.0 {
            w /= w.norm();
        }
        let h = locator.nearest_handle(w).ok_or(Error::PointOutside {
            index: fi,
            x: w.re,
            y: w.im,
        })?;
        let mu_n = sample(disk, &pair.mu_north, h.face, h.weights);
        let d = (mu_s - transform_bc(mu_n, z)?).norm();
        worst = Some(worst.map_or(d, |x: f64| x.max(d)));
    }
    worst.ok_or_else(|| {
        Error::InvalidArgument(format!(
            "overlap band [{}, {}] contains no face centroid",
            band.inner, band.outer
        ))
    })
}
