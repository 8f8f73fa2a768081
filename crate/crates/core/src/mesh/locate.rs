use std::ops::{Add, Mul};

use super::TriMesh;
use crate::geom::{barycentric, det3, point_triangle_distance, Vec3, C64};
use crate::{Error, Result};

/// A point expressed as a convex combination of one face's vertices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BarycentricHandle {
    pub face: usize,
    pub weights: [f64; 3],
}

impl BarycentricHandle {
    /// Clamps weights below zero (bounded by `−1e-12` in the contract) and
    /// renormalizes to a unit sum.
    pub fn clamped(face: usize, w: [f64; 3]) -> Self {
        let c = [w[0].max(0.0), w[1].max(0.0), w[2].max(0.0)];
        let s = c[0] + c[1] + c[2];
        Self {
            face,
            weights: [c[0] / s, c[1] / s, c[2] / s],
        }
    }
}

/// Uniform-grid point location over a planar triangle mesh.
#[derive(Clone, Debug)]
pub struct PointLocator {
    points: Vec<C64>,
    faces: Vec<[usize; 3]>,
    min: C64,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

const HULL_TOLERANCE: f64 = 1e-9;

impl PointLocator {
    pub fn new(mesh: &TriMesh) -> Self {
        let points = mesh.points2();
        let faces = mesh.faces.clone();
        let (mut lo, mut hi) = (C64::new(f64::MAX, f64::MAX), C64::new(f64::MIN, f64::MIN));
        for p in &points {
            lo = C64::new(lo.re.min(p.re), lo.im.min(p.im));
            hi = C64::new(hi.re.max(p.re), hi.im.max(p.im));
        }
        let pad = 1e-6 * (1.0 + (hi - lo).norm());
        lo -= C64::new(pad, pad);
        hi += C64::new(pad, pad);
        let span = (hi.re - lo.re).max(hi.im - lo.im).max(1e-300);
        let per_axis = ((faces.len() as f64).sqrt().ceil() as usize).max(1);
        let cell = span / per_axis as f64;
        let nx = (((hi.re - lo.re) / cell).ceil() as usize).max(1);
        let ny = (((hi.im - lo.im) / cell).ceil() as usize).max(1);
        let mut buckets = vec![Vec::new(); nx * ny];
        for (fi, f) in faces.iter().enumerate() {
            let (mut a, mut b) = (C64::new(f64::MAX, f64::MAX), C64::new(f64::MIN, f64::MIN));
            for &v in f {
                a = C64::new(a.re.min(points[v].re), a.im.min(points[v].im));
                b = C64::new(b.re.max(points[v].re), b.im.max(points[v].im));
            }
            let t = HULL_TOLERANCE;
            let (x0, y0) = Self::cell_of(lo, cell, nx, ny, a - C64::new(t, t));
            let (x1, y1) = Self::cell_of(lo, cell, nx, ny, b + C64::new(t, t));
            for y in y0..=y1 {
                for x in x0..=x1 {
                    buckets[y * nx + x].push(fi as u32);
                }
            }
        }
        Self {
            points,
            faces,
            min: lo,
            cell,
            nx,
            ny,
            buckets,
        }
    }

    fn cell_of(lo: C64, cell: f64, nx: usize, ny: usize, p: C64) -> (usize, usize) {
        let x = ((p.re - lo.re) / cell).floor().clamp(0.0, (nx - 1) as f64) as usize;
        let y = ((p.im - lo.im) / cell).floor().clamp(0.0, (ny - 1) as f64) as usize;
        (x, y)
    }

    /// Face containing `p` and its raw barycentric weights, or `None` when
    /// `p` is farther than `1e-9` from the mesh.
    pub fn locate(&self, p: C64) -> Option<(usize, [f64; 3])> {
        if !(p.re.is_finite() && p.im.is_finite()) {
            return None;
        }
        let (x, y) = Self::cell_of(self.min, self.cell, self.nx, self.ny, p);
        let mut best: Option<(f64, usize, [f64; 3])> = None;
        for &fi in &self.buckets[y * self.nx + x] {
            let fi = fi as usize;
            let [a, b, c] = self.faces[fi];
            let (pa, pb, pc) = (self.points[a], self.points[b], self.points[c]);
            let w = barycentric(p, pa, pb, pc);
            if w.iter().all(|&x| x >= -1e-14) {
                return Some((fi, w));
            }
            let d = point_triangle_distance(p, pa, pb, pc);
            if d <= HULL_TOLERANCE && best.is_none_or(|(bd, _, _)| d < bd) {
                best = Some((d, fi, w));
            }
        }
        best.map(|(_, fi, w)| (fi, w))
    }

    /// Handle of the closest point of the mesh to `p`: the containing face
    /// when `p` is inside, otherwise the nearest face with its weights
    /// clamped.
    pub fn nearest_handle(&self, p: C64) -> Option<BarycentricHandle> {
        if let Some(h) = self.handle(p) {
            return Some(h);
        }
        if !(p.re.is_finite() && p.im.is_finite()) {
            return None;
        }
        let mut best: Option<(f64, usize)> = None;
        for (fi, f) in self.faces.iter().enumerate() {
            let d = point_triangle_distance(p, self.points[f[0]], self.points[f[1]], self.points[f[2]]);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, fi));
            }
        }
        let (_, fi) = best?;
        let f = self.faces[fi];
        let (a, b, c) = (self.points[f[0]], self.points[f[1]], self.points[f[2]]);
        let q = closest_point_on_triangle(p, a, b, c);
        Some(BarycentricHandle::clamped(fi, barycentric(q, a, b, c)))
    }

    /// Clamped handle for `p`.
    pub fn handle(&self, p: C64) -> Option<BarycentricHandle> {
        self.locate(p).map(|(f, w)| BarycentricHandle::clamped(f, w))
    }
}

fn closest_point_on_triangle(p: C64, a: C64, b: C64, c: C64) -> C64 {
    let w = barycentric(p, a, b, c);
    if w.iter().all(|&x| x >= 0.0) {
        return p;
    }
    let seg = |s: C64, e: C64| {
        let d = e - s;
        let t = (((p - s) * d.conj()).re / d.norm_sqr()).clamp(0.0, 1.0);
        s + d * t
    };
    [seg(a, b), seg(b, c), seg(c, a)]
        .into_iter()
        .min_by(|x, y| (x - p).norm().total_cmp(&(y - p).norm()))
        .unwrap()
}

/// Locates each point in a planar mesh.
pub fn locate_barycentric(mesh2d: &TriMesh, points: &[C64]) -> Result<Vec<BarycentricHandle>> {
    let loc = PointLocator::new(mesh2d);
    points
        .iter()
        .enumerate()
        .map(|(index, &p)| {
            loc.handle(p).ok_or(Error::PointOutside {
                index,
                x: p.re,
                y: p.im,
            })
        })
        .collect()
}

/// Evaluates `Σ weights · values` per handle.
pub fn interpolate<T>(mesh: &TriMesh, handles: &[BarycentricHandle], values: &[T]) -> Result<Vec<T>>
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T>,
{
    if values.len() != mesh.num_vertices() {
        return Err(Error::SizeMismatch {
            what: "vertex values",
            expected: mesh.num_vertices(),
            got: values.len(),
        });
    }
    handles
        .iter()
        .map(|h| {
            let f = mesh.faces.get(h.face).ok_or_else(|| {
                Error::InvalidArgument(format!("handle references missing face {}", h.face))
            })?;
            Ok(values[f[0]] * h.weights[0] + values[f[1]] * h.weights[1] + values[f[2]] * h.weights[2])
        })
        .collect()
}

/// Locates points on a closed sphere mesh by central projection: the handle's
/// weights express the ray through `p` as a combination of the face's
/// vertices, renormalized to sum to one.
pub fn locate_on_sphere(mesh: &TriMesh, points: &[Vec3]) -> Result<Vec<BarycentricHandle>> {
    points
        .iter()
        .enumerate()
        .map(|(index, &p)| {
            let mut best: Option<(f64, usize, [f64; 3])> = None;
            for (fi, f) in mesh.faces.iter().enumerate() {
                let (a, b, c) = (mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]);
                let d = det3(a, b, c);
                if d.abs() < 1e-300 {
                    continue;
                }
                let w = [det3(p, b, c) / d, det3(a, p, c) / d, det3(a, b, p) / d];
                let s = w[0] + w[1] + w[2];
                if s <= 0.0 {
                    continue;
                }
                let w = [w[0] / s, w[1] / s, w[2] / s];
                let m = w[0].min(w[1]).min(w[2]);
                if m >= 0.0 {
                    best = Some((m, fi, w));
                    break;
                }
                if best.is_none_or(|(bm, _, _)| m > bm) {
                    best = Some((m, fi, w));
                }
            }
            match best {
                Some((m, fi, w)) if m >= -1e-9 => Ok(BarycentricHandle::clamped(fi, w)),
                _ => Err(Error::PointOutside {
                    index,
                    x: p[0],
                    y: p[1],
                }),
            }
        })
        .collect()
}
