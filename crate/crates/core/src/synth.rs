//! Deterministic synthetic registration problems.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geom::{add, cross, dot, norm, normalize, scale, Vec3};
use crate::losses::{CurveDistance, CurvePoints, LandmarkCurve, LandmarkSpec};
use crate::mesh::{icosphere, TriMesh};
use crate::{Error, Result};

/// Subdivision level of the sphere every synthetic case lives on.
pub const SYNTH_SUBDIVISIONS: usize = 4;

/// Landmark groups whose corners must each move to the next corner.
#[derive(Clone, Debug)]
pub struct TwistCase {
    pub mesh: TriMesh,
    pub spec: LandmarkSpec,
}

/// A moving and a fixed scalar field on the same sphere, optionally with
/// landmark correspondences.
#[derive(Clone, Debug)]
pub struct FieldCase {
    pub mesh: TriMesh,
    pub moving: Vec<f64>,
    pub fixed: Vec<f64>,
    pub landmarks: Option<LandmarkSpec>,
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Orthonormal tangent frame at a unit vector.
fn tangent_frame(c: Vec3) -> (Vec3, Vec3) {
    let helper = if c[2].abs() < 0.9 { [0.0, 0.0, 1.0] } else { [1.0, 0.0, 0.0] };
    let e1 = normalize(cross(helper, c));
    let e2 = cross(c, e1);
    (e1, e2)
}

/// Point at geodesic offset `(u, v)` from `c` along the frame `(e1, e2)`.
fn exp_map(c: Vec3, e1: Vec3, e2: Vec3, u: f64, v: f64) -> Vec3 {
    let r = (u * u + v * v).sqrt();
    if r == 0.0 {
        return c;
    }
    let dir = scale(add(scale(e1, u), scale(e2, v)), 1.0 / r);
    normalize(add(scale(c, r.cos()), scale(dir, r.sin())))
}

/// Inverse of [`exp_map`].
fn log_map(c: Vec3, e1: Vec3, e2: Vec3, p: Vec3) -> (f64, f64) {
    let cosr = dot(c, p).clamp(-1.0, 1.0);
    let (u, v) = (dot(p, e1), dot(p, e2));
    let s = (u * u + v * v).sqrt();
    if s == 0.0 {
        return (0.0, 0.0);
    }
    let r = s.atan2(cosr);
    (u / s * r, v / s * r)
}

fn nearest_vertex(mesh: &TriMesh, p: Vec3) -> usize {
    (0..mesh.num_vertices())
        .max_by(|&a, &b| dot(mesh.vertices[a], p).total_cmp(&dot(mesh.vertices[b], p)))
        .expect("nonempty mesh")
}

/// Range of the geodesic half-diagonal of a twist square.
const TWIST_RADIUS: (f64, f64) = (0.12, 0.2);

/// `2n` squares of four vertices, `n` per hemisphere, each corner targeting
/// the next corner around its square. The task loss is the mean squared
/// distance over all `8n` corners.
pub fn twist(n: usize, seed: u64) -> Result<TwistCase> {
    if !(2..=4).contains(&n) {
        return Err(Error::InvalidArgument(format!("twist needs n in 2..=4, got {n}")));
    }
    let mesh = icosphere(SYNTH_SUBDIVISIONS)?;
    let mut r = rng(seed);
    let mut curves = Vec::with_capacity(2 * n);
    for hemi in [1.0, -1.0] {
        let offset = r.random::<f64>() * std::f64::consts::TAU;
        for k in 0..n {
            let lon = offset + std::f64::consts::TAU * (k as f64 + 0.3 * (r.random::<f64>() - 0.5)) / n as f64;
            let lat = hemi * (0.45 + 0.35 * r.random::<f64>());
            let c = [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()];
            let (e1, e2) = tangent_frame(c);
            let radius = TWIST_RADIUS.0 + (TWIST_RADIUS.1 - TWIST_RADIUS.0) * r.random::<f64>();
            let spin = r.random::<f64>() * std::f64::consts::FRAC_PI_2;
            let corners: Vec<usize> = (0..4)
                .map(|j| {
                    let a = spin + j as f64 * std::f64::consts::FRAC_PI_2;
                    nearest_vertex(&mesh, exp_map(c, e1, e2, radius * a.cos(), radius * a.sin()))
                })
                .collect();
            let target = (0..4).map(|j| mesh.vertices[corners[(j + 1) % 4]]).collect();
            curves.push(LandmarkCurve {
                moving: CurvePoints::Indices { indices: corners },
                target,
                endpoints: false,
            });
        }
    }
    let spec = LandmarkSpec {
        curves,
        distance: CurveDistance::L2,
    };
    spec.validate()?;
    Ok(TwistCase { mesh, spec })
}

/// Soft indicator of `distance ≤ 0` with transition width `width`.
fn soft_inside(distance: f64, width: f64) -> f64 {
    0.5 * (1.0 - (distance / width).tanh())
}

fn segment_distance(u: f64, v: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let t = (((u - a.0) * dx + (v - a.1) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    ((u - a.0 - t * dx).powi(2) + (v - a.1 - t * dy).powi(2)).sqrt()
}

const BAR_HALF_LENGTH: f64 = 0.45;
const STROKE_HALF_WIDTH: f64 = 0.13;
const STROKE_SOFTNESS: f64 = 0.05;
const ARC_CENTER: f64 = 0.2;
const ARC_RADIUS: f64 = 0.45;
const ARC_OPENING: f64 = std::f64::consts::FRAC_PI_3;

fn arc_point(t: f64) -> (f64, f64) {
    // t = 0 is the upper tip, t = 1 the lower one
    let a = ARC_OPENING + t * (std::f64::consts::TAU - 2.0 * ARC_OPENING);
    (ARC_CENTER + ARC_RADIUS * a.cos(), ARC_RADIUS * a.sin())
}

fn arc_distance(u: f64, v: f64) -> f64 {
    let (du, dv) = (u - ARC_CENTER, v);
    let mut a = dv.atan2(du);
    if a < 0.0 {
        a += std::f64::consts::TAU;
    }
    if (ARC_OPENING..=std::f64::consts::TAU - ARC_OPENING).contains(&a) {
        ((du * du + dv * dv).sqrt() - ARC_RADIUS).abs()
    } else {
        let (p, q) = (arc_point(0.0), arc_point(1.0));
        let d = |e: (f64, f64)| ((u - e.0).powi(2) + (v - e.1).powi(2)).sqrt();
        d(p).min(d(q))
    }
}

/// A straight bar ("I") on the moving field and an open arc ("C") on the
/// fixed field, both around the `−z` pole, with six landmark pairs running
/// along the two strokes.
pub fn i_to_c(seed: u64) -> Result<FieldCase> {
    let mesh = icosphere(SYNTH_SUBDIVISIONS)?;
    let mut r = rng(seed);
    // a small random spin of the whole picture keeps seeds distinct
    let spin = 0.2 * (r.random::<f64>() - 0.5);
    let c = [0.0, 0.0, -1.0];
    let (e1, e2) = tangent_frame(c);
    let (e1, e2) = (
        add(scale(e1, spin.cos()), scale(e2, spin.sin())),
        add(scale(e2, spin.cos()), scale(e1, -spin.sin())),
    );
    let bar = |u: f64, v: f64| segment_distance(u, v, (0.0, -BAR_HALF_LENGTH), (0.0, BAR_HALF_LENGTH));
    let (mut moving, mut fixed) = (Vec::new(), Vec::new());
    for &p in &mesh.vertices {
        let (u, v) = log_map(c, e1, e2, p);
        moving.push(soft_inside(bar(u, v) - STROKE_HALF_WIDTH, STROKE_SOFTNESS));
        fixed.push(soft_inside(arc_distance(u, v) - STROKE_HALF_WIDTH, STROKE_SOFTNESS));
    }
    let mut pts = Vec::with_capacity(6);
    let mut targets = Vec::with_capacity(6);
    for k in 0..6 {
        let t = k as f64 / 5.0;
        pts.push(exp_map(c, e1, e2, 0.0, BAR_HALF_LENGTH * (1.0 - 2.0 * t)));
        let (u, v) = arc_point(t);
        targets.push(exp_map(c, e1, e2, u, v));
    }
    let spec = LandmarkSpec {
        curves: vec![LandmarkCurve {
            moving: CurvePoints::Points(pts),
            target: targets,
            endpoints: false,
        }],
        distance: CurveDistance::L2,
    };
    Ok(FieldCase {
        mesh,
        moving,
        fixed,
        landmarks: Some(spec),
    })
}

/// Rotation of `p` by `angle` about the unit `axis`.
fn rotate(p: Vec3, axis: Vec3, angle: f64) -> Vec3 {
    let (s, c) = angle.sin_cos();
    let k = cross(axis, p);
    let d = dot(axis, p) * (1.0 - c);
    [
        p[0] * c + k[0] * s + axis[0] * d,
        p[1] * c + k[1] * s + axis[1] * d,
        p[2] * c + k[2] * s + axis[2] * d,
    ]
}

/// A sum of random Gaussian bumps; the fixed field is the moving one carried
/// by a small rotation.
pub fn random_smooth_field(seed: u64) -> Result<FieldCase> {
    let mesh = icosphere(SYNTH_SUBDIVISIONS)?;
    let mut r = rng(seed);
    let mut unit = || loop {
        let p: Vec3 = std::array::from_fn(|_| r.random::<f64>() * 2.0 - 1.0);
        let n = norm(p);
        if n > 1e-3 && n <= 1.0 {
            break scale(p, 1.0 / n);
        }
    };
    let centers: Vec<Vec3> = (0..9).map(|_| unit()).collect();
    let (axis, centers) = (centers[8], &centers[..8]);
    let mut r = rng(seed.wrapping_add(1));
    let bumps: Vec<(Vec3, f64, f64)> = centers
        .iter()
        .map(|&c| (c, 0.5 + r.random::<f64>(), 0.25 + 0.25 * r.random::<f64>()))
        .collect();
    let angle = 0.1 + 0.1 * r.random::<f64>();
    let field = |p: Vec3| {
        bumps
            .iter()
            .map(|&(c, a, s)| {
                let d = norm(add(p, scale(c, -1.0)));
                a * (-(d * d) / (2.0 * s * s)).exp()
            })
            .sum::<f64>()
    };
    let moving = mesh.vertices.iter().map(|&p| field(p)).collect();
    let fixed = mesh.vertices.iter().map(|&p| field(rotate(p, axis, -angle))).collect();
    Ok(FieldCase {
        mesh,
        moving,
        fixed,
        landmarks: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::sub;

    #[test]
    fn twist_groups_cycle() {
        let t = twist(2, 0).unwrap();
        assert_eq!(t.spec.curves.len(), 4);
        for c in &t.spec.curves {
            let CurvePoints::Indices { indices } = &c.moving else { panic!("indexed corners") };
            assert_eq!(indices.len(), 4);
            let mut uniq = indices.clone();
            uniq.sort();
            uniq.dedup();
            assert_eq!(uniq.len(), 4);
            for j in 0..4 {
                assert_eq!(c.target[j], t.mesh.vertices[indices[(j + 1) % 4]]);
            }
        }
        let south = t.spec.curves.iter().filter(|c| c.target[0][2] < 0.0).count();
        assert_eq!(south, 2);
        assert_eq!(twist(3, 1).unwrap().spec.curves.len(), 6);
        assert!(twist(5, 0).is_err());
    }

    #[test]
    fn cases_are_deterministic() {
        assert_eq!(twist(3, 7).unwrap().spec, twist(3, 7).unwrap().spec);
        assert_ne!(twist(3, 7).unwrap().spec, twist(3, 8).unwrap().spec);
        let (a, b) = (i_to_c(2).unwrap(), i_to_c(2).unwrap());
        assert_eq!(a.moving, b.moving);
        assert_eq!(a.fixed, b.fixed);
        let (a, b) = (random_smooth_field(5).unwrap(), random_smooth_field(5).unwrap());
        assert_eq!(a.fixed, b.fixed);
    }

    #[test]
    fn indicator_fields_lie_in_unit_interval() {
        let c = i_to_c(0).unwrap();
        for v in c.moving.iter().chain(&c.fixed) {
            assert!((0.0..=1.0).contains(v));
        }
        assert!(c.moving.iter().any(|&v| v > 0.9) && c.fixed.iter().any(|&v| v > 0.9));
        assert_eq!(c.landmarks.unwrap().curves[0].target.len(), 6);
    }

    #[test]
    fn exp_and_log_are_inverse() {
        let c = normalize([0.3, -0.5, 0.8]);
        let (e1, e2) = tangent_frame(c);
        let p = exp_map(c, e1, e2, 0.2, -0.35);
        let (u, v) = log_map(c, e1, e2, p);
        assert!((u - 0.2).abs() < 1e-12 && (v + 0.35).abs() < 1e-12);
        assert!(norm(sub(rotate(p, c, 0.0), p)) < 1e-15);
    }
}
