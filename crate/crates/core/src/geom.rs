//! Small fixed-size vector helpers shared by the mesh and loss code.

pub use num_complex::Complex64 as C64;

pub type Vec3 = [f64; 3];

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn norm_sq(a: Vec3) -> f64 {
    dot(a, a)
}

#[inline]
pub fn normalize(a: Vec3) -> Vec3 {
    let n = norm(a);
    scale(a, 1.0 / n)
}

#[inline]
pub fn det3(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    dot(a, cross(b, c))
}

/// Twice the signed area of a planar triangle.
#[inline]
pub fn double_area(a: C64, b: C64, c: C64) -> f64 {
    (a.re * b.im - a.im * b.re) + (b.re * c.im - b.im * c.re) + (c.re * a.im - c.im * a.re)
}

/// Barycentric coordinates of `p` with respect to the planar triangle `(a, b, c)`.
#[inline]
pub fn barycentric(p: C64, a: C64, b: C64, c: C64) -> [f64; 3] {
    let d = double_area(a, b, c);
    [
        double_area(p, b, c) / d,
        double_area(a, p, c) / d,
        double_area(a, b, p) / d,
    ]
}

/// Distance from `p` to the closed planar triangle `(a, b, c)`; zero inside.
pub fn point_triangle_distance(p: C64, a: C64, b: C64, c: C64) -> f64 {
    let w = barycentric(p, a, b, c);
    if w.iter().all(|&x| x >= 0.0) {
        return 0.0;
    }
    [(a, b), (b, c), (c, a)]
        .iter()
        .map(|&(s, e)| point_segment_distance(p, s, e))
        .fold(f64::INFINITY, f64::min)
}

fn point_segment_distance(p: C64, a: C64, b: C64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).re * d.re + (p - a).im * d.im) / len2;
    let t = t.clamp(0.0, 1.0);
    (p - (a + d * t)).norm()
}
