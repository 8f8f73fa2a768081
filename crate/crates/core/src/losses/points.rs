use serde::{Deserialize, Serialize};

use crate::geom::{norm_sq, scale, sub, Vec3};
use crate::{Error, Result};

/// Mean squared distance between corresponding points.
pub fn landmark_l2(deformed: &[Vec3], target: &[Vec3]) -> Result<f64> {
    Ok(landmark_l2_grad(deformed, target)?.0)
}

/// [`landmark_l2`] and its gradient with respect to `deformed`.
pub fn landmark_l2_grad(deformed: &[Vec3], target: &[Vec3]) -> Result<(f64, Vec<Vec3>)> {
    if deformed.len() != target.len() {
        return Err(Error::SizeMismatch {
            what: "landmark lists",
            expected: target.len(),
            got: deformed.len(),
        });
    }
    if target.is_empty() {
        return Err(Error::EmptySet);
    }
    let n = target.len() as f64;
    let mut value = 0.0;
    let grad = deformed
        .iter()
        .zip(target)
        .map(|(&p, &q)| {
            let d = sub(p, q);
            value += norm_sq(d);
            scale(d, 2.0 / n)
        })
        .collect();
    Ok((value / n, grad))
}

fn nearest(p: Vec3, set: &[Vec3]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, &q) in set.iter().enumerate() {
        let d = norm_sq(sub(p, q));
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

/// Symmetric chamfer distance: mean squared nearest-neighbor distance from
/// each set to the other, summed.
pub fn chamfer(s1: &[Vec3], s2: &[Vec3]) -> Result<f64> {
    Ok(chamfer_grad(s1, s2)?.0)
}

/// [`chamfer`] and its gradient with respect to `s1`, holding the
/// nearest-neighbor matching fixed.
pub fn chamfer_grad(s1: &[Vec3], s2: &[Vec3]) -> Result<(f64, Vec<Vec3>)> {
    if s1.is_empty() || s2.is_empty() {
        return Err(Error::EmptySet);
    }
    let (n1, n2) = (s1.len() as f64, s2.len() as f64);
    let mut grad = vec![[0.0; 3]; s1.len()];
    let mut forward = 0.0;
    for (i, &p) in s1.iter().enumerate() {
        let d = sub(p, s2[nearest(p, s2)]);
        forward += norm_sq(d);
        grad[i] = scale(d, 2.0 / n1);
    }
    let mut backward = 0.0;
    for &q in s2 {
        let j = nearest(q, s1);
        let d = sub(s1[j], q);
        backward += norm_sq(d);
        let g = scale(d, 2.0 / n2);
        for k in 0..3 {
            grad[j][k] += g[k];
        }
    }
    Ok((forward / n1 + backward / n2, grad))
}

/// Where a landmark curve lives on the moving surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CurvePoints {
    Points(Vec<Vec3>),
    Indices { indices: Vec<usize> },
}

impl CurvePoints {
    pub fn len(&self) -> usize {
        match self {
            CurvePoints::Points(p) => p.len(),
            CurvePoints::Indices { indices } => indices.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// 3D points, reading vertex positions from `vertices` when indexed.
    pub fn resolve(&self, vertices: &[Vec3]) -> Result<Vec<Vec3>> {
        match self {
            CurvePoints::Points(p) => Ok(p.clone()),
            CurvePoints::Indices { indices } => indices
                .iter()
                .map(|&i| {
                    vertices.get(i).copied().ok_or_else(|| {
                        Error::InvalidArgument(format!("landmark vertex {i} out of range"))
                    })
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandmarkCurve {
    pub moving: CurvePoints,
    pub target: Vec<Vec3>,
    /// Also match the first and last points of each curve exactly.
    #[serde(default)]
    pub endpoints: bool,
}

/// How deformed curves are compared with their targets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveDistance {
    /// Chamfer per curve plus optional endpoint terms.
    #[default]
    Chamfer,
    /// Mean squared distance over all points in order.
    L2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandmarkSpec {
    pub curves: Vec<LandmarkCurve>,
    #[serde(default)]
    pub distance: CurveDistance,
}

impl LandmarkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.curves.is_empty() {
            return Err(Error::EmptySet);
        }
        for (i, c) in self.curves.iter().enumerate() {
            if c.moving.is_empty() || c.target.is_empty() {
                return Err(Error::InvalidArgument(format!("landmark curve {i} is empty")));
            }
            if self.distance == CurveDistance::L2 && c.moving.len() != c.target.len() {
                return Err(Error::SizeMismatch {
                    what: "pointwise landmark curve",
                    expected: c.target.len(),
                    got: c.moving.len(),
                });
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Targets of all curves, concatenated in order.
    pub fn all_targets(&self) -> Vec<Vec3> {
        self.curves.iter().flat_map(|c| c.target.iter().copied()).collect()
    }
}

/// Curve task loss. `deformed[i]` holds the deformed points of curve `i`.
/// Chamfer mode: mean chamfer over curves plus `1/(2·#curves)` times the
/// summed squared endpoint errors. L2 mode: mean squared distance over all
/// points.
pub fn landmark_task(spec: &LandmarkSpec, deformed: &[Vec<Vec3>]) -> Result<f64> {
    Ok(landmark_task_grad(spec, deformed)?.0)
}

pub fn landmark_task_grad(spec: &LandmarkSpec, deformed: &[Vec<Vec3>]) -> Result<(f64, Vec<Vec<Vec3>>)> {
    if deformed.len() != spec.curves.len() {
        return Err(Error::SizeMismatch {
            what: "deformed curves",
            expected: spec.curves.len(),
            got: deformed.len(),
        });
    }
    match spec.distance {
        CurveDistance::L2 => {
            let flat: Vec<Vec3> = deformed.iter().flatten().copied().collect();
            let (v, g) = landmark_l2_grad(&flat, &spec.all_targets())?;
            let mut out = Vec::with_capacity(deformed.len());
            let mut at = 0;
            for c in deformed {
                out.push(g[at..at + c.len()].to_vec());
                at += c.len();
            }
            Ok((v, out))
        }
        CurveDistance::Chamfer => {
            let m = spec.curves.len() as f64;
            let mut value = 0.0;
            let mut grads = Vec::with_capacity(deformed.len());
            for (c, d) in spec.curves.iter().zip(deformed) {
                let (v, mut g) = chamfer_grad(d, &c.target)?;
                value += v / m;
                g.iter_mut().for_each(|x| *x = scale(*x, 1.0 / m));
                if c.endpoints {
                    let w = 1.0 / (2.0 * m);
                    let (n, t) = (d.len(), c.target.len());
                    for (i, j) in [(0, 0), (n - 1, t - 1)] {
                        let e = sub(d[i], c.target[j]);
                        value += w * norm_sq(e);
                        for k in 0..3 {
                            g[i][k] += 2.0 * w * e[k];
                        }
                    }
                }
                grads.push(g);
            }
            Ok((value, grads))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn l2_examples() {
        let a = vec![[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]];
        assert_eq!(landmark_l2(&a, &a).unwrap(), 0.0);
        assert!((landmark_l2(&[[0.0; 3]], &[[0.1, 0.0, 0.0]]).unwrap() - 0.01).abs() < 1e-15);
        assert!(landmark_l2(&a, &a[..1]).is_err());
    }

    #[test]
    fn chamfer_examples() {
        let a = vec![[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]];
        assert_eq!(chamfer(&a, &a).unwrap(), 0.0);
        assert_eq!(chamfer(&[[0.0; 3]], &[[1.0, 0.0, 0.0]]).unwrap(), 2.0);
        assert!(matches!(chamfer(&[], &a), Err(Error::EmptySet)));
    }

    fn curve(n: usize, shift: f64) -> Vec<Vec3> {
        (0..n).map(|i| [i as f64 * 0.1 + shift, 0.3 * i as f64, 0.0]).collect()
    }

    #[test]
    fn task_examples() {
        let spec = LandmarkSpec {
            curves: (0..6)
                .map(|_| LandmarkCurve {
                    moving: CurvePoints::Indices { indices: vec![] },
                    target: curve(5, 0.0),
                    endpoints: false,
                })
                .collect(),
            distance: CurveDistance::Chamfer,
        };
        let matched: Vec<_> = (0..6).map(|_| curve(5, 0.0)).collect();
        assert_eq!(landmark_task(&spec, &matched).unwrap(), 0.0);
        let off: Vec<_> = (0..6).map(|_| curve(5, 0.05)).collect();
        let c = chamfer(&off[0], &spec.curves[0].target).unwrap();
        assert!((landmark_task(&spec, &off).unwrap() - c).abs() < 1e-15);

        // one curve whose endpoints are both 0.1 off but whose chamfer is 0
        let target = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        let spec = LandmarkSpec {
            curves: vec![LandmarkCurve {
                moving: CurvePoints::Points(vec![]),
                target: target.clone(),
                endpoints: true,
            }],
            distance: CurveDistance::Chamfer,
        };
        let deformed = vec![vec![[0.0; 3], [0.1, 0.0, 0.0], [1.0, 0.0, 0.0], [1.9, 0.0, 0.0], [2.0, 0.0, 0.0]]];
        let flipped = vec![deformed[0].iter().rev().copied().collect::<Vec<_>>()];
        let base = landmark_task(&spec, &deformed).unwrap();
        let v = landmark_task(&spec, &flipped).unwrap();
        // reversed order moves both endpoints by 2 instead of 0
        assert!((v - base - 0.5 * (4.0 + 4.0)).abs() < 1e-12);
    }

    #[test]
    fn endpoint_term_value() {
        let target = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]];
        let spec = LandmarkSpec {
            curves: vec![LandmarkCurve {
                moving: CurvePoints::Points(vec![]),
                target: target.clone(),
                endpoints: true,
            }],
            distance: CurveDistance::Chamfer,
        };
        // endpoints shifted along the curve direction by ±0.1, chamfer measured separately
        let d = vec![vec![[-0.1, 0.0, 0.0], [1.1, 0.0, 0.0]]];
        let total = landmark_task(&spec, &d).unwrap();
        let ch = chamfer(&d[0], &target).unwrap();
        assert!((total - ch - 0.5 * (0.01 + 0.01)).abs() < 1e-15);

    }

    #[test]
    fn spec_json_round_trip() {
        let text = r#"{"curves":[{"moving":[[0,0,1],[0,1,0]],"target":[[1,0,0],[0,1,0]],"endpoints":true},
                                 {"moving":{"indices":[3,4]},"target":[[0,0,1]]}]}"#;
        let spec = LandmarkSpec::from_json(text).unwrap();
        assert_eq!(spec.curves[1].moving, CurvePoints::Indices { indices: vec![3, 4] });
        assert_eq!(spec.distance, CurveDistance::Chamfer);
        assert!(!spec.curves[1].endpoints);
        assert_eq!(LandmarkSpec::from_json(&spec.to_json().unwrap()).unwrap(), spec);
        assert!(LandmarkSpec::from_json(r#"{"curves":[]}"#).is_err());
    }

    fn fd<F: Fn(&[Vec3]) -> f64>(f: F, x: &[Vec3], g: &[Vec3]) {
        let h = 1e-6;
        for i in 0..x.len() {
            for k in 0..3 {
                let mut a = x.to_vec();
                let mut b = x.to_vec();
                a[i][k] += h;
                b[i][k] -= h;
                let d = (f(&a) - f(&b)) / (2.0 * h);
                assert!((d - g[i][k]).abs() <= 1e-4 * d.abs().max(1e-3), "{d} {}", g[i][k]);
            }
        }
    }

    fn pts() -> impl Strategy<Value = Vec<Vec3>> {
        prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), 1..8)
    }

    proptest! {
        #[test]
        fn chamfer_symmetric_and_permutation_invariant(a in pts(), b in pts(), k in 0usize..8) {
            let ab = chamfer(&a, &b).unwrap();
            prop_assert!((ab - chamfer(&b, &a).unwrap()).abs() < 1e-12);
            prop_assert!(ab >= 0.0);
            let mut r = a.clone();
            r.rotate_left(k % a.len());
            prop_assert!((ab - chamfer(&r, &b).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn gradients_match_fd(a in pts(), b in pts()) {
            let (_, g) = chamfer_grad(&a, &b).unwrap();
            fd(|x| chamfer(x, &b).unwrap(), &a, &g);
            let t: Vec<Vec3> = a.iter().map(|p| [p[1], p[2], p[0]]).collect();
            let (_, g) = landmark_l2_grad(&a, &t).unwrap();
            fd(|x| landmark_l2(x, &t).unwrap(), &a, &g);
        }
    }
}
