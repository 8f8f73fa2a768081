use std::collections::BTreeMap;
use std::ops::{Add, Mul, Sub};

use super::TriMesh;
use crate::geom::{cross, dot, norm, sub};
use crate::{Error, Result};

/// Cotangent Laplacian stored row-wise: `Δv_i = Σ_j ω_ij (v_j − v_i)` with
/// `ω_ij = ½ (cot α_ij + cot β_ij)`.
#[derive(Clone, Debug)]
pub struct CotanLaplacian {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<f64>,
}

impl CotanLaplacian {
    pub fn num_vertices(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Off-diagonal `(neighbor, ω)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.weights[r].iter().copied())
    }

    /// `ω_ij`, zero when `i` and `j` share no edge.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, w)| w)
    }

    /// Diagonal entry, `−Σ_j ω_ij`.
    pub fn diagonal(&self, i: usize) -> f64 {
        -self.row(i).map(|(_, w)| w).sum::<f64>()
    }

    /// Applies the operator at a single vertex.
    pub fn apply_at<T>(&self, values: &[T], i: usize) -> T
    where
        T: Copy + Default + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
    {
        self.row(i)
            .fold(T::default(), |acc, (j, w)| acc + (values[j] - values[i]) * w)
    }

    pub fn apply<T>(&self, values: &[T]) -> Vec<T>
    where
        T: Copy + Default + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
    {
        (0..self.num_vertices()).map(|i| self.apply_at(values, i)).collect()
    }
}

/// Cotangent weights from the mesh's own embedding.
pub fn cotangent_laplacian(mesh: &TriMesh) -> Result<CotanLaplacian> {
    let mut w: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (fi, f) in mesh.faces.iter().enumerate() {
        for k in 0..3 {
            let (i, j, o) = (f[k], f[(k + 1) % 3], f[(k + 2) % 3]);
            let u = sub(mesh.vertices[i], mesh.vertices[o]);
            let v = sub(mesh.vertices[j], mesh.vertices[o]);
            let s = norm(cross(u, v));
            if s <= 1e-300 {
                return Err(Error::DegenerateFace { face: fi });
            }
            let half_cot = 0.5 * dot(u, v) / s;
            *w.entry((i.min(j), i.max(j))).or_insert(0.0) += half_cot;
        }
    }
    let n = mesh.num_vertices();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (&(a, b), &x) in &w {
        rows[a].push((b, x));
        rows[b].push((a, x));
    }
    let mut offsets = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut weights = Vec::new();
    offsets.push(0);
    for mut r in rows {
        r.sort_by_key(|&(c, _)| c);
        for (c, x) in r {
            cols.push(c);
            weights.push(x);
        }
        offsets.push(cols.len());
    }
    Ok(CotanLaplacian {
        offsets,
        cols,
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::C64;
    use crate::mesh::{disk_mesh, TriMesh};

    fn two_equilateral() -> TriMesh {
        let h = 3f64.sqrt() / 2.0;
        let pts = [
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(0.5, h),
            C64::new(0.5, -h),
        ];
        TriMesh::from_points2(&pts, vec![[0, 1, 2], [0, 3, 1]]).unwrap()
    }

    #[test]
    fn equilateral_weights() {
        let l = cotangent_laplacian(&two_equilateral()).unwrap();
        // shared edge: ½(cot 60° + cot 60°) = 1/√3
        assert!((l.weight(0, 1) - 1.0 / 3f64.sqrt()).abs() < 1e-14);
        // boundary edge: ½ cot 60°
        assert!((l.weight(0, 2) - 0.5 / 3f64.sqrt()).abs() < 1e-14);
        assert!((l.weight(2, 0) - l.weight(0, 2)).abs() == 0.0);
    }

    #[test]
    fn annihilates_constants_and_interior_linear_fields() {
        let m = disk_mesh(6).unwrap();
        let l = cotangent_laplacian(&m).unwrap();
        let ones = vec![1.0; m.num_vertices()];
        assert!(l.apply(&ones).iter().all(|x| x.abs() < 1e-14));
        let lin: Vec<f64> = m.points2().iter().map(|p| 2.0 * p.re - 3.0 * p.im + 1.0).collect();
        let out = l.apply(&lin);
        let boundary_start = crate::mesh::disk_ring_start(6);
        for (i, x) in out.iter().enumerate().take(boundary_start) {
            assert!(x.abs() < 1e-10, "vertex {i}: {x}");
        }
        for i in 0..m.num_vertices() {
            let s: f64 = l.row(i).map(|(_, w)| w).sum();
            assert!((l.diagonal(i) + s).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_area_face_is_an_error() {
        let pts = [C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(2.0, 0.0)];
        let m = TriMesh::from_points2(&pts, vec![[0, 1, 2]]).unwrap();
        assert!(matches!(cotangent_laplacian(&m), Err(Error::DegenerateFace { face: 0 })));
    }
}
