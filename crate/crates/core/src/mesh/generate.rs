use std::collections::HashMap;
use std::f64::consts::PI;

use super::{Dim, TriMesh};
use crate::geom::{double_area, normalize, C64};
use crate::{Error, Result};

/// Index of the first vertex on ring `k` of [`disk_mesh`].
pub fn disk_ring_start(k: usize) -> usize {
    if k == 0 {
        0
    } else {
        1 + 3 * k * (k - 1)
    }
}

/// Unit icosphere obtained by repeated 1-to-4 subdivision of the icosahedron.
pub fn icosphere(subdivisions: usize) -> Result<TriMesh> {
    if subdivisions > 8 {
        return Err(Error::InvalidArgument(format!(
            "icosphere subdivisions must be at most 8, got {subdivisions}"
        )));
    }
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<[f64; 3]> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .into_iter()
    .map(normalize)
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<[f64; 3]>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoint.entry(key).or_insert_with(|| {
                let (p, q) = (vertices[a], vertices[b]);
                vertices.push(normalize([p[0] + q[0], p[1] + q[1], p[2] + q[2]]));
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    TriMesh::new(vertices, faces, Dim::Three)
}

/// Concentric-ring triangulation of the closed unit disk.
///
/// Ring `k` (for `k = 0..=rings`) sits at radius `k / rings` and carries `6k`
/// vertices at angles `2πj / 6k` (a single center vertex for `k = 0`). All
/// faces are counterclockwise; the boundary ring is the last `6 * rings`
/// vertices.
pub fn disk_mesh(rings: usize) -> Result<TriMesh> {
    if rings == 0 {
        return Err(Error::InvalidArgument("disk_mesh needs at least one ring".into()));
    }
    let mut points = vec![C64::new(0.0, 0.0)];
    for k in 1..=rings {
        let r = k as f64 / rings as f64;
        let n = 6 * k;
        let start = points.len();
        for j in 0..n {
            let p = if 2 * j > n {
                // mirror of vertex n - j, so conjugation permutes the ring exactly
                points[start + n - j].conj()
            } else if 2 * j == n {
                C64::new(-r, 0.0)
            } else if j == 0 {
                C64::new(r, 0.0)
            } else {
                let a = 2.0 * PI * j as f64 / n as f64;
                C64::new(r * a.cos(), r * a.sin())
            };
            points.push(p);
        }
    }

    let mut faces = Vec::with_capacity(6 * rings * rings);
    for j in 0..6 {
        faces.push([0, 1 + j, 1 + (j + 1) % 6]);
    }
    for k in 2..=rings {
        let (inner0, m) = (disk_ring_start(k - 1), 6 * (k - 1));
        let (outer0, n) = (disk_ring_start(k), 6 * k);
        let (mut i, mut j) = (0usize, 0usize);
        while i < m || j < n {
            // Advance along whichever ring has the next smaller angle; ties go outward.
            let advance_outer = if i == m {
                true
            } else if j == n {
                false
            } else {
                (j + 1) * m <= (i + 1) * n
            };
            let a = inner0 + i % m;
            let b = outer0 + j % n;
            let face = if advance_outer {
                j += 1;
                [a, b, outer0 + j % n]
            } else {
                i += 1;
                [a, b, inner0 + i % m]
            };
            let d = double_area(points[face[0]], points[face[1]], points[face[2]]);
            faces.push(if d > 0.0 { face } else { [face[0], face[2], face[1]] });
        }
    }
    TriMesh::from_points2(&points, faces)
}
