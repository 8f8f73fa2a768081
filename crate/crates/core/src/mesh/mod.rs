//! Indexed triangle meshes and the geometric queries the rest of the crate
//! is built on.

mod generate;
mod io;
mod laplacian;
mod locate;
mod orient;
mod topology;

pub use generate::{disk_mesh, disk_ring_start, icosphere};
pub use io::{load_mesh, load_scalar_field, save_mesh, save_scalar_field, MeshFormat};
pub use laplacian::{cotangent_laplacian, CotanLaplacian};
pub use locate::{
    interpolate, locate_barycentric, locate_on_sphere, BarycentricHandle, PointLocator,
};
pub use orient::{orient_outward, signed_face_areas, signed_face_areas_with_normals};
pub use topology::{boundary_loop, edges, vertex_neighbors};

use std::collections::BTreeMap;

use crate::geom::{double_area, C64, Vec3};
use crate::{Error, Result};

/// Embedding dimension of a mesh. Planar meshes keep `z = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dim {
    Two,
    Three,
}

/// Indexed triangle mesh with optional named per-vertex scalar fields.
#[derive(Clone, Debug, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
    pub dim: Dim,
    pub fields: BTreeMap<String, Vec<f64>>,
}

impl TriMesh {
    /// Builds a mesh, rejecting out-of-range indices and faces that repeat a vertex.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>, dim: Dim) -> Result<Self> {
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if f.iter().any(|&v| v >= n) {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} references a vertex outside 0..{n}"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::DegenerateFace { face: fi });
            }
        }
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidMesh("non-finite vertex coordinate".into()));
        }
        Ok(Self {
            vertices,
            faces,
            dim,
            fields: BTreeMap::new(),
        })
    }

    /// Planar mesh from complex vertex positions.
    pub fn from_points2(points: &[C64], faces: Vec<[usize; 3]>) -> Result<Self> {
        let vertices = points.iter().map(|p| [p.re, p.im, 0.0]).collect();
        Self::new(vertices, faces, Dim::Two)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    #[inline]
    pub fn point2(&self, i: usize) -> C64 {
        let v = self.vertices[i];
        C64::new(v[0], v[1])
    }

    pub fn points2(&self) -> Vec<C64> {
        (0..self.vertices.len()).map(|i| self.point2(i)).collect()
    }

    /// Twice the signed area `d_T` of a face in the xy-plane.
    pub fn face_double_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.faces[face];
        double_area(self.point2(a), self.point2(b), self.point2(c))
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - edges(self).len() as i64 + self.num_faces() as i64
    }

    /// Attaches a named per-vertex scalar field.
    pub fn set_field(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.num_vertices() {
            return Err(Error::SizeMismatch {
                what: "scalar field",
                expected: self.num_vertices(),
                got: values.len(),
            });
        }
        self.fields.insert(name.to_owned(), values);
        Ok(())
    }

    pub fn field(&self, name: &str) -> Option<&[f64]> {
        self.fields.get(name).map(Vec::as_slice)
    }
}
