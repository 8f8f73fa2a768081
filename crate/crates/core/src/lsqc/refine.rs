use super::{BeltramiField, DiskMap, Site};
use crate::mesh::TriMesh;
use crate::{Error, Result};

/// Splits `face` 1-to-3 at the interior point with barycentric weights
/// `alpha`. Children inherit the parent coefficient and the new vertex (index
/// `|V|`) maps to `Σ α_j U_j`.
///
/// The parent slot keeps the child opposite its first vertex; the other two
/// children are appended.
pub fn refine_and_extend(
    mesh: &TriMesh,
    mu: &BeltramiField,
    map: &DiskMap,
    face: usize,
    alpha: [f64; 3],
) -> Result<(TriMesh, BeltramiField, DiskMap)> {
    if mu.site != Site::PerFace || mu.values.len() != mesh.num_faces() {
        return Err(Error::SizeMismatch {
            what: "per-face Beltrami field",
            expected: mesh.num_faces(),
            got: mu.values.len(),
        });
    }
    if map.positions.len() != mesh.num_vertices() {
        return Err(Error::SizeMismatch {
            what: "map positions",
            expected: mesh.num_vertices(),
            got: map.positions.len(),
        });
    }
    let &[a, b, c] = mesh.faces.get(face).ok_or_else(|| {
        Error::InvalidArgument(format!("face {face} outside 0..{}", mesh.num_faces()))
    })?;
    let s: f64 = alpha.iter().sum();
    if alpha.iter().any(|&x| !(x > 0.0)) || (s - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "split point {alpha:?} is not strictly inside face {face}"
        )));
    }
    let v = mesh.num_vertices();
    let p = |i: usize| mesh.vertices[i];
    let new_vertex: [f64; 3] =
        std::array::from_fn(|d| alpha[0] * p(a)[d] + alpha[1] * p(b)[d] + alpha[2] * p(c)[d]);

    let mut vertices = mesh.vertices.clone();
    vertices.push(new_vertex);
    let mut faces = mesh.faces.clone();
    faces[face] = [v, b, c];
    faces.push([a, v, c]);
    faces.push([a, b, v]);
    let refined = TriMesh::new(vertices, faces, mesh.dim)?;

    let mut values = mu.values.clone();
    values.push(mu.values[face]);
    values.push(mu.values[face]);

    let u = &map.positions;
    let mut positions = u.clone();
    positions.push(u[a] * alpha[0] + u[b] * alpha[1] + u[c] * alpha[2]);
    Ok((refined, BeltramiField::per_face(values), DiskMap { positions }))
}
