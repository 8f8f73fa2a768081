use super::TriMesh;
use crate::geom::{cross, dot, norm, sub, Vec3};
use crate::{Error, Result};

/// Face normal `n_T = (x_i − x_k) × (x_j − x_i)` for `T = (i, j, k)`.
#[inline]
pub(crate) fn face_normal(x: &[Vec3], f: [usize; 3]) -> Vec3 {
    let [i, j, k] = f;
    cross(sub(x[i], x[k]), sub(x[j], x[i]))
}

/// Flips every face of a sphere mesh whose normal points inward, so that
/// `n_T · x_i > 0` holds for all faces. Vertex data is untouched.
pub fn orient_outward(mesh: &TriMesh) -> Result<TriMesh> {
    let mut out = mesh.clone();
    for (fi, f) in out.faces.iter_mut().enumerate() {
        let s = dot(face_normal(&mesh.vertices, *f), mesh.vertices[f[0]]);
        if s.abs() < 1e-12 {
            return Err(Error::DegenerateFace { face: fi });
        }
        if s < 0.0 {
            f.swap(1, 2);
        }
    }
    Ok(out)
}

/// `A_T = ½‖n_T‖ · sign(n_T · x_i)` for each face of the mesh's own embedding.
pub fn signed_face_areas(mesh: &TriMesh) -> Vec<f64> {
    signed_face_areas_with_normals(&mesh.faces, &mesh.vertices)
}

/// Signed areas of `faces` evaluated at arbitrary vertex `positions`, used to
/// detect folds of a deformed sphere against the reference face orientation.
pub fn signed_face_areas_with_normals(faces: &[[usize; 3]], positions: &[Vec3]) -> Vec<f64> {
    faces
        .iter()
        .map(|&f| {
            let n = face_normal(positions, f);
            let s = dot(n, positions[f[0]]);
            0.5 * norm(n) * if s < 0.0 { -1.0 } else { 1.0 }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::icosphere;
    use rand::{Rng, SeedableRng};

    #[test]
    fn reversed_faces_are_flipped_back() {
        let m = icosphere(1).unwrap();
        let mut rev = m.clone();
        for f in rev.faces.iter_mut() {
            f.swap(1, 2);
        }
        let fixed = orient_outward(&rev).unwrap();
        assert!(signed_face_areas(&fixed).iter().all(|&a| a > 0.0));
        assert_eq!(fixed.vertices, m.vertices);
    }

    #[test]
    fn idempotent_on_oriented_mesh() {
        let m = icosphere(2).unwrap();
        let once = orient_outward(&m).unwrap();
        assert_eq!(once.faces, m.faces);
        assert_eq!(orient_outward(&once).unwrap(), once);
    }

    #[test]
    fn random_flips_are_repaired() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut m = icosphere(2).unwrap();
        for f in m.faces.iter_mut() {
            if rng.random_bool(0.5) {
                f.swap(0, 2);
            }
        }
        let fixed = orient_outward(&m).unwrap();
        let negative = signed_face_areas(&fixed).iter().filter(|&&a| a < 0.0).count();
        assert_eq!(negative, 0);
    }

    #[test]
    fn reflected_vertex_creates_fold() {
        let m = icosphere(2).unwrap();
        let mut x = m.vertices.clone();
        // drag a vertex past one of its neighbors
        let v = m.faces[0][0];
        let u = m.faces[0][1];
        let d = sub(x[u], x[v]);
        x[v] = crate::geom::normalize(crate::geom::add(x[v], crate::geom::scale(d, 2.5)));
        let areas = signed_face_areas_with_normals(&m.faces, &x);
        assert!(areas.iter().any(|&a| a < 0.0));
    }

    #[test]
    fn total_area_approximates_sphere() {
        let m = icosphere(3).unwrap();
        let total: f64 = signed_face_areas(&m).iter().map(|a| a.abs()).sum();
        let four_pi = 4.0 * std::f64::consts::PI;
        assert!((total - four_pi).abs() / four_pi < 0.02);
    }
}
