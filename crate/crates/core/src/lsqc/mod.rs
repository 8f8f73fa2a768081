//! Least-squares quasiconformal maps of planar triangle meshes: Beltrami
//! coefficients of piecewise-linear maps, the discrete energy, and its
//! two-pin minimizer.

mod bc;
mod refine;
mod solve;
mod system;

pub use bc::{bc_from_map, face_bc_from_vertex_bc, face_wirtinger};
pub use refine::refine_and_extend;
pub use solve::{solve, Factorization, LsqcSolver, SolverConfig};
pub use system::{assemble, energy, FaceStencils, LsqcSystem, RealBlocks, ADMISSIBILITY_MARGIN};

use crate::geom::C64;

/// Where a [`BeltramiField`] is sampled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Site {
    PerVertex,
    PerFace,
}

/// Complex Beltrami coefficient per vertex or per face of a disk mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct BeltramiField {
    pub site: Site,
    pub values: Vec<C64>,
}

impl BeltramiField {
    pub fn per_vertex(values: Vec<C64>) -> Self {
        Self {
            site: Site::PerVertex,
            values,
        }
    }

    pub fn per_face(values: Vec<C64>) -> Self {
        Self {
            site: Site::PerFace,
            values,
        }
    }

    pub fn max_modulus(&self) -> f64 {
        self.values.iter().map(|m| m.norm()).fold(0.0, f64::max)
    }

    pub fn mean_modulus(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().map(|m| m.norm()).sum::<f64>() / self.values.len() as f64
    }
}

/// Image of each vertex of a disk mesh under a piecewise-linear map.
#[derive(Clone, Debug, PartialEq)]
pub struct DiskMap {
    pub positions: Vec<C64>,
}
