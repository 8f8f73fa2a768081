//! Sphere-to-sphere registration with quasiconformal maps.
//!
//! The sphere is covered by two stereographic charts. In each chart a
//! Beltrami coefficient field and two pins determine a disk map through a
//! least-squares solve; the two chart maps are glued along the equator and
//! optimized jointly against task and regularization losses.

pub mod boost;
pub mod charts;
pub mod diffmap;
mod error;
pub mod geom;
pub mod losses;
pub mod lsqc;
pub mod mesh;
pub mod metrics;
pub mod resample;
pub mod synth;

pub use boost::{BoostState, Registration, RegistrationResult, StandardSphere, StopConfig, TaskContext};
pub use diffmap::{ChartOperator, ChartParams};
pub use error::{Error, Result};
pub use geom::{Vec3, C64};
pub use losses::{LandmarkSpec, LossWeights};
pub use lsqc::{BeltramiField, DiskMap, SolverConfig};
pub use mesh::TriMesh;
