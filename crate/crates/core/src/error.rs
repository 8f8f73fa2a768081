use std::path::PathBuf;

/// Errors produced anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("non-triangular face at line {line}")]
    NonTriangularFace { line: usize },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("degenerate face {face}")]
    DegenerateFace { face: usize },

    #[error("mesh has {0} boundary loops, expected exactly one")]
    MultipleBoundaryLoops(usize),

    #[error("point {index} at ({x}, {y}) lies outside the mesh")]
    PointOutside { index: usize, x: f64, y: f64 },

    #[error("size mismatch for {what}: expected {expected}, got {got}")]
    SizeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("projection singular at ({0}, {1}, {2})")]
    ProjectionSingular(f64, f64, f64),

    #[error("chart transition undefined at z = 0")]
    ZeroArgument,

    #[error("degenerate conformal factor on face {face}")]
    DegenerateConformalFactor { face: usize },

    #[error("Beltrami coefficient on face {face} has modulus {modulus}, not below 1 - 1e-6")]
    InadmissibleBeltrami { face: usize, modulus: f64 },

    #[error("coincident pins at vertex {0}")]
    CoincidentPins(usize),

    #[error(
        "LSQC system is rank deficient ({0}); requires |mu| bounded away from 1, \
         a connected mesh without dangling triangles and two distinct pins"
    )]
    RankDeficient(String),

    #[error("forward tape is stale: its chart operator ran another forward pass")]
    StaleTape,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty point set")]
    EmptySet,

    #[error("field has zero variance")]
    ZeroVariance,

    #[error("seam crosses chart singularity at boundary vertex {0}")]
    SeamSingularity(usize),

    #[error("seam vertex {0} lacks a full one-ring in the seam mesh")]
    IncompleteOneRing(usize),

    #[error("non-finite gradient for {0}")]
    NonFiniteGradient(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
