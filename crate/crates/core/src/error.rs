//! Crate-wide error type.

use thiserror::Error;

/// Everything that can go wrong across mesh construction, space setup,
/// assembly, solving and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bounding box: {0}")]
    InvalidBbox(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("nonconforming mesh: {0}")]
    Nonconforming(String),

    #[error("boundary face {face} satisfies the Neumann-data rule but not the Dirichlet rule; \
             faces carrying the Neumann datum must carry the Dirichlet datum as well")]
    TagConflict { face: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("point ({0}, {1}) lies outside the mesh")]
    PointOutsideMesh(f64, f64),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("conjugate gradient stagnated after {iters} iterations (relative residual {rel_res:.3e})")]
    CgStagnation { iters: usize, rel_res: f64 },

    #[error("defect correction did not reach the increment tolerance within {iters} iterations \
             (last increment {last_increment:.3e})")]
    DefectNonConvergence { iters: usize, last_increment: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Process exit code for the CLI: 3 for configuration problems,
    /// 2 for solver failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidBbox(_)
            | Error::InvalidMesh(_)
            | Error::Nonconforming(_)
            | Error::TagConflict { .. }
            | Error::Config(_)
            | Error::SpaceMismatch(_)
            | Error::Parse(_) => 3,
            Error::Singular(_)
            | Error::CgStagnation { .. }
            | Error::DefectNonConvergence { .. } => 2,
            Error::PointOutsideMesh(..) | Error::Io(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
