//! Error type shared across the solver pipeline.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CutFemError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mesh topology error: {0}")]
    Topology(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("degenerate point: {0}")]
    DegeneratePoint(String),

    #[error("degenerate element: {0}")]
    DegenerateElement(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("iteration did not converge: {0}")]
    NonConvergence(String),

    #[error("non-finite value in stage '{stage}': {detail}")]
    NonFinite { stage: &'static str, detail: String },

    /// Pipeline stage wrapper so a failing sweep reports which stage aborted.
    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<CutFemError>,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl CutFemError {
    pub fn in_stage(self, stage: &'static str) -> Self {
        CutFemError::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, CutFemError>;
