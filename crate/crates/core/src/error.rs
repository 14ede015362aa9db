use std::fmt;

use thiserror::Error;

/// Pipeline stage that produced a solver failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Potential,
    Heat,
    Picard,
    Oracle,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Potential => "potential",
            Stage::Heat => "heat",
            Stage::Picard => "picard",
            Stage::Oracle => "oracle",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// Bad user-facing input (non-positive length, inadmissible epsilon, ...).
    #[error("{0}")]
    Config(String),

    /// Field shapes or supports that do not match the mesh.
    #[error("structural error: {0}")]
    Structural(String),

    /// Nonlinear or linear solve failure. `history` carries the residual trace.
    #[error("{stage} stage failed: {message}")]
    Solver {
        stage: Stage,
        message: String,
        history: Vec<f64>,
    },

    #[error("oracle refused: {0}")]
    OracleRefused(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    pub(crate) fn solver(stage: Stage, msg: impl Into<String>, history: Vec<f64>) -> Self {
        Error::Solver {
            stage,
            message: msg.into(),
            history,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
