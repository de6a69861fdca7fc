use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// LMI family that made the observer design program infeasible.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintFamily {
    /// The per-vertex stability/performance LMIs cannot hold jointly.
    VertexStability,
    /// Vertex LMIs are feasible on their own; the peak-to-peak bound LMI is not compatible with them.
    PeakToPeakBound,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct InfeasibilityReport {
    pub family: ConstraintFamily,
    /// First vertex whose LMI is infeasible on its own, when one is.
    pub vertex: Option<usize>,
    pub solver_status: String,
    pub lambda: f64,
}

impl fmt::Display for InfeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} constraints infeasible at lambda={} (solver status {})",
            self.family, self.lambda, self.solver_status
        )?;
        if let Some(v) = self.vertex {
            write!(f, ", first offending vertex {v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left} vs {right}")]
    Dimension { op: &'static str, left: String, right: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("reduction order q={q} must exceed the state dimension n={n}")]
    ReductionOrder { q: usize, n: usize },

    #[error("vertex enumeration needs 2^{free} matrices, above the cap of 2^{cap}")]
    VertexExplosion { free: usize, cap: usize },

    #[error("observer synthesis infeasible: {0}")]
    Infeasible(InfeasibilityReport),

    #[error("SDP solver did not converge: {0}")]
    Solver(String),

    #[error("certificate rejected: {0}")]
    CertificateRejected(String),

    #[error("jacobian enclosure failed: {0}")]
    Jacobian(String),

    #[error("state became non-finite at step {step}")]
    NonFinite { step: usize },

    /// A batch finished with failed members.
    #[error("{0}")]
    Runtime(String),

    #[error("config: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dims(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        Error::Dimension { op, left: format!("{}x{}", left.0, left.1), right: format!("{}x{}", right.0, right.1) }
    }
}
