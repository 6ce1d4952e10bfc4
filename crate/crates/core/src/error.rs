use thiserror::Error;

/// Failure modes of the decomposition library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DcCpdError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("degenerate pencil after {attempts} attempts{context}")]
    DegeneratePencil { attempts: usize, context: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("rank deficient ({context}): numerical rank {rank} of {cols} columns")]
    RankDeficient {
        rank: usize,
        cols: usize,
        context: String,
    },

    #[error("rank mismatch ({context}): expected null-space dimension {expected}, no clear singular-value gap")]
    RankMismatch {
        expected: usize,
        context: String,
        singular_values: Vec<f64>,
    },

    #[error("inconsistent factors: {0}")]
    Consistency(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl DcCpdError {
    /// Prefixes the error message with the stage or triple that produced it.
    pub fn in_stage(self, stage: &str) -> Self {
        match self {
            DcCpdError::DegeneratePencil { attempts, context } => DcCpdError::DegeneratePencil {
                attempts,
                context: format!("{context} [{stage}]"),
            },
            DcCpdError::RankDeficient {
                rank,
                cols,
                context,
            } => DcCpdError::RankDeficient {
                rank,
                cols,
                context: format!("{stage}: {context}"),
            },
            DcCpdError::RankMismatch {
                expected,
                context,
                singular_values,
            } => DcCpdError::RankMismatch {
                expected,
                context: format!("{stage}: {context}"),
                singular_values,
            },
            DcCpdError::Consistency(s) => DcCpdError::Consistency(format!("{stage}: {s}")),
            DcCpdError::Degenerate(s) => DcCpdError::Degenerate(format!("{stage}: {s}")),
            DcCpdError::Contract(s) => DcCpdError::Contract(format!("{stage}: {s}")),
            other => other,
        }
    }

    /// True for malformed input (files, shapes, options) as opposed to numerical failure.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            DcCpdError::Dimension(_)
                | DcCpdError::InvalidInput(_)
                | DcCpdError::Io(_)
                | DcCpdError::Parse(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, DcCpdError>;

/// Non-fatal diagnostics attached to results.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// Singular values around the rank cut are not separated by a factor 10.
    AmbiguousRank { dim: usize, gap_ratio: f64 },
    /// Leading eigenvalues coincide to relative 1e-8.
    EigenvalueTie { lambda1: f64, lambda2: f64 },
    /// Per-tensor rank estimates disagree.
    RankDisagreement { counts: Vec<usize> },
}
