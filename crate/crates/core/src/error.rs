use crate::classifier::{FailureCategory, FailureKind};
use crate::parser::ParseError;
use crate::prefix::NameError;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TranspileError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("unsupported construct ({0})")]
    Unsupported(FailureCategory),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error(transparent)]
    Name(#[from] NameError),
    #[error("query has no graph pattern to match")]
    EmptyPattern,
    #[error("query projects nothing")]
    EmptyProjection,
}

impl TranspileError {
    pub fn unsupported(detail: impl Into<String>) -> Self {
        TranspileError::Unsupported(FailureCategory::other(detail))
    }

    /// Every failure maps to exactly one taxonomy category.
    pub fn category(&self) -> FailureCategory {
        match self {
            TranspileError::Parse(e) => FailureCategory::new(FailureKind::Syntax, e.to_string()),
            TranspileError::Unsupported(c) => c.clone(),
            other => FailureCategory::other(other.to_string()),
        }
    }

    pub fn is_syntax(&self) -> bool {
        matches!(self, TranspileError::Parse(_))
    }
}
