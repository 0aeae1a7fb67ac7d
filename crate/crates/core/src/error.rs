use thiserror::Error;

use crate::lp::LpError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invariant `{invariant}` violated: {detail}")]
    Invariant {
        invariant: &'static str,
        detail: String,
    },
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("empty set: {0}")]
    EmptySet(&'static str),
    #[error("platform cannot hover: {0}")]
    HoverInfeasible(String),
    #[error("simulation diverged at t = {t:.6} s")]
    Diverged { t: f64 },
    #[error(transparent)]
    Lp(#[from] LpError),
}

impl Error {
    pub(crate) fn invariant(invariant: &'static str, detail: impl Into<String>) -> Self {
        Self::Invariant {
            invariant,
            detail: detail.into(),
        }
    }

    /// True for errors caused by the analysed platform rather than by bad input.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            Self::EmptySet(_) | Self::HoverInfeasible(_) | Self::Diverged { .. } | Self::Lp(_)
        )
    }
}
