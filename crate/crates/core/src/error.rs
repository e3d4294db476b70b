use thiserror::Error;

use crate::geometry::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model parameters: {}", format_violations(.0))]
    InvalidParams(Vec<Violation>),

    #[error("arclength {s} outside [0, {total})")]
    OutOfRange { s: f64, total: f64 },

    #[error("grazing impact: |v·n| = {0:e} below tangency tolerance")]
    GrazingImpact(f64),

    #[error("free flight exceeded max length {max_len}")]
    EscapedMaxLen { max_len: f64 },

    #[error("trajectory hit a scatterer corner (r = 0); sample discarded")]
    CornerHit,

    #[error("could not draw a regular phase point after {0} attempts")]
    SamplingExhausted(usize),

    #[error("direction coincides with a corridor boundary or axis (tan α = {0})")]
    DegenerateDirection(f64),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

impl Error {
    /// True for parameter errors whose violations include a trapping configuration.
    pub fn is_trapping(&self) -> bool {
        matches!(self, Error::InvalidParams(v) if v.iter().any(|x| matches!(x, Violation::TrappingConfiguration { .. })))
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
