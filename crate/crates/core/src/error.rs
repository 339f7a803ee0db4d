use thiserror::Error;

use crate::integrator::Trajectory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid system: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value from `{function}` at t={t}, x={x}, y={y}")]
    NonFinite {
        function: &'static str,
        t: f64,
        x: f64,
        y: f64,
    },

    #[error("impulse map called at t={t}, which is not a pre-impulse state at an impulse time")]
    NotImpulseTime { t: f64 },

    #[error("integration failed at t={t}: {reason}")]
    Integration {
        t: f64,
        reason: String,
        partial: Option<Box<Trajectory>>,
    },

    #[error("angle undefined at t={t}: radius {radius:e} is inside the origin guard {guard:e}")]
    NearOrigin { t: f64, radius: f64, guard: f64 },

    #[error("effective stiffness H={value} is not positive at t={t}, u={u}")]
    NonPositiveStiffness { t: f64, u: f64, value: f64 },

    #[error("sample {index}: {source}")]
    AtSample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("search exhausted: {reason} (best residual {best_residual:e})")]
    SearchExhausted {
        reason: String,
        best: Option<[f64; 2]>,
        best_residual: f64,
    },

    #[error("no iterate satisfies the inner rotation condition up to {cap} periods")]
    NoIterateFound { cap: usize },
}

impl Error {
    pub fn at_sample(index: usize, source: Error) -> Self {
        Error::AtSample {
            index,
            source: Box::new(source),
        }
    }

    /// Partial trajectory carried by an integration failure, if any.
    pub fn partial_trajectory(&self) -> Option<&Trajectory> {
        match self {
            Error::Integration { partial, .. } => partial.as_deref(),
            _ => None,
        }
    }
}
