use thiserror::Error;

use crate::sim::TraceRecord;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("helix pitch angle has zero sine; drag coefficients are undefined")]
    DegenerateHelix,

    #[error("propulsion gain e11 is zero; the swimmer cannot be propelled")]
    NoPropulsion,

    #[error("singular feedforward configuration: |v_des| + |f_d|·cos(alpha)/a2 = 0")]
    SingularFeedforward,

    #[error("invalid certificate: {0}")]
    InvalidCertificate(String),

    #[error("multiplier bisection did not converge after {0} iterations")]
    NumericalFailure(usize),

    #[error("trust-region instance is not saturated; the boundary branch does not apply")]
    NotSaturated,

    #[error("quartic has no real root with shifted multiplier >= {0}")]
    InconsistentProblem(f64),

    #[error("run diverged at t = {t} s: {reason}")]
    Diverged {
        t: f64,
        reason: String,
        last: Option<Box<TraceRecord>>,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
