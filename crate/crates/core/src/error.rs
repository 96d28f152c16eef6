use thiserror::Error;

use crate::sampler::TnaFit;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unsupported drift regime: {0}")]
    UnsupportedRegime(String),
    #[error("quadrature did not reach tolerance (best estimate {estimate}, error estimate {err_estimate})")]
    Accuracy { estimate: f64, err_estimate: f64 },
    #[error("mixture fit did not converge (best objective {objective})")]
    Fit { best: Box<TnaFit>, objective: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
