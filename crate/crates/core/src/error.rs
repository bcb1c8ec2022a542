use thiserror::Error;

/// Errors raised by the numerical layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// A series or quadrature failed to reach its accuracy target.
    #[error("accuracy error: {0}")]
    Accuracy(String),
    /// A NaN or infinity appeared in the solution.
    #[error("non-finite value at t = {t}")]
    NonFinite { t: f64 },
    /// The largest blow-up threshold was never reached before `t_max`.
    #[error("no blow-up detected before t_max = {t_max}")]
    NoBlowUp { t_max: f64 },
    /// Iteration ledgers are capped to keep `p^j` representable.
    #[error("j_max = {0} exceeds the overflow guard of 200")]
    OverflowGuard(usize),
    /// A configuration file or key could not be interpreted.
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
