use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("kinetic energy form is degenerate: Phi0 = {phi0} <= 0")]
    DegenerateKineticEnergy { phi0: f64 },

    #[error("linearization has a zero eigenvalue (static moment b = {static_moment})")]
    DegenerateSpectrum { static_moment: f64 },

    #[error("no speedup: {reason}")]
    NoSpeedup { reason: String },

    #[error("invalid integrator options: {0}")]
    InvalidOptions(String),

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("non-finite state or derivative at t = {t}")]
    Divergence { t: f64 },

    #[error("power-law fit: {0}")]
    Fit(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name: name.into(),
        reason: reason.into(),
    }
}
