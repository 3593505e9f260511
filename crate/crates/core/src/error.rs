use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Error categories shared across the crate.
///
/// The variants map one-to-one onto the failure classes that the command line
/// front end reports (parameter problems versus numerical breakdown).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Parameter(String),

    #[error("grid error: {0}")]
    Grid(String),

    #[error("Newton iteration did not converge at t = {t} (dt = {dt}, residual = {residual:e})")]
    NewtonFailed { t: f64, dt: f64, residual: f64 },

    #[error("time step {dt:e} exceeds the stability limit {limit:e}")]
    StepTooLarge { dt: f64, limit: f64 },

    #[error("positivity lost at t = {t}: {detail}")]
    Positivity { t: f64, detail: String },

    #[error("time step underflow at t = {t} (dt = {dt:e})")]
    StepUnderflow { t: f64, dt: f64 },

    #[error(
        "domain too short: perturbation {level:e} at x = {station} exceeds {threshold:e} at t = {t}; \
         rerun with length >= {suggested_length}"
    )]
    Contamination {
        t: f64,
        station: f64,
        level: f64,
        threshold: f64,
        suggested_length: f64,
    },

    #[error("diagnostic error: {0}")]
    Diagnostic(String),

    #[error("perturbation spec error: {0}")]
    Spec(String),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NewtonFailed { .. }
                | Error::StepTooLarge { .. }
                | Error::Positivity { .. }
                | Error::StepUnderflow { .. }
                | Error::Contamination { .. }
        )
    }
}
