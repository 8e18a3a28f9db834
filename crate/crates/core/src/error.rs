use thiserror::Error;

/// Failures raised by the numerical kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// The layer thickness reached the vacuum guard.
    #[error("vacuum: min h0 = {min_h:.3e} at t = {t:.6}")]
    Vacuum { t: f64, min_h: f64 },

    #[error("blowup at t = {t:.6}: {detail}")]
    Blowup { t: f64, detail: String },

    #[error("time step {dt:.3e} exceeds stability bound {bound:.3e}")]
    Stability { dt: f64, bound: f64 },

    #[error("quadrature did not converge: relative disagreement {rel:.3e}")]
    Precision { rel: f64 },

    #[error("pencil conditioning failed at M = {m}, sigma = ({c}, {s})")]
    Conditioning { m: f64, c: f64, s: f64 },

    #[error("degenerate chart: det A = {det:.3e} at node {node}")]
    DegenerateChart { node: usize, det: f64 },

    #[error("collocation residual {residual:.3e} above tolerance")]
    SolverResidual { residual: f64 },

    #[error("ansatz and rate were built from different shallow-water states")]
    MismatchedState,
}

impl Error {
    /// Errors caused by the numerics rather than by the caller's input.
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            Error::InvalidInput(_) | Error::Unsupported(_) | Error::MismatchedState
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
