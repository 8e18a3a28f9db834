//! Periodic horizontal fields, vertical collocation on the thin layer, and norms.

pub mod cheb;
mod grid;
mod hfield;
mod thin;

pub use grid::Grid;
pub use hfield::{div, grad, jacobian, HField, MAX_DERIVATIVE_ORDER};
pub use thin::{ThinField, Vertical};

use crate::error::{Error, Result};

/// Norm selector shared by horizontal and thin-layer fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    L2,
    /// Sum of squared L² norms of all derivatives up to order `k`.
    H(usize),
    L6,
    Linf,
    /// Fourier multiplier `(1 + |κ|²)^{s/2}` on a horizontal trace.
    BoundaryH(f64),
}

impl NormKind {
    pub fn validate(self) -> Result<()> {
        match self {
            NormKind::H(k) if k > 3 => Err(Error::Unsupported(format!("H^{k} norm (k ≤ 3)"))),
            NormKind::BoundaryH(s) if ![-0.5, 0.5, 1.5].contains(&s) => Err(Error::Unsupported(
                format!("boundary H^{s} (s ∈ {{-1/2, 1/2, 3/2}})"),
            )),
            _ => Ok(()),
        }
    }
}
