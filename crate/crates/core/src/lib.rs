//! Viscous shallow-water solutions, the second-order thin-layer ansatz built
//! on them, and numerical checks of the associated thin-domain estimates.

// `!(x > 0.0)` rejects NaN along with non-positive values; index loops follow the formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod fields;

pub use error::{Error, Result};
pub use fields::{Grid, HField, NormKind, ThinField, Vertical};
pub mod ansatz;
pub mod lagrangian;
pub mod residual;
pub mod shallow_water;
pub mod thin_analysis;
pub mod zpoly;

pub use ansatz::{ansatz_rate, build_ansatz, eval_ansatz, AnsatzFields, AnsatzRate};
pub use shallow_water::{
    sw_energy, sw_rhs, sw_solve, sw_step, InitialCondition, Params, SWState, SWTrajectory,
};
