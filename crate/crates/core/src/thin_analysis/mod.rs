//! Korn constants, vertical elliptic mode problems and randomized
//! anisotropic inequality probes on thin strips.

pub mod elliptic;
pub mod korn;
pub mod probe;

pub use elliptic::{
    divergence_lift, mode_pressure_dirichlet_top, mode_pressure_neumann_bottom, DivergenceLift,
    ModeSolution,
};
pub use korn::{
    korn_basis_eval, korn_boundary_forms, korn_gram, korn_lambda, korn_spectrum, korn_sweep,
    log_grid, sigma_grid, BasisConvention, KornCell, KornPencil, KornSpectrum, KornSweep,
};
pub use probe::{anisotropy_probe, korn_probe, ProbeReport, ProbeRow, ProbeTag};
