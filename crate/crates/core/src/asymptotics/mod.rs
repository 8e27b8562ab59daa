//! Quasimodes of `H_eps` and the eps-convergence harness.

mod quasimode;

pub use quasimode::{
    build_quasimode, eigenvalues_within, quasimode_residual, quasimode_residual_at, zeta, ClosureField, DiscreteField,
    Jumps, LimitField, Quasimode, QuasimodeOptions,
};

mod convergence;

pub use convergence::{run_convergence, Backend, ConvergenceReport, ConvergenceRow, ConvergenceSetup, RateFit};
