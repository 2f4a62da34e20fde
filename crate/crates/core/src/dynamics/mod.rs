//! θ-scheme integration of the semi-discrete wave problem, discrete energy and CFL bounds.

mod cfl;
mod theta;

pub use cfl::{
    cfl_estimate, conservative_tau, default_a_max, friedrichs_constant_sq, sharp_tau, CflEstimate, CflMode, C_INV,
};
pub use theta::{
    discrete_energy, run, run_with_observer, EnergyEntry, LoadFn, RunOptions, RunOutput, StepSolver, Stepper,
    StopReason, ThetaConfig, WaveProblem,
};
