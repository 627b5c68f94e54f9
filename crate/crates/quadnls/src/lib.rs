//! Spectral toolkit for a coupled quadratic Schrödinger pair with
//! multiplicative bump noise: periodic pseudospectral operators, the bump
//! noise model and its rescaled-equation coefficients, conserved-quantity
//! and energy-rate diagnostics, ground-state solvers (radial shooting and
//! grid descent), three time integrators, and a verification suite wired
//! into a command-line front end.

pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod grid;
pub mod ground_state;
pub mod io;
pub mod noise;
pub mod observables;
pub mod radial;
pub mod spectral;
pub mod verify;

pub use dynamics::{
    run_ensemble, run_trajectory, InitialData, SimulationConfig, StopReason, SystemForm,
    TrajectoryResult,
};
pub use error::{Error, Result};
pub use field::ComplexField;
pub use grid::Grid;
pub use ground_state::{solve_ground_state, GroundState, GroundStateMethod};
pub use noise::{sample_paths, BrownianPaths, BumpSpec, NoiseModel};
pub use spectral::SpectralEngine;
