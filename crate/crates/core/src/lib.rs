//! Simulation of the two-dimensional stochastic anisotropic Swift-Hohenberg
//! equation and its Ginzburg-Landau amplitude equation on a periodic square.
//!
//! The crate is organised bottom-up:
//!
//! * [`grid`]: periodic cell-centred grids, second-difference stencils, `L^p` norms.
//! * [`spectral`]: eigenvalues, Fourier transform in the `e_{k,l}` basis,
//!   Galerkin projection, Sobolev multiplier norms, circulant row solver.
//! * [`noise`]: seeded Brownian mode registry and the discretised noise fields.
//! * [`ou_process`]: exact mode-wise simulation of the stochastic convolution.
//! * [`gl_solver`] / [`sh_solver`]: semi-implicit integrators.
//! * [`ansatz`]: amplitude-to-pattern conversion and initial data.
//! * [`harness`]: configuration, metrics, persistence and experiments.

pub mod ansatz;
pub mod error;
pub mod gl_solver;
pub mod grid;
pub mod harness;
pub mod noise;
pub mod ou_process;
pub mod sh_solver;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{Axis, ComplexField2D, Grid2D, RealField2D};

/// Fields with any entry above this magnitude are treated as a blown-up run.
pub const BLOW_UP_THRESHOLD: f64 = 1e6;

/// Number of steps of size `dt` that land on `time`, or [`Error::ClockMismatch`].
pub fn steps_for(time: f64, dt: f64) -> Result<u64> {
    if !(time >= 0.0 && time.is_finite() && dt > 0.0) {
        return Err(Error::ClockMismatch(format!("time {time} with step {dt}")));
    }
    let n = (time / dt).round();
    if (n * dt - time).abs() > 1e-9 * dt {
        return Err(Error::ClockMismatch(format!("{time} is not a multiple of the step {dt}")));
    }
    Ok(n as u64)
}
