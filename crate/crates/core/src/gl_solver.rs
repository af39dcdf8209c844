//! Semi-implicit finite-difference integrator for the Ginzburg-Landau system
//!
//! ```text
//! dA^C = (4 d2_X A^C + d2_Y A^C + A^C - 3 |A|^2 A^C) dT + dW^C,   C in {R, I}
//! ```
//!
//! on `[-L, L)^2`. Per step, with `Xi` the discretised noise rate:
//!
//! ```text
//! ((1 - dT) I - 4 dT d2_X) A^{C,n+1} = A^{C,n} + dT (d2_Y A^{C,n} - 3 |A^n|^2 A^{C,n} + Xi^C)
//! ```
//!
//! The x-direction and the linear growth are implicit, everything else
//! explicit, and the implicit system is solved row by row in Fourier space.

use crate::error::{Error, Result};
use crate::grid::{Axis, Grid2D, RealField2D};
use crate::noise::{NoiseIncrement, NoiseSpec, XiAssembler};
use crate::spectral::CirculantSolver;
use crate::steps_for;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GLConfig {
    pub grid: Grid2D,
    /// Slow time step `dT`; must lie in `(0, 1)`.
    pub delta_t: f64,
    pub noise: Option<NoiseSpec>,
    /// Test hook: `false` drops the cubic term.
    pub cubic: bool,
}

impl GLConfig {
    /// 100x100 on `L = pi/2`, `dT = 1e-4`, deterministic.
    pub fn standard() -> Self {
        Self {
            grid: Grid2D::square(100, std::f64::consts::FRAC_PI_2).expect("valid default grid"),
            delta_t: 1e-4,
            noise: None,
            cubic: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_t > 0.0 && self.delta_t < 1.0) {
            return Err(Error::Config(format!("GL time step {} must lie in (0, 1)", self.delta_t)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GLState {
    pub a_real: RealField2D,
    pub a_imag: RealField2D,
    pub step: u64,
    pub slow_time: f64,
}

impl GLState {
    pub fn new(a_real: RealField2D, a_imag: RealField2D) -> Result<Self> {
        a_real.grid.ensure_matches(&a_imag.grid)?;
        Ok(Self { a_real, a_imag, step: 0, slow_time: 0.0 })
    }

    pub fn zeros(grid: Grid2D) -> Self {
        Self { a_real: RealField2D::zeros(grid), a_imag: RealField2D::zeros(grid), step: 0, slow_time: 0.0 }
    }

    /// `max |A|` over the grid.
    pub fn max_modulus(&self) -> f64 {
        self.a_real.values.iter().zip(&self.a_imag.values).fold(0.0_f64, |m, (r, i)| m.max(r.hypot(*i)))
    }

    /// `||A||_{L^2}` with `|A|^2 = (A^R)^2 + (A^I)^2`.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.a_real.values.iter().zip(&self.a_imag.values).map(|(r, i)| r * r + i * i).sum();
        (s / self.a_real.values.len() as f64).sqrt()
    }
}

/// Stepper with the factorised implicit operator and noise tables cached.
#[derive(Debug)]
pub struct GLSolver {
    cfg: GLConfig,
    implicit: CirculantSolver,
    xi: Option<XiAssembler>,
}

impl GLSolver {
    pub fn new(cfg: GLConfig) -> Result<Self> {
        cfg.validate()?;
        let dt = cfg.delta_t;
        let implicit = CirculantSolver::for_grid(1.0 - dt, -4.0 * dt, 0.0, &cfg.grid)?;
        let xi = cfg.noise.map(|n| XiAssembler::new(cfg.grid, n.m_r, n.m_i));
        Ok(Self { cfg, implicit, xi })
    }

    pub fn config(&self) -> &GLConfig {
        &self.cfg
    }

    /// One step; `xi` is the noise rate `(Xi^R, Xi^I)` and must be present
    /// exactly when the configuration has noise.
    pub fn step(&mut self, state: &GLState, xi: Option<(&RealField2D, &RealField2D)>) -> Result<GLState> {
        let grid = self.cfg.grid;
        grid.ensure_matches(&state.a_real.grid)?;
        grid.ensure_matches(&state.a_imag.grid)?;
        let amp = match (self.cfg.noise, xi) {
            (Some(n), Some((r, i))) => {
                grid.ensure_matches(&r.grid)?;
                grid.ensure_matches(&i.grid)?;
                n.amplitude
            }
            (None, None) => 0.0,
            (Some(_), None) => return Err(Error::Config("noisy GL step without a noise field".into())),
            (None, Some(_)) => return Err(Error::Config("noise field passed to a deterministic GL step".into())),
        };
        let dt = self.cfg.delta_t;
        let cubic = if self.cfg.cubic { 3.0 } else { 0.0 };
        let (ar, ai) = (&state.a_real, &state.a_imag);
        let mut rhs_r = ar.d2(Axis::Y);
        let mut rhs_i = ai.d2(Axis::Y);
        for j in 0..grid.len() {
            let (r, i) = (ar.values[j], ai.values[j]);
            let m = cubic * (r * r + i * i);
            let (xr, xi) = xi.map_or((0.0, 0.0), |(a, b)| (amp * a.values[j], amp * b.values[j]));
            rhs_r.values[j] = r + dt * (rhs_r.values[j] - m * r + xr);
            rhs_i.values[j] = i + dt * (rhs_i.values[j] - m * i + xi);
        }
        self.implicit.solve_in_place(&mut rhs_r.values);
        self.implicit.solve_in_place(&mut rhs_i.values);
        let step = state.step + 1;
        let slow_time = step as f64 * dt;
        rhs_r.check_finite(step, slow_time)?;
        rhs_i.check_finite(step, slow_time)?;
        Ok(GLState { a_real: rhs_r, a_imag: rhs_i, step, slow_time })
    }

    /// Noisy step driven by a registry increment over `dT`.
    pub fn step_with_increment(&mut self, state: &GLState, inc: &NoiseIncrement) -> Result<GLState> {
        if (inc.delta_slow - self.cfg.delta_t).abs() > 1e-12 * self.cfg.delta_t {
            return Err(Error::ClockMismatch(format!(
                "increment spans {} but the GL step is {}",
                inc.delta_slow, self.cfg.delta_t
            )));
        }
        let asm = self.xi.as_ref().ok_or_else(|| Error::Config("GL run has no noise configured".into()))?;
        let (r, i) = asm.xi_a(inc)?;
        self.step(state, Some((&r, &i)))
    }
}

/// One step of the scheme with a freshly built solver.
pub fn gl_step(state: &GLState, cfg: &GLConfig, xi: Option<(&RealField2D, &RealField2D)>) -> Result<GLState> {
    GLSolver::new(*cfg)?.step(state, xi)
}

/// Integrates from `initial` for `steps` steps, calling `observe` on every
/// state including the initial one. Noisy runs draw one registry increment
/// of size `dT` per step.
pub fn run_gl_with(
    cfg: &GLConfig,
    initial: (RealField2D, RealField2D),
    steps: u64,
    mut observe: impl FnMut(&GLState) -> Result<()>,
) -> Result<GLState> {
    let mut solver = GLSolver::new(*cfg)?;
    let mut registry = cfg.noise.map(|n| n.registry());
    let mut state = GLState::new(initial.0, initial.1)?;
    cfg.grid.ensure_matches(&state.a_real.grid)?;
    observe(&state)?;
    while state.step < steps {
        state = match registry.as_mut() {
            Some(reg) => {
                let inc = reg.advance(cfg.delta_t);
                solver.step_with_increment(&state, &inc)?
            }
            None => solver.step(&state, None)?,
        };
        observe(&state)?;
    }
    Ok(state)
}

/// Integrates from `initial` and returns the states at `snapshots_at` (slow
/// times, multiples of `dT`) in the requested order.
pub fn run_gl(cfg: &GLConfig, initial: (RealField2D, RealField2D), snapshots_at: &[f64]) -> Result<Vec<GLState>> {
    let targets = snapshots_at.iter().map(|&t| steps_for(t, cfg.delta_t)).collect::<Result<Vec<_>>>()?;
    let last = targets.iter().copied().max().unwrap_or(0);
    let mut out: Vec<Option<GLState>> = vec![None; targets.len()];
    run_gl_with(cfg, initial, last, |state| {
        for (slot, &n) in out.iter_mut().zip(&targets) {
            if n == state.step {
                *slot = Some(state.clone());
            }
        }
        Ok(())
    })?;
    Ok(out.into_iter().map(|s| s.expect("every target step is visited")).collect())
}
