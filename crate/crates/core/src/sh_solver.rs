//! Semi-implicit integrator for the anisotropic Swift-Hohenberg equation
//!
//! ```text
//! du = (-(1 + d2_x)^2 u + d2_y u + eps^2 u - u^3) dt + eps dW_eps
//! ```
//!
//! in the split form `du/dt = d2_x mu - mu - u + ...`, `mu = -d2_x u - 2u`.
//! Eliminating `mu^{n+1} = -d2_x u^{n+1} - u^{n+1} - u^n` gives the x-implicit
//! row system
//!
//! ```text
//! ((1 + dt) I + dt d2_x + dt d2_x^2) u^{n+1}
//!     = u^n + dt (-d2_x u^n + d2_y u^n + eps^2 u^n - (u^n)^3 + eps Xi_eps)
//! ```
//!
//! after which `mu^{n+1}` is rebuilt from the same relation. The shifted mode
//! integrates `v = u - Z` with `eps = 1`: the cubic becomes `(v + Z)^3` and
//! the noise term is dropped.

use crate::error::{Error, Result};
use crate::grid::{Axis, Grid2D, RealField2D};
use crate::noise::{NoiseIncrement, NoiseSpec, XiAssembler};
use crate::ou_process::{OUState, OuConfig, ZFieldEvaluator};
use crate::spectral::CirculantSolver;
use crate::steps_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// The stochastic equation for `u`.
    Direct,
    /// The random equation for `v = u - Z` (requires `eps = 1`).
    Shifted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SHConfig {
    /// Grid on `[-L/eps, L/eps)^2`.
    pub grid: Grid2D,
    pub delta_t: f64,
    pub eps: f64,
    pub noise: Option<NoiseSpec>,
    pub mode: Mode,
    /// Test hook: `false` drops the cubic term.
    pub cubic: bool,
    /// Square mode truncation of `Z` in shifted runs.
    pub ou_truncation: usize,
}

impl SHConfig {
    /// 100x100 on `[-L/eps, L/eps)^2` with `L = pi/2`, `dt = 1e-3`.
    pub fn standard(eps: f64) -> Self {
        Self {
            grid: Grid2D::square(100, std::f64::consts::FRAC_PI_2 / eps).expect("valid default grid"),
            delta_t: 1e-3,
            eps,
            noise: None,
            mode: Mode::Direct,
            cubic: true,
            ou_truncation: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_t > 0.0 && self.delta_t.is_finite()) {
            return Err(Error::Config(format!("SH time step {} must be positive", self.delta_t)));
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::Config(format!("eps = {} must lie in (0, 1]", self.eps)));
        }
        if self.mode == Mode::Shifted && self.eps != 1.0 {
            return Err(Error::Config("the shifted equation is posed with eps = 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SHState {
    pub u: RealField2D,
    pub mu: RealField2D,
    pub step: u64,
    pub fast_time: f64,
}

impl SHState {
    /// Initial state with `mu = -d2_x u - 2u`.
    pub fn new(u: RealField2D) -> Self {
        let mu = u.d2(Axis::X).axpby(-1.0, &u, -2.0).expect("same grid");
        Self { u, mu, step: 0, fast_time: 0.0 }
    }
}

/// Stepper with the factorised row operator and noise tables cached.
#[derive(Debug)]
pub struct SHSolver {
    cfg: SHConfig,
    implicit: CirculantSolver,
    xi: Option<XiAssembler>,
}

impl SHSolver {
    pub fn new(cfg: SHConfig) -> Result<Self> {
        cfg.validate()?;
        let dt = cfg.delta_t;
        let implicit = CirculantSolver::for_grid(1.0 + dt, dt, dt, &cfg.grid)?;
        let xi = cfg.noise.map(|n| XiAssembler::new(cfg.grid, n.m_r, n.m_i));
        Ok(Self { cfg, implicit, xi })
    }

    pub fn config(&self) -> &SHConfig {
        &self.cfg
    }

    fn advance(&mut self, state: &SHState, shift: Option<&RealField2D>, forcing: Option<(f64, &RealField2D)>) -> Result<SHState> {
        let grid = self.cfg.grid;
        grid.ensure_matches(&state.u.grid)?;
        let dt = self.cfg.delta_t;
        let e2 = self.cfg.eps * self.cfg.eps;
        let cubic = if self.cfg.cubic { 1.0 } else { 0.0 };
        let u = &state.u;
        let dxx = u.d2(Axis::X);
        let mut rhs = u.d2(Axis::Y);
        for j in 0..grid.len() {
            let un = u.values[j];
            let w = shift.map_or(un, |z| un + z.values[j]);
            let f = forcing.map_or(0.0, |(a, xi)| a * xi.values[j]);
            rhs.values[j] = un + dt * (-dxx.values[j] + rhs.values[j] + e2 * un - cubic * w * w * w + f);
        }
        self.implicit.solve_in_place(&mut rhs.values);
        let step = state.step + 1;
        let fast_time = step as f64 * dt;
        rhs.check_finite(step, fast_time)?;
        // mu^{n+1} = -d2_x u^{n+1} - u^{n+1} - u^n
        let mut mu = rhs.d2(Axis::X);
        for j in 0..grid.len() {
            mu.values[j] = -mu.values[j] - rhs.values[j] - u.values[j];
        }
        Ok(SHState { u: rhs, mu, step, fast_time })
    }

    /// Direct step; `xi_eps` is the noise rate and must be present exactly
    /// when the configuration has noise.
    pub fn step(&mut self, state: &SHState, xi_eps: Option<&RealField2D>) -> Result<SHState> {
        if self.cfg.mode != Mode::Direct {
            return Err(Error::Config("direct step on a shifted configuration".into()));
        }
        let forcing = match (self.cfg.noise, xi_eps) {
            (Some(n), Some(xi)) => {
                self.cfg.grid.ensure_matches(&xi.grid)?;
                Some((n.amplitude * self.cfg.eps, xi))
            }
            (None, None) => None,
            (Some(_), None) => return Err(Error::Config("noisy SH step without a noise field".into())),
            (None, Some(_)) => return Err(Error::Config("noise field passed to a deterministic SH step".into())),
        };
        self.advance(state, None, forcing)
    }

    /// Noisy direct step driven by a registry increment over `eps^2 dt`.
    pub fn step_with_increment(&mut self, state: &SHState, inc: &NoiseIncrement) -> Result<SHState> {
        let slow = self.cfg.eps * self.cfg.eps * self.cfg.delta_t;
        if (inc.delta_slow - slow).abs() > 1e-12 * slow {
            return Err(Error::ClockMismatch(format!(
                "increment spans {} but the SH step covers {slow} on the slow clock",
                inc.delta_slow
            )));
        }
        let asm = self.xi.as_ref().ok_or_else(|| Error::Config("SH run has no noise configured".into()))?;
        let xi = asm.xi_u(inc, self.cfg.eps)?;
        self.step(state, Some(&xi))
    }

    /// Shifted step with `z` the convolution field at the state's time.
    pub fn step_shifted(&mut self, state: &SHState, z: &RealField2D) -> Result<SHState> {
        if self.cfg.mode != Mode::Shifted {
            return Err(Error::Config("shifted step on a direct configuration".into()));
        }
        self.cfg.grid.ensure_matches(&z.grid)?;
        self.advance(state, Some(z), None)
    }
}

/// One direct step with a freshly built solver.
pub fn sh_step(state: &SHState, cfg: &SHConfig, xi_eps: Option<&RealField2D>) -> Result<SHState> {
    SHSolver::new(*cfg)?.step(state, xi_eps)
}

/// One shifted step with a freshly built solver.
pub fn sh_step_shifted(state: &SHState, cfg: &SHConfig, z: &RealField2D) -> Result<SHState> {
    SHSolver::new(*cfg)?.step_shifted(state, z)
}

/// Integrates from `initial_u` for `steps` steps, calling `observe` on every
/// state (and, in shifted runs, the `Z` field at its time).
///
/// Direct noisy runs draw one registry increment of `eps^2 dt` per step.
/// Shifted runs sample `Z` exactly at every step time from an OU state with
/// truncation `ou_truncation`, seeded by the noise seed (0 without noise).
pub fn run_sh_with(
    cfg: &SHConfig,
    initial_u: RealField2D,
    steps: u64,
    mut observe: impl FnMut(&SHState, Option<&RealField2D>) -> Result<()>,
) -> Result<SHState> {
    let mut solver = SHSolver::new(*cfg)?;
    cfg.grid.ensure_matches(&initial_u.grid)?;
    let mut registry = match cfg.mode {
        Mode::Direct => cfg.noise.map(|n| n.registry()),
        Mode::Shifted => None,
    };
    let mut ou = match cfg.mode {
        Mode::Shifted => {
            if cfg.grid.half_len_x != cfg.grid.half_len_y {
                return Err(Error::GridMismatch("shifted runs need a square domain".into()));
            }
            let mut oc = OuConfig::new(cfg.grid.half_len_x, cfg.ou_truncation, cfg.noise.map_or(0, |n| n.seed));
            oc.noise_amplitude = cfg.noise.map_or(0.0, |n| n.amplitude);
            Some((OUState::new(oc), ZFieldEvaluator::new(cfg.grid, cfg.ou_truncation)))
        }
        Mode::Direct => None,
    };
    let mut state = SHState::new(initial_u);
    loop {
        let z = match ou.as_ref() {
            Some((z, eval)) => Some(eval.eval(z)?),
            None => None,
        };
        observe(&state, z.as_ref())?;
        if state.step >= steps {
            return Ok(state);
        }
        state = if let Some((ou_state, _)) = ou.as_mut() {
            let next = solver.step_shifted(&state, z.as_ref().expect("shifted run has Z"))?;
            ou_state.step_exact(cfg.delta_t);
            next
        } else if let Some(reg) = registry.as_mut() {
            let inc = reg.advance(cfg.eps * cfg.eps * cfg.delta_t);
            solver.step_with_increment(&state, &inc)?
        } else {
            solver.step(&state, None)?
        };
    }
}

/// Integrates from `initial_u` and returns states at `snapshots_at` (fast
/// times, multiples of `dt`) in the requested order.
pub fn run_sh(cfg: &SHConfig, initial_u: RealField2D, snapshots_at: &[f64]) -> Result<Vec<SHState>> {
    let targets = snapshots_at.iter().map(|&t| steps_for(t, cfg.delta_t)).collect::<Result<Vec<_>>>()?;
    let last = targets.iter().copied().max().unwrap_or(0);
    let mut out: Vec<Option<SHState>> = vec![None; targets.len()];
    run_sh_with(cfg, initial_u, last, |state, _| {
        for (slot, &n) in out.iter_mut().zip(&targets) {
            if n == state.step {
                *slot = Some(state.clone());
            }
        }
        Ok(())
    })?;
    Ok(out.into_iter().map(|s| s.expect("every target step is visited")).collect())
}
