//! Exact mode-wise simulation of the stochastic convolution
//! `Z(t) = sum_{k,l} int_0^t exp((t - s) lambda_{k,l}) e_{k,l} d beta_{k,l}(s)`.
//!
//! Every Fourier mode is an Ornstein-Uhlenbeck process with its own closed
//! form, so the simulation carries no time-discretisation error. Reality is
//! imposed by sampling the half lattice `l > 0` or `(l = 0, k > 0)` plus the
//! real mode `(0, 0)`, and mirroring `Z_{-k,-l} = conj(Z_{k,l})`.
//!
//! Two noise sources are supported:
//!
//! * [`OUState::step_exact`]: independent per-mode ChaCha20 streams (stream id
//!   derived from `(k, l)`), so runs with different truncations share the
//!   paths of their common modes.
//! * [`OUState::step_with_increments`]: driven by the Brownian increments of
//!   a [`BrownianRegistry`](crate::noise::BrownianRegistry) in the same mode
//!   layout as the pattern-equation noise, coupled pathwise through the exact
//!   conditional law of the OU integral given the Brownian increment.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::{Grid2D, RealField2D};
use crate::noise::NoiseIncrement;
use crate::spectral::{d2_symbol, eigenvalue, TrigSum};

/// Below this magnitude an eigenvalue is treated as zero (Brownian limit).
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-12;

/// Itô-isometry variance `int_0^t exp(2 (t - s) lambda) ds`.
pub fn ou_variance(lambda: f64, t: f64) -> f64 {
    if lambda.abs() < ZERO_EIGENVALUE_TOL {
        t
    } else {
        (2.0 * lambda * t).exp_m1() / (2.0 * lambda)
    }
}

/// `int_0^t exp((t - s) lambda) ds`, the covariance of the OU integral with
/// its driving Brownian increment.
fn ou_covariance(lambda: f64, t: f64) -> f64 {
    if lambda.abs() < ZERO_EIGENVALUE_TOL {
        t
    } else {
        (lambda * t).exp_m1() / lambda
    }
}

/// Second moment of each real part of mode `(k, l)` at time `t`.
pub fn ito_variance(k: i64, l: i64, t: f64, eps: f64, half_len: f64) -> f64 {
    assert!(t >= 0.0, "ito_variance needs t >= 0");
    ou_variance(eigenvalue(k, l, eps, half_len), t)
}

/// Where the mode growth rates come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Spectrum {
    /// `lambda_{k,l,eps}` of the continuous operator.
    Continuous,
    /// Symbol of the finite-difference operator `-(1 + d2_x)^2 + d2_y + eps^2`
    /// on the given grid, i.e. the exact semigroup of the semi-discrete problem.
    Grid(Grid2D),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuConfig {
    /// Half-length `L` of the square torus.
    pub half_len: f64,
    pub eps: f64,
    /// Modes with `|k| <= truncation` and `|l| <= truncation`.
    pub truncation: usize,
    pub spectrum: Spectrum,
    /// Multiplies the noise; zero gives the degenerate deterministic process.
    pub noise_amplitude: f64,
    pub seed: u64,
}

impl OuConfig {
    pub fn new(half_len: f64, truncation: usize, seed: u64) -> Self {
        Self { half_len, eps: 1.0, truncation, spectrum: Spectrum::Continuous, noise_amplitude: 1.0, seed }
    }

    pub fn lambda(&self, k: i64, l: i64) -> f64 {
        match self.spectrum {
            Spectrum::Continuous => eigenvalue(k, l, self.eps, self.half_len),
            Spectrum::Grid(g) => {
                let sx = d2_symbol(k, g.n_x, g.dx());
                let sy = d2_symbol(l, g.n_y, g.dy());
                -(1.0 + sx).powi(2) + sy + self.eps * self.eps
            }
        }
    }
}

#[inline]
fn is_sampled(k: i64, l: i64) -> bool {
    l > 0 || (l == 0 && k >= 0)
}

fn stream_id(k: i64, l: i64) -> u64 {
    (((k + (1 << 31)) as u64) << 32) | ((l + (1 << 31)) as u64)
}

#[derive(Debug, Clone)]
pub struct OUState {
    cfg: OuConfig,
    /// `(2m+1)^2` complex values, `l` outer, `k` inner, from `-m`.
    modes: Vec<Complex64>,
    time: f64,
    rngs: Vec<Option<ChaCha20Rng>>,
}

impl OUState {
    pub fn new(cfg: OuConfig) -> Self {
        let m = cfg.truncation as i64;
        let side = (2 * m + 1) as usize;
        let mut rngs = Vec::with_capacity(side * side);
        for l in -m..=m {
            for k in -m..=m {
                rngs.push(is_sampled(k, l).then(|| {
                    let mut r = ChaCha20Rng::seed_from_u64(cfg.seed);
                    r.set_stream(stream_id(k, l));
                    r
                }));
            }
        }
        Self { cfg, modes: vec![Complex64::new(0.0, 0.0); side * side], time: 0.0, rngs }
    }

    pub fn config(&self) -> &OuConfig {
        &self.cfg
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    #[inline]
    fn slot(&self, k: i64, l: i64) -> usize {
        let m = self.cfg.truncation as i64;
        assert!(k.abs() <= m && l.abs() <= m, "mode ({k}, {l}) outside truncation {m}");
        ((l + m) * (2 * m + 1) + (k + m)) as usize
    }

    pub fn mode(&self, k: i64, l: i64) -> Complex64 {
        self.modes[self.slot(k, l)]
    }

    /// Sets `Z_{k,l}` and its mirror `Z_{-k,-l} = conj(Z_{k,l})`.
    pub fn set_mode(&mut self, k: i64, l: i64, z: Complex64) {
        let z = if k == 0 && l == 0 { Complex64::new(z.re, 0.0) } else { z };
        let s = self.slot(k, l);
        self.modes[s] = z;
        let s = self.slot(-k, -l);
        self.modes[s] = z.conj();
    }

    fn sampled_modes(&self) -> Vec<(i64, i64)> {
        let m = self.cfg.truncation as i64;
        (-m..=m).flat_map(|l| (-m..=m).map(move |k| (k, l))).filter(|&(k, l)| is_sampled(k, l)).collect()
    }

    /// Exact distributional step of every mode using the internal streams.
    pub fn step_exact(&mut self, delta: f64) {
        assert!(delta > 0.0, "step needs delta > 0");
        let amp = self.cfg.noise_amplitude;
        for (k, l) in self.sampled_modes() {
            let lambda = self.cfg.lambda(k, l);
            let sd = amp * ou_variance(lambda, delta).sqrt();
            let s = self.slot(k, l);
            let rng = self.rngs[s].as_mut().expect("sampled mode has a stream");
            let zr: f64 = rng.sample(StandardNormal);
            let zi: f64 = if k == 0 && l == 0 { 0.0 } else { rng.sample(StandardNormal) };
            let z = (lambda * delta).exp() * self.modes[s] + Complex64::new(sd * zr, sd * zi);
            self.set_mode(k, l, z);
        }
        self.time += delta;
    }

    /// Exact step driven by registry increments (fast step `delta`).
    ///
    /// The registry mode `(k^R, k^I)`, `k^I >= 0`, forces `e_{k^R,k^I}` with
    /// `d beta` and its mirror with `conj(d beta)`, exactly as in the
    /// pattern-equation noise; on the `k^I = 0` row both `(k, 0)` and
    /// `(-k, 0)` contribute. Given the effective increment `dB`, the OU
    /// integral is `(c/delta) dB + sqrt(rate (v - c^2/delta)) N` with `c`, `v`
    /// the covariance and variance above, which preserves its exact law.
    pub fn step_with_increments(&mut self, delta: f64, inc: &NoiseIncrement) -> Result<()> {
        assert!(delta > 0.0, "step needs delta > 0");
        let m = self.cfg.truncation as i64;
        if inc.m_r as i64 > m || inc.m_i as i64 > m {
            return Err(Error::Config(format!(
                "noise truncation ({}, {}) exceeds OU truncation {m}",
                inc.m_r, inc.m_i
            )));
        }
        let side = (2 * m + 1) as usize;
        let mut drive = vec![Complex64::new(0.0, 0.0); side * side];
        let mut weight = vec![0.0f64; side * side];
        for kr in -(inc.m_r as i64)..=inc.m_r as i64 {
            for ki in 0..=inc.m_i as i64 {
                let (a, b) = inc.get(kr, ki);
                let db = Complex64::new(a, b);
                let s = self.slot(kr, ki);
                drive[s] += db;
                weight[s] += 1.0;
                let s = self.slot(-kr, -ki);
                drive[s] += db.conj();
                weight[s] += 1.0;
            }
        }
        // per-part variance rate of the driver: (count of contributions) * delta_slow / delta
        let base_rate = inc.delta_slow / delta;
        let amp = self.cfg.noise_amplitude;
        for (k, l) in self.sampled_modes() {
            let s = self.slot(k, l);
            let lambda = self.cfg.lambda(k, l);
            let decay = (lambda * delta).exp();
            let (c, v) = (ou_covariance(lambda, delta), ou_variance(lambda, delta));
            let residual = (v - c * c / delta).max(0.0);
            let (db, mut rate) = (drive[s], weight[s] * base_rate);
            let rng = self.rngs[s].as_mut().expect("sampled mode has a stream");
            let zr: f64 = rng.sample(StandardNormal);
            let zi: f64 = rng.sample(StandardNormal);
            if k == 0 && l == 0 {
                // real driver 2 d beta^R: four times the per-part variance
                rate *= 2.0;
            }
            let sd = (rate * residual).sqrt();
            let eta = db * (c / delta) + Complex64::new(sd * zr, sd * zi);
            self.set_mode(k, l, decay * self.modes[s] + amp * eta);
        }
        self.time += delta;
        Ok(())
    }

    /// `||Z||^2_{L^2}` from the modes: `C^2 sum |Z_{k,l}|^2` with `C = 1/(2L)`.
    pub fn weighted_energy(&self) -> f64 {
        let c = 0.5 / self.cfg.half_len;
        c * c * self.modes.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }
}

/// Reusable evaluator of `sum Z_{k,l} e_{k,l}` on one grid.
#[derive(Debug, Clone)]
pub struct ZFieldEvaluator {
    sum: TrigSum,
}

impl ZFieldEvaluator {
    pub fn new(grid: Grid2D, truncation: usize) -> Self {
        Self { sum: TrigSum::new(grid, truncation, truncation) }
    }

    pub fn eval(&self, state: &OUState) -> Result<RealField2D> {
        let (field, residue) = self.eval_with_residue(state)?;
        if residue > 1e-10 {
            return Err(Error::RealityViolation(residue));
        }
        Ok(field)
    }

    /// Real part of the reconstruction and the largest discarded imaginary part.
    pub fn eval_with_residue(&self, state: &OUState) -> Result<(RealField2D, f64)> {
        let grid = *self.sum.grid();
        grid.ensure_covers(state.cfg.half_len)?;
        if self.sum.truncation() != (state.cfg.truncation, state.cfg.truncation) {
            return Err(Error::Config("evaluator truncation differs from the OU state".into()));
        }
        let c = 0.5 / state.cfg.half_len;
        // e_{k,l} carries exp(-i theta_{k,l}) = exp(i theta_{-k,-l})
        let values = self.sum.eval(|k, l| state.mode(-k, -l));
        let residue = values.iter().fold(0.0_f64, |m, z| m.max(z.im.abs())) * c;
        Ok((RealField2D { grid, values: values.iter().map(|z| c * z.re).collect() }, residue))
    }
}

/// Reconstructs `Z = sum Z_{k,l} e_{k,l}` at the barycenters of `grid`.
pub fn z_field(state: &OUState, grid: Grid2D) -> Result<RealField2D> {
    ZFieldEvaluator::new(grid, state.cfg.truncation).eval(state)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub stderr: f64,
}

impl Summary {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        Self { mean, stderr: (var / n).sqrt() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupLpConfig {
    pub ou: OuConfig,
    /// Evaluation grid is `n x n` on `[-L, L)^2`.
    pub grid_n: usize,
    pub step: f64,
    pub horizon: f64,
}

/// Replica `r` uses seed `seed ^ r`.
pub fn replica_seed(seed: u64, replica: u64) -> u64 {
    seed ^ replica
}

/// Monte Carlo estimate of `E sup_{t in step grid of [0, T]} ||Z(t)||_{L^p}`.
pub fn sup_lp_statistic(cfg: &SupLpConfig, p: f64, replicas: usize) -> Result<Summary> {
    if replicas < 2 {
        return Err(Error::Config("sup_lp_statistic needs at least 2 replicas".into()));
    }
    let grid = Grid2D::square(cfg.grid_n, cfg.ou.half_len)?;
    let eval = ZFieldEvaluator::new(grid, cfg.ou.truncation);
    let steps = (cfg.horizon / cfg.step).round() as usize;
    let mut sups = Vec::with_capacity(replicas);
    for r in 0..replicas {
        let mut ou = cfg.ou;
        ou.seed = replica_seed(cfg.ou.seed, r as u64);
        let mut state = OUState::new(ou);
        let mut sup = 0.0_f64;
        for _ in 0..steps {
            state.step_exact(cfg.step);
            sup = sup.max(eval.eval(&state)?.lp_norm(p));
        }
        sups.push(sup);
    }
    Ok(Summary::from_samples(&sups))
}

/// `max_{s != t} ||Z(t) - Z(s)||_{L^p} / |t - s|^alpha` over the snapshots.
pub fn holder_quotient(snapshots: &[(f64, RealField2D)], alpha: f64, p: f64) -> Result<f64> {
    if snapshots.len() < 2 {
        return Err(Error::Config("holder_quotient needs at least 2 snapshots".into()));
    }
    let mut best = 0.0_f64;
    for (i, (t, a)) in snapshots.iter().enumerate() {
        for (s, b) in &snapshots[i + 1..] {
            let dt = (t - s).abs();
            if dt == 0.0 {
                continue;
            }
            let d = a.axpby(1.0, b, -1.0)?.lp_norm(p);
            best = best.max(d / dt.powf(alpha));
        }
    }
    Ok(best)
}
