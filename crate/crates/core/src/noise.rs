//! Brownian mode registry and the discretised noise fields.
//!
//! The registry carries one pair of real Brownian paths `(beta^R, beta^I)`
//! per mode `(k^R, k^I)` with `|k^R| <= m_R`, `|k^I| <= m_I`, indexed by the
//! slow clock `T`. Increments are drawn from a single ChaCha20 stream in the
//! fixed order `k^R` ascending (outer), `k^I` ascending (inner), `R` before
//! `I`. Each variate is `sqrt(delta) * z` with `z` from `rand_distr`'s
//! `StandardNormal` (ziggurat).
//!
//! The amplitude field consumes every mode; the pattern field consumes the
//! half-lattice `k^I >= 0`. Sharing one registry couples both pathwise, with
//! `beta(eps^2 t)` as the fast-clock path.

use std::io::{Read, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::{raw_header, read_f64s, read_raw_header, Grid2D, RealField2D};
use crate::spectral::TrigSum;

const BM_MAGIC: &str = "SHPAT1-BM";

#[derive(Debug, Clone)]
pub struct BrownianRegistry {
    seed: u64,
    m_r: usize,
    m_i: usize,
    slow_time: f64,
    values: Vec<(f64, f64)>,
    rng: ChaCha20Rng,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseIncrement {
    pub m_r: usize,
    pub m_i: usize,
    pub delta_slow: f64,
    /// `(d beta^R, d beta^I)` per mode in registry order.
    pub gaussians: Vec<(f64, f64)>,
}

/// Registry parameters of a noisy run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub m_r: usize,
    pub m_i: usize,
    pub seed: u64,
    /// Multiplier on the noise field; 1 reproduces the unscaled equations.
    pub amplitude: f64,
}

impl NoiseSpec {
    pub fn new(m_r: usize, m_i: usize, seed: u64) -> Self {
        Self { m_r, m_i, seed, amplitude: 1.0 }
    }

    pub fn registry(&self) -> BrownianRegistry {
        BrownianRegistry::new(self.seed, self.m_r, self.m_i)
    }
}

#[inline]
fn mode_count(m_r: usize, m_i: usize) -> usize {
    (2 * m_r + 1) * (2 * m_i + 1)
}

#[inline]
fn slot(m_r: usize, m_i: usize, k_r: i64, k_i: i64) -> usize {
    assert!(
        k_r.unsigned_abs() as usize <= m_r && k_i.unsigned_abs() as usize <= m_i,
        "mode ({k_r}, {k_i}) outside truncation ({m_r}, {m_i})"
    );
    (k_r + m_r as i64) as usize * (2 * m_i + 1) + (k_i + m_i as i64) as usize
}

/// Registry mode order: `k^R` outer ascending, `k^I` inner ascending.
pub fn registry_modes(m_r: usize, m_i: usize) -> impl Iterator<Item = (i64, i64)> {
    let (mr, mi) = (m_r as i64, m_i as i64);
    (-mr..=mr).flat_map(move |kr| (-mi..=mi).map(move |ki| (kr, ki)))
}

impl BrownianRegistry {
    pub fn new(seed: u64, m_r: usize, m_i: usize) -> Self {
        Self {
            seed,
            m_r,
            m_i,
            slow_time: 0.0,
            values: vec![(0.0, 0.0); mode_count(m_r, m_i)],
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn truncation(&self) -> (usize, usize) {
        (self.m_r, self.m_i)
    }

    pub fn slow_time(&self) -> f64 {
        self.slow_time
    }

    pub fn mode_count(&self) -> usize {
        self.values.len()
    }

    /// Current `(beta^R, beta^I)` of mode `(k_r, k_i)`.
    pub fn path(&self, k_r: i64, k_i: i64) -> (f64, f64) {
        self.values[slot(self.m_r, self.m_i, k_r, k_i)]
    }

    /// Draws one `N(0, delta_slow)` pair per mode and advances the slow clock.
    pub fn advance(&mut self, delta_slow: f64) -> NoiseIncrement {
        assert!(delta_slow > 0.0, "advance needs a positive step, got {delta_slow}");
        let sd = delta_slow.sqrt();
        let mut gaussians = Vec::with_capacity(self.values.len());
        for v in &mut self.values {
            let zr: f64 = self.rng.sample(StandardNormal);
            let zi: f64 = self.rng.sample(StandardNormal);
            let d = (sd * zr, sd * zi);
            v.0 += d.0;
            v.1 += d.1;
            gaussians.push(d);
        }
        self.slow_time += delta_slow;
        NoiseIncrement { m_r: self.m_r, m_i: self.m_i, delta_slow, gaussians }
    }

    /// Serialises paths and stream position (`SHPAT1-BM ... state` dump).
    pub fn write_raw(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(&raw_header(BM_MAGIC, &[self.m_r.to_string(), self.m_i.to_string(), "state".into()])?)?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&self.rng.get_word_pos().to_le_bytes())?;
        w.write_all(&self.slow_time.to_le_bytes())?;
        for (a, b) in &self.values {
            w.write_all(&a.to_le_bytes())?;
            w.write_all(&b.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_raw(r: &mut impl Read) -> Result<Self> {
        let (m_r, m_i) = read_bm_header(r, "state")?;
        let mut b8 = [0u8; 8];
        let mut b16 = [0u8; 16];
        r.read_exact(&mut b8)?;
        let seed = u64::from_le_bytes(b8);
        r.read_exact(&mut b16)?;
        let word_pos = u128::from_le_bytes(b16);
        r.read_exact(&mut b8)?;
        let slow_time = f64::from_le_bytes(b8);
        let flat = read_f64s(r, 2 * mode_count(m_r, m_i))?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_word_pos(word_pos);
        Ok(Self {
            seed,
            m_r,
            m_i,
            slow_time,
            values: flat.chunks_exact(2).map(|c| (c[0], c[1])).collect(),
            rng,
        })
    }
}

fn read_bm_header(r: &mut impl Read, kind: &str) -> Result<(usize, usize)> {
    let tokens = read_raw_header(r, BM_MAGIC)?;
    match tokens.as_slice() {
        [mr, mi, k] if k == kind => {
            let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("bad truncation `{s}`")));
            Ok((parse(mr)?, parse(mi)?))
        }
        _ => Err(Error::Format(format!("unexpected Brownian dump header {tokens:?}"))),
    }
}

impl NoiseIncrement {
    pub fn zeros(m_r: usize, m_i: usize, delta_slow: f64) -> Self {
        Self { m_r, m_i, delta_slow, gaussians: vec![(0.0, 0.0); mode_count(m_r, m_i)] }
    }

    pub fn get(&self, k_r: i64, k_i: i64) -> (f64, f64) {
        self.gaussians[slot(self.m_r, self.m_i, k_r, k_i)]
    }

    pub fn set(&mut self, k_r: i64, k_i: i64, v: (f64, f64)) {
        let s = slot(self.m_r, self.m_i, k_r, k_i);
        self.gaussians[s] = v;
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            gaussians: self.gaussians.iter().map(|&(r, i)| (a * r, a * i)).collect(),
            ..self.clone()
        }
    }

    /// Sum of consecutive increments: the increment over the union interval.
    pub fn combine(parts: &[NoiseIncrement]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::Config("no increments to combine".into()))?;
        let mut out = NoiseIncrement::zeros(first.m_r, first.m_i, 0.0);
        for p in parts {
            if (p.m_r, p.m_i) != (first.m_r, first.m_i) {
                return Err(Error::Config("increments with different truncations".into()));
            }
            out.delta_slow += p.delta_slow;
            for (o, g) in out.gaussians.iter_mut().zip(&p.gaussians) {
                o.0 += g.0;
                o.1 += g.1;
            }
        }
        Ok(out)
    }

    pub fn write_raw(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(&raw_header(BM_MAGIC, &[self.m_r.to_string(), self.m_i.to_string(), "inc".into()])?)?;
        w.write_all(&self.delta_slow.to_le_bytes())?;
        for (a, b) in &self.gaussians {
            w.write_all(&a.to_le_bytes())?;
            w.write_all(&b.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_raw(r: &mut impl Read) -> Result<Self> {
        let (m_r, m_i) = read_bm_header(r, "inc")?;
        let delta_slow = read_f64s(r, 1)?[0];
        let flat = read_f64s(r, 2 * mode_count(m_r, m_i))?;
        Ok(Self { m_r, m_i, delta_slow, gaussians: flat.chunks_exact(2).map(|c| (c[0], c[1])).collect() })
    }
}

/// Noise-field assembler with precomputed trigonometric tables for one grid.
#[derive(Debug, Clone)]
pub struct XiAssembler {
    sum: TrigSum,
}

impl XiAssembler {
    pub fn new(grid: Grid2D, m_r: usize, m_i: usize) -> Self {
        Self { sum: TrigSum::new(grid, m_r, m_i) }
    }

    pub fn grid(&self) -> &Grid2D {
        self.sum.grid()
    }

    fn check(&self, inc: &NoiseIncrement) -> Result<()> {
        if (inc.m_r, inc.m_i) != self.sum.truncation() {
            return Err(Error::Config(format!(
                "increment truncation ({}, {}) differs from assembler {:?}",
                inc.m_r,
                inc.m_i,
                self.sum.truncation()
            )));
        }
        Ok(())
    }

    /// `(Xi^R, Xi^I)` for the amplitude equation; `half_len` is the grid's `L`.
    pub fn xi_a(&self, inc: &NoiseIncrement) -> Result<(RealField2D, RealField2D)> {
        self.check(inc)?;
        let grid = *self.grid();
        let c_l = 0.5 / grid.half_len_x;
        let scale = c_l / inc.delta_slow;
        let s = self.sum.eval(|kr, ki| {
            let (a, b) = inc.get(kr, ki);
            Complex64::new(a, b)
        });
        let re = RealField2D { grid, values: s.iter().map(|z| scale * z.re).collect() };
        let im = RealField2D { grid, values: s.iter().map(|z| scale * z.im).collect() };
        Ok((re, im))
    }

    /// `Xi_eps` for the pattern equation on `[-L/eps, L/eps)^2`.
    pub fn xi_u(&self, inc: &NoiseIncrement, eps: f64) -> Result<RealField2D> {
        self.check(inc)?;
        let grid = *self.grid();
        let c_l = 0.5 / (grid.half_len_x * eps);
        let dt_fast = inc.delta_slow / (eps * eps);
        let scale = 2.0 * c_l / dt_fast;
        // half lattice k^I >= 0; Re((a - ib) e^{i theta}) = a cos + b sin
        let s = self.sum.eval(|kr, ki| {
            if ki < 0 {
                return Complex64::new(0.0, 0.0);
            }
            let (a, b) = inc.get(kr, ki);
            Complex64::new(a, -b)
        });
        Ok(RealField2D { grid, values: s.iter().map(|z| scale * z.re).collect() })
    }
}

/// Discretised amplitude-equation noise `(Xi^R, Xi^I)` on `[-L, L)^2`, `C_L = 1/(2L)`.
pub fn assemble_xi_a(inc: &NoiseIncrement, grid: Grid2D, half_len: f64) -> Result<(RealField2D, RealField2D)> {
    grid.ensure_covers(half_len)?;
    XiAssembler::new(grid, inc.m_r, inc.m_i).xi_a(inc)
}

/// Discretised pattern-equation noise `Xi_eps` on `[-L/eps, L/eps)^2`.
///
/// `inc.delta_slow` is `eps^2 dt`; the returned field is divided by the fast
/// step `dt`. The caller applies the extra factor `eps` of the scheme.
pub fn assemble_xi_u(inc: &NoiseIncrement, grid: Grid2D, eps: f64, half_len: f64) -> Result<RealField2D> {
    grid.ensure_covers(half_len / eps)?;
    XiAssembler::new(grid, inc.m_r, inc.m_i).xi_u(inc, eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn hand_increment(m: usize) -> NoiseIncrement {
        let mut inc = NoiseIncrement::zeros(m, m, 0.01);
        for (j, (kr, ki)) in registry_modes(m, m).enumerate() {
            inc.set(kr, ki, (0.1 * (j as f64 + 1.0).sin(), -0.07 * (j as f64 * 1.3).cos()));
        }
        inc
    }

    #[test]
    fn same_seed_same_increments() {
        let mut a = BrownianRegistry::new(7, 3, 2);
        let mut b = BrownianRegistry::new(7, 3, 2);
        for dt in [0.1, 0.01, 0.3] {
            assert_eq!(a.advance(dt), b.advance(dt));
        }
        assert_eq!(a.path(-3, 2), b.path(-3, 2));
        let mut c = BrownianRegistry::new(8, 3, 2);
        assert_ne!(a.advance(0.1), c.advance(0.1));
    }

    #[test]
    fn paths_start_at_zero_and_accumulate() {
        let mut r = BrownianRegistry::new(1, 1, 1);
        assert!(registry_modes(1, 1).all(|(a, b)| r.path(a, b) == (0.0, 0.0)));
        let i1 = r.advance(0.5);
        let i2 = r.advance(0.25);
        assert_eq!(r.slow_time(), 0.75);
        let (a, b) = r.path(1, -1);
        let (x, y) = (i1.get(1, -1), i2.get(1, -1));
        assert_eq!((a, b), (x.0 + y.0, x.1 + y.1));
    }

    #[test]
    fn increment_moments() {
        let mut r = BrownianRegistry::new(2024, 0, 0);
        let n = 50_000;
        let draws: Vec<f64> = (0..n)
            .flat_map(|_| {
                let g = r.advance(0.01).gaussians[0];
                [g.0, g.1]
            })
            .collect();
        let m = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / m;
        assert!(mean.abs() < 3.0 * (0.01 / m).sqrt(), "mean {mean}");
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
        // 99% chi-square band for 10^5 dof: var/sigma^2 within 1 +- 2.576 sqrt(2/dof)
        let band = 2.576 * (2.0 / (m - 1.0)).sqrt();
        assert!((var / 0.01 - 1.0).abs() < band, "var {var}");
    }

    #[test]
    fn registry_state_roundtrip_replays_stream() {
        let mut r = BrownianRegistry::new(99, 2, 1);
        r.advance(0.1);
        r.advance(0.2);
        let mut buf = Vec::new();
        r.write_raw(&mut buf).unwrap();
        assert!(buf.starts_with(b"SHPAT1-BM 2 1 state\n"));
        let mut back = BrownianRegistry::read_raw(&mut buf.as_slice()).unwrap();
        assert_eq!(back.path(1, 0), r.path(1, 0));
        assert_eq!(back.slow_time(), r.slow_time());
        assert_eq!(back.advance(0.05), r.advance(0.05));

        let inc = r.advance(0.01);
        let mut buf = Vec::new();
        inc.write_raw(&mut buf).unwrap();
        assert_eq!(NoiseIncrement::read_raw(&mut buf.as_slice()).unwrap(), inc);
    }

    #[test]
    fn xi_a_single_mode_is_constant() {
        let l = std::f64::consts::FRAC_PI_2;
        let g = Grid2D::square(10, l).unwrap();
        let mut inc = NoiseIncrement::zeros(0, 0, 0.01);
        inc.set(0, 0, (0.3, -0.2));
        let (xr, xi) = assemble_xi_a(&inc, g, l).unwrap();
        let c_l = 1.0 / (2.0 * l);
        assert!(xr.values.iter().all(|v| (v - c_l * 0.3 / 0.01).abs() < 1e-12));
        assert!(xi.values.iter().all(|v| (v - c_l * -0.2 / 0.01).abs() < 1e-12));
    }

    #[test]
    fn xi_a_matches_direct_summation() {
        let l = std::f64::consts::FRAC_PI_2;
        let g = Grid2D::square(12, l).unwrap();
        let inc = hand_increment(1);
        let (xr, xi) = assemble_xi_a(&inc, g, l).unwrap();
        let c_l = 1.0 / (2.0 * l);
        for &(p, q) in &[(0usize, 0usize), (5, 7), (11, 3)] {
            let (x, y) = (g.x(p), g.y(q));
            let (mut r, mut i) = (0.0, 0.0);
            for kr in -1i64..=1 {
                for ki in -1i64..=1 {
                    let (a, b) = inc.get(kr, ki);
                    let th = PI * (kr as f64 * x + ki as f64 * y) / l;
                    r += a * th.cos() - b * th.sin();
                    i += a * th.sin() + b * th.cos();
                }
            }
            assert!((xr.at(p, q) - c_l * r / inc.delta_slow).abs() < 1e-12);
            assert!((xi.at(p, q) - c_l * i / inc.delta_slow).abs() < 1e-12);
        }
    }

    #[test]
    fn xi_u_single_mode_and_zero() {
        let (l, eps) = (std::f64::consts::FRAC_PI_2, 0.25);
        let g = Grid2D::square(8, l / eps).unwrap();
        let dt = 1e-3;
        let mut inc = NoiseIncrement::zeros(0, 0, eps * eps * dt);
        inc.set(0, 0, (0.02, 0.5));
        let f = assemble_xi_u(&inc, g, eps, l).unwrap();
        let c_l = 1.0 / (2.0 * l);
        assert!(f.values.iter().all(|v| (v - 2.0 * c_l * 0.02 / dt).abs() < 1e-10));
        let z = assemble_xi_u(&NoiseIncrement::zeros(2, 2, 1e-4), g, eps, l).unwrap();
        assert!(z.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let g = Grid2D::square(8, 1.0).unwrap();
        let inc = NoiseIncrement::zeros(1, 1, 0.1);
        assert!(matches!(assemble_xi_a(&inc, g, 2.0), Err(Error::GridMismatch(_))));
        assert!(matches!(assemble_xi_u(&inc, g, 0.5, 1.0), Err(Error::GridMismatch(_))));
        assert!(assemble_xi_u(&inc, g, 0.5, 0.5).is_ok());
    }

    #[test]
    fn assembly_is_linear() {
        let l = 1.2;
        let g = Grid2D::square(9, l).unwrap();
        let a = hand_increment(2);
        let mut b = hand_increment(2);
        for g in &mut b.gaussians {
            *g = (g.1 * 3.0, -g.0);
        }
        let sum = NoiseIncrement {
            gaussians: a.gaussians.iter().zip(&b.gaussians).map(|(x, y)| (2.0 * x.0 - y.0, 2.0 * x.1 - y.1)).collect(),
            ..a.clone()
        };
        let (ar, ai) = assemble_xi_a(&a, g, l).unwrap();
        let (br, bi) = assemble_xi_a(&b, g, l).unwrap();
        let (sr, si) = assemble_xi_a(&sum, g, l).unwrap();
        let ua = assemble_xi_u(&a, Grid2D::square(9, l / 0.5).unwrap(), 0.5, l).unwrap();
        let ub = assemble_xi_u(&b, Grid2D::square(9, l / 0.5).unwrap(), 0.5, l).unwrap();
        let us = assemble_xi_u(&sum, Grid2D::square(9, l / 0.5).unwrap(), 0.5, l).unwrap();
        for (s, (x, y)) in [(&sr, (&ar, &br)), (&si, (&ai, &bi)), (&us, (&ua, &ub))] {
            let expect = x.axpby(2.0, y, -1.0).unwrap();
            let scale = expect.max_abs();
            for (u, v) in s.values.iter().zip(&expect.values) {
                assert!((u - v).abs() <= 1e-12 * scale);
            }
        }
        // doubling the increments doubles the fields exactly
        let (dr, _) = assemble_xi_a(&a.scaled(2.0), g, l).unwrap();
        for (u, v) in dr.values.iter().zip(&ar.values) {
            assert_eq!(*u, 2.0 * v);
        }
    }

    #[test]
    fn combine_sums_increments() {
        let mut r = BrownianRegistry::new(5, 1, 1);
        let parts = vec![r.advance(0.1), r.advance(0.1), r.advance(0.2)];
        let total = NoiseIncrement::combine(&parts).unwrap();
        assert!((total.delta_slow - 0.4).abs() < 1e-15);
        let (a, b) = total.get(-1, 1);
        let (pa, pb) = r.path(-1, 1);
        assert!((a - pa).abs() < 1e-15 && (b - pb).abs() < 1e-15);
    }
}
