//! Fourier-side machinery on the periodic grid.
//!
//! Normalisation. With `L_x, L_y` the grid half-lengths and
//! `C = 1 / (2 sqrt(L_x L_y))` (the `1/(2L)` of the square torus), the basis is
//!
//! ```text
//! e_{k,l}(x, y) = C exp(-i pi (k x / L_x + l y / L_y))
//! ```
//!
//! [`forward`] returns `c_{k,l} = (f, e_{k,l})` under the normalised measure,
//! evaluated by midpoint quadrature at the barycenters. [`inverse`] evaluates
//! `f = (1/C^2) sum c_{k,l} e_{k,l}`, so `inverse(forward(f)) = f` and
//!
//! ```text
//! ||f||^2_{L^2(nu_2)} = w * sum |c_{k,l}|^2,   w = 1 / C^2 = 4 L_x L_y.
//! ```
//!
//! Resolved indices are `k in -floor(n_x/2) ..= ceil(n_x/2) - 1`, likewise `l`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{wrap_index, ComplexField2D, Grid2D, RealField2D};

/// `lambda_{k,l,eps} = -((1 - (pi/L)^2 k^2)^2 + (pi/L)^2 l^2 - eps^2)`.
pub fn eigenvalue(k: i64, l: i64, eps: f64, half_len: f64) -> f64 {
    let w = (PI / half_len).powi(2);
    let kk = k as f64 * k as f64;
    let ll = l as f64 * l as f64;
    -((1.0 - w * kk).powi(2) + w * ll - eps * eps)
}

/// Symbol of `1 - L_0` at mode `(k, l)` on `grid`; always `>= 1`.
pub fn sobolev_symbol(k: i64, l: i64, grid: &Grid2D) -> f64 {
    let wx = (PI / grid.half_len_x).powi(2);
    let wy = (PI / grid.half_len_y).powi(2);
    let kk = k as f64 * k as f64;
    let ll = l as f64 * l as f64;
    (1.0 - wx * kk).powi(2) + wy * ll + 1.0
}

/// Eigenvalue of the periodic second-difference stencil on mode `k` of `n` cells.
#[inline]
pub fn d2_symbol(k: i64, n: usize, h: f64) -> f64 {
    2.0 * ((2.0 * PI * k as f64 / n as f64).cos() - 1.0) / (h * h)
}

pub fn basis_constant(grid: &Grid2D) -> f64 {
    0.5 / (grid.half_len_x * grid.half_len_y).sqrt()
}

/// Weight `w` in `||f||^2 = w sum |c|^2`.
pub fn parseval_weight(grid: &Grid2D) -> f64 {
    4.0 * grid.half_len_x * grid.half_len_y
}

#[inline]
pub fn k_min(n: usize) -> i64 {
    -((n / 2) as i64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModeIndex {
    pub k: i64,
    pub l: i64,
}

impl ModeIndex {
    pub fn new(k: i64, l: i64) -> Self {
        Self { k, l }
    }

    pub fn l1(&self) -> i64 {
        self.k.abs() + self.l.abs()
    }

    pub fn resolved_on(&self, grid: &Grid2D) -> bool {
        let kx = k_min(grid.n_x);
        let ky = k_min(grid.n_y);
        (kx..kx + grid.n_x as i64).contains(&self.k) && (ky..ky + grid.n_y as i64).contains(&self.l)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoeffs {
    pub grid: Grid2D,
    /// `l` outer, `k` inner, both ascending from `k_min`.
    pub coeffs: Vec<Complex64>,
}

impl SpectralCoeffs {
    pub fn zeros(grid: Grid2D) -> Self {
        Self { grid, coeffs: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    #[inline]
    fn slot(&self, m: ModeIndex) -> usize {
        assert!(m.resolved_on(&self.grid), "mode {m:?} not resolved on grid");
        let i = (m.k - k_min(self.grid.n_x)) as usize;
        let j = (m.l - k_min(self.grid.n_y)) as usize;
        j * self.grid.n_x + i
    }

    pub fn get(&self, k: i64, l: i64) -> Complex64 {
        self.coeffs[self.slot(ModeIndex::new(k, l))]
    }

    pub fn set(&mut self, k: i64, l: i64, c: Complex64) {
        let s = self.slot(ModeIndex::new(k, l));
        self.coeffs[s] = c;
    }

    /// All resolved modes in storage order.
    pub fn modes(&self) -> impl Iterator<Item = ModeIndex> {
        let (nx, ny) = (self.grid.n_x as i64, self.grid.n_y as i64);
        let (kx, ky) = (k_min(self.grid.n_x), k_min(self.grid.n_y));
        (ky..ky + ny).flat_map(move |l| (kx..kx + nx).map(move |k| ModeIndex::new(k, l)))
    }

    pub fn iter(&self) -> impl Iterator<Item = (ModeIndex, Complex64)> + '_ {
        self.modes().zip(self.coeffs.iter().copied())
    }

    /// Multiplies every coefficient by `m(k, l)`.
    pub fn apply_multiplier(&mut self, m: impl Fn(i64, i64) -> f64) {
        let modes: Vec<_> = self.modes().collect();
        for (c, mi) in self.coeffs.iter_mut().zip(modes) {
            *c *= m(mi.k, mi.l);
        }
    }

    /// `w * sum |c|^2`, equal to `||f||^2_{L^2}` of the represented field.
    pub fn weighted_energy(&self) -> f64 {
        parseval_weight(&self.grid) * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }
}

struct Plans {
    x_fwd: Arc<dyn Fft<f64>>,
    x_inv: Arc<dyn Fft<f64>>,
    y_fwd: Arc<dyn Fft<f64>>,
    y_inv: Arc<dyn Fft<f64>>,
}

impl Plans {
    fn new(grid: &Grid2D) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            x_fwd: planner.plan_fft_forward(grid.n_x),
            x_inv: planner.plan_fft_inverse(grid.n_x),
            y_fwd: planner.plan_fft_forward(grid.n_y),
            y_inv: planner.plan_fft_inverse(grid.n_y),
        }
    }
}

/// Applies a 1D transform along x (rows) then along y (columns), in place.
fn transform_2d(data: &mut [Complex64], grid: &Grid2D, fx: &dyn Fft<f64>, fy: &dyn Fft<f64>) {
    let (nx, ny) = (grid.n_x, grid.n_y);
    for row in data.chunks_exact_mut(nx) {
        fx.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); ny];
    for p in 0..nx {
        for q in 0..ny {
            col[q] = data[q * nx + p];
        }
        fy.process(&mut col);
        for q in 0..ny {
            data[q * nx + p] = col[q];
        }
    }
}

/// `exp(i pi k (1/n - 1))`, the barycenter phase offset of mode `k`.
#[inline]
fn phase(k: i64, n: usize) -> Complex64 {
    Complex64::from_polar(1.0, PI * k as f64 * (1.0 / n as f64 - 1.0))
}

pub fn forward(f: &ComplexField2D) -> SpectralCoeffs {
    let grid = f.grid;
    let plans = Plans::new(&grid);
    let mut data = f.values.clone();
    // sum_p f_p exp(+2 pi i k p / n): the unnormalised inverse DFT
    transform_2d(&mut data, &grid, plans.x_inv.as_ref(), plans.y_inv.as_ref());
    let scale = basis_constant(&grid) / grid.len() as f64;
    let mut out = SpectralCoeffs::zeros(grid);
    let modes: Vec<_> = out.modes().collect();
    for (slot, m) in modes.into_iter().enumerate() {
        let src = data[wrap_index(m.l, grid.n_y) * grid.n_x + wrap_index(m.k, grid.n_x)];
        out.coeffs[slot] = src * phase(m.k, grid.n_x) * phase(m.l, grid.n_y) * scale;
    }
    out
}

pub fn forward_real(f: &RealField2D) -> SpectralCoeffs {
    forward(&f.to_complex())
}

pub fn inverse(c: &SpectralCoeffs) -> ComplexField2D {
    let grid = c.grid;
    let plans = Plans::new(&grid);
    let mut data = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (m, v) in c.iter() {
        data[wrap_index(m.l, grid.n_y) * grid.n_x + wrap_index(m.k, grid.n_x)] =
            v * (phase(m.k, grid.n_x) * phase(m.l, grid.n_y)).conj();
    }
    transform_2d(&mut data, &grid, plans.x_fwd.as_ref(), plans.y_fwd.as_ref());
    let scale = 1.0 / basis_constant(&grid);
    for z in &mut data {
        *z *= scale;
    }
    ComplexField2D { grid, values: data }
}

/// Zeroes every coefficient with `|k| + |l| > n`.
pub fn galerkin_project(f: &ComplexField2D, n: u64) -> ComplexField2D {
    let mut c = forward(f);
    let n = n as i64;
    c.apply_multiplier(|k, l| if k.abs() + l.abs() <= n { 1.0 } else { 0.0 });
    inverse(&c)
}

pub fn galerkin_project_real(f: &RealField2D, n: u64) -> RealField2D {
    galerkin_project(&f.to_complex(), n).re()
}

/// `(1 - L_0)^{s/2} f`, real part.
pub fn sobolev_lift(f: &RealField2D, s: f64) -> RealField2D {
    let mut c = forward_real(f);
    let grid = f.grid;
    c.apply_multiplier(|k, l| sobolev_symbol(k, l, &grid).powf(0.5 * s));
    inverse(&c).re()
}

/// `||(1 - L_0)^{s/2} f||_{L^p(nu_2)}`.
pub fn sobolev_norm(f: &RealField2D, s: f64, p: f64) -> f64 {
    assert!(p >= 1.0, "sobolev_norm needs p >= 1");
    if s == 0.0 {
        return f.lp_norm(p);
    }
    sobolev_lift(f, s).lp_norm(p)
}

/// Separable evaluation of truncated trigonometric sums
/// `S(x, y) = sum_{|k| <= m_x, |l| <= m_y} w_{k,l} exp(i pi (k x / L_x + l y / L_y))`
/// at every barycenter, in `O((m_x m_y + m_x n_x) n_y)` work.
#[derive(Debug, Clone)]
pub struct TrigSum {
    grid: Grid2D,
    m_x: usize,
    m_y: usize,
    ex: Vec<Complex64>,
    ey: Vec<Complex64>,
}

impl TrigSum {
    pub fn new(grid: Grid2D, m_x: usize, m_y: usize) -> Self {
        let mut ex = Vec::with_capacity((2 * m_x + 1) * grid.n_x);
        for k in -(m_x as i64)..=m_x as i64 {
            for p in 0..grid.n_x {
                ex.push(Complex64::from_polar(1.0, PI * k as f64 * grid.x(p) / grid.half_len_x));
            }
        }
        let mut ey = Vec::with_capacity((2 * m_y + 1) * grid.n_y);
        for l in -(m_y as i64)..=m_y as i64 {
            for q in 0..grid.n_y {
                ey.push(Complex64::from_polar(1.0, PI * l as f64 * grid.y(q) / grid.half_len_y));
            }
        }
        Self { grid, m_x, m_y, ex, ey }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn truncation(&self) -> (usize, usize) {
        (self.m_x, self.m_y)
    }

    /// Evaluates the sum; `weight` is queried once per mode.
    pub fn eval(&self, weight: impl Fn(i64, i64) -> Complex64) -> Vec<Complex64> {
        let (nx, ny) = (self.grid.n_x, self.grid.n_y);
        let (mx, my) = (self.m_x as i64, self.m_y as i64);
        let n_k = (2 * mx + 1) as usize;
        let n_l = (2 * my + 1) as usize;
        let weights: Vec<Complex64> =
            (-mx..=mx).flat_map(|k| (-my..=my).map(move |l| (k, l))).map(|(k, l)| weight(k, l)).collect();
        let mut out = vec![Complex64::new(0.0, 0.0); nx * ny];
        let mut g = vec![Complex64::new(0.0, 0.0); n_k];
        for q in 0..ny {
            for (ik, gk) in g.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for il in 0..n_l {
                    let w = weights[ik * n_l + il];
                    if w != Complex64::new(0.0, 0.0) {
                        acc += w * self.ey[il * ny + q];
                    }
                }
                *gk = acc;
            }
            let row = &mut out[q * nx..(q + 1) * nx];
            for (ik, gk) in g.iter().enumerate() {
                let ex = &self.ex[ik * nx..(ik + 1) * nx];
                for (o, e) in row.iter_mut().zip(ex) {
                    *o += gk * e;
                }
            }
        }
        out
    }
}

/// Row-wise solver for `(a I + b d2_x + c d2_x^2) v = rhs` on a periodic grid.
///
/// The operator is circulant in x, so it is diagonalised by the x-DFT. Two
/// real rows are packed into one complex transform; the symbol is real and
/// even, so the rows stay decoupled.
pub struct CirculantSolver {
    n: usize,
    inv_symbol: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for CirculantSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantSolver").field("n", &self.n).finish()
    }
}

impl CirculantSolver {
    pub fn new(a: f64, b: f64, c: f64, n: usize, dx: f64) -> Result<Self> {
        let symbol: Vec<f64> = (0..n)
            .map(|k| {
                let s = d2_symbol(k as i64, n, dx);
                a + b * s + c * s * s
            })
            .collect();
        let max = symbol.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
        for (mode, s) in symbol.iter().enumerate() {
            if !(s.abs() >= 1e-14 * max) || max == 0.0 {
                return Err(Error::SingularOperator { mode, magnitude: s.abs(), max });
            }
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            inv_symbol: symbol.iter().map(|s| 1.0 / (s * n as f64)).collect(),
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            scratch: vec![Complex64::new(0.0, 0.0); n],
        })
    }

    pub fn for_grid(a: f64, b: f64, c: f64, grid: &Grid2D) -> Result<Self> {
        Self::new(a, b, c, grid.n_x, grid.dx())
    }

    /// Solves in place, row by row.
    pub fn solve_in_place(&mut self, values: &mut [f64]) {
        let n = self.n;
        assert_eq!(values.len() % n, 0, "field length is not a multiple of the row length");
        let mut rows = values.chunks_exact_mut(n);
        loop {
            match (rows.next(), rows.next()) {
                (Some(r1), Some(r2)) => {
                    for i in 0..n {
                        self.scratch[i] = Complex64::new(r1[i], r2[i]);
                    }
                    self.apply();
                    for i in 0..n {
                        r1[i] = self.scratch[i].re;
                        r2[i] = self.scratch[i].im;
                    }
                }
                (Some(r1), None) => {
                    for i in 0..n {
                        self.scratch[i] = Complex64::new(r1[i], 0.0);
                    }
                    self.apply();
                    for i in 0..n {
                        r1[i] = self.scratch[i].re;
                    }
                    break;
                }
                _ => break,
            }
        }
    }

    fn apply(&mut self) {
        self.fwd.process(&mut self.scratch);
        for (z, s) in self.scratch.iter_mut().zip(&self.inv_symbol) {
            *z *= *s;
        }
        self.inv.process(&mut self.scratch);
    }

    pub fn solve(&mut self, rhs: &RealField2D) -> Result<RealField2D> {
        if rhs.grid.n_x != self.n {
            return Err(Error::GridMismatch(format!(
                "solver built for rows of {} cells, field has {}",
                self.n, rhs.grid.n_x
            )));
        }
        let mut out = rhs.clone();
        self.solve_in_place(&mut out.values);
        Ok(out)
    }
}

/// One-shot form of [`CirculantSolver`].
pub fn circulant_solve_x(a: f64, b: f64, c: f64, rhs: &RealField2D) -> Result<RealField2D> {
    CirculantSolver::for_grid(a, b, c, &rhs.grid)?.solve(rhs)
}
