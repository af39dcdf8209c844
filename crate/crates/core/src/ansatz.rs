//! Amplitude-to-pattern map `u = eps A e^{ix} + c.c.` and the step initial data.
//!
//! The amplitude grid lives on `[-L, L)^2` and the pattern grid on
//! `[-L/eps, L/eps)^2` with the same cell counts, so barycenters correspond
//! one to one through `X = eps x`.

use crate::error::{Error, Result};
use crate::grid::{Grid2D, RealField2D};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnsatzMap {
    pub eps: f64,
    pub a_grid: Grid2D,
    pub u_grid: Grid2D,
}

impl AnsatzMap {
    /// Checks the matching-resolution requirement.
    pub fn new(eps: f64, a_grid: Grid2D, u_grid: Grid2D) -> Result<Self> {
        let map = Self { eps, a_grid, u_grid };
        map.validate()?;
        Ok(map)
    }

    /// Pattern grid matching `a_grid` at scale `eps`.
    pub fn for_amplitude_grid(eps: f64, a_grid: Grid2D) -> Result<Self> {
        let u_grid = Grid2D::new(a_grid.n_x, a_grid.n_y, a_grid.half_len_x / eps, a_grid.half_len_y / eps)?;
        Self::new(eps, a_grid, u_grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::Config(format!("eps = {} must lie in (0, 1]", self.eps)));
        }
        let (a, u) = (&self.a_grid, &self.u_grid);
        let scaled = Grid2D { half_len_x: u.half_len_x * self.eps, half_len_y: u.half_len_y * self.eps, ..*u };
        if !a.matches(&scaled) {
            return Err(Error::GridMismatch(format!(
                "amplitude grid {}x{} on L = ({}, {}) does not match pattern grid {}x{} on ({}, {}) at eps = {}",
                a.n_x, a.n_y, a.half_len_x, a.half_len_y, u.n_x, u.n_y, u.half_len_x, u.half_len_y, self.eps
            )));
        }
        Ok(())
    }
}

/// `u(x, y) = 2 eps (A^R cos x - A^I sin x)` at the pattern-grid barycenters.
pub fn ansatz_to_u(a_real: &RealField2D, a_imag: &RealField2D, map: &AnsatzMap) -> Result<RealField2D> {
    map.validate()?;
    map.a_grid.ensure_matches(&a_real.grid)?;
    map.a_grid.ensure_matches(&a_imag.grid)?;
    let g = map.u_grid;
    let (c, s): (Vec<f64>, Vec<f64>) = (0..g.n_x).map(|p| (g.x(p).cos(), g.x(p).sin())).unzip();
    let two_eps = 2.0 * map.eps;
    let mut values = Vec::with_capacity(g.len());
    for q in 0..g.n_y {
        for p in 0..g.n_x {
            let j = g.idx(p, q);
            values.push(two_eps * (a_real.values[j] * c[p] - a_imag.values[j] * s[p]));
        }
    }
    Ok(RealField2D { grid: g, values })
}

/// Step data: `(A^R, A^I) = (1, 0)` on the lower half `Y < 0`, `(0, 1)` above.
pub fn build_initial_a(a_grid: Grid2D) -> (RealField2D, RealField2D) {
    let lower = |y: f64| y < 0.0;
    (
        RealField2D::from_fn(a_grid, |_, y| if lower(y) { 1.0 } else { 0.0 }),
        RealField2D::from_fn(a_grid, |_, y| if lower(y) { 0.0 } else { 1.0 }),
    )
}

/// Pattern initial data: the ansatz applied to `a0`.
pub fn build_initial_u(a0: (&RealField2D, &RealField2D), map: &AnsatzMap) -> Result<RealField2D> {
    ansatz_to_u(a0.0, a0.1, map)
}
