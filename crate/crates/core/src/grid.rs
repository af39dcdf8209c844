//! Periodic cell-centred grids on `[-half_len_x, half_len_x) x [-half_len_y, half_len_y)`.
//!
//! Values are stored row-major with `q` (the y index) outer and `p` inner, so
//! `values[q * n_x + p]` is the sample at barycenter `(x_p, y_q)`.

use std::io::{Read, Write};
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::BLOW_UP_THRESHOLD;

/// Size in bytes of the ASCII header of a raw field dump.
pub const RAW_HEADER_LEN: usize = 32;
const RAW_MAGIC: &str = "SHPAT1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub n_x: usize,
    pub n_y: usize,
    pub half_len_x: f64,
    pub half_len_y: f64,
}

impl Grid2D {
    pub fn new(n_x: usize, n_y: usize, half_len_x: f64, half_len_y: f64) -> Result<Self> {
        if n_x == 0 || n_y == 0 {
            return Err(Error::Config(format!("grid sizes must be positive, got {n_x}x{n_y}")));
        }
        if !(half_len_x > 0.0 && half_len_y > 0.0) || !half_len_x.is_finite() || !half_len_y.is_finite() {
            return Err(Error::Config(format!(
                "grid half-lengths must be positive and finite, got {half_len_x}, {half_len_y}"
            )));
        }
        Ok(Self { n_x, n_y, half_len_x, half_len_y })
    }

    /// Square grid covering `[-half_len, half_len)^2`.
    pub fn square(n: usize, half_len: f64) -> Result<Self> {
        Self::new(n, n, half_len, half_len)
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        2.0 * self.half_len_x / self.n_x as f64
    }

    #[inline]
    pub fn dy(&self) -> f64 {
        2.0 * self.half_len_y / self.n_y as f64
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n_x * self.n_y
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, p: usize, q: usize) -> usize {
        debug_assert!(p < self.n_x && q < self.n_y);
        q * self.n_x + p
    }

    /// Barycenter x-coordinate of column `p`.
    #[inline]
    pub fn x(&self, p: usize) -> f64 {
        -self.half_len_x + (p as f64 + 0.5) * self.dx()
    }

    /// Barycenter y-coordinate of row `q`.
    #[inline]
    pub fn y(&self, q: usize) -> f64 {
        -self.half_len_y + (q as f64 + 0.5) * self.dy()
    }

    pub fn spacing(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.dx(),
            Axis::Y => self.dy(),
        }
    }

    /// Same cell counts and half-lengths equal to within a few ulps.
    pub fn matches(&self, other: &Grid2D) -> bool {
        self.n_x == other.n_x
            && self.n_y == other.n_y
            && close(self.half_len_x, other.half_len_x)
            && close(self.half_len_y, other.half_len_y)
    }

    pub fn ensure_matches(&self, other: &Grid2D) -> Result<()> {
        if self.matches(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }

    /// Fails unless the grid covers `[-half_len, half_len)^2`.
    pub fn ensure_covers(&self, half_len: f64) -> Result<()> {
        if close(self.half_len_x, half_len) && close(self.half_len_y, half_len) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "grid half-lengths ({}, {}) do not match {half_len}",
                self.half_len_x, self.half_len_y
            )))
        }
    }
}

pub(crate) fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// Mathematical modulus: the result always lies in `0..n`.
#[inline]
pub fn wrap_index(i: i64, n: usize) -> usize {
    assert!(n >= 1, "wrap_index needs a positive period");
    i.rem_euclid(n as i64) as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealField2D {
    pub grid: Grid2D,
    pub values: Vec<f64>,
}

impl RealField2D {
    pub fn zeros(grid: Grid2D) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid2D, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    pub fn from_values(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid.n_x,
                grid.n_y
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(x, y)` at every barycenter.
    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for q in 0..grid.n_y {
            let y = grid.y(q);
            for p in 0..grid.n_x {
                values.push(f(grid.x(p), y));
            }
        }
        Self { grid, values }
    }

    #[inline]
    pub fn at(&self, p: usize, q: usize) -> f64 {
        self.values[self.grid.idx(p, q)]
    }

    /// Value at possibly out-of-range indices, wrapped periodically.
    #[inline]
    pub fn at_wrapped(&self, p: i64, q: i64) -> f64 {
        self.at(wrap_index(p, self.grid.n_x), wrap_index(q, self.grid.n_y))
    }

    #[inline]
    pub fn set(&mut self, p: usize, q: usize, v: f64) {
        let i = self.grid.idx(p, q);
        self.values[i] = v;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    /// `a * self + b * other`.
    pub fn axpby(&self, a: f64, other: &RealField2D, b: f64) -> Result<Self> {
        self.grid.ensure_matches(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(Self { grid: self.grid, values })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.values.len() as f64
    }

    /// Errors unless every value is finite and below the blow-up threshold.
    pub fn check_finite(&self, step: u64, time: f64) -> Result<()> {
        for &v in &self.values {
            if !v.is_finite() || v.abs() > BLOW_UP_THRESHOLD {
                return Err(Error::BlowUp { step, time, value: v.abs() });
            }
        }
        Ok(())
    }

    pub fn to_complex(&self) -> ComplexField2D {
        ComplexField2D {
            grid: self.grid,
            values: self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    /// Second difference along `axis` with periodic wrap.
    pub fn d2(&self, axis: Axis) -> Self {
        d2_axis(self, axis)
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        lp_norm(self, p)
    }

    /// Writes the raw little-endian dump with its 32-byte header.
    pub fn write_raw(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(&raw_header(RAW_MAGIC, &[self.grid.n_x.to_string(), self.grid.n_y.to_string()])?)?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a raw dump and attaches it to `grid`; cell counts must agree.
    pub fn read_raw(r: &mut impl Read, grid: Grid2D) -> Result<Self> {
        let (n_x, n_y, values) = read_raw_values(r)?;
        if n_x != grid.n_x || n_y != grid.n_y {
            return Err(Error::GridMismatch(format!(
                "dump is {n_x}x{n_y}, expected {}x{}",
                grid.n_x, grid.n_y
            )));
        }
        Self::from_values(grid, values)
    }
}

impl Add for &RealField2D {
    type Output = RealField2D;
    fn add(self, rhs: &RealField2D) -> RealField2D {
        assert!(self.grid.matches(&rhs.grid), "grid mismatch in field addition");
        RealField2D {
            grid: self.grid,
            values: self.values.iter().zip(&rhs.values).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &RealField2D {
    type Output = RealField2D;
    fn sub(self, rhs: &RealField2D) -> RealField2D {
        assert!(self.grid.matches(&rhs.grid), "grid mismatch in field subtraction");
        RealField2D {
            grid: self.grid,
            values: self.values.iter().zip(&rhs.values).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul<&RealField2D> for f64 {
    type Output = RealField2D;
    fn mul(self, rhs: &RealField2D) -> RealField2D {
        rhs.scale(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField2D {
    pub grid: Grid2D,
    pub values: Vec<Complex64>,
}

impl ComplexField2D {
    pub fn zeros(grid: Grid2D) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_parts(re: &RealField2D, im: &RealField2D) -> Result<Self> {
        re.grid.ensure_matches(&im.grid)?;
        let values = re.values.iter().zip(&im.values).map(|(&a, &b)| Complex64::new(a, b)).collect();
        Ok(Self { grid: re.grid, values })
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for q in 0..grid.n_y {
            let y = grid.y(q);
            for p in 0..grid.n_x {
                values.push(f(grid.x(p), y));
            }
        }
        Self { grid, values }
    }

    #[inline]
    pub fn at(&self, p: usize, q: usize) -> Complex64 {
        self.values[self.grid.idx(p, q)]
    }

    pub fn re(&self) -> RealField2D {
        RealField2D { grid: self.grid, values: self.values.iter().map(|z| z.re).collect() }
    }

    pub fn im(&self) -> RealField2D {
        RealField2D { grid: self.grid, values: self.values.iter().map(|z| z.im).collect() }
    }

    pub fn max_abs_im(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, z| m.max(z.im.abs()))
    }

    pub fn check_finite(&self, step: u64, time: f64) -> Result<()> {
        for z in &self.values {
            let m = z.norm();
            if !m.is_finite() || m > BLOW_UP_THRESHOLD {
                return Err(Error::BlowUp { step, time, value: m });
            }
        }
        Ok(())
    }

    /// `L^p(nu_2)` norm of the modulus.
    pub fn lp_norm(&self, p: f64) -> f64 {
        lp_norm_iter(self.values.iter().map(|z| z.norm()), self.values.len(), p)
    }
}

/// `g_{p,q} = (f_{p-1,q} + f_{p+1,q} - 2 f_{p,q}) / h^2` along the chosen axis.
pub fn d2_axis(f: &RealField2D, axis: Axis) -> RealField2D {
    let g = f.grid;
    let h = g.spacing(axis);
    let inv_h2 = 1.0 / (h * h);
    let mut out = vec![0.0; g.len()];
    match axis {
        Axis::X => {
            for q in 0..g.n_y {
                let row = &f.values[q * g.n_x..(q + 1) * g.n_x];
                let dst = &mut out[q * g.n_x..(q + 1) * g.n_x];
                for p in 0..g.n_x {
                    let left = row[if p == 0 { g.n_x - 1 } else { p - 1 }];
                    let right = row[if p + 1 == g.n_x { 0 } else { p + 1 }];
                    dst[p] = (left + right - 2.0 * row[p]) * inv_h2;
                }
            }
        }
        Axis::Y => {
            for q in 0..g.n_y {
                let below = if q == 0 { g.n_y - 1 } else { q - 1 };
                let above = if q + 1 == g.n_y { 0 } else { q + 1 };
                for p in 0..g.n_x {
                    out[q * g.n_x + p] = (f.values[below * g.n_x + p] + f.values[above * g.n_x + p]
                        - 2.0 * f.values[q * g.n_x + p])
                        * inv_h2;
                }
            }
        }
    }
    RealField2D { grid: g, values: out }
}

/// Midpoint quadrature of `||f||_{L^p(nu_2)}` with the normalised measure.
pub fn lp_norm(f: &RealField2D, p: f64) -> f64 {
    lp_norm_iter(f.values.iter().map(|v| v.abs()), f.values.len(), p)
}

fn lp_norm_iter(abs_values: impl Iterator<Item = f64>, n: usize, p: f64) -> f64 {
    assert!(p >= 1.0, "lp_norm needs p >= 1, got {p}");
    if n == 0 {
        return 0.0;
    }
    if p == 2.0 {
        return (abs_values.map(|a| a * a).sum::<f64>() / n as f64).sqrt();
    }
    (abs_values.map(|a| a.powf(p)).sum::<f64>() / n as f64).powf(1.0 / p)
}

/// Builds a space-padded 32-byte header `"<magic> <fields...>\n"`.
pub(crate) fn raw_header(magic: &str, fields: &[String]) -> Result<[u8; RAW_HEADER_LEN]> {
    let mut text = String::from(magic);
    for f in fields {
        text.push(' ');
        text.push_str(f);
    }
    text.push('\n');
    if text.len() > RAW_HEADER_LEN {
        return Err(Error::Format(format!("header `{}` exceeds {RAW_HEADER_LEN} bytes", text.trim_end())));
    }
    let mut out = [b' '; RAW_HEADER_LEN];
    out[..text.len()].copy_from_slice(text.as_bytes());
    Ok(out)
}

/// Reads a 32-byte header and returns its whitespace-separated tokens.
pub(crate) fn read_raw_header(r: &mut impl Read, magic: &str) -> Result<Vec<String>> {
    let mut buf = [0u8; RAW_HEADER_LEN];
    r.read_exact(&mut buf)?;
    let text = std::str::from_utf8(&buf).map_err(|_| Error::Format("header is not ASCII".into()))?;
    let mut tokens = text.split_whitespace();
    match tokens.next() {
        Some(m) if m == magic => Ok(tokens.map(str::to_owned).collect()),
        other => Err(Error::Format(format!("expected magic {magic}, found {other:?}"))),
    }
}

pub(crate) fn read_f64s(r: &mut impl Read, count: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)?;
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

/// Reads a raw field dump, returning `(n_x, n_y, values)`.
pub fn read_raw_values(r: &mut impl Read) -> Result<(usize, usize, Vec<f64>)> {
    let tokens = read_raw_header(r, RAW_MAGIC)?;
    let parse = |i: usize| -> Result<usize> {
        tokens
            .get(i)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Format(format!("bad raw header tokens {tokens:?}")))
    };
    let (n_x, n_y) = (parse(0)?, parse(1)?);
    let values = read_f64s(r, n_x * n_y)?;
    Ok((n_x, n_y, values))
}
