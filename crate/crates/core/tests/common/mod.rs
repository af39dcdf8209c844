//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;
use shpattern::grid::{wrap_index, Grid2D, RealField2D};
use shpattern::noise::NoiseIncrement;
use shpattern::ou_process::OUState;

/// Gaussian elimination with partial pivoting.
pub fn dense_lu_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Dense matrix of `a I + b D + c D^2` with `D` the periodic second difference.
pub fn periodic_operator(a: f64, b: f64, c: f64, n: usize, h: f64) -> Vec<Vec<f64>> {
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        d[i][i] -= 2.0 / (h * h);
        d[i][wrap_index(i as i64 - 1, n)] += 1.0 / (h * h);
        d[i][wrap_index(i as i64 + 1, n)] += 1.0 / (h * h);
    }
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let d2: f64 = (0..n).map(|k| d[i][k] * d[k][j]).sum();
            m[i][j] = b * d[i][j] + c * d2 + if i == j { a } else { 0.0 };
        }
    }
    m
}

/// `(1/(eps dt)) sum_{k^I >= 0} [db e_k + conj(db) e_{-k}]` with
/// `e_k = exp(-i pi (k^R x + k^I y) / L_u) / (2 L_u)`, summed in complex
/// arithmetic. Returns the complex field values.
pub fn xi_u_complex_oracle(inc: &NoiseIncrement, grid: Grid2D, eps: f64) -> Vec<Complex64> {
    let lu = grid.half_len_x;
    let dt = inc.delta_slow / (eps * eps);
    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
    for q in 0..grid.n_y {
        for p in 0..grid.n_x {
            let (x, y) = (grid.x(p), grid.y(q));
            let mut acc = Complex64::new(0.0, 0.0);
            for kr in -(inc.m_r as i64)..=inc.m_r as i64 {
                for ki in 0..=inc.m_i as i64 {
                    let (a, b) = inc.get(kr, ki);
                    let db = Complex64::new(a, b);
                    let th = PI * (kr as f64 * x + ki as f64 * y) / lu;
                    let e = Complex64::from_polar(0.5 / lu, -th);
                    acc += db * e + db.conj() * e.conj();
                }
            }
            out[grid.idx(p, q)] = acc / (eps * dt);
        }
    }
    out
}

/// `sum Z_{k,l} e_{k,l}` by direct complex summation.
pub fn z_complex_oracle(state: &OUState, grid: Grid2D) -> Vec<Complex64> {
    let cfg = state.config();
    let m = cfg.truncation as i64;
    let l = cfg.half_len;
    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
    for q in 0..grid.n_y {
        for p in 0..grid.n_x {
            let mut acc = Complex64::new(0.0, 0.0);
            for kk in -m..=m {
                for ll in -m..=m {
                    let th = PI * (kk as f64 * grid.x(p) + ll as f64 * grid.y(q)) / l;
                    acc += state.mode(kk, ll) * Complex64::from_polar(0.5 / l, -th);
                }
            }
            out[grid.idx(p, q)] = acc;
        }
    }
    out
}

pub fn max_abs_diff(a: &RealField2D, b: &RealField2D) -> f64 {
    a.values.iter().zip(&b.values).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}
