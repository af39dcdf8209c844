//! Field comparison metrics and energy functionals.

use std::f64::consts::PI;

use crate::error::Result;
use crate::grid::RealField2D;
use crate::spectral::{forward_real, sobolev_lift};

/// `||d - a||_p / max(||a||_p, 1e-30)`.
pub fn approximation_error(u_direct: &RealField2D, u_ansatz: &RealField2D, p: f64) -> Result<f64> {
    let diff = u_direct.axpby(1.0, u_ansatz, -1.0)?;
    Ok(diff.lp_norm(p) / u_ansatz.lp_norm(p).max(1e-30))
}

/// Physical wavenumber `pi k* / L_x` of the strongest non-constant x-mode
/// in the y-summed spectrum (`k` and `-k` pooled).
pub fn dominant_x_wavenumber(u: &RealField2D) -> f64 {
    let g = u.grid;
    assert!(g.n_x >= 4, "dominant_x_wavenumber needs n_x >= 4");
    let c = forward_real(u);
    let kmax = (g.n_x / 2) as i64;
    let mut energy = vec![0.0; kmax as usize + 1];
    for (m, v) in c.iter() {
        energy[m.k.unsigned_abs() as usize] += v.norm_sqr();
    }
    let mut best = 1;
    for k in 2..=kmax as usize {
        if energy[k] > energy[best] {
            best = k;
        }
    }
    PI * best as f64 / g.half_len_x
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyDiagnostics {
    /// `||v||^2_{L^2}`
    pub l2sq: f64,
    /// `||(1 - L_0)^{1/2} v||^2_{L^2}`
    pub w12sq: f64,
    /// `||v||^4_{L^4}`
    pub l4quad: f64,
}

pub fn energy_diagnostics(v: &RealField2D) -> EnergyDiagnostics {
    let n = v.values.len() as f64;
    EnergyDiagnostics {
        l2sq: v.values.iter().map(|x| x * x).sum::<f64>() / n,
        w12sq: sobolev_lift(v, 1.0).values.iter().map(|x| x * x).sum::<f64>() / n,
        l4quad: v.values.iter().map(|x| x.powi(4)).sum::<f64>() / n,
    }
}
