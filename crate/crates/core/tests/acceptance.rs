//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.
//!
//! `cargo test --test acceptance` (the test profile is optimised).

mod common;

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shpattern::ansatz::{build_initial_a, build_initial_u, AnsatzMap};
use shpattern::gl_solver::{GLConfig, GLSolver, GLState};
use shpattern::harness::config::Experiment;
use shpattern::harness::{
    decomposition_study, ou_variance_study, replay, run_compare, run_experiment, DecompositionConfig, RunConfig,
};
use shpattern::noise::{BrownianRegistry, XiAssembler};
use shpattern::ou_process::{sup_lp_statistic, OUState, OuConfig, SupLpConfig, ZFieldEvaluator};
use shpattern::sh_solver::{run_sh_with, Mode, SHConfig, SHSolver, SHState};
use shpattern::spectral::{circulant_solve_x, forward_real, galerkin_project_real, inverse};
use shpattern::{Grid2D, RealField2D};

use common::{dense_lu_solve, max_abs_diff, periodic_operator, xi_u_complex_oracle, z_complex_oracle};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gl_fixed_point() -> Outcome {
    let cfg = GLConfig::standard();
    let g = cfg.grid;
    let c = 1.0 / 3f64.sqrt();
    let mut solver = GLSolver::new(cfg).map_err(|e| e.to_string())?;
    let mut st = GLState::new(RealField2D::constant(g, c), RealField2D::zeros(g)).map_err(|e| e.to_string())?;
    let mut drift = 0.0_f64;
    for _ in 0..2000 {
        st = solver.step(&st, None).map_err(|e| e.to_string())?;
        drift = st.a_real.values.iter().chain(&st.a_imag.values).enumerate().fold(drift, |m, (i, v)| {
            let target = if i < g.len() { c } else { 0.0 };
            m.max((v - target).abs())
        });
    }
    check(drift <= 1e-12, format!("max drift {drift:.2e} over 2000 steps"))
}

fn sh_constant_closed_form() -> Outcome {
    let cfg = SHConfig::standard(0.25);
    let g = cfg.grid;
    let (c, e, dt) = (0.3, 0.25, cfg.delta_t);
    let next = SHSolver::new(cfg).and_then(|mut s| s.step(&SHState::new(RealField2D::constant(g, c)), None));
    let next = next.map_err(|e| e.to_string())?;
    let expect = (c + dt * (e * e * c - c * c * c)) / (1.0 + dt);
    let err = next.u.values.iter().fold(0.0_f64, |m, v| m.max((v - expect).abs()));
    let zero = SHSolver::new(cfg)
        .and_then(|mut s| s.step(&SHState::new(RealField2D::zeros(g)), None))
        .map_err(|e| e.to_string())?;
    let zero_ok = zero.u.values.iter().all(|v| *v == 0.0);
    check(err <= 1e-13 && zero_ok, format!("constant error {err:.2e}, zero field exact: {zero_ok}"))
}

/// Eigenvalue of the periodic second difference on mode `k` of `n` cells.
fn stencil_symbol(k: f64, n: usize, h: f64) -> f64 {
    -4.0 * (PI * k / n as f64).sin().powi(2) / (h * h)
}

fn ratios(errs: &[f64]) -> Vec<f64> {
    errs.windows(2).map(|w| w[0] / w[1]).collect()
}

fn imex_first_order() -> Outcome {
    let dts = [4e-3, 2e-3, 1e-3, 5e-4];
    let horizon = 0.2;

    // amplitude equation, mode (1, 1), cubic off
    let g = Grid2D::square(16, FRAC_PI_2).map_err(|e| e.to_string())?;
    let a0 = RealField2D::from_fn(g, |x, y| (PI * x / FRAC_PI_2).cos() * (PI * y / FRAC_PI_2).cos());
    let rate = 1.0 + 4.0 * stencil_symbol(1.0, 16, g.dx()) + stencil_symbol(1.0, 16, g.dy());
    let exact = a0.scale((rate * horizon).exp());
    let mut gl_err = Vec::new();
    for dt in dts {
        let cfg = GLConfig { grid: g, delta_t: dt, noise: None, cubic: false };
        let mut solver = GLSolver::new(cfg).map_err(|e| e.to_string())?;
        let mut st = GLState::new(a0.clone(), RealField2D::zeros(g)).map_err(|e| e.to_string())?;
        for _ in 0..(horizon / dt).round() as u64 {
            st = solver.step(&st, None).map_err(|e| e.to_string())?;
        }
        gl_err.push(max_abs_diff(&st.a_real, &exact));
    }

    // pattern equation on [-L/eps, L/eps)^2, mode (4, 1), cubic off
    let eps = 0.25;
    let lu = FRAC_PI_2 / eps;
    let g = Grid2D::square(32, lu).map_err(|e| e.to_string())?;
    let u0 = RealField2D::from_fn(g, |x, y| (4.0 * PI * x / lu).cos() * (PI * y / lu).sin());
    let sx = stencil_symbol(4.0, 32, g.dx());
    let rate = -(1.0 + sx).powi(2) + stencil_symbol(1.0, 32, g.dy()) + eps * eps;
    let exact = u0.scale((rate * horizon).exp());
    let mut sh_err = Vec::new();
    for dt in dts {
        let cfg = SHConfig {
            grid: g,
            delta_t: dt,
            eps,
            noise: None,
            mode: Mode::Direct,
            cubic: false,
            ou_truncation: 0,
        };
        let mut solver = SHSolver::new(cfg).map_err(|e| e.to_string())?;
        let mut st = SHState::new(u0.clone());
        for _ in 0..(horizon / dt).round() as u64 {
            st = solver.step(&st, None).map_err(|e| e.to_string())?;
        }
        sh_err.push(max_abs_diff(&st.u, &exact));
    }

    let (rg, rs) = (ratios(&gl_err), ratios(&sh_err));
    let ok = rg.iter().chain(&rs).all(|r| (1.8..=2.2).contains(r));
    check(ok, format!("GL ratios {rg:.3?}, SH ratios {rs:.3?}"))
}

fn ito_isometry() -> Outcome {
    // lambda = 0, -4 (closest available to -3), -228
    let rows = ou_variance_study(FRAC_PI_2, 1.0, &[(0, 0), (0, 1), (2, 1)], &[0.1, 1.0], 10_000, 2024)
        .map_err(|e| e.to_string())?;
    let worst = rows.iter().map(|r| r.z_score.abs()).fold(0.0_f64, f64::max);
    let lambdas: Vec<f64> = rows.iter().step_by(2).map(|r| r.lambda).collect();
    check(worst <= 3.0, format!("lambdas {lambdas:?}, worst |z| = {worst:.2}"))
}

fn noise_reality() -> Outcome {
    let eps = 0.25;
    let g = Grid2D::square(40, FRAC_PI_2 / eps).map_err(|e| e.to_string())?;
    let mut reg = BrownianRegistry::new(17, 4, 3);
    let inc = reg.advance(eps * eps * 1e-3);
    let xi = XiAssembler::new(g, 4, 3).xi_u(&inc, eps).map_err(|e| e.to_string())?;
    let oracle = xi_u_complex_oracle(&inc, g, eps);
    let peak = oracle.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    let xi_err = xi.values.iter().zip(&oracle).fold(0.0_f64, |m, (a, z)| m.max((a - z.re).abs().max(z.im.abs())));

    let zg = Grid2D::square(24, FRAC_PI_2).map_err(|e| e.to_string())?;
    let mut st = OUState::new(OuConfig::new(FRAC_PI_2, 5, 3));
    st.step_exact(0.3);
    let (z, residue) = ZFieldEvaluator::new(zg, 5).eval_with_residue(&st).map_err(|e| e.to_string())?;
    let zo = z_complex_oracle(&st, zg);
    let z_err = z.values.iter().zip(&zo).fold(0.0_f64, |m, (a, o)| m.max((a - o.re).abs()));
    let ok = xi_err <= 1e-12 && residue <= 1e-12 && z_err <= 1e-12;
    check(
        ok,
        format!("xi_u vs oracle {xi_err:.2e} (field peak {peak:.1}), Z residue {residue:.2e}, Z vs oracle {z_err:.2e}"),
    )
}

fn spectral_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let g = Grid2D::new(24, 18, 1.3, 0.8).map_err(|e| e.to_string())?;
    let f = RealField2D::from_values(g, (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect())
        .map_err(|e| e.to_string())?;
    let c = forward_real(&f);
    let back = inverse(&c).re();
    let round = max_abs_diff(&back, &f) / f.max_abs();
    let norm2 = f.lp_norm(2.0).powi(2);
    let parseval = (c.weighted_energy() - norm2).abs() / norm2;

    let p1 = galerkin_project_real(&f, 5);
    let p2 = galerkin_project_real(&p1, 5);
    let idem = max_abs_diff(&p1, &p2);
    let contractive = p1.lp_norm(2.0) <= f.lp_norm(2.0) * (1.0 + 1e-12);

    let rows = Grid2D::new(8, 3, 2.0, 1.0).map_err(|e| e.to_string())?;
    let rhs = RealField2D::from_values(rows, (0..rows.len()).map(|_| rng.random_range(-1.0..1.0)).collect())
        .map_err(|e| e.to_string())?;
    let (a, b, cc) = (1.3, 0.02, 0.004);
    let sol = circulant_solve_x(a, b, cc, &rhs).map_err(|e| e.to_string())?;
    let mut lu_err = 0.0_f64;
    for q in 0..rows.n_y {
        let row: Vec<f64> = (0..8).map(|p| rhs.at(p, q)).collect();
        let x = dense_lu_solve(periodic_operator(a, b, cc, 8, rows.dx()), row);
        for (p, v) in x.iter().enumerate() {
            lu_err = lu_err.max((sol.at(p, q) - v).abs());
        }
    }
    let ok = round <= 1e-10 && parseval <= 1e-10 && idem <= 1e-10 && contractive && lu_err <= 1e-10;
    check(
        ok,
        format!(
            "roundtrip {round:.1e}, Parseval {parseval:.1e}, idempotence {idem:.1e}, contractive {contractive}, LU {lu_err:.1e}"
        ),
    )
}

fn sup_lp_truncation() -> Outcome {
    let run = |m: usize| {
        let cfg = SupLpConfig { ou: OuConfig::new(FRAC_PI_2, m, 77), grid_n: 64, step: 0.01, horizon: 1.0 };
        sup_lp_statistic(&cfg, 4.0, 200)
    };
    let a = run(10).map_err(|e| e.to_string())?;
    let b = run(20).map_err(|e| e.to_string())?;
    let change = (b.mean - a.mean).abs() / a.mean;
    let ok = a.mean.is_finite() && b.mean.is_finite() && change < 0.1;
    check(
        ok,
        format!("m=10: {:.4} +- {:.4}, m=20: {:.4} +- {:.4}, change {:.2}%", a.mean, a.stderr, b.mean, b.stderr, 100.0 * change),
    )
}

fn decomposition_consistency() -> Outcome {
    let grid = Grid2D::square(32, FRAC_PI_2).map_err(|e| e.to_string())?;
    let u0 = RealField2D::from_fn(grid, |x, y| 0.5 * (2.0 * x).cos() + 0.2 * (2.0 * y).sin());
    let steps = vec![4e-3, 2e-3, 1e-3, 5e-4];
    let paths = 16;
    let mut sq = vec![0.0; steps.len()];
    for path in 0..paths {
        let cfg = DecompositionConfig {
            grid,
            truncation: 2,
            seed: 1000 + path,
            horizon: 1.0,
            steps: steps.clone(),
            fine_divisions: 4,
        };
        for (acc, (_, e)) in sq.iter_mut().zip(decomposition_study(&cfg, &u0).map_err(|e| e.to_string())?) {
            *acc += e * e;
        }
    }
    let rms: Vec<f64> = sq.iter().map(|s| (s / paths as f64).sqrt()).collect();
    let r = ratios(&rms);
    let shown: Vec<String> = rms.iter().map(|e| format!("{e:.3e}")).collect();
    check(r.iter().all(|x| *x >= 1.5), format!("RMS errors [{}] over {paths} paths, ratios {r:.3?}", shown.join(", ")))
}

fn pattern_comparison() -> Outcome {
    let mut results = Vec::new();
    for eps in [0.25, 0.125] {
        let mut cfg = RunConfig::defaults(Experiment::Compare);
        cfg.eps = eps;
        cfg.noise = false;
        cfg.snapshots = vec![0.2];
        let rep = run_compare(&cfg).map_err(|e| e.to_string())?;
        let row = rep.rows.last().ok_or("no compare rows")?.clone();
        results.push((eps, row.k_direct, row.k_ansatz, row.rel_l2));
    }
    let wave_ok = results.iter().all(|&(_, kd, ka, _)| (kd - 1.0).abs() <= 0.5 && (ka - 1.0).abs() <= 0.5);
    let err_ok = results[0].3 <= 0.25 && results[1].3 < results[0].3;
    let detail = results
        .iter()
        .map(|(e, kd, ka, rel)| format!("eps={e}: k_direct {kd}, k_ansatz {ka}, rel L2 {rel:.3e}"))
        .collect::<Vec<_>>()
        .join("; ");
    check(wave_ok && err_ok, detail)
}

fn energy_tripwires() -> Outcome {
    let cfg = SHConfig::standard(0.25);
    let mut prev = f64::INFINITY;
    let mut monotone = true;
    run_sh_with(&cfg, RealField2D::constant(cfg.grid, 10.0), 100, |s, _| {
        let n = s.u.lp_norm(2.0);
        monotone &= n < prev;
        prev = n;
        Ok(())
    })
    .map_err(|e| e.to_string())?;

    let mut noisy = cfg;
    noisy.noise = Some(shpattern::noise::NoiseSpec::new(10, 10, 3));
    let map = AnsatzMap::for_amplitude_grid(0.25, Grid2D::square(100, FRAC_PI_2).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let a0 = build_initial_a(map.a_grid);
    let u0 = build_initial_u((&a0.0, &a0.1), &map).map_err(|e| e.to_string())?;
    let bound = 10.0 * u0.lp_norm(2.0).max(1.0);
    let mut peak = 0.0_f64;
    let run = run_sh_with(&noisy, u0, 3200, |s, _| {
        peak = peak.max(s.u.lp_norm(2.0));
        Ok(())
    });
    let ok = monotone && run.is_ok() && peak <= bound;
    let detail = match run {
        Ok(_) => format!("decay from 10 monotone: {monotone}; noisy peak L2 {peak:.3} (bound {bound:.3})"),
        Err(e) => format!("decay from 10 monotone: {monotone}; noisy run failed: {e}"),
    };
    check(ok, detail)
}

fn replay_matches(cfg: &RunConfig, scratch: &Path, label: &str) -> Result<usize, String> {
    run_experiment(cfg).map_err(|e| format!("{label}: {e}"))?;
    let r = replay(&cfg.out, &scratch.join(format!("{label}_replay"))).map_err(|e| format!("{label}: {e}"))?;
    if r.is_bitwise() {
        Ok(r.matched.len())
    } else {
        Err(format!("{label}: {} mismatched, {} missing, {} extra", r.mismatched.len(), r.missing.len(), r.extra.len()))
    }
}

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path();
    let mut files = 0;

    let mut compare = RunConfig::defaults(Experiment::Compare);
    compare.out = root.join("compare");
    files += replay_matches(&compare, root, "compare")?;

    let mut gl = RunConfig::defaults(Experiment::SimulateGl);
    (gl.n_x, gl.n_y, gl.m_r, gl.m_i) = (32, 32, 3, 3);
    gl.snapshots = vec![0.0, 0.01];
    gl.out = root.join("gl");
    files += replay_matches(&gl, root, "simulate_gl")?;

    let mut sh = RunConfig::defaults(Experiment::SimulateSh);
    (sh.n_x, sh.n_y, sh.m_r, sh.m_i) = (32, 32, 3, 3);
    sh.snapshots = vec![0.0, 0.05];
    sh.out = root.join("sh");
    files += replay_matches(&sh, root, "simulate_sh")?;

    let mut shifted = sh.clone();
    shifted.mode = Mode::Shifted;
    shifted.eps = 1.0;
    shifted.ou_truncation = 3;
    shifted.out = root.join("shifted");
    files += replay_matches(&shifted, root, "simulate_sh_shifted")?;

    let mut ou = RunConfig::defaults(Experiment::OuStats);
    ou.replicas = 200;
    ou.out = root.join("ou");
    files += replay_matches(&ou, root, "ou_stats")?;

    let mut conv = RunConfig::defaults(Experiment::Convert);
    (conv.n_x, conv.n_y) = (32, 32);
    conv.a_real = Some(root.join("gl/snap_T_0.01_AR.raw"));
    conv.a_imag = Some(root.join("gl/snap_T_0.01_AI.raw"));
    conv.out = root.join("convert");
    files += replay_matches(&conv, root, "convert")?;

    Ok(format!("6 runs (compare at default settings with noise, simulate-gl, simulate-sh direct and shifted, ou-stats, convert), {files} files reproduced bitwise"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("amplitude scheme fixed point", gl_fixed_point),
        ("pattern scheme constant closed form", sh_constant_closed_form),
        ("IMEX first-order consistency", imex_first_order),
        ("Ito isometry of the exact OU step", ito_isometry),
        ("noise reality", noise_reality),
        ("spectral identities", spectral_identities),
        ("sup-L4 statistic stable under truncation doubling", sup_lp_truncation),
        ("decomposition consistency", decomposition_consistency),
        ("pattern-formation comparison", pattern_comparison),
        ("energy tripwires", energy_tripwires),
        ("reproducibility from manifests", reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = f();
        let secs = start.elapsed().as_secs_f64();
        match out {
            Ok(d) => println!("PASS {:>2} {name}: {d} [{secs:.1} s]", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {d} [{secs:.1} s]", i + 1)
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
