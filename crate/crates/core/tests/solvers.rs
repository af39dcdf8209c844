use std::f64::consts::FRAC_PI_2;

use shpattern::ansatz::{build_initial_a, build_initial_u};
use shpattern::gl_solver::{run_gl, run_gl_with, GLConfig};
use shpattern::harness::config::Experiment;
use shpattern::harness::{run_compare, RunConfig};
use shpattern::sh_solver::{run_sh, run_sh_with, SHConfig};
use shpattern::{Grid2D, RealField2D};

#[test]
fn noiseless_compare_matches_standalone_runs() {
    let mut cfg = RunConfig::defaults(Experiment::Compare);
    (cfg.n_x, cfg.n_y) = (32, 32);
    cfg.noise = false;
    cfg.snapshots = vec![0.0, 0.02, 0.05];
    let rep = run_compare(&cfg).unwrap();

    let gl = run_gl(&cfg.gl_config().unwrap(), build_initial_a(cfg.amplitude_grid().unwrap()), &cfg.snapshots).unwrap();
    let map = cfg.ansatz_map().unwrap();
    let a0 = build_initial_a(map.a_grid);
    let u0 = build_initial_u((&a0.0, &a0.1), &map).unwrap();
    let fast: Vec<f64> = cfg.snapshots.iter().map(|t| t / (cfg.eps * cfg.eps)).collect();
    let sh = run_sh(&cfg.sh_config(rep.delta_fast).unwrap(), u0, &fast).unwrap();

    assert_eq!(rep.snapshots.len(), 3);
    for ((snap, g), s) in rep.snapshots.iter().zip(&gl).zip(&sh) {
        assert_eq!(snap.gl.a_real, g.a_real);
        assert_eq!(snap.gl.a_imag, g.a_imag);
        assert_eq!(snap.sh.u, s.u);
    }
}

#[test]
fn amplitude_stays_bounded_from_step_data() {
    let cfg = GLConfig::standard();
    let mut peak = 0.0_f64;
    run_gl_with(&cfg, build_initial_a(cfg.grid), 2000, |s| {
        peak = peak.max(s.max_modulus());
        Ok(())
    })
    .unwrap();
    assert!(peak <= 2.0, "max |A| = {peak}");
}

#[test]
fn deterministic_pattern_run_stays_bounded() {
    let cfg = SHConfig::standard(0.25);
    let u0 = RealField2D::from_fn(cfg.grid, |x, y| 0.6 * x.cos() + 0.3 * (0.5 * y).sin());
    let start = u0.lp_norm(2.0);
    let mut peak = 0.0_f64;
    run_sh_with(&cfg, u0, 3200, |s, _| {
        peak = peak.max(s.u.lp_norm(2.0));
        Ok(())
    })
    .unwrap();
    assert!(peak <= start.max(1.0) * 10.0, "peak {peak}");
}

#[test]
fn amplitude_grid_and_pattern_grid_align() {
    let cfg = RunConfig::defaults(Experiment::Compare);
    let map = cfg.ansatz_map().unwrap();
    assert!(map.a_grid.matches(&Grid2D::square(100, FRAC_PI_2).unwrap()));
    assert!(map.u_grid.matches(&Grid2D::square(100, FRAC_PI_2 / 0.25).unwrap()));
}
