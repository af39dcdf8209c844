use std::f64::consts::FRAC_PI_2;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use shpattern::ou_process::{
    holder_quotient, ito_variance, replica_seed, sup_lp_statistic, OUState, OuConfig, SupLpConfig, ZFieldEvaluator,
};
use shpattern::Grid2D;

#[test]
fn common_modes_share_paths_across_truncations() {
    let mut small = OUState::new(OuConfig::new(FRAC_PI_2, 3, 11));
    let mut large = OUState::new(OuConfig::new(FRAC_PI_2, 7, 11));
    for _ in 0..25 {
        small.step_exact(0.02);
        large.step_exact(0.02);
    }
    for k in -3..=3 {
        for l in -3..=3 {
            assert_eq!(small.mode(k, l), large.mode(k, l), "mode ({k}, {l})");
        }
    }
}

#[test]
fn exact_step_agrees_with_euler_maruyama() {
    let (k, l, t, h) = (0, 1, 0.1_f64, 1e-4_f64);
    let lambda = OuConfig::new(FRAC_PI_2, 1, 0).lambda(k, l);
    let n = 10_000;
    let steps = (t / h).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut em_sq, mut ex_sq) = (0.0, 0.0);
    for r in 0..n {
        let mut x = 0.0_f64;
        for _ in 0..steps {
            let z: f64 = StandardNormal.sample(&mut rng);
            x += lambda * x * h + h.sqrt() * z;
        }
        em_sq += x * x;
        let mut st = OUState::new(OuConfig::new(FRAC_PI_2, 1, replica_seed(99, r)));
        st.step_exact(t);
        ex_sq += st.mode(k, l).re.powi(2);
    }
    let exact = ito_variance(k, l, t, 1.0, FRAC_PI_2);
    let (em, ex) = (em_sq / n as f64, ex_sq / n as f64);
    let se = exact * (2.0 / n as f64).sqrt();
    assert!((em - ex).abs() < 4.0 * se * std::f64::consts::SQRT_2, "EM {em} exact-step {ex}");
    assert!((ex - exact).abs() < 3.0 * se, "exact-step {ex} vs {exact}");
}

#[test]
fn sup_statistic_vanishes_without_noise_and_grows_with_horizon() {
    let mut ou = OuConfig::new(FRAC_PI_2, 4, 1);
    ou.noise_amplitude = 0.0;
    let quiet = SupLpConfig { ou, grid_n: 16, step: 0.05, horizon: 0.5 };
    let s = sup_lp_statistic(&quiet, 4.0, 5).unwrap();
    assert_eq!((s.mean, s.stderr), (0.0, 0.0));

    let short = SupLpConfig { ou: OuConfig::new(FRAC_PI_2, 4, 1), grid_n: 16, step: 0.05, horizon: 0.5 };
    let long = SupLpConfig { horizon: 1.0, ..short };
    let a = sup_lp_statistic(&short, 4.0, 20).unwrap();
    let b = sup_lp_statistic(&long, 4.0, 20).unwrap();
    assert!(b.mean >= a.mean, "{} < {}", b.mean, a.mean);
}

#[test]
fn holder_quotient_under_refinement() {
    // one path sampled at h/2; the coarse series is its even subsample
    let grid = Grid2D::square(16, FRAC_PI_2).unwrap();
    let eval = ZFieldEvaluator::new(grid, 4);
    let mut st = OUState::new(OuConfig::new(FRAC_PI_2, 4, 21));
    let h = 1.0 / 128.0;
    let mut fine = vec![(0.0, eval.eval(&st).unwrap())];
    for j in 1..=128 {
        st.step_exact(h / 2.0);
        fine.push((j as f64 * h / 2.0, eval.eval(&st).unwrap()));
    }
    let coarse: Vec<_> = fine.iter().step_by(2).cloned().collect();
    let ratio = |alpha: f64| {
        holder_quotient(&fine, alpha, 2.0).unwrap() / holder_quotient(&coarse, alpha, 2.0).unwrap()
    };
    let (low, high) = (ratio(0.1), ratio(0.45));
    assert!((low - 1.0).abs() < 0.5, "alpha 0.1 ratio {low}");
    assert!(high > low, "alpha 0.45 ratio {high} vs alpha 0.1 ratio {low}");
}
