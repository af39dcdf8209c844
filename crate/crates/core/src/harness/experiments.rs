//! Experiment drivers behind the command-line verbs, plus library-level
//! studies used by the acceptance tests.

use std::path::Path;
use std::time::Instant;

use crate::ansatz::{ansatz_to_u, build_initial_a, build_initial_u, AnsatzMap};
use crate::error::{Error, Result};
use crate::gl_solver::{run_gl_with, GLConfig, GLSolver, GLState};
use crate::grid::{Grid2D, RealField2D};
use crate::harness::config::{Experiment, RunConfig};
use crate::harness::io::{read_raw_file, sha256_file, snapshot_stem, Csv, OutputDir};
use crate::harness::manifest::{RunManifest, Status, MANIFEST_NAME};
use crate::harness::metrics::{approximation_error, dominant_x_wavenumber, energy_diagnostics, EnergyDiagnostics};
use crate::noise::{BrownianRegistry, NoiseIncrement, NoiseSpec};
use crate::ou_process::{ito_variance, replica_seed, OUState, OuConfig, Spectrum, ZFieldEvaluator};
use crate::sh_solver::{run_sh_with, Mode, SHConfig, SHSolver, SHState};
use crate::steps_for;

impl RunConfig {
    pub fn amplitude_grid(&self) -> Result<Grid2D> {
        Grid2D::new(self.n_x, self.n_y, self.half_len, self.half_len)
    }

    pub fn ansatz_map(&self) -> Result<AnsatzMap> {
        AnsatzMap::for_amplitude_grid(self.eps, self.amplitude_grid()?)
    }

    pub fn noise_spec(&self) -> Option<NoiseSpec> {
        self.noise.then_some(NoiseSpec {
            m_r: self.m_r,
            m_i: self.m_i,
            seed: self.seed,
            amplitude: self.noise_amplitude,
        })
    }

    pub fn gl_config(&self) -> Result<GLConfig> {
        Ok(GLConfig { grid: self.amplitude_grid()?, delta_t: self.delta_slow, noise: self.noise_spec(), cubic: true })
    }

    /// Pattern-equation configuration with fast step `delta_fast`.
    pub fn sh_config(&self, delta_fast: f64) -> Result<SHConfig> {
        Ok(SHConfig {
            grid: self.ansatz_map()?.u_grid,
            delta_t: delta_fast,
            eps: self.eps,
            noise: self.noise_spec(),
            mode: self.mode,
            cubic: true,
            ou_truncation: self.ou_truncation,
        })
    }
}

/// Runs `cfg.experiment` into `cfg.out`, writing the manifest before any
/// data and finalising it afterwards (also on failure).
pub fn run_experiment(cfg: &RunConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let mut out = OutputDir::create(&cfg.out)?;
    let mut manifest = RunManifest::new(cfg.clone());
    manifest.write(out.root())?;
    let start = Instant::now();
    let result = match cfg.experiment {
        Experiment::SimulateGl => simulate_gl(cfg, &mut out),
        Experiment::SimulateSh => simulate_sh(cfg, &mut out),
        Experiment::Convert => convert(cfg, &mut out),
        Experiment::Compare => compare(cfg, &mut out),
        Experiment::OuStats => ou_stats(cfg, &mut out),
    };
    manifest.files = out.files().to_vec();
    manifest.wall_clock_seconds = Some(start.elapsed().as_secs_f64());
    match result {
        Ok(notes) => {
            manifest.notes = notes;
            manifest.status = Status::Complete;
            manifest.write(out.root())?;
            Ok(manifest)
        }
        Err(e) => {
            manifest.status = Status::Failed { exit_code: e.exit_code(), message: e.to_string() };
            manifest.write(out.root())?;
            Err(e)
        }
    }
}

/// Snapshot step indices, deduplicated, with their times.
fn snapshot_steps(times: &[f64], dt: f64) -> Result<Vec<(u64, f64)>> {
    let mut v = times.iter().map(|&t| Ok((steps_for(t, dt)?, t))).collect::<Result<Vec<_>>>()?;
    v.sort_by(|a, b| a.0.cmp(&b.0));
    v.dedup_by_key(|s| s.0);
    Ok(v)
}

fn g(x: f64) -> String {
    x.to_string()
}

fn simulate_gl(cfg: &RunConfig, out: &mut OutputDir) -> Result<Vec<String>> {
    let gl = cfg.gl_config()?;
    let snaps = snapshot_steps(&cfg.snapshots, gl.delta_t)?;
    let last = snaps.last().map_or(0, |s| s.0);
    let mut series = Csv::new(&["step", "T", "l2", "max_abs"]);
    let result = run_gl_with(&gl, build_initial_a(gl.grid), last, |s| {
        series.row(&[s.step.to_string(), g(s.slow_time), g(s.l2_norm()), g(s.max_modulus())]);
        if let Some(&(_, t)) = snaps.iter().find(|x| x.0 == s.step) {
            out.write_snapshot(&snapshot_stem("T", t, "AR"), &s.a_real)?;
            out.write_snapshot(&snapshot_stem("T", t, "AI"), &s.a_imag)?;
        }
        Ok(())
    });
    series.save(out, "series.csv")?;
    result.map(|_| Vec::new())
}

fn simulate_sh(cfg: &RunConfig, out: &mut OutputDir) -> Result<Vec<String>> {
    let sh = cfg.sh_config(cfg.delta_fast)?;
    sh.validate()?;
    let map = cfg.ansatz_map()?;
    let a0 = build_initial_a(map.a_grid);
    let u0 = build_initial_u((&a0.0, &a0.1), &map)?;
    let snaps = snapshot_steps(&cfg.snapshots, sh.delta_t)?;
    let last = snaps.last().map_or(0, |s| s.0);
    let mut series = Csv::new(&["step", "t", "l2", "l4", "max_abs"]);
    let result = run_sh_with(&sh, u0, last, |s, z| {
        series.row(&[s.step.to_string(), g(s.fast_time), g(s.u.lp_norm(2.0)), g(s.u.lp_norm(4.0)), g(s.u.max_abs())]);
        if let Some(&(_, t)) = snaps.iter().find(|x| x.0 == s.step) {
            out.write_snapshot(&snapshot_stem("t", t, "u"), &s.u)?;
            out.write_snapshot(&snapshot_stem("t", t, "mu"), &s.mu)?;
            if let Some(z) = z {
                out.write_snapshot(&snapshot_stem("t", t, "z"), z)?;
            }
        }
        Ok(())
    });
    series.save(out, "series.csv")?;
    result.map(|_| Vec::new())
}

fn convert(cfg: &RunConfig, out: &mut OutputDir) -> Result<Vec<String>> {
    let map = cfg.ansatz_map()?;
    let (pr, pi) = match (&cfg.a_real, &cfg.a_imag) {
        (Some(r), Some(i)) => (r, i),
        _ => return Err(Error::Config("convert needs a_real and a_imag".into())),
    };
    let ar = read_raw_file(pr, map.a_grid)?;
    let ai = read_raw_file(pi, map.a_grid)?;
    let u = ansatz_to_u(&ar, &ai, &map)?;
    out.write_snapshot("converted_u", &u)?;
    Ok(vec![
        format!("input a_real {} {}", pr.display(), sha256_file(pr)?),
        format!("input a_imag {} {}", pi.display(), sha256_file(pi)?),
    ])
}

/// Fast step used against slow step `delta_slow`.
///
/// Noisy runs need `delta_slow = r eps^2 dt` for an integer `r` so that one
/// amplitude increment is the sum of `r` pattern increments; `dt` is lowered
/// to the nearest such divisor. Deterministic runs keep `dt` whenever every
/// snapshot lands on both clocks. Returns `(dt, r)` with `r = None` when the
/// clocks are not locked.
pub fn resolve_fast_step(
    delta_slow: f64,
    eps: f64,
    requested: f64,
    snapshots: &[f64],
    noisy: bool,
) -> Result<(f64, Option<u64>)> {
    for &t in snapshots {
        steps_for(t, delta_slow)?;
    }
    let ratio = delta_slow / (eps * eps * requested);
    let nearest = ratio.round();
    let locked = nearest >= 1.0 && (ratio - nearest).abs() <= 1e-9 * nearest;
    if locked {
        return Ok((requested, Some(nearest as u64)));
    }
    if !noisy && snapshots.iter().all(|&t| steps_for(t / (eps * eps), requested).is_ok()) {
        return Ok((requested, None));
    }
    let r = (ratio - 1e-9).ceil().max(1.0);
    Ok((delta_slow / (r * eps * eps), Some(r as u64)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub slow_time: f64,
    pub fast_time: f64,
    pub abs_l2: f64,
    pub rel_l2: f64,
    pub max_abs_err: f64,
    pub k_direct: f64,
    pub k_ansatz: f64,
    pub direct: EnergyDiagnostics,
    pub ansatz: EnergyDiagnostics,
}

#[derive(Debug, Clone)]
pub struct CompareSnapshot {
    pub slow_time: f64,
    pub gl: GLState,
    pub sh: SHState,
    pub u_ansatz: RealField2D,
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    /// Fast step actually used.
    pub delta_fast: f64,
    pub rows: Vec<CompareRow>,
    pub snapshots: Vec<CompareSnapshot>,
}

/// Amplitude run plus ansatz against the direct pattern run, on one shared
/// Brownian registry when noise is on. Snapshot times are on the slow clock.
pub fn run_compare(cfg: &RunConfig) -> Result<CompareReport> {
    cfg.validate()?;
    if cfg.mode != Mode::Direct {
        return Err(Error::Config("compare runs the direct pattern equation".into()));
    }
    let noise = cfg.noise_spec();
    let (dt, r) = resolve_fast_step(cfg.delta_slow, cfg.eps, cfg.delta_fast, &cfg.snapshots, noise.is_some())?;
    let gl_cfg = cfg.gl_config()?;
    let sh_cfg = cfg.sh_config(dt)?;
    let map = cfg.ansatz_map()?;
    let a0 = build_initial_a(map.a_grid);
    let u0 = build_initial_u((&a0.0, &a0.1), &map)?;
    let e2 = cfg.eps * cfg.eps;
    let mut times = cfg.snapshots.clone();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let gl_steps = times.iter().map(|&t| steps_for(t, cfg.delta_slow)).collect::<Result<Vec<_>>>()?;
    let sh_steps = times.iter().map(|&t| steps_for(t / e2, dt)).collect::<Result<Vec<_>>>()?;

    let mut gl_snaps: Vec<Option<GLState>> = vec![None; times.len()];
    let mut sh_snaps: Vec<Option<SHState>> = vec![None; times.len()];
    let gl_last = gl_steps.last().copied().unwrap_or(0);
    let sh_last = sh_steps.last().copied().unwrap_or(0);
    match noise {
        None => {
            run_gl_with(&gl_cfg, a0, gl_last, |s| {
                for (slot, &n) in gl_snaps.iter_mut().zip(&gl_steps) {
                    if n == s.step {
                        *slot = Some(s.clone());
                    }
                }
                Ok(())
            })?;
            run_sh_with(&sh_cfg, u0, sh_last, |s, _| {
                for (slot, &n) in sh_snaps.iter_mut().zip(&sh_steps) {
                    if n == s.step {
                        *slot = Some(s.clone());
                    }
                }
                Ok(())
            })?;
        }
        Some(spec) => {
            let r = r.expect("noisy runs lock the clocks");
            let mut registry = spec.registry();
            let mut gl_solver = GLSolver::new(gl_cfg)?;
            let mut sh_solver = SHSolver::new(sh_cfg)?;
            let mut gs = GLState::new(a0.0, a0.1)?;
            let mut ss = SHState::new(u0);
            loop {
                for (i, &n) in gl_steps.iter().enumerate() {
                    if n == gs.step {
                        gl_snaps[i] = Some(gs.clone());
                        sh_snaps[i] = Some(ss.clone());
                    }
                }
                if gs.step >= gl_last {
                    break;
                }
                let mut parts = Vec::with_capacity(r as usize);
                for _ in 0..r {
                    let inc = registry.advance(e2 * dt);
                    ss = sh_solver.step_with_increment(&ss, &inc)?;
                    parts.push(inc);
                }
                gs = gl_solver.step_with_increment(&gs, &NoiseIncrement::combine(&parts)?)?;
            }
        }
    }

    let mut rows = Vec::with_capacity(times.len());
    let mut snapshots = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        let gl = gl_snaps[i].take().expect("visited");
        let sh = sh_snaps[i].take().expect("visited");
        let ua = ansatz_to_u(&gl.a_real, &gl.a_imag, &map)?;
        let diff = sh.u.axpby(1.0, &ua, -1.0)?;
        rows.push(CompareRow {
            slow_time: t,
            fast_time: sh.fast_time,
            abs_l2: diff.lp_norm(2.0),
            rel_l2: approximation_error(&sh.u, &ua, 2.0)?,
            max_abs_err: diff.max_abs(),
            k_direct: dominant_x_wavenumber(&sh.u),
            k_ansatz: dominant_x_wavenumber(&ua),
            direct: energy_diagnostics(&sh.u),
            ansatz: energy_diagnostics(&ua),
        });
        snapshots.push(CompareSnapshot { slow_time: t, gl, sh, u_ansatz: ua });
    }
    Ok(CompareReport { delta_fast: dt, rows, snapshots })
}

pub const COMPARE_COLUMNS: &[&str] = &[
    "T",
    "t",
    "abs_l2",
    "rel_l2",
    "max_abs_err",
    "k_direct",
    "k_ansatz",
    "direct_l2sq",
    "direct_w12sq",
    "direct_l4quad",
    "ansatz_l2sq",
    "ansatz_w12sq",
    "ansatz_l4quad",
];

fn compare(cfg: &RunConfig, out: &mut OutputDir) -> Result<Vec<String>> {
    let report = run_compare(cfg)?;
    let mut notes = Vec::new();
    if report.delta_fast != cfg.delta_fast {
        notes.push(format!(
            "delta_t adjusted from {} to {} to align the clocks",
            cfg.delta_fast, report.delta_fast
        ));
    }
    let mut csv = Csv::new(COMPARE_COLUMNS);
    for r in &report.rows {
        let (d, a) = (r.direct, r.ansatz);
        csv.row(
            &[r.slow_time, r.fast_time, r.abs_l2, r.rel_l2, r.max_abs_err, r.k_direct, r.k_ansatz]
                .into_iter()
                .chain([d.l2sq, d.w12sq, d.l4quad, a.l2sq, a.w12sq, a.l4quad])
                .map(g)
                .collect::<Vec<_>>(),
        );
    }
    for s in &report.snapshots {
        let t = s.slow_time;
        out.write_snapshot(&snapshot_stem("T", t, "AR"), &s.gl.a_real)?;
        out.write_snapshot(&snapshot_stem("T", t, "AI"), &s.gl.a_imag)?;
        out.write_snapshot(&snapshot_stem("T", t, "ua"), &s.u_ansatz)?;
        out.write_snapshot(&snapshot_stem("t", s.sh.fast_time, "u"), &s.sh.u)?;
        out.write_snapshot(&snapshot_stem("t", s.sh.fast_time, "mu"), &s.sh.mu)?;
    }
    csv.save(out, "series.csv")?;
    Ok(notes)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuStatRow {
    pub k: i64,
    pub l: i64,
    pub lambda: f64,
    pub t: f64,
    pub empirical_var: f64,
    pub exact_var: f64,
    pub stderr: f64,
    pub z_score: f64,
}

/// Monte Carlo check of the exact OU step against the Itô variance.
///
/// Each replica runs one OU state (truncation = largest index in `modes`,
/// seed `replica_seed(seed, r)`) through the sorted `times`. The empirical
/// per-part variance pools `Re` and `Im` (only `Re` for `(0, 0)`).
pub fn ou_variance_study(
    half_len: f64,
    eps: f64,
    modes: &[(i64, i64)],
    times: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<Vec<OuStatRow>> {
    if replicas < 2 {
        return Err(Error::Config("need at least 2 replicas".into()));
    }
    let mut times = times.to_vec();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let m = modes.iter().map(|(k, l)| k.unsigned_abs().max(l.unsigned_abs())).max().unwrap_or(0) as usize;
    let mut base = OuConfig::new(half_len, m, seed);
    base.eps = eps;
    // samples[time][mode]
    let mut samples = vec![vec![Vec::with_capacity(replicas); modes.len()]; times.len()];
    for r in 0..replicas {
        let mut st = OUState::new(OuConfig { seed: replica_seed(seed, r as u64), ..base });
        let mut now = 0.0;
        for (ti, &t) in times.iter().enumerate() {
            if t > now {
                st.step_exact(t - now);
                now = t;
            }
            for (mi, &(k, l)) in modes.iter().enumerate() {
                let z = st.mode(k, l);
                let q = if k == 0 && l == 0 { z.re * z.re } else { 0.5 * z.norm_sqr() };
                samples[ti][mi].push(q);
            }
        }
    }
    let mut rows = Vec::new();
    for (mi, &(k, l)) in modes.iter().enumerate() {
        for (ti, &t) in times.iter().enumerate() {
            let xs = &samples[ti][mi];
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let stderr = (var / n).sqrt();
            let exact = ito_variance(k, l, t, eps, half_len);
            let diff = mean - exact;
            let z_score = if stderr > 0.0 { diff / stderr } else if diff == 0.0 { 0.0 } else { f64::INFINITY };
            rows.push(OuStatRow {
                k,
                l,
                lambda: base.lambda(k, l),
                t,
                empirical_var: mean,
                exact_var: exact,
                stderr,
                z_score,
            });
        }
    }
    Ok(rows)
}

pub const OU_STATS_COLUMNS: &[&str] = &["mode_k", "mode_l", "lambda", "t", "empirical_var", "exact_var", "z_score"];

fn ou_stats(cfg: &RunConfig, out: &mut OutputDir) -> Result<Vec<String>> {
    let rows = ou_variance_study(cfg.half_len, cfg.ou_eps, &cfg.ou_modes, &cfg.snapshots, cfg.replicas, cfg.seed)?;
    let mut csv = Csv::new(OU_STATS_COLUMNS);
    for r in rows {
        csv.row(&[
            r.k.to_string(),
            r.l.to_string(),
            g(r.lambda),
            g(r.t),
            g(r.empirical_var),
            g(r.exact_var),
            g(r.z_score),
        ]);
    }
    csv.save(out, "series.csv")?;
    Ok(Vec::new())
}

/// Setup of the `u = v + Z` consistency study (eps = 1, square grid).
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionConfig {
    pub grid: Grid2D,
    /// Noise truncation, `m_R = m_I`.
    pub truncation: usize,
    pub seed: u64,
    pub horizon: f64,
    /// Fast steps to compare; each a multiple of the fine Brownian step.
    pub steps: Vec<f64>,
    /// Fine Brownian step is the smallest entry of `steps` divided by this.
    pub fine_divisions: u64,
}

/// For every step size, `||u_direct - (v + Z)||_{L^2}` at the horizon.
///
/// One fine Brownian path is drawn. `Z` follows it exactly through the
/// driven OU step with the grid-consistent spectrum, so it is the exact
/// convolution of the semi-discrete problem. The direct scheme sees the
/// path through sums of fine increments; the shifted scheme sees `Z` at its
/// step times.
pub fn decomposition_study(cfg: &DecompositionConfig, u0: &RealField2D) -> Result<Vec<(f64, f64)>> {
    let grid = cfg.grid;
    grid.ensure_matches(&u0.grid)?;
    if grid.half_len_x != grid.half_len_y {
        return Err(Error::GridMismatch("decomposition study needs a square domain".into()));
    }
    let dt_min = cfg.steps.iter().copied().fold(f64::INFINITY, f64::min);
    if !(dt_min > 0.0) || cfg.fine_divisions == 0 {
        return Err(Error::Config("decomposition study needs positive steps".into()));
    }
    let h = dt_min / cfg.fine_divisions as f64;
    let n_fine = steps_for(cfg.horizon, h)?;
    let mut registry = BrownianRegistry::new(cfg.seed, cfg.truncation, cfg.truncation);
    let fine: Vec<NoiseIncrement> = (0..n_fine).map(|_| registry.advance(h)).collect();

    let mut ou_cfg = OuConfig::new(grid.half_len_x, cfg.truncation, cfg.seed ^ 0x05ee_d0c0_u64);
    ou_cfg.spectrum = Spectrum::Grid(grid);
    let mut ou = OUState::new(ou_cfg);
    let eval = ZFieldEvaluator::new(grid, cfg.truncation);
    // Z at every fine time that some step grid visits
    let strides = cfg.steps.iter().map(|&dt| steps_for(dt, h)).collect::<Result<Vec<_>>>()?;
    let mut z_at = std::collections::BTreeMap::new();
    for j in 0..=n_fine {
        if strides.iter().any(|s| j % s == 0) {
            z_at.insert(j, eval.eval(&ou)?);
        }
        if j < n_fine {
            ou.step_with_increments(h, &fine[j as usize])?;
        }
    }

    let spec = NoiseSpec::new(cfg.truncation, cfg.truncation, cfg.seed);
    let mut out = Vec::with_capacity(cfg.steps.len());
    for (&dt, &stride) in cfg.steps.iter().zip(&strides) {
        let base = SHConfig {
            grid,
            delta_t: dt,
            eps: 1.0,
            noise: Some(spec),
            mode: Mode::Direct,
            cubic: true,
            ou_truncation: cfg.truncation,
        };
        let mut direct = SHSolver::new(base)?;
        let mut shifted = SHSolver::new(SHConfig { mode: Mode::Shifted, noise: None, ..base })?;
        let mut u = SHState::new(u0.clone());
        let mut v = SHState::new(u0.axpby(1.0, &z_at[&0], -1.0)?);
        let mut j = 0;
        while j < n_fine {
            let inc = NoiseIncrement::combine(&fine[j as usize..(j + stride) as usize])?;
            u = direct.step_with_increment(&u, &inc)?;
            v = shifted.step_shifted(&v, &z_at[&j])?;
            j += stride;
        }
        let recon = v.u.axpby(1.0, &z_at[&n_fine], 1.0)?;
        out.push((dt, u.u.axpby(1.0, &recon, -1.0)?.lp_norm(2.0)));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReplayReport {
    pub matched: Vec<String>,
    /// `(name, recorded, reproduced)`
    pub mismatched: Vec<(String, String, String)>,
    pub missing: Vec<String>,
    pub extra: Vec<String>,
}

impl ReplayReport {
    pub fn is_bitwise(&self) -> bool {
        self.mismatched.is_empty() && self.missing.is_empty() && self.extra.is_empty() && !self.matched.is_empty()
    }
}

/// Reruns the experiment recorded in `manifest` into `out` and compares
/// every output checksum.
pub fn replay(manifest: &Path, out: &Path) -> Result<ReplayReport> {
    let path = if manifest.is_dir() { manifest.join(MANIFEST_NAME) } else { manifest.to_path_buf() };
    let recorded = RunManifest::read(&path)?;
    if recorded.status != Status::Complete {
        return Err(Error::Config(format!("{} records an incomplete run", path.display())));
    }
    let mut cfg = recorded.config.clone();
    cfg.out = out.to_path_buf();
    let fresh = run_experiment(&cfg)?;
    let mut report = ReplayReport::default();
    for (name, sha) in &recorded.files {
        match fresh.files.iter().find(|(n, _)| n == name) {
            Some((_, s)) if s == sha => report.matched.push(name.clone()),
            Some((_, s)) => report.mismatched.push((name.clone(), sha.clone(), s.clone())),
            None => report.missing.push(name.clone()),
        }
    }
    for (name, _) in &fresh.files {
        if !recorded.files.iter().any(|(n, _)| n == name) {
            report.extra.push(name.clone());
        }
    }
    Ok(report)
}
