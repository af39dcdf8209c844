//! Flat `key = value` run configuration.
//!
//! Blank lines and everything after `#` are ignored. Keys must be known;
//! repeated keys are an error. Lists are comma separated.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::sh_solver::Mode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    SimulateGl,
    SimulateSh,
    Convert,
    Compare,
    OuStats,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::SimulateGl => "simulate-gl",
            Experiment::SimulateSh => "simulate-sh",
            Experiment::Convert => "convert",
            Experiment::Compare => "compare",
            Experiment::OuStats => "ou-stats",
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "simulate-gl" => Experiment::SimulateGl,
            "simulate-sh" => Experiment::SimulateSh,
            "convert" => Experiment::Convert,
            "compare" => Experiment::Compare,
            "ou-stats" => Experiment::OuStats,
            _ => return Err(Error::Config(format!("unknown experiment '{s}'"))),
        })
    }
}

pub fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Direct => "direct",
        Mode::Shifted => "shifted",
    }
}

pub fn parse_mode(s: &str) -> Result<Mode> {
    match s {
        "direct" => Ok(Mode::Direct),
        "shifted" => Ok(Mode::Shifted),
        _ => Err(Error::Config(format!("unknown mode '{s}' (direct or shifted)"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    /// Half-length of the amplitude domain.
    pub half_len: f64,
    pub eps: f64,
    pub n_x: usize,
    pub n_y: usize,
    /// Slow step of the amplitude equation.
    pub delta_slow: f64,
    /// Requested fast step of the pattern equation.
    pub delta_fast: f64,
    pub m_r: usize,
    pub m_i: usize,
    pub seed: u64,
    /// Output times; slow clock except for `simulate-sh` (fast clock) and
    /// `ou-stats` (OU clock).
    pub snapshots: Vec<f64>,
    pub noise: bool,
    pub out: PathBuf,
    pub mode: Mode,
    pub noise_amplitude: f64,
    pub ou_truncation: usize,
    pub ou_eps: f64,
    pub ou_modes: Vec<(i64, i64)>,
    pub replicas: usize,
    /// Amplitude dumps read by `convert`.
    pub a_real: Option<PathBuf>,
    pub a_imag: Option<PathBuf>,
}

pub const KEYS: &[&str] = &[
    "experiment",
    "L",
    "eps",
    "n_x",
    "n_y",
    "delta_T",
    "delta_t",
    "m_R",
    "m_I",
    "seed",
    "snapshots",
    "noise",
    "out",
    "mode",
    "noise_amplitude",
    "ou_truncation",
    "ou_eps",
    "ou_modes",
    "replicas",
    "a_real",
    "a_imag",
];

impl RunConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let snapshots = match experiment {
            Experiment::SimulateSh => vec![0.0, 1.6, 3.2],
            Experiment::OuStats => vec![0.1, 1.0],
            _ => vec![0.0, 0.1, 0.2],
        };
        Self {
            experiment,
            half_len: FRAC_PI_2,
            eps: 0.25,
            n_x: 100,
            n_y: 100,
            delta_slow: 1e-4,
            delta_fast: 1e-3,
            m_r: 10,
            m_i: 10,
            seed: 0,
            snapshots,
            noise: true,
            out: PathBuf::from("out"),
            mode: Mode::Direct,
            noise_amplitude: 1.0,
            ou_truncation: 10,
            ou_eps: 1.0,
            ou_modes: vec![(0, 0), (0, 1), (2, 1)],
            replicas: 10_000,
            a_real: None,
            a_imag: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_for(text, None)
    }

    /// Parses with `verb` as the experiment when the file names none; a
    /// file naming a different experiment is an error.
    pub fn parse_for(text: &str, verb: Option<Experiment>) -> Result<Self> {
        let mut pairs: Vec<(usize, String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", i + 1)))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if !KEYS.contains(&k.as_str()) {
                return Err(Error::Config(format!("line {}: unknown key '{k}'", i + 1)));
            }
            if pairs.iter().any(|(_, p, _)| *p == k) {
                return Err(Error::Config(format!("line {}: duplicate key '{k}'", i + 1)));
            }
            pairs.push((i + 1, k, v));
        }
        let named = match pairs.iter().find(|(_, k, _)| k == "experiment") {
            Some((_, _, v)) => Some(v.parse::<Experiment>()?),
            None => None,
        };
        let experiment = match (named, verb) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Config(format!("config is for {}, not {}", a.name(), b.name())))
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return Err(Error::Config("missing key 'experiment'".into())),
        };
        let mut cfg = Self::defaults(experiment);
        for (line, k, v) in &pairs {
            cfg.set(k, v).map_err(|e| Error::Config(format!("line {line}: {k}: {e}")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, verb: Option<Experiment>) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse_for(&text, verb)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: FromStr>(v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("cannot parse '{v}'"))
        }
        match key {
            "experiment" => self.experiment = value.parse().map_err(|e: Error| e.to_string())?,
            "L" => self.half_len = num(value)?,
            "eps" => self.eps = num(value)?,
            "n_x" => self.n_x = num(value)?,
            "n_y" => self.n_y = num(value)?,
            "delta_T" => self.delta_slow = num(value)?,
            "delta_t" => self.delta_fast = num(value)?,
            "m_R" => self.m_r = num(value)?,
            "m_I" => self.m_i = num(value)?,
            "seed" => self.seed = num(value)?,
            "snapshots" => self.snapshots = parse_times(value)?,
            "noise" => {
                self.noise = match value {
                    "on" | "true" => true,
                    "off" | "false" => false,
                    _ => return Err(format!("expected on/off, got '{value}'")),
                }
            }
            "out" => self.out = PathBuf::from(value),
            "mode" => self.mode = parse_mode(value).map_err(|e| e.to_string())?,
            "noise_amplitude" => self.noise_amplitude = num(value)?,
            "ou_truncation" => self.ou_truncation = num(value)?,
            "ou_eps" => self.ou_eps = num(value)?,
            "ou_modes" => {
                self.ou_modes = value
                    .split(',')
                    .map(|m| {
                        let (k, l) = m.trim().split_once(':').ok_or_else(|| format!("mode '{m}' is not k:l"))?;
                        Ok((num(k.trim())?, num(l.trim())?))
                    })
                    .collect::<std::result::Result<_, String>>()?
            }
            "replicas" => self.replicas = num(value)?,
            "a_real" => self.a_real = Some(PathBuf::from(value)),
            "a_imag" => self.a_imag = Some(PathBuf::from(value)),
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.half_len > 0.0 && self.half_len.is_finite()) {
            return bad(format!("L = {} must be positive", self.half_len));
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return bad(format!("eps = {} must lie in (0, 1]", self.eps));
        }
        if self.n_x < 4 || self.n_y < 4 {
            return bad("grids need at least 4 cells per axis".into());
        }
        if !(self.delta_slow > 0.0 && self.delta_slow < 1.0) {
            return bad(format!("delta_T = {} must lie in (0, 1)", self.delta_slow));
        }
        if !(self.delta_fast > 0.0 && self.delta_fast.is_finite()) {
            return bad(format!("delta_t = {} must be positive", self.delta_fast));
        }
        if self.snapshots.is_empty() || self.snapshots.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return bad("snapshots must be a non-empty list of non-negative times".into());
        }
        if self.experiment == Experiment::OuStats {
            if self.replicas < 2 {
                return bad("ou-stats needs at least 2 replicas".into());
            }
            if self.ou_modes.is_empty() {
                return bad("ou-stats needs at least one mode".into());
            }
        }
        if self.experiment == Experiment::Convert && (self.a_real.is_none() || self.a_imag.is_none()) {
            return bad("convert needs a_real and a_imag".into());
        }
        Ok(())
    }

    /// Resolved configuration in the input format; parses back to `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("experiment", self.experiment.name().into());
        kv("L", self.half_len.to_string());
        kv("eps", self.eps.to_string());
        kv("n_x", self.n_x.to_string());
        kv("n_y", self.n_y.to_string());
        kv("delta_T", self.delta_slow.to_string());
        kv("delta_t", self.delta_fast.to_string());
        kv("m_R", self.m_r.to_string());
        kv("m_I", self.m_i.to_string());
        kv("seed", self.seed.to_string());
        kv("snapshots", join(self.snapshots.iter().map(f64::to_string)));
        kv("noise", if self.noise { "on" } else { "off" }.into());
        kv("out", self.out.display().to_string());
        kv("mode", mode_name(self.mode).into());
        kv("noise_amplitude", self.noise_amplitude.to_string());
        kv("ou_truncation", self.ou_truncation.to_string());
        kv("ou_eps", self.ou_eps.to_string());
        kv("ou_modes", join(self.ou_modes.iter().map(|(k, l)| format!("{k}:{l}"))));
        kv("replicas", self.replicas.to_string());
        if let Some(p) = &self.a_real {
            kv("a_real", p.display().to_string());
        }
        if let Some(p) = &self.a_imag {
            kv("a_imag", p.display().to_string());
        }
        s
    }
}

fn join(it: impl Iterator<Item = String>) -> String {
    it.collect::<Vec<_>>().join(", ")
}

pub fn parse_times(value: &str) -> std::result::Result<Vec<f64>, String> {
    value
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("cannot parse time '{}'", t.trim())))
        .collect()
}
