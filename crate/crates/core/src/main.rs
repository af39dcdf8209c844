use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use shpattern::harness::config::{parse_mode, parse_times, Experiment, RunConfig};
use shpattern::harness::{replay, run_experiment, RunManifest};
use shpattern::{Error, Result};

#[derive(Parser)]
#[command(name = "shpattern", version, about = "Stochastic Swift-Hohenberg and Ginzburg-Landau pattern simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the amplitude equation from the step initial data.
    SimulateGl(RunArgs),
    /// Integrate the pattern equation (direct or shifted).
    SimulateSh(RunArgs),
    /// Map two raw amplitude dumps to a pattern field.
    Convert(RunArgs),
    /// Amplitude-plus-ansatz against the direct pattern run on shared noise.
    Compare(RunArgs),
    /// Empirical against exact variances of the OU modes.
    OuStats(RunArgs),
    /// Rerun from a manifest and verify every output checksum.
    Replay {
        /// Manifest file or the run directory holding it.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` file; defaults are used for missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated output times.
    #[arg(long)]
    snapshots: Option<String>,
    #[arg(long)]
    no_noise: bool,
    /// `direct` or `shifted` (simulate-sh only).
    #[arg(long)]
    mode: Option<String>,
}

fn resolve(verb: Experiment, args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::from_file(p, Some(verb))?,
        None => RunConfig::defaults(verb),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.out = o.clone();
    }
    if let Some(t) = &args.snapshots {
        cfg.snapshots = parse_times(t).map_err(Error::Config)?;
    }
    if args.no_noise {
        cfg.noise = false;
    }
    if let Some(m) = &args.mode {
        if verb != Experiment::SimulateSh {
            return Err(Error::Config("--mode applies to simulate-sh only".into()));
        }
        cfg.mode = parse_mode(m)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report(m: &RunManifest) {
    println!("{} complete: {} files in {}", m.config.experiment.name(), m.files.len(), m.config.out.display());
    for n in &m.notes {
        println!("note: {n}");
    }
    if let Some(w) = m.wall_clock_seconds {
        println!("wall clock: {w:.2} s");
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let (verb, args) = match cli.command {
        Command::SimulateGl(a) => (Experiment::SimulateGl, a),
        Command::SimulateSh(a) => (Experiment::SimulateSh, a),
        Command::Convert(a) => (Experiment::Convert, a),
        Command::Compare(a) => (Experiment::Compare, a),
        Command::OuStats(a) => (Experiment::OuStats, a),
        Command::Replay { manifest, out } => {
            let r = replay(&manifest, &out)?;
            for name in &r.matched {
                println!("match    {name}");
            }
            for (name, want, got) in &r.mismatched {
                println!("MISMATCH {name} recorded {want} reproduced {got}");
            }
            for name in &r.missing {
                println!("MISSING  {name}");
            }
            for name in &r.extra {
                println!("EXTRA    {name}");
            }
            return Ok(if r.is_bitwise() {
                println!("replay reproduced {} files bitwise", r.matched.len());
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            });
        }
    };
    let cfg = resolve(verb, &args)?;
    report(&run_experiment(&cfg)?);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
