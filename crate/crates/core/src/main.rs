use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vnls_kdv::harness::{self, RunConfig};
use vnls_kdv::reduction::Branch;
use vnls_kdv::{Error, Result};

#[derive(Parser)]
#[command(name = "vnls-kdv", version, about = "KdV reduction of the vector NLS system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration (paper-sec5 or desk)
    #[arg(long)]
    preset: Option<String>,
    /// Branch as a signed index: +j right mover, -j left mover, j ascending in speed
    #[arg(long, allow_negative_numbers = true)]
    branch: Option<i32>,
    /// Output directory for CSV files
    #[arg(long, default_value = "output")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Sound speeds, positivity and degeneracy of the linearised system
    Spectrum(Common),
    /// KdV coefficients of every branch (or of --branch)
    Coeffs(Common),
    /// Evolve the NLS system from the soliton initial data
    Simulate(Common),
    /// Evolve the NLS system and compare against the KdV soliton
    Compare(Common),
    /// Track speeds and coefficients while the cross coupling varies
    SweepH {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        h_min: Option<f64>,
        #[arg(long)]
        h_max: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
    },
}

fn load(common: &Common) -> Result<RunConfig> {
    let cfg = match (&common.config, &common.preset) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(name)) => RunConfig::preset(name)?,
        (None, None) => {
            return Err(Error::Config(
                "one of --config <path> or --preset <name> is required".into(),
            ))
        }
    };
    match common.branch {
        Some(b) => cfg.with_branch(b),
        None => Ok(cfg),
    }
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Spectrum(c) => {
            let cfg = load(&c)?;
            let r = harness::spectrum(&cfg)?;
            print!("{}", r.summary());
            report(&r.write(&c.out)?);
            r.check()
        }
        Command::Coeffs(c) => {
            let cfg = load(&c)?;
            let requested = match c.branch {
                Some(b) => Some(Branch::from_signed(b, cfg.bg.n())?),
                None => None,
            };
            let r = harness::coeffs(&cfg, requested)?;
            print!("{}", r.summary());
            report(&r.write(&c.out)?);
            Ok(())
        }
        Command::Simulate(c) => {
            let cfg = load(&c)?;
            let r = harness::simulate(&cfg)?;
            print!("{}", r.summary());
            report(&r.write(&cfg, &c.out)?);
            Ok(())
        }
        Command::Compare(c) => {
            let cfg = load(&c)?;
            let r = harness::compare(&cfg)?;
            print!("{}", r.summary());
            report(&r.write(&cfg, &c.out)?);
            Ok(())
        }
        Command::SweepH {
            common,
            h_min,
            h_max,
            samples,
        } => {
            let cfg = load(&common)?.with_sweep(h_min, h_max, samples)?;
            let r = harness::sweep(&cfg)?;
            print!("{}", r.summary());
            report(&r.write(&common.out)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
