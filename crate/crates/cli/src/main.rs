mod commands;
mod config;
mod manifest;
mod table1;

use clap::{Parser, Subcommand};
use config::{ConfigError, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "cavpol", version, about = "Cavity QED solvers for a 2D electron coupled to photon modes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Flat `key = value` configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set lambda=0.4`. Repeatable.
    #[arg(short, long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig, ConfigError> {
        RunConfig::load(self.config.as_deref(), &self.overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve (or load from cache) the bare electronic states.
    Electronic(ConfigArgs),
    /// Exact grid ⊗ Fock solve in length and/or momentum form.
    Exact(ConfigArgs),
    /// Explicit-polariton convergence scan.
    PolaritonScan {
        #[command(flatten)]
        args: ConfigArgs,
        /// Print deviations from the bundled benchmark table.
        #[arg(long)]
        diff: bool,
    },
    /// Density and density difference exports with the anisotropy proxy.
    Density(ConfigArgs),
    /// Single-photon polariton model scan.
    Spp(ConfigArgs),
    /// Recompute the checksums listed in a manifest.
    VerifyManifest { manifest: PathBuf },
    /// Print the default configuration.
    Defaults,
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<ConfigError>() {
            return 3;
        }
        if let Some(err) = cause.downcast_ref::<cavity_polariton::Error>() {
            return match err {
                cavity_polariton::Error::NotConverged { .. } => 2,
                cavity_polariton::Error::InvalidParameter(_)
                | cavity_polariton::Error::OutOfRange(_)
                | cavity_polariton::Error::DenseCapExceeded { .. } => 3,
                _ => 1,
            };
        }
    }
    1
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Electronic(a) => commands::electronic(a.load()?),
        Command::Exact(a) => commands::exact(a.load()?),
        Command::PolaritonScan { args, diff } => commands::polariton_scan(args.load()?, diff),
        Command::Density(a) => commands::density(a.load()?),
        Command::Spp(a) => commands::spp(a.load()?),
        Command::VerifyManifest { manifest } => commands::verify_manifest(&manifest),
        Command::Defaults => {
            print!("{}", RunConfig::default().to_text());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
