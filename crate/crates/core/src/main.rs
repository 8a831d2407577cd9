use clap::{Parser, Subcommand};
use std::path::PathBuf;
use thermovisc::cli::{cmd_check, cmd_run, cmd_sweep, Overrides};

#[derive(Parser)]
#[command(
    name = "thermovisc",
    about = "Kelvin-Voigt thermoviscoelastic simulator with an exact energy ledger"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a single configured problem and write ledger, monitors and
    /// snapshots.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config's [output] dir)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed override for the random-seeded initial preset
        #[arg(long)]
        seed: Option<u64>,
        /// Suppress progress output
        #[arg(long)]
        quiet: bool,
    },
    /// Execute the configured epsilon or refinement sweep and write the
    /// report tables.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        quiet: bool,
    },
    /// Validate the configured coefficients against the structural
    /// assumptions without running anything.
    Check { config: PathBuf },
}

fn main() {
    let args = Args::parse();
    let code = match args.command {
        Command::Run {
            config,
            out,
            seed,
            quiet,
        } => cmd_run(
            &config,
            &Overrides {
                out_dir: out,
                seed,
                quiet,
            },
        ),
        Command::Sweep {
            config,
            out,
            seed,
            quiet,
        } => cmd_sweep(
            &config,
            &Overrides {
                out_dir: out,
                seed,
                quiet,
            },
        ),
        Command::Check { config } => cmd_check(&config),
    };
    std::process::exit(code);
}
