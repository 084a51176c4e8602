//! `vortex`: command-line front end for the vortex-core toolkit.

mod commands;
mod config;
mod error;
mod output;

use clap::{Parser, Subcommand};

use config::ConfigArgs;
use error::CliError;

#[derive(Parser)]
#[command(name = "vortex", version, about = "Vortex densities of rotating 2D condensates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Thomas-Fermi profile, cost function and summary
    Tf(ConfigArgs),
    /// Explicit vortex density and its support radii
    Mustar(ConfigArgs),
    /// Proximal-gradient minimization of the renormalized energy
    RenormMin(ConfigArgs),
    /// Lattice configuration, Riemann-sum check and upper-bound estimate
    Lattice(ConfigArgs),
    /// Green-function log-singularity check
    Green(ConfigArgs),
    /// Gross-Pitaevskii ground state, vorticity and energy decomposition
    Gp(ConfigArgs),
    /// Distance between a gp run's vorticity and the explicit density
    Compare(ConfigArgs),
}

fn run(cli: Cli) -> Result<Vec<std::path::PathBuf>, CliError> {
    match cli.command {
        Command::Tf(a) => commands::cmd_tf(&a.resolve(0.05)?),
        Command::Mustar(a) => commands::cmd_mustar(&a.resolve(0.05)?),
        Command::RenormMin(a) => commands::cmd_renorm_min(&a.resolve(0.05)?),
        Command::Lattice(a) => commands::cmd_lattice(&a.resolve(0.01)?),
        Command::Green(a) => commands::cmd_green(&a.resolve(0.01)?),
        Command::Gp(a) => commands::cmd_gp(&a.resolve(0.05)?),
        Command::Compare(a) => commands::cmd_compare(&a.resolve(0.05)?),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(dirs) => {
            for d in dirs {
                println!("{}", d.display());
            }
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            std::process::exit(e.code);
        }
    }
}
