//! Command implementations for the `walkmax` binary. Every command returns an
//! [`Envelope`] that renders identically as CSV, JSON or an aligned table.

pub mod commands;
pub mod envelope;
pub mod verify;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use envelope::{render, Cell, Check, Envelope, Format};

#[derive(Debug, Parser)]
#[command(
    name = "walkmax",
    version,
    about = "Running maximum of the reflected symmetric walk"
)]
pub struct Cli {
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output format.
    #[arg(long, value_enum, default_value = "table", global = true)]
    pub format: Format,
    /// Shorthand for `--format json`.
    #[arg(long, global = true)]
    pub json: bool,
    /// Write to this file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

impl OutputArgs {
    pub fn format(&self) -> Format {
        if self.json {
            Format::Json
        } else {
            self.format
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact joint law of (position, maximum) after n steps, with both marginals.
    Dist {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        /// Use the floating-point recursion instead of exact fractions.
        #[arg(long)]
        float: bool,
    },
    /// Law of the maximum after n steps.
    Maxdist {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        #[arg(long, value_enum, default_value = "trig")]
        route: commands::Route,
        /// With `--route dp`, use the floating-point recursion.
        #[arg(long)]
        float: bool,
    },
    /// Limiting moment constants.
    Constants,
    /// Limiting density of a·Q_N(a) as a function of gamma = 2a²/(πN).
    Density {
        /// Single point; overrides the grid.
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, default_value_t = 0.05)]
        gamma_min: f64,
        #[arg(long, default_value_t = 5.0)]
        gamma_max: f64,
        /// Number of log-spaced grid points.
        #[arg(long, default_value_t = 50)]
        steps: usize,
    },
    /// Monte Carlo simulation of (S_n, A_n).
    Simulate {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Thread count; 0 uses all cores. Results do not depend on it.
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Run the cross-validation matrix.
    Verify {
        #[arg(long, value_enum, default_value = "quick")]
        level: verify::Level,
    },
}

/// Exit status for a failed check.
pub const EXIT_CHECK_FAILED: i32 = 1;
/// Exit status for invalid input.
pub const EXIT_USAGE: i32 = 2;

/// Runs a parsed command. Domain errors map to usage errors.
pub fn execute(command: &Command) -> Result<Envelope, String> {
    let result = match *command {
        Command::Dist { n, float } => commands::cmd_dist(n, float),
        Command::Maxdist { n, route, float } => commands::cmd_maxdist(n, route, float),
        Command::Constants => commands::cmd_constants(),
        Command::Density {
            gamma,
            gamma_min,
            gamma_max,
            steps,
        } => match gamma {
            Some(g) => commands::cmd_density(&[g]),
            None => {
                if !(gamma_min > 0.0 && gamma_min < gamma_max && gamma_max.is_finite())
                    || steps == 0
                {
                    return Err(format!(
                        "need 0 < gamma-min < gamma-max and steps >= 1 (got {gamma_min}, {gamma_max}, {steps})"
                    ));
                }
                commands::cmd_density(&commands::log_grid(gamma_min, gamma_max, steps))
            }
        },
        Command::Simulate {
            n,
            trials,
            seed,
            workers,
        } => commands::cmd_simulate(n, trials, seed, workers),
        Command::Verify { level } => verify::cmd_verify(level),
    };
    result.map_err(|e| e.to_string())
}
