use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

mod commands;
mod output;
mod parse;

use output::Format;

/// Weyl-Titchmarsh computations for discrete Hamiltonian systems.
#[derive(Debug, Parser)]
#[command(name = "weylkit", version, about)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// coefficient file (JSON)
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub format: Format,
    /// write here instead of stdout
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// omit the generation-time header line
    #[arg(long, global = true)]
    pub no_timestamp: bool,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// overrides the command's default tolerance
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true, default_value_t = 0, allow_hyphen_values = true)]
    pub k0: i64,
    /// boundary data at k0: dirichlet, neumann or an inline JSON m x 2m matrix
    #[arg(long, global = true, default_value = "dirichlet")]
    pub alpha: String,
    /// boundary data at ell, same forms as --alpha
    #[arg(long, global = true, default_value = "dirichlet")]
    pub beta: String,
}

#[derive(Debug, Args)]
pub struct Points {
    /// spectral point RE,IM (repeatable)
    #[arg(long, allow_hyphen_values = true)]
    pub z: Vec<String>,
    /// rectangle RE0:RE1:NRE,IM0:IM1:NIM with endpoints included
    #[arg(long, allow_hyphen_values = true)]
    pub z_grid: Option<String>,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    /// spectral point RE,IM
    #[arg(long, allow_hyphen_values = true)]
    pub z: String,
    /// whole, plus or minus
    #[arg(long, default_value = "whole")]
    pub variant: String,
    /// site window LO,HI
    #[arg(long, allow_hyphen_values = true)]
    pub window: String,
    /// distance from k0 of the finite-range surrogates of the Weyl solutions
    #[arg(long, default_value_t = 200)]
    pub ell: i64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// structural checks, pencil conditions and definiteness
    Validate {
        #[command(flatten)]
        points: Points,
        /// site window LO,HI (default: the stored window)
        #[arg(long, allow_hyphen_values = true)]
        window: Option<String>,
    },
    /// eigenvalues of the regular problem on [k0, ell]
    Eig {
        #[arg(long, allow_hyphen_values = true)]
        ell: i64,
        /// search interval A,B (default for Jacobi systems: a Gershgorin bound)
        #[arg(long, allow_hyphen_values = true)]
        interval: Option<String>,
        #[arg(long, default_value_t = 4000)]
        grid: usize,
    },
    /// regular M-function over a set of spectral points
    Mfun {
        #[command(flatten)]
        points: Points,
        #[arg(long, allow_hyphen_values = true)]
        ell: i64,
    },
    /// Weyl disk diameter and membership over an ell schedule
    Disk {
        #[command(flatten)]
        points: Points,
        /// comma-separated ell values
        #[arg(long, allow_hyphen_values = true)]
        ell: Option<String>,
        /// schedule k0 + ell_step, ..., k0 + ell_max when --ell is absent
        #[arg(long, allow_hyphen_values = true)]
        ell_max: Option<i64>,
        #[arg(long, default_value_t = 5)]
        ell_step: i64,
        /// circle points used for the diameter estimate
        #[arg(long, default_value_t = 8)]
        samples: usize,
        /// matrix tested for membership (inline JSON m x m); the circle point for --beta otherwise
        #[arg(long)]
        m_test: Option<String>,
    },
    /// half-line limits M_± and limit-point/limit-circle classification
    Limit {
        #[command(flatten)]
        points: Points,
        #[arg(long, default_value_t = 200)]
        ell_max: i64,
        #[arg(long, default_value_t = 10)]
        ell_step: i64,
        /// plus, minus or both
        #[arg(long, default_value = "both")]
        direction: String,
    },
    /// Green's kernel on site pairs with its delta-identity certificate
    Green {
        #[command(flatten)]
        kernel: KernelArgs,
        /// K:L pairs (default: all pairs in the window)
        #[arg(long, allow_hyphen_values = true)]
        pairs: Option<String>,
    },
    /// solution of the nonhomogeneous system through the kernel
    Solve {
        #[command(flatten)]
        kernel: KernelArgs,
        /// random (seeded) or delta:K
        #[arg(long, default_value = "random", allow_hyphen_values = true)]
        rhs: String,
    },
    /// spectral measure increments by Stieltjes inversion
    Measure {
        #[arg(long, allow_hyphen_values = true)]
        ell: i64,
        #[arg(long, allow_hyphen_values = true)]
        interval: String,
        #[arg(long, default_value_t = 200)]
        bins: usize,
        #[arg(long, default_value = "1e-4,1e-5,1e-6")]
        eps_schedule: String,
        /// height of the upper edge of the contour
        #[arg(long, default_value_t = 1.0)]
        height: f64,
        /// also bisect heavy bins down to point masses of at least this trace
        #[arg(long)]
        atoms: Option<f64>,
    },
    /// hat states of the fundamental system over a window
    Trajectory {
        #[arg(long, allow_hyphen_values = true)]
        z: String,
        #[arg(long, allow_hyphen_values = true)]
        window: String,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error(transparent)]
    Numerical(weylkit::Error),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

impl From<weylkit::Error> for CliError {
    fn from(e: weylkit::Error) -> Self {
        use weylkit::Error as E;
        match e {
            E::Input(_) | E::Domain { .. } | E::Unsupported(_) => CliError::Usage(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = &cli.common;
    let sys = commands::load(common)?;
    let report = match &cli.command {
        Command::Validate { points, window } => commands::validate(&sys, common, points, window.as_deref())?,
        Command::Eig { ell, interval, grid } => commands::eig(&sys, common, *ell, interval.as_deref(), *grid)?,
        Command::Mfun { points, ell } => commands::mfun(&sys, common, points, *ell)?,
        Command::Disk {
            points,
            ell,
            ell_max,
            ell_step,
            samples,
            m_test,
        } => commands::disk(&sys, common, points, ell.as_deref(), *ell_max, *ell_step, *samples, m_test.as_deref())?,
        Command::Limit {
            points,
            ell_max,
            ell_step,
            direction,
        } => commands::limit(&sys, common, points, *ell_max, *ell_step, direction)?,
        Command::Green { kernel, pairs } => commands::green(&sys, common, kernel, pairs.as_deref())?,
        Command::Solve { kernel, rhs } => commands::solve(&sys, common, kernel, rhs)?,
        Command::Measure {
            ell,
            interval,
            bins,
            eps_schedule,
            height,
            atoms,
        } => commands::measure(&sys, common, *ell, interval, *bins, eps_schedule, *height, *atoms)?,
        Command::Trajectory { z, window } => commands::trajectory(&sys, common, z, window)?,
    };
    let mut out: Box<dyn Write> = match &common.output {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    report.table.write(&mut out, common.format, !common.no_timestamp)?;
    out.flush()?;
    match report.failure {
        Some(why) => Err(CliError::Validation(why)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("weylkit: {e}");
            ExitCode::from(e.code())
        }
    }
}
