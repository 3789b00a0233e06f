//! `hofa-lab`: batch front-end for hofa-core.

mod commands;
mod inputs;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hofa_core::{Caps, HofaError};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "hofa-lab", version, about = "Higher-order Fourier analysis over F_p^n at desk scale")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Clone, Serialize)]
pub struct Common {
    /// Primary input file.
    #[arg(long = "in", global = true)]
    #[serde(skip)]
    pub input: Option<PathBuf>,
    /// Report destination; stdout when absent.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Exact)]
    pub mode: ModeArg,
    /// Samples in sampled mode.
    #[arg(long, global = true, default_value_t = 10_000)]
    pub samples: u64,
    /// Seed for randomized steps; generated and printed when absent.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub seed: Option<u64>,
    /// Enumeration cap; takes precedence over HOFA_CAP.
    #[arg(long, global = true)]
    pub cap: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Exact,
    Sampled,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessArg {
    Homogeneous,
    Exact,
    WithConstants,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SubspaceArg {
    Linear,
    Affine,
}

#[derive(Subcommand, Clone, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Gowers norm of a real table or of e(P) for a polynomial.
    Gowers {
        #[arg(long, default_value_t = 2)]
        d: u32,
    },
    /// Pattern density in a coloring, or Λ_L density of a real table.
    Density {
        /// JSON {system, psi?}; without psi the input is a real table.
        #[arg(long)]
        #[serde(skip)]
        pattern: PathBuf,
        /// Count only tuples of independent points.
        #[arg(long)]
        generic: bool,
    },
    /// Complexity and translation invariance of a linear system.
    Complexity,
    /// Consistency set Φ_{d,k}(L) by enumeration over F_p^n.
    Consistency {
        #[arg(long, default_value_t = 1)]
        d: u32,
        #[arg(long, default_value_t = 0)]
        k: u32,
        #[arg(long, default_value_t = 4)]
        n_cap: usize,
        #[arg(long, value_enum, default_value_t = WitnessArg::Homogeneous)]
        witness: WitnessArg,
    },
    /// Analytic rank of a polynomial or of a factor.
    Rank {
        /// Derivative order for a single polynomial; its degree by default.
        #[arg(long)]
        d: Option<u32>,
    },
    /// Weak (η only), standard (with θ) or strong (with ζ) regularity.
    Regularize {
        #[arg(long, default_value_t = 1)]
        d: u32,
        #[arg(long, default_value_t = 0.1)]
        eta: f64,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        zeta: Option<f64>,
        /// Linear slots kept by the strong engine's selector.
        #[arg(long, default_value_t = 1)]
        c0: usize,
        #[arg(long, default_value_t = 64)]
        max_iterations: usize,
    },
    /// Homogeneous decomposition of a polynomial.
    Decompose,
    /// Removal recoloring against a forbidden pattern family.
    Recolor {
        /// JSON list of {system, psi}.
        #[arg(long)]
        #[serde(skip)]
        patterns: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long)]
        threshold: Option<f64>,
        /// Use the factor of this many coordinate forms instead of regularizing.
        #[arg(long)]
        linear: Option<usize>,
        #[arg(long, default_value_t = 1)]
        d: u32,
        #[arg(long, default_value_t = 0.1)]
        eta: f64,
        #[arg(long, default_value_t = 0.2)]
        theta: f64,
        #[arg(long, default_value_t = 0.25)]
        zeta: f64,
        #[arg(long, default_value_t = 1)]
        c0: usize,
        #[arg(long, default_value_t = 4096)]
        xi_budget: u64,
    },
    /// Subspace tester.
    Test {
        /// linearity | degree:T | allowable:FILE | forbidden:FILE
        #[arg(long)]
        property: String,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, value_enum, default_value_t = SubspaceArg::Linear)]
        subspace: SubspaceArg,
        /// Also report the exact per-trial rejection probability.
        #[arg(long)]
        exact: bool,
        /// Rejecting subspaces kept in the report.
        #[arg(long, default_value_t = 0)]
        witnesses: usize,
    },
    /// Runs the built-in invariant checks.
    Selftest,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Gowers { .. } => "gowers",
            Command::Density { .. } => "density",
            Command::Complexity => "complexity",
            Command::Consistency { .. } => "consistency",
            Command::Rank { .. } => "rank",
            Command::Regularize { .. } => "regularize",
            Command::Decompose => "decompose",
            Command::Recolor { .. } => "recolor",
            Command::Test { .. } => "test",
            Command::Selftest => "selftest",
        }
    }
}

/// Failure of a run, mapped to an exit code.
#[derive(Debug)]
pub enum CliError {
    Core(HofaError),
    Usage(String),
    Io(String),
}

impl From<HofaError> for CliError {
    fn from(e: HofaError) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_cap() => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Io(m) => write!(f, "{m}"),
        }
    }
}

fn caps_from(common: &Common) -> Result<Caps, CliError> {
    let mut caps = Caps::default();
    if let Ok(v) = std::env::var("HOFA_CAP") {
        caps.enumeration = v.trim().parse().map_err(|_| CliError::Usage(format!("HOFA_CAP is not an integer: {v:?}")))?;
    }
    if let Some(c) = common.cap {
        caps.enumeration = c;
    }
    Ok(caps)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = caps_from(&cli.common).and_then(|caps| commands::run(&cli.common, &cli.cmd, &caps));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
