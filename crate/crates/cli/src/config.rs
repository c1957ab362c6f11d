//! Command-line arguments and the validated run configuration.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ucc_core::diagnostics::NMaxRule;
use ucc_core::{OptimizerSettings, TruncationPolicy, MAX_ORBITALS};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "sparse-ucc", version, about = "Sparse-wavefunction UCCSD optimization and diagnostics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// MP2 start, ordering, truncation and minimization.
    Optimize(RunArgs),
    /// Energies of fixed parameters under a list of N_CUT values.
    Replay {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        sweep: ReplayArgs,
    },
    /// Entropy and determinant count after every factor.
    EntropyTrace(RunArgs),
    /// Exact ground-state energy of the windowed problem.
    Fci(RunArgs),
    /// MP2 correlation energy; `--params-out` writes the MP2-ordered ansatz.
    Mp2(RunArgs),
    /// One optimization per M_D value.
    SweepMd {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated, strictly increasing; each value is an exact count of doubles.
        #[arg(long, value_delimiter = ',', required = true)]
        md: Vec<usize>,
    },
    /// Header, reference energy and pool size.
    Info(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub fcidump: PathBuf,
    /// Survivor count after truncation.
    #[arg(long)]
    pub n_cut: Option<usize>,
    /// Truncate once the state holds more than this many determinants.
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Doubles kept in the ansatz, largest MP2 amplitude first; 0 keeps all.
    #[arg(long, default_value_t = 0)]
    pub m_d: usize,
    /// Keep only the lowest spatial orbitals.
    #[arg(long)]
    pub max_orbitals: Option<usize>,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub grad_step: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol_energy: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol_grad: f64,
    #[arg(long)]
    pub params_in: Option<PathBuf>,
    #[arg(long)]
    pub params_out: Option<PathBuf>,
    /// JSON report path.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// CSV path for the iteration trace or sweep table.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleKind {
    /// N_MAX from `--n-max`, raised to N_CUT where needed.
    Fixed,
    /// N_MAX equal to each N_CUT.
    MatchCut,
    /// No truncation at all.
    Unlimited,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// Comma-separated, strictly increasing N_CUT values.
    #[arg(long, value_delimiter = ',', required = true)]
    pub ncut: Vec<usize>,
    #[arg(long, value_enum, default_value_t = RuleKind::MatchCut)]
    pub n_max_rule: RuleKind,
}

impl ReplayArgs {
    pub fn rule(&self, n_max: Option<usize>) -> Result<NMaxRule, CliError> {
        Ok(match self.n_max_rule {
            RuleKind::Fixed => NMaxRule::Fixed(
                n_max.ok_or_else(|| CliError::Usage("--n-max-rule fixed needs --n-max".into()))?,
            ),
            RuleKind::MatchCut => NMaxRule::MatchCut,
            RuleKind::Unlimited => NMaxRule::Unlimited,
        })
    }
}

/// Everything a pipeline needs, checked.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub fcidump_path: PathBuf,
    pub policy: TruncationPolicy,
    pub m_d: usize,
    pub max_orbitals: Option<usize>,
    pub settings: OptimizerSettings,
    pub params_in: Option<PathBuf>,
    pub params_out: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub workers: usize,
}

impl RunConfig {
    pub fn from_args(args: &RunArgs) -> Result<Self, CliError> {
        let policy = match (args.n_cut, args.n_max) {
            (None, None) => TruncationPolicy::unlimited(),
            (Some(n), None) | (None, Some(n)) => TruncationPolicy::new(n, n)?,
            (Some(n_cut), Some(n_max)) => TruncationPolicy::new(n_cut, n_max)?,
        };
        if let Some(m) = args.max_orbitals {
            if m == 0 || m > MAX_ORBITALS {
                return Err(CliError::Usage(format!("--max-orbitals must be in 1..={MAX_ORBITALS}, got {m}")));
            }
        }
        let settings = OptimizerSettings {
            gradient_step: args.grad_step,
            energy_tolerance: args.tol_energy,
            gradient_tolerance: args.tol_grad,
            max_iterations: args.max_iter,
            ..OptimizerSettings::default()
        };
        settings.validate()?;
        Ok(Self {
            fcidump_path: args.fcidump.clone(),
            policy,
            m_d: args.m_d,
            max_orbitals: args.max_orbitals,
            settings,
            params_in: args.params_in.clone(),
            params_out: args.params_out.clone(),
            report: args.report.clone(),
            trace: args.trace.clone(),
            workers: args.workers,
        })
    }
}
