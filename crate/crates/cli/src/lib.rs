//! Command implementations behind the `sparse-ucc` binary.
//!
//! Each command loads an FCIDUMP, optionally windows it to the lowest
//! orbitals, runs one pipeline from `ucc-core` and writes its artifacts.
//! Files are only written once the whole computation has succeeded, each
//! through a temporary file that is renamed into place.

pub mod config;

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use ucc_core::diagnostics::{entropy_trace, md_convergence_sweep, replay_vs_ncut, SweepInputs, SweepResult};
use ucc_core::fcidump::fock_off_diagonal_max;
use ucc_core::hamiltonian::{sector_dimension, FCI_DIMENSION_LIMIT};
use ucc_core::optimizer::Status;
use ucc_core::{
    build_pool, fci_ground_energy, hartree_fock_reference, minimize, mp2_amplitudes, order_and_truncate,
    orbital_energies, AnsatzConfig, Determinant, EnergyReport, ExcitationOperator, Hamiltonian, IntegralStore,
    Mp2Amplitudes, OptimizerSettings, OrderedAnsatz, TruncationPolicy, UccObjective,
};

pub use config::{Cli, Command, RunConfig};

/// Fock off-diagonal elements above this trigger a warning.
const FOCK_WARNING: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] ucc_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Threads(#[from] rayon::ThreadPoolBuildError),
}

/// Successful command result; maps to the process exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    NotConverged,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Success => 0,
            Outcome::NotConverged => 2,
        }
    }
}

/// Artifacts collected during a command and written at the end.
#[derive(Default)]
struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
    stdout: Vec<u8>,
}

impl Outputs {
    fn file(&mut self, path: &Option<PathBuf>, bytes: Vec<u8>) {
        if let Some(path) = path {
            self.files.push((path.clone(), bytes));
        }
    }

    /// To `path` if given, otherwise to standard output.
    fn file_or_stdout(&mut self, path: &Option<PathBuf>, bytes: Vec<u8>) {
        match path {
            Some(path) => self.files.push((path.clone(), bytes)),
            None => self.stdout.extend(bytes),
        }
    }

    fn commit(self) -> Result<(), CliError> {
        for (path, bytes) in &self.files {
            write_atomic(path, bytes)?;
        }
        std::io::stdout()
            .write_all(&self.stdout)
            .map_err(|source| CliError::Io { path: "<stdout>".into(), source })
    }
}

/// Writes through a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |source| CliError::Io { path: path.to_path_buf(), source };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> ucc_core::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut bytes = Vec::new();
    write(&mut bytes)?;
    Ok(bytes)
}

/// Integrals, Hamiltonian and reference for one configuration.
pub struct Problem {
    pub store: IntegralStore,
    pub hamiltonian: Hamiltonian,
    pub reference: Determinant,
}

impl Problem {
    pub fn load(config: &RunConfig) -> Result<Self, CliError> {
        let path = &config.fcidump_path;
        let mut store = IntegralStore::from_path(path).map_err(|err| match err {
            ucc_core::Error::Io(source) => CliError::Io { path: path.clone(), source },
            other => other.into(),
        })?;
        if let Some(m) = config.max_orbitals {
            store = store.window(m)?;
        }
        let reference = hartree_fock_reference(store.n_orbitals(), store.n_alpha(), store.n_beta())?;
        let off = fock_off_diagonal_max(&store, reference);
        if off > FOCK_WARNING {
            log::warn!("orbitals are not canonical: largest Fock off-diagonal {off:.3e}; MP2 amplitudes are approximate");
        }
        let hamiltonian = Hamiltonian::new(&store);
        Ok(Self { store, hamiltonian, reference })
    }

    pub fn hartree_fock_energy(&self) -> f64 {
        self.hamiltonian.determinant_energy(self.reference)
    }

    pub fn mp2(&self) -> Result<Mp2Amplitudes, CliError> {
        let eps = orbital_energies(&self.store, self.reference);
        Ok(mp2_amplitudes(&self.hamiltonian, &eps, self.reference)?)
    }

    pub fn pool(&self) -> Vec<ExcitationOperator> {
        build_pool(self.store.n_orbitals(), self.reference)
    }

    /// MP2-initialized, ordered and cut ansatz.
    pub fn ansatz(&self, m_d: usize) -> Result<OrderedAnsatz, CliError> {
        let mp2 = self.mp2()?;
        Ok(order_and_truncate(&self.pool(), &mp2.amplitudes, AnsatzConfig { m_d }))
    }

    /// Parameters from `path`, checked against the configured ansatz.
    pub fn read_params(&self, path: &Path, m_d: usize) -> Result<OrderedAnsatz, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
        let params = OrderedAnsatz::from_json(&text)?;
        params.check_same_operators(&self.ansatz(m_d)?)?;
        Ok(params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizeReport {
    #[serde(flatten)]
    pub energy: EnergyReport,
    pub hartree_fock_energy: f64,
    pub status: Status,
    pub iterations: usize,
    pub n_parameters: usize,
    pub n_orbitals: usize,
    pub n_cut: Option<usize>,
    pub n_max: Option<usize>,
    pub m_d: usize,
}

#[derive(Serialize)]
struct SweepManifest<'a> {
    fcidump: &'a Path,
    n_orbitals: usize,
    hartree_fock_energy: f64,
    n_cut: Option<usize>,
    n_max: Option<usize>,
    m_d: usize,
    settings: Option<OptimizerSettings>,
    n_max_rule: Option<ucc_core::diagnostics::NMaxRule>,
    params_in: Option<&'a Path>,
    result: &'a SweepResult,
}

fn policy_fields(policy: &TruncationPolicy) -> (Option<usize>, Option<usize>) {
    if policy.is_unlimited() {
        (None, None)
    } else {
        (Some(policy.n_cut()), Some(policy.n_max()))
    }
}

/// Runs `command` on a thread pool of the configured size.
pub fn run(command: &Command) -> Result<Outcome, CliError> {
    let workers = match command {
        Command::Optimize(run)
        | Command::EntropyTrace(run)
        | Command::Fci(run)
        | Command::Mp2(run)
        | Command::Info(run)
        | Command::Replay { run, .. }
        | Command::SweepMd { run, .. } => run.workers,
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    pool.install(|| dispatch(command))
}

fn dispatch(command: &Command) -> Result<Outcome, CliError> {
    match command {
        Command::Optimize(run) => cmd_optimize(&RunConfig::from_args(run)?),
        Command::Replay { run, sweep } => {
            let config = RunConfig::from_args(run)?;
            cmd_replay(&config, &sweep.ncut, sweep.rule(run.n_max)?)
        }
        Command::EntropyTrace(run) => cmd_entropy_trace(&RunConfig::from_args(run)?),
        Command::Fci(run) => cmd_fci(&RunConfig::from_args(run)?),
        Command::Mp2(run) => cmd_mp2(&RunConfig::from_args(run)?),
        Command::SweepMd { run, md } => cmd_sweep_md(&RunConfig::from_args(run)?, md),
        Command::Info(run) => cmd_info(&RunConfig::from_args(run)?),
    }
}

pub fn cmd_optimize(config: &RunConfig) -> Result<Outcome, CliError> {
    let problem = Problem::load(config)?;
    let skeleton = match &config.params_in {
        Some(path) => problem.read_params(path, config.m_d)?,
        None => problem.ansatz(config.m_d)?,
    };
    log::info!(
        "{} parameters ({} doubles), {} orbitals",
        skeleton.len(),
        skeleton.n_doubles(),
        problem.store.n_orbitals()
    );
    let initial = skeleton.thetas();
    let objective = UccObjective::new(&problem.hamiltonian, problem.reference, skeleton.clone(), config.policy);
    let result = minimize(&objective, &initial, &config.settings)?;
    if let Some(last) = result.trace.records.last() {
        log::info!("{:?} after {:.2} s", result.trace.status, last.elapsed_seconds);
    }
    let state = objective.state(&result.theta)?;
    let (n_cut, n_max) = policy_fields(&config.policy);
    let report = OptimizeReport {
        energy: problem.hamiltonian.energy_report(&state, problem.reference)?,
        hartree_fock_energy: problem.hartree_fock_energy(),
        status: result.trace.status,
        iterations: result.trace.records.len() - 1,
        n_parameters: initial.len(),
        n_orbitals: problem.store.n_orbitals(),
        n_cut,
        n_max,
        m_d: config.m_d,
    };

    let mut out = Outputs::default();
    out.file_or_stdout(&config.report, json_bytes(&report)?);
    out.file(&config.trace, csv_bytes(|w| result.trace.write_csv(w))?);
    let optimized = skeleton.with_thetas(&result.theta)?;
    out.file(&config.params_out, optimized.to_json()?.into_bytes());
    out.commit()?;
    Ok(if result.trace.status.converged() { Outcome::Success } else { Outcome::NotConverged })
}

pub fn cmd_replay(
    config: &RunConfig,
    ncut_values: &[usize],
    rule: ucc_core::diagnostics::NMaxRule,
) -> Result<Outcome, CliError> {
    let problem = Problem::load(config)?;
    let path = config.params_in.as_deref().ok_or_else(|| CliError::Usage("replay needs --params-in".into()))?;
    let ansatz = problem.read_params(path, config.m_d)?;
    let result = replay_vs_ncut(&problem.hamiltonian, problem.reference, &ansatz, ncut_values, rule)?;
    let manifest = SweepManifest {
        fcidump: &config.fcidump_path,
        n_orbitals: problem.store.n_orbitals(),
        hartree_fock_energy: problem.hartree_fock_energy(),
        n_cut: None,
        n_max: None,
        m_d: config.m_d,
        settings: None,
        n_max_rule: Some(rule),
        params_in: Some(path),
        result: &result,
    };
    let mut out = Outputs::default();
    out.file_or_stdout(&config.trace, csv_bytes(|w| result.write_csv(w))?);
    out.file(&config.report, json_bytes(&manifest)?);
    out.commit()?;
    Ok(Outcome::Success)
}

pub fn cmd_entropy_trace(config: &RunConfig) -> Result<Outcome, CliError> {
    let problem = Problem::load(config)?;
    let path = config
        .params_in
        .as_deref()
        .ok_or_else(|| CliError::Usage("entropy-trace needs --params-in".into()))?;
    let ansatz = problem.read_params(path, config.m_d)?;
    let result = entropy_trace(problem.reference, &ansatz, &config.policy);
    let (n_cut, n_max) = policy_fields(&config.policy);
    let manifest = SweepManifest {
        fcidump: &config.fcidump_path,
        n_orbitals: problem.store.n_orbitals(),
        hartree_fock_energy: problem.hartree_fock_energy(),
        n_cut,
        n_max,
        m_d: config.m_d,
        settings: None,
        n_max_rule: None,
        params_in: Some(path),
        result: &result,
    };
    let mut out = Outputs::default();
    out.file_or_stdout(&config.trace, csv_bytes(|w| result.write_csv(w))?);
    out.file(&config.report, json_bytes(&manifest)?);
    out.commit()?;
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct FciReport {
    fci_energy: f64,
    correlation_energy: f64,
    dimension: usize,
    n_orbitals: usize,
    n_alpha: usize,
    n_beta: usize,
}

pub fn cmd_fci(config: &RunConfig) -> Result<Outcome, CliError> {
    let problem = Problem::load(config)?;
    let (m, na, nb) = (problem.store.n_orbitals(), problem.store.n_alpha(), problem.store.n_beta());
    let dimension = sector_dimension(m, na, nb);
    log::info!("FCI dimension {dimension} (limit {FCI_DIMENSION_LIMIT})");
    let fci_energy = fci_ground_energy(&problem.store, na, nb)?;
    let report = FciReport {
        fci_energy,
        correlation_energy: fci_energy - problem.hartree_fock_energy(),
        dimension,
        n_orbitals: m,
        n_alpha: na,
        n_beta: nb,
    };
    let mut out = Outputs::default();
    let bytes = json_bytes(&report)?;
    out.file(&config.report, bytes.clone());
    out.stdout = bytes;
    out.commit()?;
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct Mp2Report {
    hartree_fock_energy: f64,
    mp2_correlation_energy: f64,
    mp2_total_energy: f64,
    n_amplitudes: usize,
    n_parameters: usize,
}

pub fn cmd_mp2(config: &RunConfig) -> Result<Outcome, CliError> {
    let problem = Problem::load(config)?;
    let mp2 = problem.mp2()?;
    let ansatz = order_and_truncate(&problem.pool(), &mp2.amplitudes, AnsatzConfig { m_d: config.m_d });
    let hf = problem.hartree_fock_energy();
    let report = Mp2Report {
        hartree_fock_energy: hf,
        mp2_correlation_energy: mp2.energy,
        mp2_total_energy: hf + mp2.energy,
        n_amplitudes: mp2.amplitudes.len(),
        n_parameters: ansatz.len(),
    };
    let mut out = Outputs::default();
    let bytes = json_bytes(&report)?;
    out.file(&config.report, bytes.clone());
    out.stdout = bytes;
    out.file(&config.params_out, ansatz.to_json()?.into_bytes());
    out.commit()?;
    Ok(Outcome::Success)
}

pub fn cmd_sweep_md(config: &RunConfig, md_values: &[usize]) -> Result<Outcome, CliError> {
    let problem = Problem::load(config)?;
    let mp2 = problem.mp2()?;
    let pool = problem.pool();
    let inputs = SweepInputs {
        hamiltonian: &problem.hamiltonian,
        reference: problem.reference,
        pool: &pool,
        amplitudes: &mp2.amplitudes,
        settings: config.settings,
    };
    let result = md_convergence_sweep(&inputs, md_values, &config.policy)?;
    let (n_cut, n_max) = policy_fields(&config.policy);
    let manifest = SweepManifest {
        fcidump: &config.fcidump_path,
        n_orbitals: problem.store.n_orbitals(),
        hartree_fock_energy: problem.hartree_fock_energy(),
        n_cut,
        n_max,
        m_d: 0,
        settings: Some(config.settings),
        n_max_rule: None,
        params_in: None,
        result: &result,
    };
    let mut out = Outputs::default();
    out.file_or_stdout(&config.trace, csv_bytes(|w| result.write_csv(w))?);
    out.file(&config.report, json_bytes(&manifest)?);
    out.commit()?;
    let all_converged = result.energy_points().iter().all(|p| p.status.map(|s| s.converged()).unwrap_or(true));
    Ok(if all_converged { Outcome::Success } else { Outcome::NotConverged })
}

#[derive(Serialize)]
struct InfoReport {
    n_orbitals: usize,
    n_electrons: usize,
    ms2: i32,
    n_alpha: usize,
    n_beta: usize,
    core_energy: f64,
    hartree_fock_energy: f64,
    reference: String,
    pool_size: usize,
    n_singles: usize,
    n_doubles: usize,
    fci_dimension: usize,
    fock_off_diagonal_max: f64,
}

pub fn cmd_info(config: &RunConfig) -> Result<Outcome, CliError> {
    let problem = Problem::load(config)?;
    let s = &problem.store;
    let pool = problem.pool();
    let n_doubles = pool.iter().filter(|op| op.is_double()).count();
    let report = InfoReport {
        n_orbitals: s.n_orbitals(),
        n_electrons: s.n_electrons(),
        ms2: s.ms2(),
        n_alpha: s.n_alpha(),
        n_beta: s.n_beta(),
        core_energy: s.core_energy(),
        hartree_fock_energy: problem.hartree_fock_energy(),
        reference: problem.reference.render(s.n_orbitals()),
        pool_size: pool.len(),
        n_singles: pool.len() - n_doubles,
        n_doubles,
        fci_dimension: sector_dimension(s.n_orbitals(), s.n_alpha(), s.n_beta()),
        fock_off_diagonal_max: fock_off_diagonal_max(s, problem.reference),
    };
    let mut out = Outputs::default();
    let bytes = json_bytes(&report)?;
    out.file(&config.report, bytes.clone());
    out.stdout = bytes;
    out.commit()?;
    Ok(Outcome::Success)
}
