use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("FCIDUMP line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("orbital index {index} outside 1..={n_orbitals}")]
    IndexOutOfRange { index: usize, n_orbitals: usize },

    #[error("invalid orbital space: {0}")]
    OrbitalSpace(String),

    #[error("invalid excitation operator: {0}")]
    InvalidOperator(String),

    #[error("determinants have different electron counts")]
    ElectronCountMismatch,

    #[error("wavefunction is empty or has zero norm")]
    EmptyWavefunction,

    #[error("FCI basis of dimension {dimension} exceeds the limit of {limit}")]
    BasisTooLarge { dimension: usize, limit: usize },

    #[error("degenerate orbitals: vanishing MP2 denominator {denominator:e} for {quadruple}")]
    DegenerateOrbitals { quadruple: String, denominator: f64 },

    #[error("expected {expected} parameters, got {found}")]
    ParameterCount { expected: usize, found: usize },

    #[error("non-finite energy at iterate {iteration}")]
    NonFiniteEnergy { iteration: usize },

    #[error("invalid truncation policy: n_cut={n_cut}, n_max={n_max}")]
    InvalidPolicy { n_cut: usize, n_max: usize },

    #[error("{0}")]
    InvalidInput(String),

    #[error("eigensolver did not converge: {0}")]
    Eigensolver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
