//! Sparse-wavefunction simulation of the factorized unitary coupled cluster
//! (UCCSD) ansatz.
//!
//! The crate keeps the wavefunction as a sorted list of Slater determinants
//! with real amplitudes and applies each exponential UCC factor in closed
//! form as a planar rotation between determinant pairs. Cost is controlled by
//! truncating the ansatz to the `M_D` doubles with the largest MP2 amplitudes
//! and by pruning the wavefunction to `N_CUT` determinants whenever it grows
//! past `N_MAX`.
//!
//! Module map:
//!
//! - [`fcidump`]: molecular integrals from FCIDUMP files, orbital energies.
//! - [`determinant`]: occupation bitmasks and fermionic excitation algebra.
//! - [`wavefunction`]: the sparse state, its entropy and truncation policy.
//! - [`hamiltonian`]: Slater-Condon rules, Rayleigh-quotient energies and a
//!   small-system FCI solver used as a verification oracle.
//! - [`ansatz`]: operator pool, MP2 initialization, ordering and factor
//!   application.
//! - [`optimizer`]: L-BFGS minimization with central-difference gradients.
//! - [`diagnostics`]: entropy traces, `M_D` sweeps and fixed-parameter replay.

pub mod ansatz;
pub mod determinant;
pub mod diagnostics;
pub mod error;
pub mod fcidump;
pub mod hamiltonian;
pub mod optimizer;
pub mod wavefunction;

pub use ansatz::{
    apply_ansatz, apply_factor, build_pool, mp2_amplitudes, order_and_truncate, AnsatzConfig,
    Mp2Amplitudes, OrderedAnsatz, UccFactor,
};
pub use determinant::{hartree_fock_reference, Determinant, ExcitationOperator, SignedDeterminant};
pub use error::{Error, Result};
pub use fcidump::{orbital_energies, IntegralStore, OrbitalEnergies, MAX_ORBITALS};
pub use hamiltonian::{fci_ground_energy, EnergyReport, Hamiltonian};
pub use optimizer::{minimize, OptimizationResult, OptimizationTrace, OptimizerSettings, UccObjective};
pub use wavefunction::{SparseWavefunction, TruncationPolicy};
