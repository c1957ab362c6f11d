//! Fixture loading shared by the benchmarks.

use std::path::PathBuf;

use ucc_core::{
    build_pool, hartree_fock_reference, mp2_amplitudes, order_and_truncate, orbital_energies, AnsatzConfig,
    Determinant, Hamiltonian, IntegralStore, OrderedAnsatz,
};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub struct Case {
    pub hamiltonian: Hamiltonian,
    pub reference: Determinant,
    /// MP2-ordered, MP2 angles.
    pub ansatz: OrderedAnsatz,
}

impl Case {
    pub fn load(name: &str) -> Self {
        let store = IntegralStore::from_path(fixture(&format!("{name}.fcidump"))).expect("fixture parses");
        let reference = hartree_fock_reference(store.n_orbitals(), store.n_alpha(), store.n_beta()).expect("reference");
        let hamiltonian = Hamiltonian::new(&store);
        let mp2 = mp2_amplitudes(&hamiltonian, &orbital_energies(&store, reference), reference).expect("mp2");
        let pool = build_pool(store.n_orbitals(), reference);
        let ansatz = order_and_truncate(&pool, &mp2.amplitudes, AnsatzConfig { m_d: 0 });
        Self { hamiltonian, reference, ansatz }
    }

    /// The committed optimized NH3 angles.
    pub fn nh3_optimized() -> Self {
        let mut case = Self::load("nh3");
        let text = std::fs::read_to_string(fixture("nh3_optimized_params.json")).expect("params fixture");
        let params = OrderedAnsatz::from_json(&text).expect("params parse");
        params.check_same_operators(&case.ansatz).expect("same operators");
        case.ansatz = params;
        case
    }
}
