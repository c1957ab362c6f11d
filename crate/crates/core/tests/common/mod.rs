#![allow(dead_code)]

pub mod oracle;

use std::path::PathBuf;

use serde_json::Value;
use ucc_core::{hartree_fock_reference, Determinant, IntegralStore};

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn store(name: &str) -> IntegralStore {
    IntegralStore::from_path(fixture_dir().join(format!("{name}.fcidump"))).expect("fixture parses")
}

pub fn manifest(name: &str) -> Value {
    let text = std::fs::read_to_string(fixture_dir().join(format!("{name}.json"))).expect("manifest");
    serde_json::from_str(&text).expect("manifest json")
}

pub fn manifest_f64(name: &str, key: &str) -> f64 {
    manifest(name)[key].as_f64().unwrap_or_else(|| panic!("{name}: {key}"))
}

pub fn reference(store: &IntegralStore) -> Determinant {
    hartree_fock_reference(store.n_orbitals(), store.n_alpha(), store.n_beta()).unwrap()
}
