//! Brute-force second quantization over occupation-number states.
//!
//! Operators are applied one creation or annihilation at a time with the
//! Jordan-Wigner sign, and matrices are assembled by acting on every basis
//! state. Nothing here uses the closed forms of the library.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use ucc_core::{Determinant, ExcitationOperator, IntegralStore};

#[derive(Clone, Copy, Debug)]
pub enum Ladder {
    Create(usize),
    Annihilate(usize),
}

/// Applies `ops` right to left (the last entry acts first).
pub fn apply_ops(state: u64, ops: &[Ladder]) -> Option<(u64, f64)> {
    let mut state = state;
    let mut sign = 1.0;
    for op in ops.iter().rev() {
        let (p, want_occupied) = match *op {
            Ladder::Create(p) => (p, false),
            Ladder::Annihilate(p) => (p, true),
        };
        let bit = 1u64 << p;
        if (state & bit != 0) != want_occupied {
            return None;
        }
        if (state & (bit - 1)).count_ones() % 2 == 1 {
            sign = -sign;
        }
        state ^= bit;
    }
    Some((state, sign))
}

/// Operator string of `A`.
pub fn excitation_string(op: &ExcitationOperator) -> Vec<Ladder> {
    use Ladder::*;
    match *op {
        ExcitationOperator::Single { i, a } => vec![Create(a.into()), Annihilate(i.into())],
        ExcitationOperator::Double { i, j, a, b } => {
            vec![Create(a.into()), Create(b.into()), Annihilate(j.into()), Annihilate(i.into())]
        }
    }
}

/// Hermitian adjoint of an operator string.
pub fn adjoint(ops: &[Ladder]) -> Vec<Ladder> {
    ops.iter()
        .rev()
        .map(|op| match *op {
            Ladder::Create(p) => Ladder::Annihilate(p),
            Ladder::Annihilate(p) => Ladder::Create(p),
        })
        .collect()
}

pub struct Basis {
    pub states: Vec<u64>,
    index: HashMap<u64, usize>,
}

impl Basis {
    /// All interleaved spin masks with the given counts, in canonical
    /// determinant order.
    pub fn sector(n_orbitals: usize, n_alpha: usize, n_beta: usize) -> Self {
        let mut dets = Vec::new();
        for alpha in 0u32..1 << n_orbitals {
            for beta in 0u32..1 << n_orbitals {
                if alpha.count_ones() as usize == n_alpha && beta.count_ones() as usize == n_beta {
                    dets.push(Determinant::new(alpha, beta));
                }
            }
        }
        dets.sort();
        let states: Vec<u64> = dets.iter().map(Determinant::spin_mask).collect();
        let index = states.iter().enumerate().map(|(k, &s)| (s, k)).collect();
        Self { states, index }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn position(&self, state: u64) -> usize {
        self.index[&state]
    }

    pub fn det(&self, k: usize) -> Determinant {
        Determinant::from_spin_mask(self.states[k])
    }

    /// Matrix of a sum of weighted operator strings.
    pub fn matrix(&self, terms: &[(f64, Vec<Ladder>)]) -> DMatrix<f64> {
        let n = self.len();
        let mut out = DMatrix::zeros(n, n);
        for (col, &state) in self.states.iter().enumerate() {
            for (weight, ops) in terms {
                if let Some((image, sign)) = apply_ops(state, ops) {
                    let row = self.index.get(&image).expect("operator leaves the sector");
                    out[(*row, col)] += weight * sign;
                }
            }
        }
        out
    }

    /// Electronic Hamiltonian without core energy.
    pub fn hamiltonian(&self, store: &IntegralStore) -> DMatrix<f64> {
        use Ladder::*;
        let m = store.n_orbitals();
        let n_spin = 2 * m;
        let mut terms = Vec::new();
        for s in 0..n_spin {
            for t in 0..n_spin {
                if s % 2 == t % 2 {
                    terms.push((store.h(s / 2, t / 2), vec![Create(s), Annihilate(t)]));
                }
            }
        }
        // ½ Σ (pq|rs) a†_pσ a†_rτ a_sτ a_qσ
        for s in 0..n_spin {
            for u in 0..n_spin {
                if s % 2 != u % 2 {
                    continue;
                }
                for t in 0..n_spin {
                    for v in 0..n_spin {
                        if t % 2 != v % 2 {
                            continue;
                        }
                        let value = store.eri(s / 2, u / 2, t / 2, v / 2);
                        if value != 0.0 {
                            terms.push((0.5 * value, vec![Create(s), Create(t), Annihilate(v), Annihilate(u)]));
                        }
                    }
                }
            }
        }
        self.matrix(&terms)
    }

    /// `A − A†` for one excitation.
    pub fn generator(&self, op: &ExcitationOperator) -> DMatrix<f64> {
        let a = excitation_string(op);
        let a_dag = adjoint(&a);
        self.matrix(&[(1.0, a), (-1.0, a_dag)])
    }

    pub fn vector(&self, entries: impl IntoIterator<Item = (Determinant, f64)>) -> DVector<f64> {
        let mut out = DVector::zeros(self.len());
        for (det, c) in entries {
            out[self.position(det.spin_mask())] += c;
        }
        out
    }
}

/// `exp(θ G)` for the real antisymmetric `G`.
pub fn rotation(generator: &DMatrix<f64>, theta: f64) -> DMatrix<f64> {
    (generator * theta).exp()
}

/// Random integrals with the full eight-fold symmetry.
pub fn random_store(rng: &mut impl Rng, n_orbitals: usize, n_electrons: usize) -> IntegralStore {
    let ms2 = (n_electrons % 2) as i32;
    let mut store = IntegralStore::new(n_orbitals, n_electrons, ms2).expect("store");
    store.set_core_energy(rng.gen_range(-1.0..1.0));
    for p in 1..=n_orbitals {
        for q in 1..=p {
            let diagonal = if p == q { -2.0 + 0.4 * p as f64 } else { 0.0 };
            store.set_one_electron(p, q, diagonal + rng.gen_range(-0.3..0.3)).unwrap();
        }
    }
    for p in 1..=n_orbitals {
        for q in 1..=p {
            for r in 1..=n_orbitals {
                for s in 1..=r {
                    if (p, q) >= (r, s) {
                        let base = if p == q && r == s { 0.5 } else { 0.0 };
                        store.set_two_electron(p, q, r, s, base + rng.gen_range(-0.2..0.2)).unwrap();
                    }
                }
            }
        }
    }
    store
}
