//! Slater-Condon matrix elements, Rayleigh-quotient energies of sparse
//! states, and a desk-scale FCI solver.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::determinant::{bits, enumerate_sector, binomial, Determinant};
use crate::error::{Error, Result};
use crate::fcidump::IntegralStore;
use crate::wavefunction::SparseWavefunction;

/// Largest determinant space the FCI solver accepts.
pub const FCI_DIMENSION_LIMIT: usize = 40_000;

/// Dimension up to which FCI uses a dense eigensolver instead of Lanczos.
const DENSE_FCI_LIMIT: usize = 600;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub total_energy: f64,
    pub correlation_energy: f64,
    pub norm: f64,
    pub n_det: usize,
}

/// Second-quantized electronic Hamiltonian over interleaved spin orbitals.
///
/// Holds a dense copy of the spatial integrals for fast lookup.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    n_orbitals: usize,
    core_energy: f64,
    h: Vec<f64>,
    eri: Vec<f64>,
}

impl Hamiltonian {
    pub fn new(store: &IntegralStore) -> Self {
        let m = store.n_orbitals();
        let mut h = vec![0.0; m * m];
        let mut eri = vec![0.0; m * m * m * m];
        for p in 0..m {
            for q in 0..m {
                h[p * m + q] = store.h(p, q);
                for r in 0..m {
                    for s in 0..m {
                        eri[((p * m + q) * m + r) * m + s] = store.eri(p, q, r, s);
                    }
                }
            }
        }
        Self { n_orbitals: m, core_energy: store.core_energy(), h, eri }
    }

    pub fn n_orbitals(&self) -> usize {
        self.n_orbitals
    }

    pub fn core_energy(&self) -> f64 {
        self.core_energy
    }

    #[inline]
    fn spatial_eri(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        let m = self.n_orbitals;
        self.eri[((p * m + q) * m + r) * m + s]
    }

    /// `h_st = δ_{σs σt} h_{p_s p_t}`.
    #[inline]
    pub fn one_body(&self, s: usize, t: usize) -> f64 {
        if (s ^ t) & 1 != 0 {
            return 0.0;
        }
        self.h[(s >> 1) * self.n_orbitals + (t >> 1)]
    }

    /// Antisymmetrized `⟨st||uv⟩` in physicists' notation.
    #[inline]
    pub fn antisym(&self, s: usize, t: usize, u: usize, v: usize) -> f64 {
        let (ps, pt, pu, pv) = (s >> 1, t >> 1, u >> 1, v >> 1);
        let mut value = 0.0;
        if (s ^ u) & 1 == 0 && (t ^ v) & 1 == 0 {
            value += self.spatial_eri(ps, pu, pt, pv);
        }
        if (s ^ v) & 1 == 0 && (t ^ u) & 1 == 0 {
            value -= self.spatial_eri(ps, pv, pt, pu);
        }
        value
    }

    /// `⟨d1|H|d2⟩` without the core energy.
    pub fn matrix_element(&self, d1: Determinant, d2: Determinant) -> Result<f64> {
        if d1.n_alpha() != d2.n_alpha() || d1.n_beta() != d2.n_beta() {
            return Err(Error::ElectronCountMismatch);
        }
        Ok(self.element(d1.spin_mask(), d2.spin_mask()))
    }

    pub fn diagonal(&self, det: Determinant) -> f64 {
        self.diagonal_mask(det.spin_mask())
    }

    fn diagonal_mask(&self, mask: u64) -> f64 {
        let mut value = 0.0;
        for s in bits(mask) {
            value += self.one_body(s, s);
            for t in bits(mask & ((1u64 << s) - 1)) {
                value += self.antisym(s, t, s, t);
            }
        }
        value
    }

    /// Slater-Condon rules on interleaved spin masks of equal popcount.
    pub(crate) fn element(&self, m1: u64, m2: u64) -> f64 {
        let diff = m1 ^ m2;
        match diff.count_ones() {
            0 => self.diagonal_mask(m1),
            2 => {
                // ⟨D1| a†_p a_q |D2⟩ = γ
                let p = (m1 & diff).trailing_zeros();
                let q = (m2 & diff).trailing_zeros();
                let mut m = m2 & !(1u64 << q);
                let mut odd = parity_below(m, q);
                odd ^= parity_below(m, p);
                m |= 1u64 << p;
                debug_assert_eq!(m, m1);
                let (p, q) = (p as usize, q as usize);
                let mut value = self.one_body(p, q);
                for u in bits(m1 & m2) {
                    value += self.antisym(p, u, q, u);
                }
                if odd {
                    -value
                } else {
                    value
                }
            }
            4 => {
                // ⟨D1| a†_p a†_r a_s a_q |D2⟩ = γ with p<r in D1, q<s in D2
                let extra1 = m1 & diff;
                let extra2 = m2 & diff;
                let p = extra1.trailing_zeros();
                let r = (extra1 & (extra1 - 1)).trailing_zeros();
                let q = extra2.trailing_zeros();
                let s = (extra2 & (extra2 - 1)).trailing_zeros();
                let mut m = m2 & !(1u64 << q);
                let mut odd = parity_below(m, q);
                m &= !(1u64 << s);
                odd ^= parity_below(m, s);
                odd ^= parity_below(m, r);
                m |= 1u64 << r;
                odd ^= parity_below(m, p);
                let value = self.antisym(p as usize, r as usize, q as usize, s as usize);
                if odd {
                    -value
                } else {
                    value
                }
            }
            _ => 0.0,
        }
    }

    /// Rayleigh quotient `core + ⟨Ψ|H|Ψ⟩ / ⟨Ψ|Ψ⟩` over the pairs of stored
    /// determinants within two excitations of each other.
    pub fn expectation_energy(&self, wf: &SparseWavefunction) -> Result<f64> {
        let masks: Vec<u64> = wf.dets.iter().map(Determinant::spin_mask).collect();
        let norm2 = norm_squared(&wf.amps)?;
        let rows: Vec<f64> = (0..masks.len())
            .into_par_iter()
            .map(|row| {
                let mut off = 0.0;
                let mi = masks[row];
                for (&mj, &cj) in masks[row + 1..].iter().zip(&wf.amps[row + 1..]) {
                    if (mi ^ mj).count_ones() <= 4 {
                        off += self.element(mi, mj) * cj;
                    }
                }
                let c = wf.amps[row];
                c * (self.diagonal_mask(mi) * c + 2.0 * off)
            })
            .collect();
        Ok(self.core_energy + rows.iter().sum::<f64>() / norm2)
    }

    /// Energy report relative to the single-determinant `reference`.
    pub fn energy_report(&self, wf: &SparseWavefunction, reference: Determinant) -> Result<EnergyReport> {
        let total_energy = self.expectation_energy(wf)?;
        Ok(self.report(total_energy, wf, reference))
    }

    pub(crate) fn report(&self, total_energy: f64, wf: &SparseWavefunction, reference: Determinant) -> EnergyReport {
        let reference_energy = self.core_energy + self.diagonal(reference);
        EnergyReport {
            total_energy,
            correlation_energy: total_energy - reference_energy,
            norm: wf.norm(),
            n_det: wf.len(),
        }
    }

    /// Total energy of a single determinant.
    pub fn determinant_energy(&self, det: Determinant) -> f64 {
        self.core_energy + self.diagonal(det)
    }
}

fn norm_squared(amps: &[f64]) -> Result<f64> {
    let norm2: f64 = amps.iter().map(|c| c * c).sum();
    if amps.is_empty() || norm2 == 0.0 {
        return Err(Error::EmptyWavefunction);
    }
    Ok(norm2)
}

#[inline]
fn parity_below(mask: u64, s: u32) -> bool {
    (mask & ((1u64 << s) - 1)).count_ones() & 1 == 1
}

/// Upper triangle of `H` restricted to a fixed, sorted determinant list.
///
/// Evaluating an energy through this matrix performs exactly the floating
/// point operations of [`Hamiltonian::expectation_energy`] in the same
/// order, so the two paths agree bit for bit.
#[derive(Clone, Debug)]
pub struct SparseHamiltonian {
    dets: Vec<Determinant>,
    diag: Vec<f64>,
    row_start: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    core_energy: f64,
}

impl SparseHamiltonian {
    pub fn build(ham: &Hamiltonian, dets: &[Determinant]) -> Self {
        let masks: Vec<u64> = dets.iter().map(Determinant::spin_mask).collect();
        let rows: Vec<(f64, Vec<(u32, f64)>)> = (0..masks.len())
            .into_par_iter()
            .map(|row| {
                let mi = masks[row];
                let entries = (row + 1..masks.len())
                    .filter(|&col| (mi ^ masks[col]).count_ones() <= 4)
                    .map(|col| (col as u32, ham.element(mi, masks[col])))
                    .collect();
                (ham.diagonal_mask(mi), entries)
            })
            .collect();
        let mut out = Self {
            dets: dets.to_vec(),
            diag: Vec::with_capacity(rows.len()),
            row_start: Vec::with_capacity(rows.len() + 1),
            cols: Vec::new(),
            vals: Vec::new(),
            core_energy: ham.core_energy,
        };
        out.row_start.push(0);
        for (d, entries) in rows {
            out.diag.push(d);
            for (c, v) in entries {
                out.cols.push(c);
                out.vals.push(v);
            }
            out.row_start.push(out.cols.len());
        }
        out
    }

    pub fn dimension(&self) -> usize {
        self.dets.len()
    }

    pub fn determinants(&self) -> &[Determinant] {
        &self.dets
    }

    /// Stored upper-triangle entries, excluding the diagonal.
    pub fn n_off_diagonal(&self) -> usize {
        self.cols.len()
    }

    /// Whether this matrix was built over exactly `dets`.
    pub fn matches(&self, dets: &[Determinant]) -> bool {
        self.dets == dets
    }

    /// Energy of `wf` if every one of its determinants is covered by this
    /// matrix. Absent rows and columns enter as exact zeros, which leaves
    /// every partial sum unchanged, so the result equals the direct
    /// evaluation bit for bit.
    pub fn energy_of_subset(&self, wf: &SparseWavefunction) -> Option<Result<f64>> {
        let mut padded = vec![0.0; self.dets.len()];
        let mut cursor = 0;
        for (det, amp) in wf.iter() {
            let offset = self.dets[cursor..].binary_search(&det).ok()?;
            cursor += offset;
            padded[cursor] = amp;
            cursor += 1;
        }
        Some(self.energy(&padded))
    }

    /// Rayleigh quotient plus core energy for amplitudes over `determinants()`.
    pub fn energy(&self, amps: &[f64]) -> Result<f64> {
        assert_eq!(amps.len(), self.dets.len());
        let norm2 = norm_squared(amps)?;
        let rows: Vec<f64> = (0..self.dets.len())
            .into_par_iter()
            .map(|row| {
                let mut off = 0.0;
                for k in self.row_start[row]..self.row_start[row + 1] {
                    off += self.vals[k] * amps[self.cols[k] as usize];
                }
                let c = amps[row];
                c * (self.diag[row] * c + 2.0 * off)
            })
            .collect();
        Ok(self.core_energy + rows.iter().sum::<f64>() / norm2)
    }

    /// `y = H x` without the core energy.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (row, out) in y.iter_mut().enumerate() {
            *out = self.diag[row] * x[row];
        }
        for row in 0..self.dets.len() {
            let mut acc = 0.0;
            for k in self.row_start[row]..self.row_start[row + 1] {
                let col = self.cols[k] as usize;
                acc += self.vals[k] * x[col];
                y[col] += self.vals[k] * x[row];
            }
            y[row] += acc;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dets.len();
        let mut dense = DMatrix::zeros(n, n);
        for row in 0..n {
            dense[(row, row)] = self.diag[row];
            for k in self.row_start[row]..self.row_start[row + 1] {
                let col = self.cols[k] as usize;
                dense[(row, col)] = self.vals[k];
                dense[(col, row)] = self.vals[k];
            }
        }
        dense
    }

    /// Lowest eigenvalue of the electronic part (no core energy).
    pub fn lowest_eigenvalue(&self) -> Result<f64> {
        if self.dimension() <= DENSE_FCI_LIMIT {
            Ok(dense_lowest(&self.to_dense()))
        } else {
            lanczos_lowest(self, 1e-9)
        }
    }
}

fn dense_lowest(matrix: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(matrix.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Lanczos with full reorthogonalization, started from the lowest diagonal
/// determinant plus a small deterministic spread over all others.
pub(crate) fn lanczos_lowest(matrix: &SparseHamiltonian, residual_tol: f64) -> Result<f64> {
    let n = matrix.dimension();
    let max_steps = n.min(500);
    let lowest = (0..n).min_by(|&a, &b| matrix.diag[a].total_cmp(&matrix.diag[b])).unwrap_or(0);
    let mut v: Vec<f64> = (0..n).map(|k| 1e-3 * ((k as f64 + 1.0) * 0.618_033_988_749_895).sin()).collect();
    v[lowest] += 1.0;
    scale_to_unit(&mut v);

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alphas = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut best = f64::INFINITY;
    for step in 0..max_steps {
        matrix.apply(&v, &mut w);
        let alpha = dot(&w, &v);
        axpy(-alpha, &v, &mut w);
        if let (Some(prev), Some(&beta)) = (basis.last(), betas.last()) {
            axpy(-beta, prev, &mut w);
        }
        basis.push(v.clone());
        for _ in 0..2 {
            for b in &basis {
                let overlap = dot(&w, b);
                axpy(-overlap, b, &mut w);
            }
        }
        alphas.push(alpha);
        let beta = dot(&w, &w).sqrt();

        let k = alphas.len();
        let mut tri = DMatrix::zeros(k, k);
        for t in 0..k {
            tri[(t, t)] = alphas[t];
            if t + 1 < k {
                tri[(t, t + 1)] = betas[t];
                tri[(t + 1, t)] = betas[t];
            }
        }
        let eig = SymmetricEigen::new(tri);
        let (idx, value) = eig
            .eigenvalues
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty tridiagonal");
        best = value;
        let residual = beta * eig.eigenvectors[(k - 1, idx)].abs();
        if residual < residual_tol || beta < 1e-14 || step + 1 == n {
            return Ok(best);
        }
        betas.push(beta);
        v = w.iter().map(|x| x / beta).collect();
    }
    Err(Error::Eigensolver(format!("Lanczos stalled after {max_steps} steps at {best}")))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn scale_to_unit(v: &mut [f64]) {
    let norm = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
}

/// Exact ground-state energy (including core energy) of the
/// `(n_alpha, n_beta)` sector.
pub fn fci_ground_energy(store: &IntegralStore, n_alpha: usize, n_beta: usize) -> Result<f64> {
    let m = store.n_orbitals();
    let dimension = binomial(m, n_alpha).saturating_mul(binomial(m, n_beta));
    if dimension > FCI_DIMENSION_LIMIT {
        return Err(Error::BasisTooLarge { dimension, limit: FCI_DIMENSION_LIMIT });
    }
    if dimension == 0 {
        return Err(Error::OrbitalSpace(format!("no determinants with {n_alpha}α/{n_beta}β in {m} orbitals")));
    }
    let ham = Hamiltonian::new(store);
    let dets = enumerate_sector(m, n_alpha, n_beta);
    let matrix = SparseHamiltonian::build(&ham, &dets);
    Ok(store.core_energy() + matrix.lowest_eigenvalue()?)
}

/// Dimension of the `(n_alpha, n_beta)` sector, saturating.
pub fn sector_dimension(n_orbitals: usize, n_alpha: usize, n_beta: usize) -> usize {
    binomial(n_orbitals, n_alpha).saturating_mul(binomial(n_orbitals, n_beta))
}
