//! Factorized UCCSD ansatz: operator pool, MP2 initialization, ordering and
//! the closed-form action of each exponential factor.
//!
//! A factor `exp(θ(A − A†))` for a particle-hole excitation `A` couples each
//! determinant `D` with `A|D⟩ = p|D̄⟩` to its partner `D̄` and leaves every
//! other determinant alone. On each such pair it acts as the rotation
//!
//! ```text
//! c'_D = cos θ · c_D − p sin θ · c_D̄
//! c'_D̄ = cos θ · c_D̄ + p sin θ · c_D
//! ```
//!
//! so applying a factor costs one pass over the stored determinants.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::determinant::{bits, spin_of, Determinant, ExcitationOperator};
use crate::error::{Error, Result};
use crate::fcidump::OrbitalEnergies;
use crate::hamiltonian::Hamiltonian;
use crate::wavefunction::{SparseWavefunction, TruncationPolicy, DROP_THRESHOLD};

/// One exponential factor of the product ansatz.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UccFactor {
    pub op: ExcitationOperator,
    pub theta: f64,
    /// Position of `op` in the pool it was drawn from.
    pub pool_index: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AnsatzConfig {
    /// Number of doubles kept, largest MP2 amplitude first; 0 keeps all.
    pub m_d: usize,
}

/// Factors in application order: the first entry acts on the reference first.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OrderedAnsatz {
    pub factors: Vec<UccFactor>,
}

impl OrderedAnsatz {
    pub fn new(factors: Vec<UccFactor>) -> Self {
        Self { factors }
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.factors.iter().map(|f| f.theta).collect()
    }

    pub fn set_thetas(&mut self, thetas: &[f64]) -> Result<()> {
        if thetas.len() != self.factors.len() {
            return Err(Error::ParameterCount { expected: self.factors.len(), found: thetas.len() });
        }
        for (factor, &theta) in self.factors.iter_mut().zip(thetas) {
            factor.theta = theta;
        }
        Ok(())
    }

    pub fn with_thetas(&self, thetas: &[f64]) -> Result<Self> {
        let mut out = self.clone();
        out.set_thetas(thetas)?;
        Ok(out)
    }

    pub fn n_doubles(&self) -> usize {
        self.factors.iter().filter(|f| f.op.is_double()).count()
    }

    pub fn n_singles(&self) -> usize {
        self.len() - self.n_doubles()
    }

    /// Fails on the first operator present in only one of the two ansätze.
    pub fn check_same_operators(&self, expected: &OrderedAnsatz) -> Result<()> {
        let ours: BTreeSet<_> = self.factors.iter().map(|f| f.op).collect();
        let theirs: BTreeSet<_> = expected.factors.iter().map(|f| f.op).collect();
        if ours.len() != self.factors.len() {
            return Err(Error::InvalidInput("parameter file repeats an operator".into()));
        }
        if let Some(op) = self.factors.iter().map(|f| f.op).find(|op| !theirs.contains(op)) {
            return Err(Error::InvalidInput(format!("operator {op} is not in the configured ansatz")));
        }
        if let Some(op) = expected.factors.iter().map(|f| f.op).find(|op| !ours.contains(op)) {
            return Err(Error::InvalidInput(format!("operator {op} missing from parameter file")));
        }
        Ok(())
    }

    pub fn to_records(&self) -> Vec<FactorRecord> {
        self.factors.iter().map(FactorRecord::from).collect()
    }

    pub fn from_records(records: &[FactorRecord]) -> Result<Self> {
        let factors = records.iter().map(UccFactor::try_from).collect::<Result<Vec<_>>>()?;
        let indices: BTreeSet<_> = factors.iter().map(|f| f.pool_index).collect();
        if indices.len() != factors.len() {
            return Err(Error::InvalidInput("duplicate pool_index in parameter file".into()));
        }
        Ok(Self { factors })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(&self.to_records())?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let records: Vec<FactorRecord> = serde_json::from_str(text)?;
        Self::from_records(&records)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FactorKind {
    Single,
    Double,
}

/// One entry of the parameter file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorRecord {
    pub kind: FactorKind,
    pub i: usize,
    pub j: Option<usize>,
    pub a: usize,
    pub b: Option<usize>,
    pub theta: f64,
    pub pool_index: usize,
}

impl From<&UccFactor> for FactorRecord {
    fn from(factor: &UccFactor) -> Self {
        let (kind, i, j, a, b) = match factor.op {
            ExcitationOperator::Single { i, a } => (FactorKind::Single, i, None, a, None),
            ExcitationOperator::Double { i, j, a, b } => (FactorKind::Double, i, Some(j), a, Some(b)),
        };
        Self {
            kind,
            i: i.into(),
            j: j.map(usize::from),
            a: a.into(),
            b: b.map(usize::from),
            theta: factor.theta,
            pool_index: factor.pool_index,
        }
    }
}

impl TryFrom<&FactorRecord> for UccFactor {
    type Error = Error;

    fn try_from(record: &FactorRecord) -> Result<Self> {
        let op = match (record.kind, record.j, record.b) {
            (FactorKind::Single, None, None) => ExcitationOperator::single(record.i, record.a)?,
            (FactorKind::Double, Some(j), Some(b)) => {
                let op = ExcitationOperator::double(record.i, j, record.a, b)?;
                if record.i > j || record.a > b {
                    return Err(Error::InvalidOperator(format!("{op} not stored in canonical order")));
                }
                op
            }
            _ => {
                return Err(Error::InvalidOperator(format!(
                    "record {} has fields inconsistent with its kind",
                    record.pool_index
                )))
            }
        };
        if !record.theta.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite theta for {op}")));
        }
        Ok(Self { op, theta: record.theta, pool_index: record.pool_index })
    }
}

/// All spin-conserving singles, then all canonical spin-conserving doubles,
/// from the occupied spin orbitals of `reference` into the virtual ones.
pub fn build_pool(n_orbitals: usize, reference: Determinant) -> Vec<ExcitationOperator> {
    let all = if n_orbitals >= 32 { u64::MAX } else { (1u64 << (2 * n_orbitals)) - 1 };
    let occ: Vec<usize> = reference.occupied().collect();
    let vir: Vec<usize> = bits(all & !reference.spin_mask()).collect();
    let mut pool = Vec::new();
    for &i in &occ {
        for &a in &vir {
            if spin_of(i) == spin_of(a) {
                pool.push(ExcitationOperator::Single { i: i as u8, a: a as u8 });
            }
        }
    }
    for (x, &i) in occ.iter().enumerate() {
        for &j in &occ[x + 1..] {
            for (y, &a) in vir.iter().enumerate() {
                for &b in &vir[y + 1..] {
                    if spin_of(i) + spin_of(j) == spin_of(a) + spin_of(b) {
                        pool.push(ExcitationOperator::Double { i: i as u8, j: j as u8, a: a as u8, b: b as u8 });
                    }
                }
            }
        }
    }
    pool
}

/// First-order doubles amplitudes and the second-order energy.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Mp2Amplitudes {
    /// `t_ij^ab` for every canonical double; singles map to zero.
    pub amplitudes: BTreeMap<ExcitationOperator, f64>,
    /// `¼ Σ |⟨ij||ab⟩|² / (ε_i + ε_j − ε_a − ε_b)` over all ordered quadruples.
    pub energy: f64,
}

/// `t_ij^ab = ⟨ij||ab⟩ / (ε_i + ε_j − ε_a − ε_b)`.
///
/// With the operator order `a†_a a†_b a_j a_i`, `θ = t` reproduces the
/// first-order wavefunction to leading order in `θ`.
pub fn mp2_amplitudes(ham: &Hamiltonian, eps: &OrbitalEnergies, reference: Determinant) -> Result<Mp2Amplitudes> {
    let m = ham.n_orbitals();
    let mut amplitudes = BTreeMap::new();
    for op in build_pool(m, reference) {
        let t = match op {
            ExcitationOperator::Single { .. } => 0.0,
            ExcitationOperator::Double { i, j, a, b } => {
                let (i, j, a, b) = (i as usize, j as usize, a as usize, b as usize);
                let delta = eps.get(i) + eps.get(j) - eps.get(a) - eps.get(b);
                if delta.abs() < 1e-10 {
                    return Err(Error::DegenerateOrbitals { quadruple: op.to_string(), denominator: delta });
                }
                ham.antisym(i, j, a, b) / delta
            }
        };
        amplitudes.insert(op, t);
    }

    let all = if m >= 32 { u64::MAX } else { (1u64 << (2 * m)) - 1 };
    let occ: Vec<usize> = reference.occupied().collect();
    let vir: Vec<usize> = bits(all & !reference.spin_mask()).collect();
    let mut energy = 0.0;
    for &i in &occ {
        for &j in &occ {
            if i == j {
                continue;
            }
            for &a in &vir {
                for &b in &vir {
                    if a == b {
                        continue;
                    }
                    let g = ham.antisym(i, j, a, b);
                    if g != 0.0 {
                        energy += g * g / (eps.get(i) + eps.get(j) - eps.get(a) - eps.get(b));
                    }
                }
            }
        }
    }
    Ok(Mp2Amplitudes { amplitudes, energy: 0.25 * energy })
}

/// Doubles ordered by descending `|t|` (ties by pool index), cut to `m_d`,
/// followed by every single at `θ = 0` in pool order.
pub fn order_and_truncate(
    pool: &[ExcitationOperator],
    amplitudes: &BTreeMap<ExcitationOperator, f64>,
    config: AnsatzConfig,
) -> OrderedAnsatz {
    let mut doubles: Vec<UccFactor> = pool
        .iter()
        .enumerate()
        .filter(|(_, op)| op.is_double())
        .map(|(k, op)| UccFactor { op: *op, theta: amplitudes.get(op).copied().unwrap_or(0.0), pool_index: k })
        .collect();
    doubles.sort_by(|x, y| y.theta.abs().total_cmp(&x.theta.abs()).then(x.pool_index.cmp(&y.pool_index)));
    if config.m_d > 0 {
        doubles.truncate(config.m_d);
    }
    let singles = pool
        .iter()
        .enumerate()
        .filter(|(_, op)| !op.is_double())
        .map(|(k, op)| UccFactor { op: *op, theta: 0.0, pool_index: k });
    doubles.extend(singles);
    OrderedAnsatz { factors: doubles }
}

/// Returns `exp(θ(A − A†))|wf⟩`.
pub fn apply_factor(wf: &SparseWavefunction, factor: &UccFactor) -> SparseWavefunction {
    let mut out = wf.clone();
    apply_factor_in_place(&mut out, &factor.op, factor.theta);
    out
}

/// In-place form of [`apply_factor`]; amplitudes at or below the drop
/// threshold are removed afterwards.
pub fn apply_factor_in_place(wf: &mut SparseWavefunction, op: &ExcitationOperator, theta: f64) {
    if theta == 0.0 {
        return;
    }
    let (sin, cos) = theta.sin_cos();
    let holes = Determinant::from_spin_mask(op.hole_mask());
    let particles = Determinant::from_spin_mask(op.particle_mask());
    let (ha, hb) = (holes.alpha_mask(), holes.beta_mask());
    let (pa, pb) = (particles.alpha_mask(), particles.beta_mask());

    let mut created: Vec<(Determinant, f64)> = Vec::new();
    let mut shrunk = false;
    for k in 0..wf.dets.len() {
        let det = wf.dets[k];
        let (da, db) = (det.alpha_mask(), det.beta_mask());
        let occupied_holes = da & ha == ha && db & hb == hb;
        let empty_particles = da & pa == 0 && db & pb == 0;
        if occupied_holes && empty_particles {
            let (mask, odd) = op.excite_mask(det.spin_mask()).expect("excitation applies");
            let phase = if odd { -1.0 } else { 1.0 };
            let upper = Determinant::from_spin_mask(mask);
            let lower_amp = wf.amps[k];
            match wf.dets.binary_search(&upper) {
                Ok(u) => {
                    let upper_amp = wf.amps[u];
                    wf.amps[k] = cos * lower_amp - phase * sin * upper_amp;
                    wf.amps[u] = cos * upper_amp + phase * sin * lower_amp;
                    shrunk |= wf.amps[k].abs() <= DROP_THRESHOLD || wf.amps[u].abs() <= DROP_THRESHOLD;
                }
                Err(_) => {
                    wf.amps[k] = cos * lower_amp;
                    shrunk |= wf.amps[k].abs() <= DROP_THRESHOLD;
                    created.push((upper, phase * sin * lower_amp));
                }
            }
        } else if da & pa == pa && db & pb == pb && da & ha == 0 && db & hb == 0 {
            let (mask, odd) = op.deexcite_mask(det.spin_mask()).expect("de-excitation applies");
            let lower = Determinant::from_spin_mask(mask);
            if wf.dets.binary_search(&lower).is_ok() {
                // rotated together with its partner
                continue;
            }
            let phase = if odd { -1.0 } else { 1.0 };
            let upper_amp = wf.amps[k];
            wf.amps[k] = cos * upper_amp;
            shrunk |= wf.amps[k].abs() <= DROP_THRESHOLD;
            created.push((lower, -phase * sin * upper_amp));
        }
    }
    if shrunk {
        wf.drop_small();
    }
    created.retain(|(_, c)| c.abs() > DROP_THRESHOLD);
    if !created.is_empty() {
        merge_sorted(wf, created);
    }
}

fn merge_sorted(wf: &mut SparseWavefunction, mut created: Vec<(Determinant, f64)>) {
    created.sort_unstable_by_key(|x| x.0);
    let n = wf.dets.len() + created.len();
    let mut dets = Vec::with_capacity(n);
    let mut amps = Vec::with_capacity(n);
    let mut old = wf.dets.iter().copied().zip(wf.amps.iter().copied()).peekable();
    let mut new = created.into_iter().peekable();
    loop {
        let take_old = match (old.peek(), new.peek()) {
            (Some(a), Some(b)) => a.0 < b.0,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => break,
        };
        let (d, c) = if take_old { old.next() } else { new.next() }.expect("peeked");
        dets.push(d);
        amps.push(c);
    }
    wf.dets = dets;
    wf.amps = amps;
}

/// Applies `factors` in order to `wf`, pruning with `policy` after each.
/// `observe` sees the factor index and the state after its truncation.
pub fn evolve<'a>(
    wf: &mut SparseWavefunction,
    factors: impl IntoIterator<Item = &'a UccFactor>,
    policy: &TruncationPolicy,
    mut observe: impl FnMut(usize, &SparseWavefunction),
) {
    for (k, factor) in factors.into_iter().enumerate() {
        apply_factor_in_place(wf, &factor.op, factor.theta);
        wf.truncate_in_place(policy);
        observe(k, wf);
    }
}

/// The ansatz state `Π_k U_k |reference⟩`, truncated after every factor.
pub fn apply_ansatz(reference: Determinant, ansatz: &OrderedAnsatz, policy: &TruncationPolicy) -> SparseWavefunction {
    let mut wf = SparseWavefunction::from_reference(reference);
    evolve(&mut wf, &ansatz.factors, policy, |_, _| {});
    wf
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::determinant::{apply_excitation, hartree_fock_reference};
    use std::f64::consts::FRAC_PI_2;

    fn double_on_hf() -> (Determinant, UccFactor) {
        let hf = hartree_fock_reference(2, 1, 1).unwrap();
        let op = ExcitationOperator::double(0, 1, 2, 3).unwrap();
        (hf, UccFactor { op, theta: 0.0, pool_index: 0 })
    }

    #[test]
    fn small_pool_counts() {
        let hf = hartree_fock_reference(2, 1, 1).unwrap();
        let pool = build_pool(2, hf);
        assert_eq!(pool.iter().filter(|op| !op.is_double()).count(), 2);
        assert_eq!(pool.iter().filter(|op| op.is_double()).count(), 1);
        let nh3 = build_pool(8, hartree_fock_reference(8, 5, 5).unwrap());
        assert_eq!(nh3.len(), 315);
        let ch2o = build_pool(12, hartree_fock_reference(12, 8, 8).unwrap());
        assert_eq!(ch2o.iter().filter(|op| !op.is_double()).count(), 64);
        assert_eq!(ch2o.iter().filter(|op| op.is_double()).count(), 1360);
    }

    #[test]
    fn zero_angle_is_identity() {
        let (hf, factor) = double_on_hf();
        let wf = SparseWavefunction::from_reference(hf);
        assert_eq!(apply_factor(&wf, &factor), wf);
    }

    #[test]
    fn quarter_turn_moves_all_weight() {
        let (hf, mut factor) = double_on_hf();
        factor.theta = FRAC_PI_2;
        let out = apply_factor(&SparseWavefunction::from_reference(hf), &factor);
        let target = apply_excitation(hf, &factor.op).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.determinants()[0], target.det);
        assert!((out.amplitudes()[0] - target.sign()).abs() < 1e-15);
    }

    #[test]
    fn rotation_and_inverse() {
        let (hf, mut factor) = double_on_hf();
        factor.theta = 0.3;
        let wf = apply_factor(&SparseWavefunction::from_reference(hf), &factor);
        let target = apply_excitation(hf, &factor.op).unwrap();
        assert!((wf.amplitude(hf) - 0.3f64.cos()).abs() < 1e-15);
        assert!((wf.amplitude(target.det) - target.sign() * 0.3f64.sin()).abs() < 1e-15);
        factor.theta = -0.3;
        let back = apply_factor(&wf, &factor);
        assert_eq!(back.len(), 1);
        assert!((back.amplitude(hf) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ordering_rule() {
        let ops = [
            ExcitationOperator::single(0, 4).unwrap(),
            ExcitationOperator::double(0, 1, 4, 5).unwrap(),
            ExcitationOperator::double(0, 1, 6, 7).unwrap(),
            ExcitationOperator::double(0, 1, 4, 7).unwrap(),
        ];
        let amps: BTreeMap<_, _> = [(ops[1], -0.2), (ops[2], 0.1), (ops[3], 0.15)].into_iter().collect();
        let ordered = order_and_truncate(&ops, &amps, AnsatzConfig { m_d: 2 });
        let indices: Vec<usize> = ordered.factors.iter().map(|f| f.pool_index).collect();
        assert_eq!(indices, vec![1, 3, 0]);
        assert_eq!(ordered.factors[0].theta, -0.2);
        assert_eq!(ordered.factors[2].theta, 0.0);
        let all = order_and_truncate(&ops, &amps, AnsatzConfig { m_d: 0 });
        assert_eq!(all.n_doubles(), 3);
        assert_eq!(all.n_singles(), 1);
    }

    #[test]
    fn ties_keep_pool_order() {
        let ops = [
            ExcitationOperator::double(0, 1, 4, 5).unwrap(),
            ExcitationOperator::double(0, 1, 6, 7).unwrap(),
        ];
        let amps: BTreeMap<_, _> = [(ops[0], 0.1), (ops[1], -0.1)].into_iter().collect();
        let ordered = order_and_truncate(&ops, &amps, AnsatzConfig { m_d: 1 });
        assert_eq!(ordered.factors[0].pool_index, 0);
    }

    #[test]
    fn json_round_trip() {
        let hf = hartree_fock_reference(3, 1, 1).unwrap();
        let pool = build_pool(3, hf);
        let mut ansatz = order_and_truncate(&pool, &BTreeMap::new(), AnsatzConfig::default());
        let thetas: Vec<f64> = (0..ansatz.len()).map(|k| 0.1 * k as f64 - 0.37).collect();
        ansatz.set_thetas(&thetas).unwrap();
        let text = ansatz.to_json().unwrap();
        let back = OrderedAnsatz::from_json(&text).unwrap();
        assert_eq!(back, ansatz);
        assert_eq!(back.to_json().unwrap(), text);
        assert!(text.contains("\"kind\": \"double\""));
        assert!(ansatz.set_thetas(&[0.0]).is_err());
    }

    #[test]
    fn malformed_records_rejected() {
        let bad = r#"[{"kind":"single","i":0,"j":1,"a":2,"b":null,"theta":0.0,"pool_index":0}]"#;
        assert!(OrderedAnsatz::from_json(bad).is_err());
        let flipped = r#"[{"kind":"double","i":1,"j":0,"a":2,"b":3,"theta":0.0,"pool_index":0}]"#;
        assert!(OrderedAnsatz::from_json(flipped).is_err());
    }

    #[test]
    fn operator_set_comparison() {
        let hf = hartree_fock_reference(3, 1, 1).unwrap();
        let pool = build_pool(3, hf);
        let full = order_and_truncate(&pool, &BTreeMap::new(), AnsatzConfig::default());
        let mut partial = full.clone();
        partial.factors.pop();
        assert!(full.check_same_operators(&full).is_ok());
        let err = partial.check_same_operators(&full).unwrap_err();
        assert!(err.to_string().contains("missing"), "{err}");
    }
}
