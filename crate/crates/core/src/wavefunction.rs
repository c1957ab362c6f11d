//! Sparse real-amplitude wavefunctions.

use std::cmp::Ordering;
use std::io::Write;

use crate::determinant::{bit_string, Determinant};
use crate::error::{Error, Result};

/// Amplitudes with magnitude at or below this are dropped after every factor.
pub const DROP_THRESHOLD: f64 = 1e-14;

/// Determinant budget governing pruning: once the state holds more than
/// `n_max` determinants, only the `n_cut` largest survive.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TruncationPolicy {
    n_cut: usize,
    n_max: usize,
}

impl TruncationPolicy {
    pub fn new(n_cut: usize, n_max: usize) -> Result<Self> {
        if n_cut == 0 || n_cut > n_max {
            return Err(Error::InvalidPolicy { n_cut, n_max });
        }
        Ok(Self { n_cut, n_max })
    }

    /// A policy that never fires.
    pub const fn unlimited() -> Self {
        Self { n_cut: usize::MAX, n_max: usize::MAX }
    }

    pub fn n_cut(&self) -> usize {
        self.n_cut
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn is_unlimited(&self) -> bool {
        self.n_max == usize::MAX
    }
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self::unlimited()
    }
}

/// Determinant → amplitude map kept sorted by canonical determinant order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseWavefunction {
    pub(crate) dets: Vec<Determinant>,
    pub(crate) amps: Vec<f64>,
}

impl SparseWavefunction {
    pub fn from_reference(det: Determinant) -> Self {
        Self { dets: vec![det], amps: vec![1.0] }
    }

    /// Builds a state from arbitrary entries. Repeated determinants are
    /// summed; entries at or below [`DROP_THRESHOLD`] are discarded.
    pub fn from_entries(entries: impl IntoIterator<Item = (Determinant, f64)>) -> Result<Self> {
        let mut list: Vec<(Determinant, f64)> = entries.into_iter().collect();
        list.sort_by_key(|a| a.0);
        let mut wf = Self::default();
        for (det, amp) in list {
            if !amp.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite amplitude for {det}")));
            }
            match wf.dets.last() {
                Some(&last) if last == det => *wf.amps.last_mut().unwrap() += amp,
                _ => {
                    wf.dets.push(det);
                    wf.amps.push(amp);
                }
            }
        }
        if let Some(first) = wf.dets.first() {
            let (na, nb) = (first.n_alpha(), first.n_beta());
            if wf.dets.iter().any(|d| d.n_alpha() != na || d.n_beta() != nb) {
                return Err(Error::ElectronCountMismatch);
            }
        }
        wf.drop_small();
        Ok(wf)
    }

    pub fn len(&self) -> usize {
        self.dets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dets.is_empty()
    }

    pub fn determinants(&self) -> &[Determinant] {
        &self.dets
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amps
    }

    pub fn iter(&self) -> impl Iterator<Item = (Determinant, f64)> + '_ {
        self.dets.iter().copied().zip(self.amps.iter().copied())
    }

    /// Amplitude of `det`, zero if absent.
    pub fn amplitude(&self, det: Determinant) -> f64 {
        self.dets.binary_search(&det).map_or(0.0, |k| self.amps[k])
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Shannon entropy `−Σ |c|² ln |c|²` of the stored amplitudes, in nats.
    /// No renormalization is applied.
    pub fn entropy(&self) -> f64 {
        -self
            .amps
            .iter()
            .map(|c| c * c)
            .filter(|&w| w > 0.0)
            .map(|w| w * w.ln())
            .sum::<f64>()
    }

    pub fn scale(&mut self, factor: f64) {
        self.amps.iter_mut().for_each(|c| *c *= factor);
    }

    pub fn normalize(&mut self) -> Result<()> {
        let norm = self.norm();
        if norm == 0.0 {
            return Err(Error::EmptyWavefunction);
        }
        self.scale(1.0 / norm);
        Ok(())
    }

    pub(crate) fn drop_small(&mut self) {
        if self.amps.iter().all(|c| c.abs() > DROP_THRESHOLD) {
            return;
        }
        let mut keep = 0;
        for k in 0..self.dets.len() {
            if self.amps[k].abs() > DROP_THRESHOLD {
                self.dets[keep] = self.dets[k];
                self.amps[keep] = self.amps[k];
                keep += 1;
            }
        }
        self.dets.truncate(keep);
        self.amps.truncate(keep);
    }

    /// Returns the pruned state; see [`SparseWavefunction::truncate_in_place`].
    pub fn truncate(&self, policy: &TruncationPolicy) -> Self {
        let mut out = self.clone();
        out.truncate_in_place(policy);
        out
    }

    /// If more than `n_max` determinants are stored, keeps the `n_cut` of
    /// largest magnitude (ties go to the canonically smaller determinant)
    /// and renormalizes them. Returns whether pruning happened.
    pub fn truncate_in_place(&mut self, policy: &TruncationPolicy) -> bool {
        if self.len() <= policy.n_max {
            return false;
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        let rank = |&x: &usize, &y: &usize| -> Ordering {
            self.amps[y]
                .abs()
                .total_cmp(&self.amps[x].abs())
                .then_with(|| self.dets[x].cmp(&self.dets[y]))
        };
        let n_cut = policy.n_cut;
        order.select_nth_unstable_by(n_cut - 1, rank);
        order.truncate(n_cut);
        order.sort_unstable();
        let dets = order.iter().map(|&k| self.dets[k]).collect();
        let amps = order.iter().map(|&k| self.amps[k]).collect();
        self.dets = dets;
        self.amps = amps;
        let norm = self.norm();
        if norm > 0.0 {
            self.scale(1.0 / norm);
        }
        true
    }

    /// Writes `determinant_alpha,determinant_beta,amplitude` rows sorted by
    /// descending magnitude (ties in canonical order).
    pub fn write_csv<W: Write>(&self, writer: W, n_orbitals: usize) -> Result<()> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&x, &y| {
            self.amps[y]
                .abs()
                .total_cmp(&self.amps[x].abs())
                .then_with(|| self.dets[x].cmp(&self.dets[y]))
        });
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(["determinant_alpha", "determinant_beta", "amplitude"])?;
        for k in order {
            let d = self.dets[k];
            csv.write_record([
                bit_string(d.alpha_mask(), n_orbitals),
                bit_string(d.beta_mask(), n_orbitals),
                format!("{:e}", self.amps[k]),
            ])?;
        }
        csv.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(k: u32) -> Determinant {
        Determinant::new(1 << (k - 1), 1)
    }

    #[test]
    fn reference_state() {
        let wf = SparseWavefunction::from_reference(Determinant::new(0b11, 0b11));
        assert_eq!(wf.len(), 1);
        assert_eq!(wf.norm(), 1.0);
        assert_eq!(wf.entropy(), 0.0);
    }

    #[test]
    fn norm_three_four_five() {
        let wf = SparseWavefunction::from_entries([(det(1), 0.6), (det(2), 0.8)]).unwrap();
        assert!((wf.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_entropy() {
        let wf = SparseWavefunction::from_entries((1..=4).map(|k| (det(k), 0.5))).unwrap();
        assert!((wf.entropy() - 4f64.ln()).abs() < 1e-15);
        assert!((wf.entropy() - 1.386294).abs() < 1e-6);
    }

    #[test]
    fn entries_merge_and_drop() {
        let wf = SparseWavefunction::from_entries([(det(2), 0.5), (det(1), 0.1), (det(2), 0.25), (det(3), 1e-16)])
            .unwrap();
        assert_eq!(wf.determinants(), &[det(1), det(2)]);
        assert_eq!(wf.amplitude(det(2)), 0.75);
        assert_eq!(wf.amplitude(det(3)), 0.0);
        assert!(SparseWavefunction::from_entries([(det(1), 1.0), (Determinant::new(1, 3), 1.0)]).is_err());
    }

    #[test]
    fn below_trigger_unchanged() {
        let wf = SparseWavefunction::from_entries((1..=5).map(|k| (det(k), 0.1 * k as f64))).unwrap();
        let policy = TruncationPolicy::new(3, 8).unwrap();
        assert_eq!(wf.truncate(&policy), wf);
    }

    #[test]
    fn three_largest_survive() {
        let mags = [0.9, 0.3, 0.2, 0.1, 0.05, 0.04, 0.03, 0.02, 0.01];
        let wf = SparseWavefunction::from_entries(mags.iter().enumerate().map(|(k, &c)| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            (det(k as u32 + 1), sign * c)
        }))
        .unwrap();
        let out = wf.truncate(&TruncationPolicy::new(3, 8).unwrap());
        assert_eq!(out.determinants(), &[det(1), det(2), det(3)]);
        let scale = (0.81f64 + 0.09 + 0.04).sqrt();
        assert!((out.amplitude(det(1)) - 0.9 / scale).abs() < 1e-15);
        assert!((out.amplitude(det(2)) + 0.3 / scale).abs() < 1e-15);
        assert!((out.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ties_prefer_smaller_determinant() {
        let wf = SparseWavefunction::from_entries([(det(5), 0.5), (det(3), -0.5), (det(9), 0.7)]).unwrap();
        let out = wf.truncate(&TruncationPolicy::new(2, 2).unwrap());
        assert_eq!(out.determinants(), &[det(3), det(9)]);
    }

    #[test]
    fn policy_validation() {
        assert!(TruncationPolicy::new(0, 5).is_err());
        assert!(TruncationPolicy::new(6, 5).is_err());
        assert!(TruncationPolicy::new(5, 5).is_ok());
    }

    #[test]
    fn csv_sorted_by_magnitude() {
        let wf = SparseWavefunction::from_entries([(det(1), 0.6), (det(2), -0.8)]).unwrap();
        let mut buf = Vec::new();
        wf.write_csv(&mut buf, 3).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "determinant_alpha,determinant_beta,amplitude");
        assert_eq!(lines[1], "010,100,-8e-1");
        assert_eq!(lines[2], "100,100,6e-1");
    }
}
