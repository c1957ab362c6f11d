//! Analysis sweeps: entropy along the factor sequence, correlation energy
//! against the number of doubles, and fixed-parameter replay against the
//! wavefunction budget.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::ansatz::{evolve, order_and_truncate, AnsatzConfig, OrderedAnsatz};
use crate::determinant::{Determinant, ExcitationOperator};
use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;
use crate::optimizer::{minimize, OptimizerSettings, Status, UccObjective};
use crate::wavefunction::{SparseWavefunction, TruncationPolicy};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyPoint {
    pub factor_index: usize,
    pub entropy: f64,
    pub n_det: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyPoint {
    pub x: usize,
    pub correlation_energy: f64,
    pub total_energy: f64,
    pub n_det: usize,
    /// `None` when the wavefunction was never truncated.
    pub n_cut: Option<usize>,
    pub n_max: Option<usize>,
    pub n_parameters: usize,
    /// Present for points produced by an optimization.
    pub iterations: Option<usize>,
    pub status: Option<Status>,
    pub parameters: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "snake_case")]
pub enum SweepPoints {
    Energy(Vec<EnergyPoint>),
    Entropy(Vec<EntropyPoint>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: String,
    pub points: SweepPoints,
}

impl SweepResult {
    pub fn energy_points(&self) -> &[EnergyPoint] {
        match &self.points {
            SweepPoints::Energy(p) => p,
            SweepPoints::Entropy(_) => &[],
        }
    }

    pub fn entropy_points(&self) -> &[EntropyPoint] {
        match &self.points {
            SweepPoints::Entropy(p) => p,
            SweepPoints::Energy(_) => &[],
        }
    }

    pub fn len(&self) -> usize {
        match &self.points {
            SweepPoints::Energy(p) => p.len(),
            SweepPoints::Entropy(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `x,correlation_energy` or `factor_index,entropy,n_det`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        match &self.points {
            SweepPoints::Energy(points) => {
                csv.write_record(["x", "correlation_energy"])?;
                for p in points {
                    csv.write_record([p.x.to_string(), format!("{:.15e}", p.correlation_energy)])?;
                }
            }
            SweepPoints::Entropy(points) => {
                csv.write_record(["factor_index", "entropy", "n_det"])?;
                for p in points {
                    csv.write_record([p.factor_index.to_string(), format!("{:.15e}", p.entropy), p.n_det.to_string()])?;
                }
            }
        }
        csv.flush()?;
        Ok(())
    }
}

/// Entropy and determinant count after each factor (and its truncation).
pub fn entropy_trace(reference: Determinant, ansatz: &OrderedAnsatz, policy: &TruncationPolicy) -> SweepResult {
    let mut points = Vec::with_capacity(ansatz.len());
    let mut wf = SparseWavefunction::from_reference(reference);
    evolve(&mut wf, &ansatz.factors, policy, |k, state| {
        points.push(EntropyPoint { factor_index: k, entropy: state.entropy(), n_det: state.len() });
    });
    SweepResult { axis: "factor_index".into(), points: SweepPoints::Entropy(points) }
}

/// Everything an `M_D` sweep needs besides the sweep values.
pub struct SweepInputs<'a> {
    pub hamiltonian: &'a Hamiltonian,
    pub reference: Determinant,
    pub pool: &'a [ExcitationOperator],
    pub amplitudes: &'a BTreeMap<ExcitationOperator, f64>,
    pub settings: OptimizerSettings,
}

impl SweepInputs<'_> {
    /// Ordered ansatz with exactly `n_doubles` doubles (capped at the pool).
    pub fn ansatz_with_doubles(&self, n_doubles: usize) -> OrderedAnsatz {
        let mut ansatz = order_and_truncate(self.pool, self.amplitudes, AnsatzConfig { m_d: 0 });
        let mut kept = 0;
        ansatz.factors.retain(|f| {
            if !f.op.is_double() {
                return true;
            }
            kept += 1;
            kept <= n_doubles
        });
        ansatz
    }
}

fn check_increasing(values: &[usize], name: &str) -> Result<()> {
    if values.is_empty() || values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(format!("{name} must be non-empty and strictly increasing")));
    }
    Ok(())
}

fn policy_fields(policy: &TruncationPolicy) -> (Option<usize>, Option<usize>) {
    if policy.is_unlimited() {
        (None, None)
    } else {
        (Some(policy.n_cut()), Some(policy.n_max()))
    }
}

/// Optimizes from the MP2 starting point once per entry of `md_values`.
/// Here `x` counts doubles literally: 0 means singles only.
pub fn md_convergence_sweep(inputs: &SweepInputs, md_values: &[usize], policy: &TruncationPolicy) -> Result<SweepResult> {
    check_increasing(md_values, "M_D values")?;
    let (n_cut, n_max) = policy_fields(policy);
    let reference_energy = inputs.hamiltonian.determinant_energy(inputs.reference);
    let mut points = Vec::with_capacity(md_values.len());
    for &m_d in md_values {
        let ansatz = inputs.ansatz_with_doubles(m_d);
        let initial = ansatz.thetas();
        let objective = UccObjective::new(inputs.hamiltonian, inputs.reference, ansatz, *policy);
        let result = minimize(&objective, &initial, &inputs.settings)?;
        let final_state = objective.state(&result.theta)?;
        log::info!("M_D = {m_d}: E = {:.10} ({:?})", result.energy, result.trace.status);
        points.push(EnergyPoint {
            x: m_d,
            correlation_energy: result.energy - reference_energy,
            total_energy: result.energy,
            n_det: final_state.len(),
            n_cut,
            n_max,
            n_parameters: initial.len(),
            iterations: Some(result.trace.records.len() - 1),
            status: Some(result.trace.status),
            parameters: Some(result.theta),
        });
    }
    Ok(SweepResult { axis: "m_d".into(), points: SweepPoints::Energy(points) })
}

/// How `N_MAX` is chosen for each replayed `N_CUT`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum NMaxRule {
    /// `N_MAX = max(value, N_CUT)`.
    Fixed(usize),
    /// `N_MAX = N_CUT`.
    MatchCut,
    /// Never truncate.
    Unlimited,
}

impl NMaxRule {
    pub fn policy(&self, n_cut: usize) -> Result<TruncationPolicy> {
        match *self {
            NMaxRule::Fixed(n_max) => TruncationPolicy::new(n_cut, n_max.max(n_cut)),
            NMaxRule::MatchCut => TruncationPolicy::new(n_cut, n_cut),
            NMaxRule::Unlimited => Ok(TruncationPolicy::unlimited()),
        }
    }
}

/// Energies of the fixed-angle ansatz under increasing `N_CUT`; no
/// optimization is performed.
pub fn replay_vs_ncut(
    hamiltonian: &Hamiltonian,
    reference: Determinant,
    ansatz: &OrderedAnsatz,
    ncut_values: &[usize],
    rule: NMaxRule,
) -> Result<SweepResult> {
    check_increasing(ncut_values, "N_CUT values")?;
    let reference_energy = hamiltonian.determinant_energy(reference);
    let mut points = Vec::with_capacity(ncut_values.len());
    for &n_cut in ncut_values {
        let policy = rule.policy(n_cut)?;
        let mut wf = SparseWavefunction::from_reference(reference);
        evolve(&mut wf, &ansatz.factors, &policy, |_, _| {});
        let total = hamiltonian.expectation_energy(&wf)?;
        let (cut, max) = policy_fields(&policy);
        points.push(EnergyPoint {
            x: n_cut,
            correlation_energy: total - reference_energy,
            total_energy: total,
            n_det: wf.len(),
            n_cut: cut,
            n_max: max,
            n_parameters: ansatz.len(),
            iterations: None,
            status: None,
            parameters: None,
        });
    }
    Ok(SweepResult { axis: "n_cut".into(), points: SweepPoints::Energy(points) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::UccFactor;
    use crate::determinant::hartree_fock_reference;
    use crate::fcidump::IntegralStore;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn zero_angles_have_zero_entropy() {
        let hf = hartree_fock_reference(3, 1, 1).unwrap();
        let pool = crate::ansatz::build_pool(3, hf);
        let ansatz = order_and_truncate(&pool, &BTreeMap::new(), AnsatzConfig::default());
        let trace = entropy_trace(hf, &ansatz, &TruncationPolicy::unlimited());
        assert_eq!(trace.len(), ansatz.len());
        assert!(trace.entropy_points().iter().all(|p| p.entropy == 0.0 && p.n_det == 1));
    }

    #[test]
    fn eighth_turn_gives_ln_two() {
        let hf = hartree_fock_reference(2, 1, 1).unwrap();
        let op = ExcitationOperator::double(0, 1, 2, 3).unwrap();
        let ansatz = OrderedAnsatz::new(vec![UccFactor { op, theta: FRAC_PI_4, pool_index: 0 }]);
        let trace = entropy_trace(hf, &ansatz, &TruncationPolicy::unlimited());
        let points = trace.entropy_points();
        assert_eq!(points.len(), 1);
        assert!((points[0].entropy - 2f64.ln()).abs() < 1e-12);
        assert_eq!(points[0].n_det, 2);
    }

    #[test]
    fn sweep_values_must_increase() {
        let store = IntegralStore::new(2, 2, 0).unwrap();
        let ham = Hamiltonian::new(&store);
        let hf = hartree_fock_reference(2, 1, 1).unwrap();
        let ansatz = OrderedAnsatz::default();
        assert!(replay_vs_ncut(&ham, hf, &ansatz, &[4, 2], NMaxRule::MatchCut).is_err());
        assert!(replay_vs_ncut(&ham, hf, &ansatz, &[], NMaxRule::MatchCut).is_err());
    }

    #[test]
    fn n_max_rules() {
        assert_eq!(NMaxRule::Fixed(10).policy(4).unwrap(), TruncationPolicy::new(4, 10).unwrap());
        assert_eq!(NMaxRule::Fixed(10).policy(40).unwrap(), TruncationPolicy::new(40, 40).unwrap());
        assert_eq!(NMaxRule::MatchCut.policy(7).unwrap(), TruncationPolicy::new(7, 7).unwrap());
        assert!(NMaxRule::Unlimited.policy(7).unwrap().is_unlimited());
    }

    #[test]
    fn csv_layouts() {
        let sweep = SweepResult {
            axis: "factor_index".into(),
            points: SweepPoints::Entropy(vec![EntropyPoint { factor_index: 0, entropy: 0.5, n_det: 2 }]),
        };
        let mut buf = Vec::new();
        sweep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("factor_index,entropy,n_det\n0,5.000000000000000e-1,2\n"), "{text}");
    }
}
