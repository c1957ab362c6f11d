//! Variational minimization of the ansatz energy.
//!
//! The driver is a limited-memory BFGS with Armijo backtracking. Gradients
//! come from central differences; for the UCC objective each component
//! restarts from the nearest stored prefix state instead of the reference.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{apply_factor_in_place, evolve, OrderedAnsatz, UccFactor};
use crate::determinant::Determinant;
use crate::error::{Error, Result};
use crate::hamiltonian::{Hamiltonian, SparseHamiltonian};
use crate::wavefunction::{SparseWavefunction, TruncationPolicy};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    /// Central-difference step in radians.
    pub gradient_step: f64,
    /// Stop when an accepted step lowers the energy by less than this (Ha).
    pub energy_tolerance: f64,
    /// Stop when the gradient 2-norm drops below this (Ha/rad).
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
    /// Number of curvature pairs kept by L-BFGS.
    pub history: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            gradient_step: 1e-4,
            energy_tolerance: 1e-8,
            gradient_tolerance: 1e-6,
            max_iterations: 200,
            history: 30,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = self.gradient_step > 0.0
            && self.energy_tolerance > 0.0
            && self.gradient_tolerance > 0.0
            && self.max_iterations > 0
            && self.history > 0;
        if !positive {
            return Err(Error::InvalidInput(format!("optimizer settings must be positive: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    ConvergedEnergy,
    ConvergedGradient,
    MaxIterations,
}

impl Status {
    pub fn converged(&self) -> bool {
        !matches!(self, Status::MaxIterations)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub energy: f64,
    pub gradient_norm: f64,
    pub n_det: usize,
    pub elapsed_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub records: Vec<IterationRecord>,
    pub status: Status,
}

impl OptimizationTrace {
    /// Writes `iteration,energy,gradient_norm,n_det`. Wall-clock times are
    /// left out so that identical runs give identical files.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(["iteration", "energy", "gradient_norm", "n_det"])?;
        for r in &self.records {
            csv.write_record([
                r.iteration.to_string(),
                format!("{:.15e}", r.energy),
                format!("{:.6e}", r.gradient_norm),
                r.n_det.to_string(),
            ])?;
        }
        csv.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizationResult {
    pub theta: Vec<f64>,
    pub energy: f64,
    pub trace: OptimizationTrace,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub energy: f64,
    pub n_det: usize,
}

/// A scalar function of the parameter vector.
pub trait Objective: Sync {
    fn dimension(&self) -> usize;

    fn evaluate(&self, theta: &[f64]) -> Result<Evaluation>;

    fn gradient(&self, theta: &[f64], step: f64) -> Result<Vec<f64>> {
        central_difference(self, theta, step)
    }
}

/// `[E(θ + h e_k) − E(θ − h e_k)] / 2h` for every `k`, components in parallel.
pub fn central_difference<O: Objective + ?Sized>(objective: &O, theta: &[f64], step: f64) -> Result<Vec<f64>> {
    (0..theta.len())
        .into_par_iter()
        .map(|k| {
            let mut shifted = theta.to_vec();
            shifted[k] = theta[k] + step;
            let plus = objective.evaluate(&shifted)?.energy;
            shifted[k] = theta[k] - step;
            let minus = objective.evaluate(&shifted)?.energy;
            Ok((plus - minus) / (2.0 * step))
        })
        .collect()
}

/// Energy of the truncated ansatz state as a function of all angles.
pub struct UccObjective<'a> {
    hamiltonian: &'a Hamiltonian,
    reference: Determinant,
    skeleton: OrderedAnsatz,
    policy: TruncationPolicy,
    cache: Mutex<EnergyCache>,
}

#[derive(Default)]
struct EnergyCache {
    matrix: Option<Arc<SparseHamiltonian>>,
}

impl<'a> UccObjective<'a> {
    pub fn new(
        hamiltonian: &'a Hamiltonian,
        reference: Determinant,
        skeleton: OrderedAnsatz,
        policy: TruncationPolicy,
    ) -> Self {
        Self { hamiltonian, reference, skeleton, policy, cache: Mutex::new(EnergyCache::default()) }
    }

    pub fn ansatz(&self) -> &OrderedAnsatz {
        &self.skeleton
    }

    pub fn reference(&self) -> Determinant {
        self.reference
    }

    pub fn policy(&self) -> &TruncationPolicy {
        &self.policy
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        self.hamiltonian
    }

    fn check_len(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.skeleton.len() {
            return Err(Error::ParameterCount { expected: self.skeleton.len(), found: theta.len() });
        }
        Ok(())
    }

    /// The ansatz state at `theta`.
    pub fn state(&self, theta: &[f64]) -> Result<SparseWavefunction> {
        self.check_len(theta)?;
        let mut wf = SparseWavefunction::from_reference(self.reference);
        let factors = self.factors(theta);
        evolve(&mut wf, &factors, &self.policy, |_, _| {});
        Ok(wf)
    }

    fn factors(&self, theta: &[f64]) -> Vec<UccFactor> {
        self.skeleton
            .factors
            .iter()
            .zip(theta)
            .map(|(f, &t)| UccFactor { theta: t, ..*f })
            .collect()
    }

    /// Rayleigh quotient of `wf`. A restricted Hamiltonian over a superset
    /// of recently seen determinants is kept and reused; see
    /// [`SparseHamiltonian::energy_of_subset`].
    pub fn energy_of(&self, wf: &SparseWavefunction) -> Result<f64> {
        let cached = self.cache.lock().expect("energy cache poisoned").matrix.clone();
        if let Some(energy) = cached.as_ref().and_then(|m| m.energy_of_subset(wf)) {
            return energy;
        }
        let dets = match &cached {
            Some(m) => {
                let union = sorted_union(m.determinants(), wf.determinants());
                if union.len() > 2 * wf.len() + 64 {
                    wf.determinants().to_vec()
                } else {
                    union
                }
            }
            None => wf.determinants().to_vec(),
        };
        let matrix = Arc::new(SparseHamiltonian::build(self.hamiltonian, &dets));
        let energy = matrix.energy_of_subset(wf).expect("matrix covers the state");
        self.cache.lock().expect("energy cache poisoned").matrix = Some(matrix);
        energy
    }
}

fn sorted_union(a: &[Determinant], b: &[Determinant]) -> Vec<Determinant> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut x, mut y) = (0, 0);
    while x < a.len() && y < b.len() {
        match a[x].cmp(&b[y]) {
            std::cmp::Ordering::Less => {
                out.push(a[x]);
                x += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[y]);
                y += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[x]);
                x += 1;
                y += 1;
            }
        }
    }
    out.extend_from_slice(&a[x..]);
    out.extend_from_slice(&b[y..]);
    out
}

impl Objective for UccObjective<'_> {
    fn dimension(&self) -> usize {
        self.skeleton.len()
    }

    fn evaluate(&self, theta: &[f64]) -> Result<Evaluation> {
        let wf = self.state(theta)?;
        Ok(Evaluation { energy: self.energy_of(&wf)?, n_det: wf.len() })
    }

    fn gradient(&self, theta: &[f64], step: f64) -> Result<Vec<f64>> {
        self.check_len(theta)?;
        let factors = self.factors(theta);
        let n = factors.len();
        if n == 0 {
            return Ok(Vec::new());
        }
        // States before factor k for k = 0, stride, 2·stride, ...
        let stride = ((n as f64).sqrt().ceil() as usize).max(1);
        let mut checkpoints = vec![SparseWavefunction::from_reference(self.reference)];
        let mut wf = checkpoints[0].clone();
        evolve(&mut wf, &factors[..n - 1], &self.policy, |k, state| {
            if (k + 1) % stride == 0 {
                checkpoints.push(state.clone());
            }
        });

        let shifted = |k: usize, delta: f64| -> Result<f64> {
            let block = k / stride;
            let mut wf = checkpoints[block].clone();
            evolve(&mut wf, &factors[block * stride..k], &self.policy, |_, _| {});
            apply_factor_in_place(&mut wf, &factors[k].op, theta[k] + delta);
            wf.truncate_in_place(&self.policy);
            evolve(&mut wf, &factors[k + 1..], &self.policy, |_, _| {});
            self.energy_of(&wf)
        };
        (0..n)
            .into_par_iter()
            .map(|k| Ok((shifted(k, step)? - shifted(k, -step)?) / (2.0 * step)))
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Largest single-angle change allowed in one line-search trial.
const MAX_STEP: f64 = 1.0;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;

/// Minimizes `objective` from `initial`. The returned energy never exceeds
/// the initial one; every accepted iterate is recorded in the trace.
pub fn minimize<O: Objective + ?Sized>(
    objective: &O,
    initial: &[f64],
    settings: &OptimizerSettings,
) -> Result<OptimizationResult> {
    settings.validate()?;
    if initial.len() != objective.dimension() {
        return Err(Error::ParameterCount { expected: objective.dimension(), found: initial.len() });
    }
    let clock = Instant::now();
    let finite = |e: Evaluation, iteration: usize| {
        if e.energy.is_finite() {
            Ok(e)
        } else {
            Err(Error::NonFiniteEnergy { iteration })
        }
    };
    let finite_grad = |g: Vec<f64>, iteration: usize| {
        if g.iter().all(|x| x.is_finite()) {
            Ok(g)
        } else {
            Err(Error::NonFiniteEnergy { iteration })
        }
    };

    let mut x = initial.to_vec();
    let mut current = finite(objective.evaluate(&x)?, 0)?;
    let mut g = finite_grad(objective.gradient(&x, settings.gradient_step)?, 0)?;
    let mut records = vec![IterationRecord {
        iteration: 0,
        energy: current.energy,
        gradient_norm: norm(&g),
        n_det: current.n_det,
        elapsed_seconds: clock.elapsed().as_secs_f64(),
    }];
    let finish = |x: Vec<f64>, energy: f64, records: Vec<IterationRecord>, status: Status| OptimizationResult {
        theta: x,
        energy,
        trace: OptimizationTrace { records, status },
    };
    if x.is_empty() || norm(&g) < settings.gradient_tolerance {
        return Ok(finish(x, current.energy, records, Status::ConvergedGradient));
    }

    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    for iteration in 1..=settings.max_iterations {
        let mut direction = two_loop(&g, &history);
        let mut slope = dot(&g, &direction);
        if slope >= 0.0 {
            history.clear();
            direction = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let largest = direction.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if largest > MAX_STEP {
            let shrink = MAX_STEP / largest;
            direction.iter_mut().for_each(|v| *v *= shrink);
            slope *= shrink;
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = x.iter().zip(&direction).map(|(xi, di)| xi + alpha * di).collect();
            let eval = finite(objective.evaluate(&trial)?, iteration)?;
            if eval.energy <= current.energy + ARMIJO * alpha * slope {
                accepted = Some((trial, eval));
                break;
            }
            alpha *= 0.5;
        }
        let Some((x_new, next)) = accepted else {
            // no decrease available at this resolution
            return Ok(finish(x, current.energy, records, Status::ConvergedEnergy));
        };
        let g_new = finite_grad(objective.gradient(&x_new, settings.gradient_step)?, iteration)?;

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
            if history.len() == settings.history {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }

        let decrease = current.energy - next.energy;
        x = x_new;
        g = g_new;
        current = next;
        records.push(IterationRecord {
            iteration,
            energy: current.energy,
            gradient_norm: norm(&g),
            n_det: current.n_det,
            elapsed_seconds: clock.elapsed().as_secs_f64(),
        });
        log::debug!("iteration {iteration}: E = {:.12} |g| = {:.3e}", current.energy, norm(&g));
        if decrease < settings.energy_tolerance {
            return Ok(finish(x, current.energy, records, Status::ConvergedEnergy));
        }
        if norm(&g) < settings.gradient_tolerance {
            return Ok(finish(x, current.energy, records, Status::ConvergedGradient));
        }
    }
    Ok(finish(x, current.energy, records, Status::MaxIterations))
}

/// L-BFGS search direction `−H g`.
fn two_loop(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic {
        center: Vec<f64>,
    }

    impl Objective for Quadratic {
        fn dimension(&self) -> usize {
            self.center.len()
        }

        fn evaluate(&self, theta: &[f64]) -> Result<Evaluation> {
            let e = theta.iter().zip(&self.center).map(|(t, c)| (t - c) * (t - c)).sum();
            Ok(Evaluation { energy: e, n_det: 1 })
        }
    }

    struct Rosenbrock;

    impl Objective for Rosenbrock {
        fn dimension(&self) -> usize {
            2
        }

        fn evaluate(&self, t: &[f64]) -> Result<Evaluation> {
            let e = (1.0 - t[0]).powi(2) + 100.0 * (t[1] - t[0] * t[0]).powi(2);
            Ok(Evaluation { energy: e, n_det: 1 })
        }
    }

    struct Explodes;

    impl Objective for Explodes {
        fn dimension(&self) -> usize {
            1
        }

        fn evaluate(&self, t: &[f64]) -> Result<Evaluation> {
            Ok(Evaluation { energy: if t[0] < 0.5 { -t[0] } else { f64::NAN }, n_det: 1 })
        }
    }

    #[test]
    fn quadratic_gradient() {
        let q = Quadratic { center: vec![0.0; 3] };
        let theta = [0.3, -1.2, 2.0];
        let g = q.gradient(&theta, 1e-4).unwrap();
        for (gi, ti) in g.iter().zip(theta) {
            assert!((gi - 2.0 * ti).abs() < 1e-9);
        }
    }

    #[test]
    fn quadratic_minimum() {
        let q = Quadratic { center: vec![0.5, -0.25, 0.1] };
        let result = minimize(&q, &[0.0; 3], &OptimizerSettings::default()).unwrap();
        for (t, c) in result.theta.iter().zip(&q.center) {
            assert!((t - c).abs() < 1e-6);
        }
        assert!(result.trace.status.converged());
    }

    #[test]
    fn already_optimal_returns_immediately() {
        let q = Quadratic { center: vec![0.5, -0.25] };
        let result = minimize(&q, &[0.5, -0.25], &OptimizerSettings::default()).unwrap();
        assert_eq!(result.trace.status, Status::ConvergedGradient);
        assert_eq!(result.trace.records.len(), 1);
    }

    #[test]
    fn rosenbrock_descends() {
        let settings = OptimizerSettings { max_iterations: 500, energy_tolerance: 1e-14, ..Default::default() };
        let result = minimize(&Rosenbrock, &[-1.2, 1.0], &settings).unwrap();
        assert!(result.energy < 1e-8, "{}", result.energy);
        let energies: Vec<f64> = result.trace.records.iter().map(|r| r.energy).collect();
        assert!(energies.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn max_iterations_status() {
        let settings = OptimizerSettings { max_iterations: 2, energy_tolerance: 1e-30, ..Default::default() };
        let result = minimize(&Rosenbrock, &[-1.2, 1.0], &settings).unwrap();
        assert_eq!(result.trace.status, Status::MaxIterations);
        assert_eq!(result.trace.records.len(), 3);
    }

    #[test]
    fn non_finite_energy_aborts() {
        let err = minimize(&Explodes, &[0.0], &OptimizerSettings::default()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteEnergy { .. }), "{err}");
    }

    #[test]
    fn wrong_length_rejected() {
        let q = Quadratic { center: vec![0.0; 2] };
        assert!(minimize(&q, &[0.0], &OptimizerSettings::default()).is_err());
        let bad = OptimizerSettings { gradient_step: 0.0, ..Default::default() };
        assert!(minimize(&q, &[0.0, 0.0], &bad).is_err());
    }
}
