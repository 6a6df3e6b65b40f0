//! Trial-function optimization by reweighted minimization of
//! α·⟨E_L⟩ + (1−α)·Var(E_L) over a fixed sample.
//!
//! Each round draws a sample from |Ψ_ref|², then searches parameter space
//! with a Nelder–Mead simplex whose cost is evaluated on that sample with
//! weights |Ψ/Ψ_ref|². A round ends when the simplex converges, the
//! evaluation budget is spent or the effective sample size collapses; the
//! next round resamples at the best parameters found.

use nalgebra::Rotation3;
use rayon::prelude::*;
use thiserror::Error;

use crate::hamiltonian::{random_rotation, Hamiltonian};
use crate::rng::{self, tag};
use crate::stats::Estimate;
use crate::vmc::{run_vmc, sample_configurations, VmcConfig, VmcError};
use crate::wavefunction::{DeterminantExpansion, JastrowParams, TrialWavefunction, Walker, WavefunctionError};
use crate::Vec3;

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("invalid optimizer configuration: {0}")]
    Config(String),
    #[error("reference parameters give a non-finite cost")]
    NonFiniteReference,
    #[error(transparent)]
    Vmc(#[from] VmcError),
    #[error(transparent)]
    Wavefunction(#[from] WavefunctionError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationConfig {
    /// Cost = α·⟨E⟩ + (1−α)·Var(E_L).
    pub alpha: f64,
    /// Configurations per sample.
    pub samples: usize,
    /// Sweeps between recorded configurations of one walker.
    pub sample_spacing: usize,
    /// Maximum number of sample/minimize rounds.
    pub max_iterations: usize,
    /// Cost evaluations per round.
    pub evaluations_per_round: usize,
    /// Convergence tolerance on the cost, hartree or hartree².
    pub tolerance: f64,
    /// Minimum effective sample size as a fraction of the nominal size.
    pub ess_threshold: f64,
    /// Optional (name, min, max) bounds; other parameters are unbounded
    /// apart from the Jastrow validity rules.
    pub bounds: Vec<(String, f64, f64)>,
    /// Also vary CSF coefficients other than the reference one.
    pub optimize_csf: bool,
    /// Initial simplex edge relative to max(|p|, 0.5).
    pub initial_step: f64,
    /// Sampling and final-energy runs.
    pub vmc: VmcConfig,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            samples: 4000,
            sample_spacing: 4,
            max_iterations: 6,
            evaluations_per_round: 80,
            tolerance: 1e-4,
            ess_threshold: 0.5,
            bounds: Vec::new(),
            optimize_csf: false,
            initial_step: 0.5,
            vmc: VmcConfig::default(),
        }
    }
}

impl OptimizationConfig {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        let bad = |m: String| Err(OptimizerError::Config(m));
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        if !(self.tolerance > 0.0) || !(self.initial_step > 0.0) {
            return bad("tolerance and initial step must be positive".into());
        }
        if !(self.ess_threshold > 0.0 && self.ess_threshold <= 1.0) {
            return bad(format!("effective sample threshold must lie in (0, 1], got {}", self.ess_threshold));
        }
        if self.samples < 2 || self.max_iterations == 0 || self.evaluations_per_round == 0 {
            return bad("samples, iterations and evaluations must be positive".into());
        }
        for (name, lo, hi) in &self.bounds {
            if !(lo <= hi) {
                return bad(format!("empty bounds for {name}: [{lo}, {hi}]"));
            }
        }
        self.vmc.validate()?;
        Ok(())
    }
}

/// Named parameters of a trial function: free Jastrow parameters followed by
/// non-reference CSF coefficients when enabled.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSpace {
    names: Vec<String>,
    jastrow: JastrowParams,
    expansion: DeterminantExpansion,
    n_jastrow: usize,
    csf_indices: Vec<usize>,
}

impl ParameterSpace {
    pub fn new(psi: &TrialWavefunction, include_csf: bool) -> Self {
        let jastrow = psi.jastrow_params().clone();
        let expansion = psi.expansion().clone();
        let mut names = jastrow.parameter_names();
        let n_jastrow = names.len();
        let csf_indices: Vec<usize> =
            if include_csf { (0..expansion.len()).filter(|&k| k != expansion.reference()).collect() } else { Vec::new() };
        names.extend(csf_indices.iter().map(|&k| format!("csf.{}", expansion.csfs()[k].label)));
        Self { names, jastrow, expansion, n_jastrow, csf_indices }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.names[..self.n_jastrow].iter().map(|n| self.jastrow.get(n).unwrap_or(0.0)).collect();
        let c = self.expansion.coefficients();
        v.extend(self.csf_indices.iter().map(|&k| c[k]));
        v
    }

    /// Jastrow parameters and expansion at `x`.
    pub fn apply(&self, x: &[f64]) -> Result<(JastrowParams, DeterminantExpansion), WavefunctionError> {
        let mut j = self.jastrow.clone();
        for (name, &v) in self.names.iter().zip(x).take(self.n_jastrow) {
            j.set(name, v)?;
        }
        j.validate()?;
        let mut e = self.expansion.clone();
        for (&k, &v) in self.csf_indices.iter().zip(&x[self.n_jastrow..]) {
            e.set_coefficient(k, v);
        }
        Ok((j, e))
    }

    pub fn wavefunction(&self, base: &TrialWavefunction, x: &[f64]) -> Result<TrialWavefunction, WavefunctionError> {
        let (j, e) = self.apply(x)?;
        base.with_parameters(e, j)
    }
}

/// Configurations drawn from |Ψ_ref|² with their reference log|Ψ| and a
/// fixed quadrature rotation each, so the cost is a deterministic function
/// of the parameters.
#[derive(Debug, Clone)]
pub struct Sample {
    configurations: Vec<Vec<Vec3>>,
    log_reference: Vec<f64>,
    rotations: Vec<Rotation3<f64>>,
}

impl Sample {
    pub fn draw(
        psi: &TrialWavefunction,
        h: &Hamiltonian,
        config: &VmcConfig,
        count: usize,
        spacing: usize,
    ) -> Result<Self, OptimizerError> {
        let configurations = sample_configurations(psi, h, config, count, spacing)?;
        let mut rng = rng::stream(config.seed, &[tag::COST]);
        let rotations: Vec<_> = configurations.iter().map(|_| random_rotation(&mut rng)).collect();
        let log_reference = configurations
            .iter()
            .map(|c| Walker::new(psi, c.clone(), 0).map(|w| w.value().log_magnitude))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { configurations, log_reference, rotations })
    }

    pub fn len(&self) -> usize {
        self.configurations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configurations.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostValue {
    pub cost: f64,
    pub energy: f64,
    pub variance: f64,
    /// Effective sample size (Σw)²/Σw² divided by the sample size.
    pub ess: f64,
}

impl CostValue {
    fn rejected() -> Self {
        Self { cost: f64::INFINITY, energy: f64::NAN, variance: f64::NAN, ess: 0.0 }
    }

    pub fn is_finite(&self) -> bool {
        self.cost.is_finite()
    }
}

/// Reweighted cost of `psi` on a sample from Ψ_ref. Any non-finite local
/// energy or log value makes the cost infinite.
pub fn cost(psi: &TrialWavefunction, h: &Hamiltonian, sample: &Sample, alpha: f64) -> CostValue {
    let evals: Vec<Option<(f64, f64)>> = sample
        .configurations
        .par_iter()
        .zip(&sample.log_reference)
        .zip(&sample.rotations)
        .map(|((c, &log_ref), rot)| {
            let w = Walker::new(psi, c.clone(), 0).ok()?;
            let e = h.local_energy_with_rotation(psi, &w, rot).total;
            let log_w = 2.0 * (w.value().log_magnitude - log_ref);
            (e.is_finite() && log_w.is_finite() && w.value().sign != 0.0).then_some((log_w, e))
        })
        .collect();
    let Some(evals) = evals.into_iter().collect::<Option<Vec<_>>>() else {
        return CostValue::rejected();
    };
    let shift = evals.iter().fold(f64::NEG_INFINITY, |m, (l, _)| m.max(*l));
    let (mut sw, mut sw2, mut swe) = (0.0, 0.0, 0.0);
    let weights: Vec<f64> = evals.iter().map(|(l, _)| (l - shift).exp()).collect();
    for (w, (_, e)) in weights.iter().zip(&evals) {
        sw += w;
        sw2 += w * w;
        swe += w * e;
    }
    let energy = swe / sw;
    let variance = weights.iter().zip(&evals).map(|(w, (_, e))| w * (e - energy).powi(2)).sum::<f64>() / sw;
    CostValue { cost: alpha * energy + (1.0 - alpha) * variance, energy, variance, ess: sw * sw / (sw2 * evals.len() as f64) }
}

/// One improvement of the best point within a round.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub round: usize,
    pub evaluation: usize,
    pub parameters: Vec<f64>,
    pub value: CostValue,
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub names: Vec<String>,
    pub initial: Vec<f64>,
    pub parameters: Vec<f64>,
    pub jastrow: JastrowParams,
    pub expansion: DeterminantExpansion,
    pub trace: Vec<TraceEntry>,
    pub initial_energy: Estimate,
    pub final_energy: Estimate,
    pub rounds: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl OptimizationResult {
    /// Whether the cost of accepted iterates never increases within a round.
    pub fn trace_is_monotone(&self) -> bool {
        self.trace.windows(2).all(|w| w[0].round != w[1].round || w[1].value.cost <= w[0].value.cost)
    }
}

struct Simplex<'a> {
    objective: &'a dyn Fn(&[f64]) -> CostValue,
    bounds: Vec<(f64, f64)>,
    evaluations: usize,
    ess_collapsed: bool,
    ess_threshold: f64,
}

impl Simplex<'_> {
    fn eval(&mut self, x: &mut [f64]) -> CostValue {
        for (v, (lo, hi)) in x.iter_mut().zip(&self.bounds) {
            *v = v.clamp(*lo, *hi);
        }
        self.evaluations += 1;
        let c = (self.objective)(x);
        if c.is_finite() && c.ess < self.ess_threshold {
            self.ess_collapsed = true;
            return CostValue { cost: f64::INFINITY, ..c };
        }
        c
    }
}

/// Nelder–Mead minimization; `on_improve` sees every new best point.
fn nelder_mead(
    s: &mut Simplex<'_>,
    start: &[f64],
    start_value: CostValue,
    step: &[f64],
    budget: usize,
    tolerance: f64,
    mut on_improve: impl FnMut(&[f64], CostValue, usize),
) -> (Vec<f64>, CostValue) {
    let n = start.len();
    let mut pts: Vec<(Vec<f64>, CostValue)> = vec![(start.to_vec(), start_value)];
    for k in 0..n {
        let mut x = start.to_vec();
        x[k] += step[k];
        let v = s.eval(&mut x);
        pts.push((x, v));
    }
    let mut best = start_value.cost;
    let order = |pts: &mut Vec<(Vec<f64>, CostValue)>| pts.sort_by(|a, b| a.1.cost.total_cmp(&b.1.cost));
    order(&mut pts);
    let mut report = |pts: &[(Vec<f64>, CostValue)], evals: usize, best: &mut f64| {
        if pts[0].1.cost < *best {
            *best = pts[0].1.cost;
            on_improve(&pts[0].0, pts[0].1, evals);
        }
    };
    report(&pts, s.evaluations, &mut best);
    while s.evaluations < budget {
        let spread = pts[n].1.cost - pts[0].1.cost;
        if spread.is_finite() && spread < tolerance {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|k| pts[..n].iter().map(|p| p.0[k]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|k| centroid[k] + t * (pts[n].0[k] - centroid[k])).collect() };
        let mut xr = along(-1.0);
        let fr = s.eval(&mut xr);
        if fr.cost < pts[0].1.cost {
            let mut xe = along(-2.0);
            let fe = s.eval(&mut xe);
            pts[n] = if fe.cost < fr.cost { (xe, fe) } else { (xr, fr) };
        } else if fr.cost < pts[n - 1].1.cost {
            pts[n] = (xr, fr);
        } else {
            let t = if fr.cost < pts[n].1.cost { -0.5 } else { 0.5 };
            let mut xc = along(t);
            let fc = s.eval(&mut xc);
            if fc.cost < pts[n].1.cost.min(fr.cost) {
                pts[n] = (xc, fc);
            } else {
                let x0 = pts[0].0.clone();
                for p in pts.iter_mut().skip(1) {
                    let mut x: Vec<f64> = x0.iter().zip(&p.0).map(|(a, b)| a + 0.5 * (b - a)).collect();
                    let v = s.eval(&mut x);
                    *p = (x, v);
                }
            }
        }
        order(&mut pts);
        report(&pts, s.evaluations, &mut best);
    }
    pts.swap_remove(0)
}

/// Optimizes the free parameters of `psi` and checks the result with VMC.
pub fn optimize(
    psi: &TrialWavefunction,
    h: &Hamiltonian,
    config: &OptimizationConfig,
) -> Result<OptimizationResult, OptimizerError> {
    config.validate()?;
    let space = ParameterSpace::new(psi, config.optimize_csf);
    let initial = space.values();
    let bounds: Vec<(f64, f64)> = space
        .names()
        .iter()
        .map(|n| {
            config.bounds.iter().find(|(b, _, _)| b == n).map_or((f64::NEG_INFINITY, f64::INFINITY), |(_, lo, hi)| (*lo, *hi))
        })
        .collect();
    let mut x = initial.clone();
    let mut trace = Vec::new();
    let mut warnings = Vec::new();
    let mut converged = space.is_empty();
    let mut rounds = 0;

    while !converged && rounds < config.max_iterations {
        let reference = space.wavefunction(psi, &x)?;
        let vmc = VmcConfig { seed: rng::derive(config.vmc.seed, &[tag::COST, rounds as u64]), ..config.vmc.clone() };
        let sample = Sample::draw(&reference, h, &vmc, config.samples, config.sample_spacing)?;
        let objective = |p: &[f64]| match space.wavefunction(psi, p) {
            Ok(trial) => cost(&trial, h, &sample, config.alpha),
            Err(_) => CostValue::rejected(),
        };
        let start = objective(&x);
        if !start.is_finite() {
            return Err(OptimizerError::NonFiniteReference);
        }
        trace.push(TraceEntry { round: rounds, evaluation: 0, parameters: x.clone(), value: start });
        let step: Vec<f64> = x.iter().map(|v| config.initial_step * v.abs().max(0.5)).collect();
        let mut simplex = Simplex {
            objective: &objective,
            bounds: bounds.clone(),
            evaluations: 0,
            ess_collapsed: false,
            ess_threshold: config.ess_threshold,
        };
        let (best, value) =
            nelder_mead(&mut simplex, &x, start, &step, config.evaluations_per_round, config.tolerance, |p, v, e| {
                trace.push(TraceEntry { round: rounds, evaluation: e, parameters: p.to_vec(), value: v })
            });
        rounds += 1;
        let gain = start.cost - value.cost;
        if value.cost < start.cost {
            x = best;
        }
        converged = gain < config.tolerance && !simplex.ess_collapsed;
    }
    if !converged {
        warnings.push(format!("iteration cap of {} rounds reached; returning best parameters so far", config.max_iterations));
    }

    let initial_energy = run_vmc(psi, h, &config.vmc)?.energy;
    let mut final_energy = initial_energy;
    if x != initial {
        final_energy = run_vmc(&space.wavefunction(psi, &x)?, h, &config.vmc)?.energy;
        let sigma = initial_energy.error.hypot(final_energy.error);
        if final_energy.value > initial_energy.value + 2.0 * sigma {
            warnings.push(format!(
                "optimized energy {final_energy} exceeds initial {initial_energy} by more than 2σ; keeping initial parameters"
            ));
            x = initial.clone();
            final_energy = initial_energy;
        }
    }
    let (jastrow, expansion) = space.apply(&x)?;
    Ok(OptimizationResult {
        names: space.names().to_vec(),
        initial,
        parameters: x,
        jastrow,
        expansion,
        trace,
        initial_energy,
        final_energy,
        rounds,
        converged,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::DEFAULT_QUADRATURE_ORDER;
    use crate::system::{fixture, FixtureOptions, MolecularSystem};
    use crate::wavefunction::PadeTerm;

    fn load(name: &str, jastrow: Option<JastrowParams>) -> (TrialWavefunction, Hamiltonian) {
        let mut s: MolecularSystem = fixture(name, &FixtureOptions::default()).unwrap().system().unwrap();
        if let Some(j) = jastrow {
            s.jastrow = j;
        }
        let h = Hamiltonian::from_system(&s, DEFAULT_QUADRATURE_ORDER).unwrap();
        (s.trial_wavefunction().unwrap(), h)
    }

    fn he_jastrow(b2: f64) -> JastrowParams {
        JastrowParams { ee_anti: Some(PadeTerm::new(0.5, b2)), ..JastrowParams::default() }
    }

    fn quick() -> OptimizationConfig {
        OptimizationConfig {
            samples: 2000,
            max_iterations: 3,
            evaluations_per_round: 40,
            vmc: VmcConfig { steps_per_block: 50, blocks: 20, warmup_blocks: 5, walkers: 16, ..VmcConfig::default() },
            ..OptimizationConfig::default()
        }
    }

    #[test]
    fn reference_weights_are_exactly_one() {
        let (psi, h) = load("He-product", Some(he_jastrow(1.0)));
        let cfg = quick();
        let sample = Sample::draw(&psi, &h, &cfg.vmc, 500, 2).unwrap();
        let c = cost(&psi, &h, &sample, 0.3);
        assert_eq!(c.ess, 1.0);
        let energies: Vec<f64> = sample
            .configurations
            .iter()
            .zip(&sample.rotations)
            .map(|(p, r)| h.local_energy_with_rotation(&psi, &Walker::new(&psi, p.clone(), 0).unwrap(), r).total)
            .collect();
        let mean = energies.iter().sum::<f64>() / energies.len() as f64;
        let var = energies.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / energies.len() as f64;
        assert!((c.energy - mean).abs() < 1e-12);
        assert!((c.variance - var).abs() < 1e-10);
        assert!((c.cost - (0.3 * mean + 0.7 * var)).abs() < 1e-10);
    }

    #[test]
    fn hydrogen_cost_is_alpha_times_exact_energy() {
        let (psi, h) = load("H", None);
        let sample = Sample::draw(&psi, &h, &quick().vmc, 300, 2).unwrap();
        for alpha in [0.0, 0.25, 1.0] {
            let c = cost(&psi, &h, &sample, alpha);
            assert!((c.cost - alpha * -0.5).abs() < 1e-12, "{alpha}: {}", c.cost);
        }
    }

    #[test]
    fn hydrogen_is_a_fixed_point() {
        let j = JastrowParams { en: vec![("H".into(), PadeTerm::new(0.0, 1.0))], ..JastrowParams::default() };
        let (psi, h) = load("H", Some(j));
        let r = optimize(&psi, &h, &quick()).unwrap();
        assert_eq!(r.names[0], "en.H.b1");
        assert!(r.parameters[0].abs() < 0.05, "{:?}", r.parameters);
        assert!((r.final_energy.value + 0.5).abs() < 1e-3);
    }

    #[test]
    fn variance_minimization_trace_is_monotone() {
        let (psi, h) = load("He-product", Some(he_jastrow(2.0)));
        let r = optimize(&psi, &h, &OptimizationConfig { alpha: 0.0, ..quick() }).unwrap();
        assert!(r.trace_is_monotone());
        assert!(r.trace.len() > 1);
        assert!(r.final_energy.value <= r.initial_energy.value + 2.0 * r.initial_energy.error.hypot(r.final_energy.error));
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let (psi, h) = load("He-product", Some(he_jastrow(1.0)));
        let space = ParameterSpace::new(&psi, false);
        assert_eq!(space.names(), ["ee.anti.b2"]);
        assert!(space.wavefunction(&psi, &[-3.0]).is_err());
        let sample = Sample::draw(&psi, &h, &quick().vmc, 50, 2).unwrap();
        let objective = match space.wavefunction(&psi, &[-3.0]) {
            Ok(t) => cost(&t, &h, &sample, 0.5),
            Err(_) => CostValue::rejected(),
        };
        assert!(!objective.is_finite());
    }

    #[test]
    fn rejects_bad_config() {
        for cfg in [
            OptimizationConfig { alpha: 1.5, ..OptimizationConfig::default() },
            OptimizationConfig { tolerance: 0.0, ..OptimizationConfig::default() },
            OptimizationConfig { ess_threshold: 0.0, ..OptimizationConfig::default() },
        ] {
            assert!(matches!(cfg.validate(), Err(OptimizerError::Config(_))));
        }
    }
}
