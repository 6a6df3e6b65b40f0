//! Importance-sampled fixed-node diffusion Monte Carlo.
//!
//! Walkers carry weights. Each generation propagates every walker with the
//! drift-diffusion Green's function plus a Metropolis accept/reject step,
//! then a single-threaded critical section branches the population and
//! updates the trial energy. Walker streams are keyed by
//! `(seed, DMC, lineage id, generation)`, so results depend only on the
//! seed, never on scheduling.

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::hamiltonian::Hamiltonian;
use crate::rng::{self, tag};
use crate::stats::{block_estimate, block_means, weighted_linear_fit, Estimate, LinearFit};
use crate::vmc::{gaussian_vec, MIN_BLOCKS};
use crate::wavefunction::{TrialWavefunction, Walker};
use crate::Vec3;

/// Walkers at or above this weight are split.
pub const SPLIT_WEIGHT: f64 = 2.0;
/// Walkers below this weight undergo Russian roulette.
pub const KILL_WEIGHT: f64 = 0.3;
/// E_L is clamped to E_best ± CLAMP_SCALE/√τ in the weight exponent.
pub const CLAMP_SCALE: f64 = 2.0;
/// Default feedback strength is FEEDBACK_SCALE/τ.
pub const FEEDBACK_SCALE: f64 = 0.1;

#[derive(Debug, Error)]
pub enum DmcError {
    #[error("invalid DMC configuration: {0}")]
    Config(String),
    #[error("population {population} left the bounds [{min}, {max}] at generation {generation}; recent sizes {trace:?}")]
    Population { generation: usize, population: usize, min: usize, max: usize, trace: Vec<usize> },
    #[error("initial population is empty")]
    EmptyStart,
    #[error("time-step extrapolation failed: {0}")]
    Extrapolation(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DmcConfig {
    /// Time step, hartree⁻¹.
    pub tau: f64,
    pub target_population: usize,
    pub equilibration_steps: usize,
    pub measurement_steps: usize,
    /// Generations between trial-energy updates.
    pub update_interval: usize,
    /// Feedback strength κ; `None` uses FEEDBACK_SCALE/τ.
    pub feedback: Option<f64>,
    pub seed: u64,
    /// Population bounds as multiples of the target.
    pub bounds: (f64, f64),
    /// Blocks for the error analysis of the measurement phase.
    pub blocks: usize,
}

impl Default for DmcConfig {
    fn default() -> Self {
        Self {
            tau: 0.01,
            target_population: 200,
            equilibration_steps: 200,
            measurement_steps: 1000,
            update_interval: 1,
            feedback: None,
            seed: 1,
            bounds: (0.25, 4.0),
            blocks: 40,
        }
    }
}

impl DmcConfig {
    pub fn validate(&self) -> Result<(), DmcError> {
        let bad = |m: String| Err(DmcError::Config(m));
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return bad(format!("time step must be positive, got {}", self.tau));
        }
        if self.target_population < 10 {
            return bad(format!("target population must be at least 10, got {}", self.target_population));
        }
        let (lo, hi) = self.bounds;
        if !(lo < 1.0 && 1.0 < hi && lo >= 0.0) {
            return bad(format!("population bounds must satisfy 0 <= min < 1 < max, got ({lo}, {hi})"));
        }
        if self.blocks < MIN_BLOCKS || self.measurement_steps < self.blocks {
            return bad(format!(
                "need at least {MIN_BLOCKS} blocks and one measurement step per block, got {} blocks over {} steps",
                self.blocks, self.measurement_steps
            ));
        }
        if self.update_interval == 0 {
            return bad("trial-energy update interval must be at least 1".into());
        }
        if matches!(self.feedback, Some(k) if !(k >= 0.0) || !k.is_finite()) {
            return bad("feedback strength must be non-negative".into());
        }
        Ok(())
    }

    pub fn kappa(&self) -> f64 {
        self.feedback.unwrap_or(FEEDBACK_SCALE / self.tau)
    }

    fn population_limits(&self) -> (usize, usize) {
        let t = self.target_population as f64;
        ((self.bounds.0 * t).ceil() as usize, (self.bounds.1 * t).floor() as usize)
    }
}

/// Per-generation record of the measurement phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmcGeneration {
    pub generation: usize,
    pub energy_mixed: f64,
    pub energy_growth: f64,
    pub population: usize,
    pub total_weight: f64,
    pub trial_energy: f64,
    pub dipole: Vec3,
    pub acceptance: f64,
}

#[derive(Debug, Clone)]
pub struct DmcResult {
    pub tau: f64,
    pub energy_growth: Estimate,
    pub energy_mixed: Estimate,
    pub dipole_mixed: [Estimate; 3],
    /// Mixed dipole projected on the bond axis, for diatomics.
    pub dipole_axis: Option<Estimate>,
    pub acceptance: f64,
    /// Walker count after branching, every generation.
    pub population_trace: Vec<usize>,
    /// Trial energy used in every generation.
    pub trial_energy_trace: Vec<f64>,
    pub generations: Vec<DmcGeneration>,
    /// Largest ratio, over the mixed energy and dipole components, of the
    /// error at the configured blocking to the error with blocks half as
    /// long; above ~1.2 the blocks are shorter than the autocorrelation time.
    pub blocking_ratio: Option<f64>,
    pub walkers: Vec<Walker>,
}

impl DmcResult {
    pub fn mean_population(&self) -> f64 {
        let n = self.generations.len().max(1) as f64;
        self.generations.iter().map(|g| g.population as f64).sum::<f64>() / n
    }
}

/// Outcome of propagating one walker over one time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagation {
    pub multiplier: f64,
    pub local_energy: f64,
    pub accepted: usize,
    pub proposed: usize,
}

/// Trial energy and the energy reference for clamping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReference {
    pub trial: f64,
    pub best: f64,
}

fn clamp_energy(e: f64, best: f64, tau: f64) -> f64 {
    let cut = CLAMP_SCALE / tau.sqrt();
    e.clamp(best - cut, best + cut)
}

/// One drift-diffusion step per electron with accept/reject against the
/// importance-sampled Green's function. Moves that change the sign of Ψ_T
/// are rejected. `walker.local_energy` must hold E_L at the current position;
/// on return it holds E_L at the new one.
pub fn propagate_walker<R: Rng + ?Sized>(
    psi: &TrialWavefunction,
    h: &Hamiltonian,
    walker: &mut Walker,
    tau: f64,
    energies: EnergyReference,
    rng: &mut R,
) -> Propagation {
    debug_assert!(walker.value().sign != 0.0, "walker on a node");
    let e_old = walker.local_energy;
    let sqrt_tau = tau.sqrt();
    let mut accepted = 0;
    let n = walker.n_electrons();
    for i in 0..n {
        let from = walker.positions()[i];
        let drift = tau * walker.value().gradient[i];
        let to = from + drift + gaussian_vec(rng) * sqrt_tau;
        let p = walker.propose(psi, i, to);
        if p.sign_ratio <= 0.0 || !p.log_ratio.is_finite() {
            walker.reject();
            let _: f64 = rng.random();
            continue;
        }
        let forward = to - from - drift;
        let reverse = from - to - tau * p.gradient;
        let log_a = 2.0 * p.log_ratio + (forward.norm_squared() - reverse.norm_squared()) / (2.0 * tau);
        let u: f64 = rng.random();
        if u < log_a.min(0.0).exp() {
            debug_assert!(p.sign_ratio > 0.0, "accepted move crossed the node");
            walker.accept(psi, p);
            accepted += 1;
        } else {
            walker.reject();
        }
    }
    let e_new = h.local_energy(psi, walker, rng).total;
    walker.local_energy = e_new;
    let (a, b) = (clamp_energy(e_old, energies.best, tau), clamp_energy(e_new, energies.best, tau));
    let exponent = -tau * (0.5 * (a + b) - energies.trial);
    let multiplier = if exponent.is_finite() { exponent.exp() } else { 0.0 };
    Propagation { multiplier, local_energy: e_new, accepted, proposed: n }
}

/// Stochastic branching followed by trial-energy feedback. Walkers with
/// weight in [KILL_WEIGHT, SPLIT_WEIGHT) keep their weight; others become
/// ⌊w + u⌋ unit-weight copies. `next_id` supplies lineage ids for new copies.
/// Feedback acts on the walker count: E_T ← E_best − κ ln(N / N_target).
pub fn branch_and_control<R: Rng + ?Sized>(
    population: Vec<Walker>,
    e_best: f64,
    config: &DmcConfig,
    next_id: &mut u64,
    rng: &mut R,
) -> (Vec<Walker>, f64) {
    let mut out = Vec::with_capacity(population.len());
    for mut w in population {
        debug_assert!(w.weight >= 0.0);
        if (KILL_WEIGHT..SPLIT_WEIGHT).contains(&w.weight) {
            out.push(w);
            continue;
        }
        let u: f64 = rng.random();
        let copies = (w.weight + u).floor() as usize;
        if copies == 0 {
            continue;
        }
        w.weight = 1.0;
        for _ in 1..copies {
            let mut c = w.clone();
            c.id = *next_id;
            c.age = 0;
            *next_id += 1;
            out.push(c);
        }
        out.push(w);
    }
    let e_t =
        if out.is_empty() { e_best } else { e_best - config.kappa() * (out.len() as f64 / config.target_population as f64).ln() };
    (out, e_t)
}

/// Copies the starting walkers cyclically up to the target population and
/// evaluates their local energies.
fn initial_population(
    psi: &TrialWavefunction,
    h: &Hamiltonian,
    start: &[Walker],
    config: &DmcConfig,
) -> Result<Vec<Walker>, DmcError> {
    if start.is_empty() {
        return Err(DmcError::EmptyStart);
    }
    let mut pop: Vec<Walker> = (0..config.target_population)
        .map(|k| {
            let mut w = start[k % start.len()].clone();
            w.id = k as u64;
            w.weight = 1.0;
            w.age = 0;
            w
        })
        .collect();
    pop.par_iter_mut().for_each(|w| {
        let mut r = rng::stream(config.seed, &[tag::DMC, tag::INIT, w.id]);
        w.local_energy = h.local_energy(psi, w, &mut r).total;
    });
    Ok(pop)
}

/// Runs fixed-node DMC from an equilibrated set of VMC walkers.
pub fn run_dmc(psi: &TrialWavefunction, h: &Hamiltonian, start: &[Walker], config: &DmcConfig) -> Result<DmcResult, DmcError> {
    config.validate()?;
    let mut pop = initial_population(psi, h, start, config)?;
    let (min_pop, max_pop) = config.population_limits();
    let axis = h.geometry().bond_axis();
    let tau = config.tau;
    let mut next_id = pop.len() as u64;
    let finite: Vec<f64> = pop.iter().map(|w| w.local_energy).filter(|e| e.is_finite()).collect();
    let mut e_best = finite.iter().sum::<f64>() / finite.len().max(1) as f64;
    let mut e_t = e_best;

    let total_steps = config.equilibration_steps + config.measurement_steps;
    let mut population_trace = Vec::with_capacity(total_steps);
    let mut trial_energy_trace = Vec::with_capacity(total_steps);
    let mut generations = Vec::with_capacity(config.measurement_steps);
    let mut recent: Vec<f64> = Vec::new();
    // Measurement accumulators: Σw·E, Σw, Σw·d, Σw·(axis·d).
    let mut sum_we = 0.0;
    let mut sum_w = 0.0;
    let (mut accepted, mut proposed) = (0usize, 0usize);

    for gen in 0..total_steps {
        let energies = EnergyReference { trial: e_t, best: e_best };
        let w_before: f64 = pop.iter().map(|w| w.weight).sum();
        let steps: Vec<(Propagation, Vec3)> = pop
            .par_iter_mut()
            .map(|w| {
                let mut r = rng::stream(config.seed, &[tag::DMC, w.id, gen as u64]);
                let p = propagate_walker(psi, h, w, tau, energies, &mut r);
                w.weight *= p.multiplier;
                w.age += 1;
                (p, h.dipole(w.positions()))
            })
            .collect();
        let (mut we, mut ww, mut wd) = (0.0, 0.0, Vec3::zeros());
        let (mut acc, mut prop) = (0usize, 0usize);
        for (w, (p, d)) in pop.iter().zip(&steps) {
            acc += p.accepted;
            prop += p.proposed;
            if p.local_energy.is_finite() {
                we += w.weight * p.local_energy;
                ww += w.weight;
                wd += w.weight * d;
            }
        }
        let w_after: f64 = pop.iter().map(|w| w.weight).sum();
        let e_mixed = if ww > 0.0 { we / ww } else { f64::NAN };
        let e_growth = e_t - (w_after / w_before).ln() / tau;
        trial_energy_trace.push(e_t);

        let measuring = gen >= config.equilibration_steps;
        if measuring {
            if generations.is_empty() {
                recent.clear();
            }
            sum_we += we;
            sum_w += ww;
            accepted += acc;
            proposed += prop;
        }
        if e_mixed.is_finite() {
            recent.push(e_mixed);
        }
        // Equilibration tracks the last few generations; measurement uses
        // the cumulative mixed estimate.
        e_best = if measuring {
            if sum_w > 0.0 {
                sum_we / sum_w
            } else {
                e_best
            }
        } else {
            let tail = &recent[recent.len().saturating_sub(20)..];
            if tail.is_empty() {
                e_best
            } else {
                tail.iter().sum::<f64>() / tail.len() as f64
            }
        };

        let mut branch_rng = rng::stream(config.seed, &[tag::BRANCH, gen as u64]);
        let (next, e_new) = branch_and_control(std::mem::take(&mut pop), e_best, config, &mut next_id, &mut branch_rng);
        pop = next;
        if (gen + 1) % config.update_interval == 0 {
            e_t = e_new;
        }
        population_trace.push(pop.len());
        if pop.len() < min_pop.max(1) || pop.len() > max_pop {
            let from = population_trace.len().saturating_sub(20);
            return Err(DmcError::Population {
                generation: gen,
                population: pop.len(),
                min: min_pop,
                max: max_pop,
                trace: population_trace[from..].to_vec(),
            });
        }
        if measuring {
            generations.push(DmcGeneration {
                generation: gen - config.equilibration_steps,
                energy_mixed: e_mixed,
                energy_growth: e_growth,
                population: pop.len(),
                total_weight: pop.iter().map(|w| w.weight).sum(),
                trial_energy: e_t,
                dipole: if ww > 0.0 { wd / ww } else { Vec3::zeros() },
                acceptance: if prop > 0 { acc as f64 / prop as f64 } else { 0.0 },
            });
        }
    }

    let mixed_blocks = block_means(&generations.iter().map(|g| g.energy_mixed).collect::<Vec<_>>(), config.blocks);
    let growth_series: Vec<f64> = generations.iter().map(|g| g.energy_growth).collect();
    let growth_blocks = block_means(&growth_series, config.blocks);
    let dipole_mixed = [0, 1, 2].map(|k| {
        let series: Vec<f64> = generations.iter().map(|g| g.dipole[k]).collect();
        block_estimate(&block_means(&series, config.blocks))
    });
    let dipole_axis = axis.map(|a| {
        let series: Vec<f64> = generations.iter().map(|g| a.dot(&g.dipole)).collect();
        block_estimate(&block_means(&series, config.blocks))
    });
    let mut series: Vec<Vec<f64>> = vec![generations.iter().map(|g| g.energy_mixed).collect()];
    series.extend((0..3).map(|k| generations.iter().map(|g| g.dipole[k]).collect::<Vec<f64>>()));
    let blocking_ratio = blocking_ratio(&series, config.blocks);
    Ok(DmcResult {
        tau,
        energy_growth: block_estimate(&growth_blocks),
        energy_mixed: Estimate::new(sum_we / sum_w, block_estimate(&mixed_blocks).error),
        dipole_mixed,
        dipole_axis,
        acceptance: if proposed > 0 { accepted as f64 / proposed as f64 } else { 0.0 },
        population_trace,
        trial_energy_trace,
        generations,
        blocking_ratio,
        walkers: pop,
    })
}

/// Largest error ratio between `blocks` and `2·blocks` blockings over the
/// given series; `None` when a series is too short. Constant series count as 1.
fn blocking_ratio(series: &[Vec<f64>], blocks: usize) -> Option<f64> {
    series
        .iter()
        .map(|s| {
            if s.len() < 2 * blocks {
                return None;
            }
            let fine = block_estimate(&block_means(s, 2 * blocks)).error;
            Some(if fine > 0.0 { block_estimate(&block_means(s, blocks)).error / fine } else { 1.0 })
        })
        .try_fold(0.0_f64, |acc, r| r.map(|r| acc.max(r)))
}

/// Extrapolated estimator 2·mixed − variational with errors in quadrature.
pub fn extrapolated_estimator(mixed: Estimate, variational: Estimate) -> Estimate {
    Estimate::new(
        2.0 * mixed.value - variational.value,
        (4.0 * mixed.error * mixed.error + variational.error * variational.error).sqrt(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimestepPoint {
    pub tau: f64,
    pub energy: Estimate,
    pub dipole: [Estimate; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimestepStudy {
    pub points: Vec<TimestepPoint>,
    pub energy_fit: LinearFit,
    /// τ → 0 intercepts of the mixed dipole components.
    pub dipole_intercept: [Estimate; 3],
}

impl TimestepStudy {
    pub fn energy(&self) -> Estimate {
        self.energy_fit.intercept
    }
}

/// Linear-in-τ extrapolation of DMC results to zero time step.
pub fn extrapolate_timestep(points: &[TimestepPoint]) -> Result<TimestepStudy, DmcError> {
    if points.len() < 3 {
        return Err(DmcError::Extrapolation(format!("need at least 3 time steps, got {}", points.len())));
    }
    let taus: Vec<f64> = points.iter().map(|p| p.tau).collect();
    let fit = |y: Vec<f64>, s: Vec<f64>| {
        weighted_linear_fit(&taus, &y, &s).ok_or_else(|| DmcError::Extrapolation("time steps must not all coincide".into()))
    };
    let energy_fit = fit(points.iter().map(|p| p.energy.value).collect(), points.iter().map(|p| p.energy.error).collect())?;
    let mut dipole_intercept = [Estimate::exact(0.0); 3];
    for (k, slot) in dipole_intercept.iter_mut().enumerate() {
        let f = fit(points.iter().map(|p| p.dipole[k].value).collect(), points.iter().map(|p| p.dipole[k].error).collect())?;
        *slot = f.intercept;
    }
    Ok(TimestepStudy { points: points.to_vec(), energy_fit, dipole_intercept })
}

/// Runs DMC at each time step (seeds keyed by the step index) and
/// extrapolates linearly to τ = 0.
pub fn timestep_study(
    psi: &TrialWavefunction,
    h: &Hamiltonian,
    start: &[Walker],
    config: &DmcConfig,
    taus: &[f64],
) -> Result<(TimestepStudy, Vec<DmcResult>), DmcError> {
    if taus.len() < 3 {
        return Err(DmcError::Extrapolation(format!("need at least 3 time steps, got {}", taus.len())));
    }
    let mut runs = Vec::with_capacity(taus.len());
    for (k, &tau) in taus.iter().enumerate() {
        let cfg = DmcConfig { tau, seed: rng::derive(config.seed, &[tag::STUDY, k as u64]), ..config.clone() };
        runs.push(run_dmc(psi, h, start, &cfg)?);
    }
    let points: Vec<TimestepPoint> =
        runs.iter().map(|r| TimestepPoint { tau: r.tau, energy: r.energy_mixed, dipole: r.dipole_mixed }).collect();
    Ok((extrapolate_timestep(&points)?, runs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::DEFAULT_QUADRATURE_ORDER;
    use crate::system::{fixture, FixtureOptions};
    use crate::vmc::{run_vmc, VmcConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(name: &str) -> (TrialWavefunction, Hamiltonian, Vec<Walker>) {
        let s = fixture(name, &FixtureOptions::default()).unwrap().system().unwrap();
        let h = Hamiltonian::from_system(&s, DEFAULT_QUADRATURE_ORDER).unwrap();
        let psi = s.trial_wavefunction().unwrap();
        let cfg = VmcConfig { blocks: 20, steps_per_block: 20, walkers: 20, ..VmcConfig::default() };
        let walkers = run_vmc(&psi, &h, &cfg).unwrap().walkers;
        (psi, h, walkers)
    }

    #[test]
    fn extrapolated_arithmetic() {
        let e = extrapolated_estimator(Estimate::new(0.60, 0.01), Estimate::new(0.50, 0.01));
        assert!((e.value - 0.70).abs() < 1e-12);
        assert!((e.error - 0.0005_f64.sqrt()).abs() < 1e-12);
        let v = Estimate::new(-1.3, 0.0);
        assert_eq!(extrapolated_estimator(v, v).value, -1.3);
    }

    #[test]
    fn hydrogen_weight_is_position_independent() {
        let (psi, h, walkers) = setup("H");
        let e = EnergyReference { trial: -0.45, best: -0.5 };
        let tau = 0.02;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for w in walkers.iter().take(10) {
            let mut w = w.clone();
            w.local_energy = -0.5;
            let p = propagate_walker(&psi, &h, &mut w, tau, e, &mut rng);
            assert!((p.multiplier - (-tau * (-0.5 + 0.45_f64)).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn small_step_acceptance_near_one() {
        let (psi, h, walkers) = setup("He-product");
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (mut acc, mut prop) = (0, 0);
        for w in &walkers {
            let mut w = w.clone();
            w.local_energy = h.local_energy(&psi, &w, &mut rng).total;
            let p = propagate_walker(&psi, &h, &mut w, 1e-5, EnergyReference { trial: -2.9, best: -2.9 }, &mut rng);
            acc += p.accepted;
            prop += p.proposed;
            assert!((p.multiplier - 1.0).abs() < 1e-3);
        }
        assert!(acc as f64 / prop as f64 > 0.99);
    }

    #[test]
    fn branching_fixed_point_and_splitting() {
        let (_, _, walkers) = setup("H");
        let cfg = DmcConfig { target_population: walkers.len(), ..DmcConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut next = 1000;
        let (out, e_t) = branch_and_control(walkers.clone(), -0.5, &cfg, &mut next, &mut rng);
        assert_eq!(out.len(), walkers.len());
        assert_eq!(e_t, -0.5);

        let mut heavy = walkers[0].clone();
        heavy.weight = 2.0;
        for _ in 0..100 {
            let (out, _) = branch_and_control(vec![heavy.clone()], -0.5, &cfg, &mut next, &mut rng);
            assert_eq!(out.len(), 2);
            assert!(out.iter().all(|w| w.weight == 1.0));
            assert_ne!(out[0].id, out[1].id);
        }
        let mut light = walkers[0].clone();
        light.weight = 0.2;
        let survivors: usize =
            (0..20_000).map(|_| branch_and_control(vec![light.clone()], -0.5, &cfg, &mut next, &mut rng).0.len()).sum();
        assert!((survivors as f64 / 20_000.0 - 0.2).abs() < 0.01);
    }

    #[test]
    fn blocking_ratio_flags_short_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let white: Vec<f64> = (0..8000).map(|_| rng.random::<f64>()).collect();
        // AR(1) with correlation time ~1/(1 − 0.995) = 200 steps.
        let mut x = 0.0;
        let slow: Vec<f64> = white
            .iter()
            .map(|u| {
                x = 0.995 * x + (u - 0.5);
                x
            })
            .collect();
        let r_white = blocking_ratio(std::slice::from_ref(&white), 20).unwrap();
        assert!((r_white - 1.0).abs() < 0.3, "{r_white}");
        assert!(blocking_ratio(&[white.clone(), slow], 40).unwrap() > 1.2);
        assert_eq!(blocking_ratio(&[vec![1.0; 100]], 20), Some(1.0));
        assert_eq!(blocking_ratio(&[white[..30].to_vec()], 20), None);
    }

    #[test]
    fn hydrogen_is_exact() {
        let (psi, h, walkers) = setup("H");
        // Blocks of 200 generations span several correlation times 1/τ·⟨r²⟩.
        let cfg = DmcConfig {
            tau: 0.01,
            target_population: 50,
            equilibration_steps: 20,
            measurement_steps: 4000,
            blocks: 20,
            ..DmcConfig::default()
        };
        let r = run_dmc(&psi, &h, &walkers, &cfg).unwrap();
        assert!((r.energy_mixed.value + 0.5).abs() < 1e-10, "{}", r.energy_mixed);
        assert!((r.energy_growth.value + 0.5).abs() < 5e-4, "{}", r.energy_growth);
        for k in 0..3 {
            assert!(r.dipole_mixed[k].within(0.0, 2.0), "{}", r.dipole_mixed[k]);
        }
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let (psi, h, walkers) = setup("H2");
        let cfg = DmcConfig {
            tau: 0.02,
            target_population: 30,
            equilibration_steps: 10,
            measurement_steps: 40,
            blocks: 20,
            ..DmcConfig::default()
        };
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| run_dmc(&psi, &h, &walkers, &cfg).unwrap())
        };
        let (a, b) = (run(1), run(3));
        assert_eq!(a.generations, b.generations);
        assert_eq!(a.population_trace, b.population_trace);
    }

    #[test]
    fn population_tracks_target() {
        let (psi, h, walkers) = setup("H2plus");
        let cfg = DmcConfig {
            tau: 0.02,
            target_population: 100,
            equilibration_steps: 100,
            measurement_steps: 600,
            ..DmcConfig::default()
        };
        let r = run_dmc(&psi, &h, &walkers, &cfg).unwrap();
        let mean = r.mean_population();
        assert!((mean / 100.0 - 1.0).abs() < 0.05, "mean population {mean}");
        assert!(r.walkers.iter().all(|w| w.weight >= 0.0));
    }

    #[test]
    fn extrapolation_recovers_synthetic_intercept() {
        let noise = [0.0004, -0.0003, 0.0002, -0.0001];
        let points: Vec<TimestepPoint> = [0.01, 0.02, 0.04, 0.08]
            .iter()
            .zip(noise)
            .map(|(&t, n)| TimestepPoint {
                tau: t,
                energy: Estimate::new(-1.1 + 0.3 * t + n, 0.0005),
                dipole: [Estimate::new(0.1 * t, 0.001); 3],
            })
            .collect();
        let s = extrapolate_timestep(&points).unwrap();
        assert!(s.energy().within(-1.1, 2.0), "{}", s.energy());
        let same: Vec<TimestepPoint> = points.iter().map(|p| TimestepPoint { tau: 0.01, ..*p }).collect();
        assert!(extrapolate_timestep(&same).is_err());
        assert!(extrapolate_timestep(&points[..2]).is_err());
    }

    #[test]
    fn rejects_bad_config() {
        for cfg in [
            DmcConfig { tau: 0.0, ..DmcConfig::default() },
            DmcConfig { target_population: 5, ..DmcConfig::default() },
            DmcConfig { bounds: (1.0, 2.0), ..DmcConfig::default() },
            DmcConfig { measurement_steps: 10, ..DmcConfig::default() },
        ] {
            assert!(matches!(cfg.validate(), Err(DmcError::Config(_))));
        }
    }
}
