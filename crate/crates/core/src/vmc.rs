//! Variational Monte Carlo: Metropolis sampling of |Ψ_T|² with
//! single-electron moves and blocked estimators.
//!
//! Each walker owns a random stream keyed by `(seed, VMC, walker)`; block
//! statistics are merged in walker order, so results do not depend on the
//! number of threads.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::hamiltonian::Hamiltonian;
use crate::rng::{self, tag, StreamRng};
use crate::stats::{block_estimate, blocking_convergence, Estimate, RunningStats};
use crate::wavefunction::{MoveProposal, TrialWavefunction, Walker, WavefunctionError};
use crate::Vec3;

/// Minimum number of blocks for a blocking error bar.
pub const MIN_BLOCKS: usize = 20;
/// Acceptance ratio the warmup width adaptation aims for.
pub const TARGET_ACCEPTANCE: f64 = 0.5;
/// Largest tolerated fraction of samples with a non-finite local energy.
pub const MAX_NONFINITE_FRACTION: f64 = 0.01;

#[derive(Debug, Error)]
pub enum VmcError {
    #[error("invalid VMC configuration: {0}")]
    Config(String),
    #[error("{count} of {total} local energies were not finite")]
    NonFiniteEnergy { count: u64, total: u64 },
    #[error("could not place walker {0} off the nodal surface")]
    NoValidStart(usize),
    #[error(transparent)]
    Wavefunction(#[from] WavefunctionError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VmcConfig {
    /// Sweeps (one proposal per electron) per block.
    pub steps_per_block: usize,
    pub blocks: usize,
    pub warmup_blocks: usize,
    pub walkers: usize,
    /// Gaussian proposal width, bohr; the starting value when auto-tuned.
    pub step_width: f64,
    pub auto_tune: bool,
    /// Shift proposals by the Langevin drift (width²/2)·∇ln|Ψ|.
    pub drift: bool,
    pub seed: u64,
}

impl Default for VmcConfig {
    fn default() -> Self {
        Self {
            steps_per_block: 200,
            blocks: 40,
            warmup_blocks: 10,
            walkers: 16,
            step_width: 0.8,
            auto_tune: true,
            drift: false,
            seed: 1,
        }
    }
}

impl VmcConfig {
    pub fn validate(&self) -> Result<(), VmcError> {
        let bad = |m: String| Err(VmcError::Config(m));
        if self.steps_per_block == 0 || self.walkers == 0 || self.warmup_blocks == 0 {
            return bad("steps per block, walkers and warmup blocks must be at least 1".into());
        }
        if self.blocks < MIN_BLOCKS {
            return bad(format!("need at least {MIN_BLOCKS} blocks for blocking errors, got {}", self.blocks));
        }
        if !(self.step_width > 0.0) || !self.step_width.is_finite() {
            return bad(format!("step width must be positive, got {}", self.step_width));
        }
        Ok(())
    }
}

/// Block averages over all walkers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VmcBlock {
    pub block: usize,
    pub energy: f64,
    pub energy_variance: f64,
    pub dipole: Vec3,
    pub acceptance: f64,
}

#[derive(Debug, Clone)]
pub struct VmcResult {
    pub blocks: Vec<VmcBlock>,
    pub energy: Estimate,
    /// ⟨E_L²⟩ − ⟨E_L⟩² over all samples.
    pub variance: f64,
    pub dipole: [Estimate; 3],
    /// Dipole projected on the bond axis, for diatomics.
    pub dipole_axis: Option<Estimate>,
    pub acceptance: f64,
    pub step_width: f64,
    pub samples: u64,
    pub skipped: u64,
    /// Error ratio after one pairwise merge of blocks; near 1 when blocks
    /// are longer than the autocorrelation time.
    pub blocking_ratio: Option<f64>,
    pub walkers: Vec<Walker>,
}

/// Metropolis acceptance probability for a proposal drawn from `from` with
/// width `width`. With drift the forward and reverse Langevin proposal
/// densities enter the ratio.
pub fn acceptance_probability(walker: &Walker, proposal: &MoveProposal, width: f64, drift: bool) -> f64 {
    if proposal.sign_ratio == 0.0 || !proposal.log_ratio.is_finite() {
        return 0.0;
    }
    let mut log_a = 2.0 * proposal.log_ratio;
    if drift {
        let i = proposal.electron;
        let from = walker.positions()[i];
        let tau = width * width;
        let forward = proposal.position - from - 0.5 * tau * walker.value().gradient[i];
        let reverse = from - proposal.position - 0.5 * tau * proposal.gradient;
        log_a += (forward.norm_squared() - reverse.norm_squared()) / (2.0 * tau);
    }
    log_a.min(0.0).exp()
}

pub fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    Vec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// One single-electron Metropolis move; returns whether it was accepted.
pub fn metropolis_step<R: Rng + ?Sized>(
    psi: &TrialWavefunction,
    walker: &mut Walker,
    electron: usize,
    width: f64,
    drift: bool,
    rng: &mut R,
) -> bool {
    let from = walker.positions()[electron];
    let mut to = from + gaussian_vec(rng) * width;
    if drift {
        to += 0.5 * width * width * walker.value().gradient[electron];
    }
    let proposal = walker.propose(psi, electron, to);
    let p = acceptance_probability(walker, &proposal, width, drift);
    let u: f64 = rng.random();
    if u < p {
        walker.accept(psi, proposal);
        true
    } else {
        walker.reject();
        false
    }
}

/// Electrons scattered around the nuclei in turn, off the nodal surface.
pub fn initial_walker<R: Rng + ?Sized>(psi: &TrialWavefunction, id: u64, rng: &mut R) -> Result<Walker, VmcError> {
    let centers = psi.centers();
    for _ in 0..1000 {
        let positions: Vec<Vec3> = (0..psi.n_electrons()).map(|e| centers[e % centers.len()] + gaussian_vec(rng) * 0.8).collect();
        let w = Walker::new(psi, positions, id)?;
        if w.value().sign != 0.0 && w.value().log_magnitude.is_finite() {
            return Ok(w);
        }
    }
    Err(VmcError::NoValidStart(id as usize))
}

#[derive(Debug, Clone, Default)]
struct BlockTally {
    energy: RunningStats,
    dipole: Vec3,
    axis: f64,
    samples: u64,
    skipped: u64,
    accepted: u64,
    proposed: u64,
}

impl BlockTally {
    fn merge(&mut self, other: &BlockTally) {
        self.energy.merge(&other.energy);
        self.dipole += other.dipole;
        self.axis += other.axis;
        self.samples += other.samples;
        self.skipped += other.skipped;
        self.accepted += other.accepted;
        self.proposed += other.proposed;
    }

    fn acceptance(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Per-walker sampling state.
struct Chain {
    walker: Walker,
    rng: StreamRng,
}

fn sweep(psi: &TrialWavefunction, chain: &mut Chain, width: f64, drift: bool, tally: &mut BlockTally) {
    for e in 0..chain.walker.n_electrons() {
        tally.proposed += 1;
        if metropolis_step(psi, &mut chain.walker, e, width, drift, &mut chain.rng) {
            tally.accepted += 1;
        }
    }
}

fn measure(h: &Hamiltonian, psi: &TrialWavefunction, chain: &mut Chain, axis: Option<Vec3>, tally: &mut BlockTally) {
    let e = h.local_energy(psi, &chain.walker, &mut chain.rng).total;
    chain.walker.local_energy = e;
    if !e.is_finite() {
        tally.skipped += 1;
        return;
    }
    let d = h.dipole(chain.walker.positions());
    tally.energy.push(e);
    tally.dipole += d;
    tally.axis += axis.map_or(0.0, |a| a.dot(&d));
    tally.samples += 1;
}

fn start_chains(psi: &TrialWavefunction, config: &VmcConfig, start: Option<Vec<Walker>>) -> Result<Vec<Chain>, VmcError> {
    (0..config.walkers)
        .map(|k| {
            let mut init = rng::stream(config.seed, &[tag::INIT, k as u64]);
            let walker = match start.as_ref().and_then(|s| s.get(k % s.len().max(1))) {
                Some(w) => {
                    let mut w = Walker::new(psi, w.positions().to_vec(), k as u64)?;
                    w.id = k as u64;
                    w
                }
                None => initial_walker(psi, k as u64, &mut init)?,
            };
            Ok(Chain { walker, rng: rng::stream(config.seed, &[tag::VMC, k as u64]) })
        })
        .collect()
}

/// Runs `sweeps` sweeps on every chain in parallel; `every` > 0 measures
/// after every `every`-th sweep. Tallies are merged in chain order.
#[allow(clippy::too_many_arguments)]
fn run_block(
    psi: &TrialWavefunction,
    h: &Hamiltonian,
    chains: &mut [Chain],
    width: f64,
    drift: bool,
    sweeps: usize,
    measure_every: usize,
    axis: Option<Vec3>,
) -> BlockTally {
    let tallies: Vec<BlockTally> = chains
        .par_iter_mut()
        .map(|chain| {
            let mut t = BlockTally::default();
            for s in 0..sweeps {
                sweep(psi, chain, width, drift, &mut t);
                if measure_every > 0 && (s + 1) % measure_every == 0 {
                    measure(h, psi, chain, axis, &mut t);
                }
            }
            t
        })
        .collect();
    let mut total = BlockTally::default();
    tallies.iter().for_each(|t| total.merge(t));
    total
}

fn tuned_width(width: f64, acceptance: f64) -> f64 {
    width * (acceptance / TARGET_ACCEPTANCE).clamp(0.5, 2.0)
}

/// Samples |Ψ_T|² and accumulates energy, variance and dipole estimates.
pub fn run_vmc(psi: &TrialWavefunction, h: &Hamiltonian, config: &VmcConfig) -> Result<VmcResult, VmcError> {
    run_vmc_from(psi, h, config, None)
}

/// As [`run_vmc`], starting from the positions of existing walkers.
pub fn run_vmc_from(
    psi: &TrialWavefunction,
    h: &Hamiltonian,
    config: &VmcConfig,
    start: Option<Vec<Walker>>,
) -> Result<VmcResult, VmcError> {
    config.validate()?;
    let mut chains = start_chains(psi, config, start)?;
    let axis = h.geometry().bond_axis();
    let mut width = config.step_width;
    for _ in 0..config.warmup_blocks {
        let t = run_block(psi, h, &mut chains, width, config.drift, config.steps_per_block, 0, None);
        if config.auto_tune {
            width = tuned_width(width, t.acceptance());
        }
    }

    let mut blocks = Vec::with_capacity(config.blocks);
    let mut all = BlockTally::default();
    let mut energy_means = Vec::with_capacity(config.blocks);
    let mut dipole_means: [Vec<f64>; 3] = Default::default();
    let mut axis_means = Vec::with_capacity(config.blocks);
    for b in 0..config.blocks {
        let t = run_block(psi, h, &mut chains, width, config.drift, config.steps_per_block, 1, axis);
        let n = t.samples.max(1) as f64;
        let block = VmcBlock {
            block: b,
            energy: t.energy.mean(),
            energy_variance: t.energy.variance(),
            dipole: t.dipole / n,
            acceptance: t.acceptance(),
        };
        energy_means.push(block.energy);
        for k in 0..3 {
            dipole_means[k].push(block.dipole[k]);
        }
        axis_means.push(t.axis / n);
        blocks.push(block);
        all.merge(&t);
    }
    let total = all.samples + all.skipped;
    if all.skipped as f64 > MAX_NONFINITE_FRACTION * total as f64 {
        return Err(VmcError::NonFiniteEnergy { count: all.skipped, total });
    }
    Ok(VmcResult {
        energy: Estimate::new(all.energy.mean(), block_estimate(&energy_means).error),
        variance: all.energy.variance(),
        dipole: [0, 1, 2].map(|k| block_estimate(&dipole_means[k])),
        dipole_axis: axis.map(|_| block_estimate(&axis_means)),
        acceptance: all.acceptance(),
        step_width: width,
        samples: all.samples,
        skipped: all.skipped,
        blocking_ratio: blocking_convergence(&energy_means),
        blocks,
        walkers: chains.into_iter().map(|c| c.walker).collect(),
    })
}

/// Decorrelated configurations from |Ψ_T|²: after warmup, each walker
/// contributes one configuration every `spacing` sweeps until `count` are
/// collected. Order is deterministic.
pub fn sample_configurations(
    psi: &TrialWavefunction,
    h: &Hamiltonian,
    config: &VmcConfig,
    count: usize,
    spacing: usize,
) -> Result<Vec<Vec<Vec3>>, VmcError> {
    let warm = VmcConfig { blocks: MIN_BLOCKS, ..config.clone() };
    warm.validate()?;
    let mut chains = start_chains(psi, config, None)?;
    let mut width = config.step_width;
    for _ in 0..config.warmup_blocks {
        let t = run_block(psi, h, &mut chains, width, config.drift, config.steps_per_block, 0, None);
        if config.auto_tune {
            width = tuned_width(width, t.acceptance());
        }
    }
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        run_block(psi, h, &mut chains, width, config.drift, spacing.max(1), 0, None);
        for c in &chains {
            if out.len() < count {
                out.push(c.walker.positions().to_vec());
            }
        }
    }
    Ok(out)
}
