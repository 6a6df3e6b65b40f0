//! Pipeline stages: each runs one part of the workflow and renders its
//! results as tables stamped with the manifest, seed and system hash.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use qmcdip_core::dmc::{extrapolated_estimator, run_dmc, timestep_study, DmcConfig, DmcResult};
use qmcdip_core::hamiltonian::Hamiltonian;
use qmcdip_core::optimizer::{optimize, OptimizationConfig, OptimizationResult};
use qmcdip_core::rng;
use qmcdip_core::spectroscopy::{
    bootstrap, fit_curve, fit_dipole, form_disagreements, numerov_solve, vibrational_average, CurveFit, CurveForm, CurvePoint,
    FittedModel, RadialGrid, SpectroscopicConstants,
};
use qmcdip_core::stats::Estimate;
use qmcdip_core::system::units::{DEBYE_PER_AU, ELECTRON_MASS_PER_AMU, WAVENUMBER_PER_HARTREE};
use qmcdip_core::system::MolecularSystem;
use qmcdip_core::vmc::{run_vmc, VmcConfig, VmcResult};
use qmcdip_core::wavefunction::{TrialWavefunction, Walker};

use crate::error::CliError;
use crate::inputs::{system_from_text, ModelOptions};
use crate::manifest::TOOL_VERSION;
use crate::table::{num, Table};

/// Seed of a stage: a labelled hash of the master seed.
pub fn stage_seed(master: u64, stage: &str) -> u64 {
    rng::derive_labeled(master, stage)
}

/// Provenance written into every table header.
#[derive(Debug, Clone, PartialEq)]
pub struct Stamp {
    pub manifest: String,
    pub seed: u64,
    pub system_sha256: Option<String>,
}

impl Stamp {
    pub fn table(&self, stage: &str, columns: &[&str]) -> Table {
        let mut t = Table::new(columns);
        t.meta("tool", format!("qmcdip {TOOL_VERSION}"))
            .meta("stage", stage)
            .meta("manifest", &self.manifest)
            .meta("seed", self.seed);
        if let Some(h) = &self.system_sha256 {
            t.meta("system_sha256", h);
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VmcSettings {
    pub blocks: usize,
    pub steps: usize,
    pub walkers: usize,
    pub warmup: usize,
    pub step_width: f64,
    pub drift: bool,
}

impl Default for VmcSettings {
    fn default() -> Self {
        let d = VmcConfig::default();
        Self {
            blocks: d.blocks,
            steps: d.steps_per_block,
            walkers: d.walkers,
            warmup: d.warmup_blocks,
            step_width: d.step_width,
            drift: d.drift,
        }
    }
}

impl VmcSettings {
    pub fn config(&self, seed: u64) -> VmcConfig {
        VmcConfig {
            steps_per_block: self.steps,
            blocks: self.blocks,
            warmup_blocks: self.warmup,
            walkers: self.walkers,
            step_width: self.step_width,
            auto_tune: true,
            drift: self.drift,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DmcSettings {
    /// One time step, or at least three for a τ → 0 extrapolation.
    pub tau: Vec<f64>,
    pub population: usize,
    pub equilibration: usize,
    pub steps: usize,
    pub blocks: usize,
    pub feedback: Option<f64>,
}

impl Default for DmcSettings {
    fn default() -> Self {
        let d = DmcConfig::default();
        Self {
            tau: vec![d.tau],
            population: d.target_population,
            equilibration: d.equilibration_steps,
            steps: d.measurement_steps,
            blocks: d.blocks,
            feedback: d.feedback,
        }
    }
}

impl DmcSettings {
    pub fn config(&self, tau: f64, seed: u64) -> DmcConfig {
        DmcConfig {
            tau,
            target_population: self.population,
            equilibration_steps: self.equilibration,
            measurement_steps: self.steps,
            feedback: self.feedback,
            seed,
            blocks: self.blocks,
            ..DmcConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        match self.tau.len() {
            1 => Ok(()),
            n if n >= 3 => Ok(()),
            n => Err(CliError::Config(format!("give one time step or at least three, got {n}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeSettings {
    pub alpha: f64,
    pub samples: usize,
    pub iterations: usize,
    pub evaluations: usize,
    pub optimize_csf: bool,
}

impl Default for OptimizeSettings {
    fn default() -> Self {
        let d = OptimizationConfig::default();
        Self {
            alpha: d.alpha,
            samples: d.samples,
            iterations: d.max_iterations,
            evaluations: d.evaluations_per_round,
            optimize_csf: d.optimize_csf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectroSettings {
    /// Curve CSV or `fixture:NAME`; in a pipeline defaults to the scan output.
    pub curve: Option<String>,
    /// Reduced mass in amu.
    pub mu: Option<f64>,
    pub form: String,
    pub states: usize,
    pub bootstrap: usize,
    pub dipole_degree: usize,
}

impl Default for SpectroSettings {
    fn default() -> Self {
        Self { curve: None, mu: None, form: "morse".into(), states: 3, bootstrap: 200, dipole_degree: 1 }
    }
}

fn estimate_json(e: Estimate) -> Value {
    json!({ "value": e.value, "error": e.error })
}

const AXES: [&str; 3] = ["d_x", "d_y", "d_z"];

fn dipole_estimates(map: &mut BTreeMap<String, Estimate>, d: [Estimate; 3], axis: Option<Estimate>) {
    for (k, e) in AXES.iter().zip(d) {
        map.insert(k.to_string(), e);
    }
    if let Some(a) = axis {
        map.insert("d_axis".into(), a);
    }
}

/// Error ratio above which blocks are reported as too short.
pub const BLOCKING_RATIO_LIMIT: f64 = 1.2;

fn blocking_warning(what: &str, ratio: Option<f64>) -> Option<String> {
    ratio.filter(|r| *r > BLOCKING_RATIO_LIMIT).map(|r| {
        format!("{what}: error bars change by a factor {r:.2} when the block length doubles; blocks are shorter than the autocorrelation time, use more steps")
    })
}

pub struct VmcOutcome {
    pub result: VmcResult,
    pub estimates: BTreeMap<String, Estimate>,
    pub table: Table,
}

pub fn vmc_stage(
    psi: &TrialWavefunction,
    h: &Hamiltonian,
    settings: &VmcSettings,
    seed: u64,
    stamp: &Stamp,
) -> Result<VmcOutcome, CliError> {
    let result = run_vmc(psi, h, &settings.config(seed)).map_err(|e| CliError::stage("vmc", e))?;
    let mut estimates = BTreeMap::from([("energy".to_string(), result.energy)]);
    dipole_estimates(&mut estimates, result.dipole, result.dipole_axis);
    let mut t = stamp.table("vmc", &["block", "E_mean", "E_var", "d_x", "d_y", "d_z", "acceptance"]);
    t.meta("stage_seed", seed);
    for (k, e) in &estimates {
        t.meta_estimate(k, *e);
    }
    t.meta("variance", num(result.variance))
        .meta("acceptance", num(result.acceptance))
        .meta("step_width", num(result.step_width))
        .meta("samples", result.samples);
    if let Some(r) = result.blocking_ratio {
        t.meta("blocking_ratio", num(r));
    }
    for b in &result.blocks {
        t.push_numbers(&[b.block as f64, b.energy, b.energy_variance, b.dipole.x, b.dipole.y, b.dipole.z, b.acceptance]);
    }
    Ok(VmcOutcome { result, estimates, table: t })
}

impl VmcOutcome {
    pub fn warnings(&self) -> Vec<String> {
        blocking_warning("vmc", self.result.blocking_ratio).into_iter().collect()
    }

    pub fn summary(&self) -> Value {
        json!({
            "energy": estimate_json(self.result.energy),
            "variance": self.result.variance,
            "acceptance": self.result.acceptance,
            "dipole": self.result.dipole.map(estimate_json),
        })
    }
}

pub struct DmcOutcome {
    pub runs: Vec<DmcResult>,
    pub estimates: BTreeMap<String, Estimate>,
    /// Main table first; per-τ generation tables follow with their suffix.
    pub tables: Vec<(String, Table)>,
}

impl DmcOutcome {
    pub fn warnings(&self) -> Vec<String> {
        self.runs.iter().filter_map(|r| blocking_warning(&format!("dmc tau = {}", r.tau), r.blocking_ratio)).collect()
    }

    pub fn summary(&self) -> Value {
        json!({
            "estimates": self.estimates.iter().map(|(k, e)| (k.clone(), estimate_json(*e))).collect::<BTreeMap<_, _>>(),
            "runs": self.runs.iter().map(|r| json!({
                "tau": r.tau,
                "energy_mixed": estimate_json(r.energy_mixed),
                "energy_growth": estimate_json(r.energy_growth),
                "mean_population": r.mean_population(),
                "acceptance": r.acceptance,
            })).collect::<Vec<_>>(),
        })
    }
}

fn generation_table(r: &DmcResult, seed: u64, stamp: &Stamp) -> Table {
    let mut t = stamp.table("dmc", &["generation", "E_mixed", "E_growth", "population", "d_x", "d_y", "d_z", "acceptance"]);
    t.meta("stage_seed", seed)
        .meta("tau", num(r.tau))
        .meta_estimate("energy", r.energy_mixed)
        .meta_estimate("energy_growth", r.energy_growth)
        .meta("acceptance", num(r.acceptance))
        .meta("mean_population", num(r.mean_population()));
    if let Some(b) = r.blocking_ratio {
        t.meta("blocking_ratio", num(b));
    }
    for (k, e) in AXES.iter().zip(r.dipole_mixed) {
        t.meta_estimate(k, e);
    }
    if let Some(a) = r.dipole_axis {
        t.meta_estimate("d_axis", a);
    }
    for g in &r.generations {
        t.push_numbers(&[
            g.generation as f64,
            g.energy_mixed,
            g.energy_growth,
            g.population as f64,
            g.dipole.x,
            g.dipole.y,
            g.dipole.z,
            g.acceptance,
        ]);
    }
    t
}

/// DMC from the final VMC walkers: one run, or a time-step study when
/// three or more τ are given.
pub fn dmc_stage(
    psi: &TrialWavefunction,
    h: &Hamiltonian,
    start: &[Walker],
    settings: &DmcSettings,
    seed: u64,
    stamp: &Stamp,
) -> Result<DmcOutcome, CliError> {
    settings.validate()?;
    let fail = |e| CliError::stage("dmc", e);
    let axis = h.geometry().bond_axis();
    if let [tau] = settings.tau[..] {
        let r = run_dmc(psi, h, start, &settings.config(tau, seed)).map_err(fail)?;
        let mut estimates = BTreeMap::from([("energy".to_string(), r.energy_mixed)]);
        dipole_estimates(&mut estimates, r.dipole_mixed, r.dipole_axis);
        let table = generation_table(&r, seed, stamp);
        return Ok(DmcOutcome { runs: vec![r], estimates, tables: vec![(String::new(), table)] });
    }
    let (study, runs) = timestep_study(psi, h, start, &settings.config(settings.tau[0], seed), &settings.tau).map_err(fail)?;
    let mut estimates = BTreeMap::from([("energy".to_string(), study.energy())]);
    let axis_estimate = axis.map(|a| {
        let value = (0..3).map(|k| a[k] * study.dipole_intercept[k].value).sum();
        let error = (0..3).map(|k| (a[k] * study.dipole_intercept[k].error).powi(2)).sum::<f64>().sqrt();
        Estimate::new(value, error)
    });
    dipole_estimates(&mut estimates, study.dipole_intercept, axis_estimate);
    let mut main = stamp.table(
        "dmc-timestep",
        &[
            "tau",
            "E_mixed",
            "E_mixed_error",
            "E_growth",
            "E_growth_error",
            "d_x",
            "d_x_error",
            "d_y",
            "d_y_error",
            "d_z",
            "d_z_error",
        ],
    );
    main.meta("stage_seed", seed)
        .meta("slope", num(study.energy_fit.slope.value))
        .meta("slope_error", num(study.energy_fit.slope.error))
        .meta("chi2", num(study.energy_fit.chi2));
    for (k, e) in &estimates {
        main.meta_estimate(k, *e);
    }
    let mut tables = Vec::new();
    for (k, r) in runs.iter().enumerate() {
        let mut row = vec![r.tau, r.energy_mixed.value, r.energy_mixed.error, r.energy_growth.value, r.energy_growth.error];
        for d in r.dipole_mixed {
            row.extend([d.value, d.error]);
        }
        main.push_numbers(&row);
        tables.push((format!("_tau{}", num(r.tau)), generation_table(r, stage_seed(seed, &format!("tau{k}")), stamp)));
    }
    tables.insert(0, (String::new(), main));
    Ok(DmcOutcome { runs, estimates, tables })
}

/// Extrapolated estimators 2·mixed − variational for every dipole entry
/// present in both tables.
pub fn extrapolation_table(
    vmc: &BTreeMap<String, Estimate>,
    dmc: &BTreeMap<String, Estimate>,
    stamp: &Stamp,
) -> Result<(Table, BTreeMap<String, Estimate>), CliError> {
    let mut t = stamp.table(
        "extrapolate",
        &["quantity", "variational", "variational_error", "mixed", "mixed_error", "extrapolated", "extrapolated_error"],
    );
    if let (Some(v), Some(m)) = (vmc.get("energy"), dmc.get("energy")) {
        t.meta_estimate("energy_vmc", *v).meta_estimate("energy_dmc", *m);
    }
    let mut out = BTreeMap::new();
    for key in ["d_x", "d_y", "d_z", "d_axis"] {
        let (Some(v), Some(m)) = (vmc.get(key), dmc.get(key)) else { continue };
        let x = extrapolated_estimator(*m, *v);
        t.push(vec![key.into(), num(v.value), num(v.error), num(m.value), num(m.error), num(x.value), num(x.error)]);
        t.meta_estimate(key, x);
        out.insert(key.to_string(), x);
    }
    if out.is_empty() {
        return Err(CliError::Config("the tables share no dipole estimates".into()));
    }
    Ok((t, out))
}

pub struct OptimizeOutcome {
    pub result: OptimizationResult,
    pub system: MolecularSystem,
    pub trace: Table,
}

pub fn optimize_stage(
    system: &MolecularSystem,
    model: &ModelOptions,
    settings: &OptimizeSettings,
    vmc: &VmcSettings,
    seed: u64,
    stamp: &Stamp,
) -> Result<OptimizeOutcome, CliError> {
    let (psi, h) = model.build(system)?;
    let config = OptimizationConfig {
        alpha: settings.alpha,
        samples: settings.samples,
        max_iterations: settings.iterations,
        evaluations_per_round: settings.evaluations,
        optimize_csf: settings.optimize_csf,
        vmc: vmc.config(seed),
        ..OptimizationConfig::default()
    };
    let result = optimize(&psi, &h, &config).map_err(|e| CliError::stage("optimize", e))?;
    let mut columns = vec!["round", "evaluation", "cost", "energy", "variance", "ess"];
    columns.extend(result.names.iter().map(String::as_str));
    let mut t = stamp.table("optimize", &columns);
    t.meta("stage_seed", seed)
        .meta("alpha", num(settings.alpha))
        .meta_estimate("energy_initial", result.initial_energy)
        .meta_estimate("energy", result.final_energy)
        .meta("converged", result.converged);
    for e in &result.trace {
        let mut row = vec![e.round as f64, e.evaluation as f64, e.value.cost, e.value.energy, e.value.variance, e.value.ess];
        row.extend(&e.parameters);
        t.push_numbers(&row);
    }
    let mut optimized = system.clone();
    optimized.jastrow = result.jastrow.clone();
    if settings.optimize_csf {
        optimized.expansion = result.expansion.clone();
    }
    Ok(OptimizeOutcome { result, system: optimized, trace: t })
}

impl OptimizeOutcome {
    pub fn summary(&self) -> Value {
        json!({
            "parameters": self.result.names.iter().cloned().zip(self.result.parameters.iter().copied()).collect::<BTreeMap<_, _>>(),
            "initial_energy": estimate_json(self.result.initial_energy),
            "final_energy": estimate_json(self.result.final_energy),
            "rounds": self.result.rounds,
            "converged": self.result.converged,
        })
    }
}

/// Replaces the bond-length placeholders `{R}`, `{R/2}` and `{-R/2}`.
pub fn substitute_template(template: &str, r: f64) -> Result<String, CliError> {
    if !template.contains("{R") && !template.contains("{-R") {
        return Err(CliError::Config("scan template has no bond-length placeholder ({R}, {R/2} or {-R/2})".into()));
    }
    Ok(template.replace("{-R/2}", &num(-0.5 * r)).replace("{R/2}", &num(0.5 * r)).replace("{R}", &num(r)))
}

pub struct ScanOutcome {
    pub points: Vec<CurvePoint>,
    pub failures: Vec<(f64, String)>,
    pub table: Table,
}

/// One VMC + DMC run per bond length. Energies are DMC mixed estimates (or
/// τ → 0 intercepts); dipoles are the extrapolated bond-axis estimators.
/// Failed points are recorded and skipped.
pub fn scan_stage(
    template: &str,
    lengths: &[f64],
    model: &ModelOptions,
    vmc: &VmcSettings,
    dmc: &DmcSettings,
    seed: u64,
    stamp: &Stamp,
) -> Result<ScanOutcome, CliError> {
    if lengths.is_empty() {
        return Err(CliError::Config("scan needs at least one bond length".into()));
    }
    substitute_template(template, 1.0)?;
    dmc.validate()?;
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for &r in lengths {
        let point_seed = rng::derive(seed, &[r.to_bits()]);
        let run = || -> Result<CurvePoint, CliError> {
            if !(r > 0.0) {
                return Err(CliError::Config(format!("bond length must be positive, got {r}")));
            }
            let loaded = system_from_text(&substitute_template(template, r)?)?;
            let (psi, h) = model.build(&loaded.system)?;
            let v = vmc_stage(&psi, &h, vmc, stage_seed(point_seed, "vmc"), stamp)?;
            let d = dmc_stage(&psi, &h, &v.result.walkers, dmc, stage_seed(point_seed, "dmc"), stamp)?;
            let (_, x) = extrapolation_table(&v.estimates, &d.estimates, stamp)?;
            let energy = d.estimates["energy"];
            let dipole = x.get("d_axis").copied().unwrap_or(Estimate::exact(0.0));
            Ok(CurvePoint {
                r,
                energy: energy.value,
                sigma_energy: energy.error,
                dipole: dipole.value,
                sigma_dipole: dipole.error,
            })
        };
        match run() {
            Ok(p) => points.push(p),
            Err(e) => failures.push((r, e.to_string())),
        }
    }
    let mut t = stamp.table("scan", &["R", "E", "sigmaE", "d", "sigmad"]);
    t.meta("stage_seed", seed).meta("lengths", lengths.iter().map(|&r| num(r)).collect::<Vec<_>>().join(" "));
    for (r, msg) in &failures {
        t.meta(&format!("failed_R={}", num(*r)), msg);
    }
    for p in &points {
        t.push_numbers(&[p.r, p.energy, p.sigma_energy, p.dipole, p.sigma_dipole]);
    }
    Ok(ScanOutcome { points, failures, table: t })
}

/// A value with its uncertainty in the last digits, e.g. `6.80(5)`.
pub fn format_uncertain(e: Estimate) -> String {
    if !(e.error > 0.0) || !e.error.is_finite() {
        return format!("{:.6}", e.value);
    }
    let decimals = (-e.error.log10().floor()).max(0.0) as usize;
    let scaled = (e.error * 10f64.powi(decimals as i32)).round();
    format!("{:.*}({})", decimals, e.value, scaled as i64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub v: usize,
    /// Energy above the well bottom, cm⁻¹.
    pub energy: f64,
    pub mean_r: f64,
    /// ⟨d⟩_v in a.u.; `None` when the state reaches beyond the dipole data.
    pub dipole: Option<Estimate>,
}

pub struct SpectroOutcome {
    pub fit: CurveFit,
    pub constants: SpectroscopicConstants,
    pub levels: Vec<Level>,
    pub warnings: Vec<String>,
    pub report: String,
    pub curve: Table,
    pub levels_table: Table,
}

impl SpectroOutcome {
    pub fn summary(&self) -> Value {
        json!({
            "form": self.fit.form.to_string(),
            "r_e": estimate_json(self.constants.r_e),
            "d_e": estimate_json(self.constants.d_e),
            "omega_e": estimate_json(self.constants.omega_e),
            "levels": self.levels.iter().map(|l| json!({
                "v": l.v, "energy_cm": l.energy, "mean_r": l.mean_r, "dipole": l.dipole.map(estimate_json),
            })).collect::<Vec<_>>(),
        })
    }
}

fn numerov_grid(fit: &CurveFit) -> (f64, f64) {
    match &fit.model {
        FittedModel::Morse(p) => ((p.r_e - 2.5 / p.a).max(0.2 * p.r_e), p.r_e + 12.0 / p.a),
        FittedModel::Polynomial(_) => fit.range,
    }
}

/// Points used by the cross-check fit: a low-order polynomial only describes
/// the well near its minimum, so it sees the 7 points closest to the lowest one.
fn cross_window(points: &[CurvePoint], form: CurveForm) -> Vec<CurvePoint> {
    let CurveForm::Polynomial { degree } = form else { return points.to_vec() };
    let Some(lowest) = points.iter().min_by(|a, b| a.energy.total_cmp(&b.energy)) else { return Vec::new() };
    let mut near = points.to_vec();
    near.sort_by(|a, b| (a.r - lowest.r).abs().total_cmp(&(b.r - lowest.r).abs()));
    near.truncate((degree + 3).max(7));
    near.sort_by(|a, b| a.r.total_cmp(&b.r));
    near
}

pub fn spectro_stage(
    points: &[CurvePoint],
    settings: &SpectroSettings,
    seed: u64,
    stamp: &Stamp,
) -> Result<SpectroOutcome, CliError> {
    let fail = |e| CliError::stage("spectro", e);
    let form: CurveForm =
        settings.form.parse().map_err(|e: <CurveForm as std::str::FromStr>::Err| CliError::Config(e.to_string()))?;
    let mu_amu = settings.mu.ok_or_else(|| CliError::Config("the reduced mass (mu, amu) is required".into()))?;
    if !(mu_amu > 0.0) {
        return Err(CliError::Config(format!("reduced mass must be positive, got {mu_amu}")));
    }
    let mu = mu_amu * ELECTRON_MASS_PER_AMU;
    let fit = fit_curve(points, form, mu).map_err(fail)?;
    let mut warnings = Vec::new();
    let constants = if settings.bootstrap >= 2 {
        let b = bootstrap(points, form, mu, settings.bootstrap, seed).map_err(fail)?;
        if b.failed > 0 {
            warnings.push(format!("{} of {} bootstrap replicas failed to fit", b.failed, settings.bootstrap));
        }
        b.constants
    } else {
        fit.constants
    };

    let cross = match form {
        CurveForm::Morse => CurveForm::Polynomial { degree: 4 },
        CurveForm::Polynomial { .. } => CurveForm::Morse,
    };
    let cross_fit = fit_curve(&cross_window(points, cross), cross, mu).ok();
    if let Some(c) = &cross_fit {
        for d in form_disagreements(&fit.constants, &c.constants) {
            warnings.push(format!("{form} and {cross} fits disagree on {d}"));
        }
    }

    let dipole = fit_dipole(points, settings.dipole_degree).map_err(fail)?;
    let (lo, hi) = numerov_grid(&fit);
    let grid = RadialGrid::new(lo, hi, 6001).map_err(fail)?;
    let model = fit.model.clone();
    let bound = numerov_solve(|r| model.value(r), mu, grid, settings.states, None).map_err(fail)?;
    if !bound.is_complete() {
        warnings.push(format!("only {} of {} requested states are bound", bound.states.len(), bound.requested));
    }
    let mut levels = Vec::new();
    for s in &bound.states {
        let dipole = match vibrational_average(&dipole, s) {
            Ok(d) => Some(d),
            Err(e) => {
                warnings.push(format!("v = {}: {e}", s.v));
                None
            }
        };
        levels.push(Level { v: s.v, energy: s.energy * WAVENUMBER_PER_HARTREE, mean_r: s.expectation(|r| r), dipole });
    }

    let mut curve = stamp.table("spectro-curve", &["R", "E_fit", "d_fit"]);
    curve.meta("form", form).meta("mu_amu", num(mu_amu));
    let (a, b) = fit.range;
    for k in 0..=200 {
        let r = a + (b - a) * k as f64 / 200.0;
        curve.push_numbers(&[r, fit.model.value(r), dipole.value(r)]);
    }
    let mut levels_table = stamp.table("spectro-levels", &["v", "E_cm", "R_mean", "d", "d_error"]);
    levels_table.meta("form", form).meta("well_minimum", num(bound.well_minimum));
    for l in &levels {
        let d = l.dipole.unwrap_or(Estimate::new(f64::NAN, f64::NAN));
        levels_table.push_numbers(&[l.v as f64, l.energy, l.mean_r, d.value, d.error]);
    }

    let report = render_report(points.len(), mu_amu, &fit, &constants, cross_fit.as_ref(), &levels, &warnings);
    Ok(SpectroOutcome { fit, constants, levels, warnings, report, curve, levels_table })
}

/// A polynomial's D_e is the rise to the outermost sample, a lower bound.
fn format_d_e(form: CurveForm, d_e: Estimate) -> String {
    match form {
        CurveForm::Polynomial { .. } => format!("≥ {}", format_uncertain(d_e)),
        CurveForm::Morse => format_uncertain(d_e),
    }
}

fn render_report(
    n_points: usize,
    mu_amu: f64,
    fit: &CurveFit,
    constants: &SpectroscopicConstants,
    cross: Option<&CurveFit>,
    levels: &[Level],
    warnings: &[String],
) -> String {
    let mut out = String::new();
    let d0 = levels.first().and_then(|l| l.dipole);
    let fmt_d = |d: Option<Estimate>, scale: f64| {
        d.map_or("n/a".to_string(), |d| format_uncertain(Estimate::new(d.value * scale, d.error * scale)))
    };
    let _ = writeln!(out, "# Spectroscopic constants\n");
    let _ = writeln!(out, "{n_points} curve points, {} fit, reduced mass {mu_amu} amu.\n", fit.form);
    let _ = writeln!(out, "| Method | R_e (bohr) | D_e (cm-1) | omega_e (cm-1) | <d>_0 (a.u.) | <d>_0 (D) |");
    let _ = writeln!(out, "|---|---|---|---|---|---|");
    let _ = writeln!(
        out,
        "| QMC ({}) | {} | {} | {} | {} | {} |",
        fit.form,
        format_uncertain(constants.r_e),
        format_d_e(fit.form, constants.d_e),
        format_uncertain(constants.omega_e),
        fmt_d(d0, 1.0),
        fmt_d(d0, DEBYE_PER_AU),
    );
    if let Some(c) = cross {
        let k = c.constants;
        let _ = writeln!(
            out,
            "| cross-check ({}) | {} | {} | {} | | |",
            c.form,
            format_uncertain(k.r_e),
            format_d_e(c.form, k.d_e),
            format_uncertain(k.omega_e)
        );
    }
    let _ = writeln!(out, "\n## Vibrational levels\n");
    let _ = writeln!(out, "| v | E_v (cm-1) | <R>_v (bohr) | <d>_v (a.u.) | <d>_v (D) |");
    let _ = writeln!(out, "|---|---|---|---|---|");
    for l in levels {
        let _ = writeln!(
            out,
            "| {} | {:.2} | {:.4} | {} | {} |",
            l.v,
            l.energy,
            l.mean_r,
            fmt_d(l.dipole, 1.0),
            fmt_d(l.dipole, DEBYE_PER_AU)
        );
    }
    if !warnings.is_empty() {
        let _ = writeln!(out, "\n## Warnings\n");
        for w in warnings {
            let _ = writeln!(out, "- {w}");
        }
    }
    out
}
