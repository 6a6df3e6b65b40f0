//! `qmcdip run`: a TOML pipeline of stages executed in order,
//! optimize → vmc → dmc → extrapolate → scan → spectro.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use qmcdip_core::spectroscopy::CurvePoint;
use qmcdip_core::system::MolecularSystem;
use qmcdip_core::wavefunction::Walker;

use crate::error::CliError;
use crate::inputs::{load_curve, load_system, ModelOptions, FIXTURE_PREFIX};
use crate::manifest::RunManifest;
use crate::stages::{
    dmc_stage, extrapolation_table, optimize_stage, scan_stage, spectro_stage, stage_seed, vmc_stage, DmcSettings,
    OptimizeSettings, SpectroSettings, Stamp, VmcSettings,
};
use crate::table::write_file;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const STAGE_ORDER: [&str; 6] = ["optimize", "vmc", "dmc", "extrapolate", "scan", "spectro"];

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSettings {
    /// System file path (relative to the config file) or `fixture:NAME`.
    pub source: String,
    pub bond_length: Option<f64>,
    pub csf_cutoff: Option<f64>,
    pub ecp_quad_order: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSettings {
    /// System template with `{R}`, `{R/2}` or `{-R/2}` placeholders.
    pub template: String,
    pub lengths: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtrapolateSettings {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub out_dir: Option<String>,
    /// Explicit stage list; by default every configured stage runs.
    pub stages: Option<Vec<String>>,
    pub system: Option<SystemSettings>,
    pub optimize: Option<OptimizeSettings>,
    pub vmc: Option<VmcSettings>,
    pub dmc: Option<DmcSettings>,
    pub extrapolate: Option<ExtrapolateSettings>,
    pub scan: Option<ScanSettings>,
    pub spectro: Option<SpectroSettings>,
}

/// Command-line and environment overrides applied on top of the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub csf_cutoff: Option<f64>,
    pub ecp_quad_order: Option<u32>,
    pub opt_alpha: Option<f64>,
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("pipeline config: {e}")))
    }

    /// Stages to run, in canonical order.
    pub fn stage_list(&self) -> Result<Vec<&'static str>, CliError> {
        // Without [system], [vmc] and [dmc] only configure the scan.
        let sys = self.system.is_some();
        let present = |s: &str| match s {
            "optimize" => self.optimize.is_some(),
            "vmc" => sys && self.vmc.is_some(),
            "dmc" => sys && self.dmc.is_some(),
            "extrapolate" => self.extrapolate.is_some() || (sys && self.vmc.is_some() && self.dmc.is_some()),
            "scan" => self.scan.is_some(),
            "spectro" => self.spectro.is_some(),
            _ => false,
        };
        let list: Vec<&'static str> = match &self.stages {
            Some(names) => {
                for n in names {
                    if !STAGE_ORDER.contains(&n.as_str()) {
                        return Err(CliError::Config(format!("unknown stage '{n}'; stages are {}", STAGE_ORDER.join(", "))));
                    }
                }
                STAGE_ORDER.into_iter().filter(|s| names.iter().any(|n| n == s)).collect()
            }
            None => STAGE_ORDER.into_iter().filter(|s| present(s)).collect(),
        };
        if list.is_empty() {
            return Err(CliError::Config("pipeline declares no stages".into()));
        }
        let has = |s: &str| list.contains(&s);
        if has("dmc") && !has("vmc") {
            return Err(CliError::Config("the dmc stage needs a vmc stage for its initial walkers".into()));
        }
        if has("extrapolate") && !(has("vmc") && has("dmc")) {
            return Err(CliError::Config("the extrapolate stage needs both vmc and dmc".into()));
        }
        if ["optimize", "vmc"].iter().any(|s| has(s)) && self.system.is_none() {
            return Err(CliError::Config("a [system] section is required for sampling stages".into()));
        }
        if has("scan") && self.scan.is_none() {
            return Err(CliError::Config("the scan stage needs a [scan] section".into()));
        }
        if has("spectro") && self.spectro.as_ref().is_none_or(|s| s.curve.is_none()) && !has("scan") {
            return Err(CliError::Config("the spectro stage needs a curve or a scan stage".into()));
        }
        Ok(list)
    }

    fn apply(&mut self, o: &Overrides, base: &Path) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(d) = &o.out_dir {
            self.out_dir = Some(d.display().to_string());
        }
        let resolve = |p: &mut String| {
            if !p.starts_with(FIXTURE_PREFIX) && Path::new(p.as_str()).is_relative() {
                *p = base.join(&*p).display().to_string();
            }
        };
        if let Some(sys) = &mut self.system {
            resolve(&mut sys.source);
            sys.csf_cutoff = o.csf_cutoff.or(sys.csf_cutoff);
            sys.ecp_quad_order = o.ecp_quad_order.or(sys.ecp_quad_order);
        }
        if let Some(scan) = &mut self.scan {
            resolve(&mut scan.template);
        }
        if let Some(curve) = self.spectro.as_mut().and_then(|s| s.curve.as_mut()) {
            resolve(curve);
        }
        if let (Some(a), Some(opt)) = (o.opt_alpha, &mut self.optimize) {
            opt.alpha = a;
        }
    }

    fn check_inputs(&self) -> Result<(), CliError> {
        let files = [
            self.system.as_ref().map(|s| s.source.as_str()),
            self.scan.as_ref().map(|s| s.template.as_str()),
            self.spectro.as_ref().and_then(|s| s.curve.as_deref()),
        ];
        for f in files.into_iter().flatten().filter(|f| !f.starts_with(FIXTURE_PREFIX)) {
            if !Path::new(f).is_file() {
                return Err(CliError::MissingInput { path: f.into(), message: "no such file".into() });
            }
        }
        Ok(())
    }
}

/// Loads, validates and runs a pipeline; the manifest is written even when
/// a stage fails.
pub fn run_pipeline(config_path: &Path, overrides: &Overrides) -> Result<RunManifest, CliError> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| CliError::MissingInput { path: config_path.into(), message: e.to_string() })?;
    let mut config = PipelineConfig::parse(&text)?;
    let base = config_path.parent().map(Path::to_path_buf).unwrap_or_default();
    config.apply(overrides, &base);
    let stages = config.stage_list()?;
    config.check_inputs()?;
    let out_dir = PathBuf::from(config.out_dir.clone().unwrap_or_else(|| ".".into()));

    let loaded = match &config.system {
        Some(s) => Some(load_system(&s.source, s.bond_length)?),
        None => None,
    };
    let echo = serde_json::to_value(&config).expect("config serializes");
    let mut manifest = RunManifest::new("run", echo, config.seed, loaded.as_ref().map(|l| l.sha256.clone()));
    let result = execute(&config, &stages, loaded.map(|l| l.system), &out_dir, &mut manifest);
    manifest.finish(&result);
    manifest.write(&out_dir.join(MANIFEST_FILE))?;
    result.map(|()| manifest)
}

fn execute(
    config: &PipelineConfig,
    stages: &[&str],
    system: Option<MolecularSystem>,
    out_dir: &Path,
    manifest: &mut RunManifest,
) -> Result<(), CliError> {
    let stamp = Stamp { manifest: MANIFEST_FILE.into(), seed: config.seed, system_sha256: manifest.system_sha256.clone() };
    let model = ModelOptions {
        csf_cutoff: config.system.as_ref().and_then(|s| s.csf_cutoff),
        ecp_quad_order: config.system.as_ref().and_then(|s| s.ecp_quad_order),
    };
    let vmc_settings = config.vmc.clone().unwrap_or_default();
    let dmc_settings = config.dmc.clone().unwrap_or_default();
    let mut system = system;
    let mut walkers: Option<Vec<Walker>> = None;
    let mut vmc_estimates = None;
    let mut dmc_estimates = None;
    let mut scanned: Option<Vec<CurvePoint>> = None;
    let seed = config.seed;
    let write = |outputs: &mut Vec<String>, name: &str, text: &str| -> Result<(), CliError> {
        write_file(&out_dir.join(name), text)?;
        outputs.push(name.to_string());
        Ok(())
    };

    for &stage in stages {
        match stage {
            "optimize" => {
                let settings = config.optimize.clone().unwrap_or_default();
                let sys = system.as_ref().expect("checked by stage_list");
                let o = manifest.stage("optimize", |out| {
                    let o = optimize_stage(sys, &model, &settings, &vmc_settings, stage_seed(seed, "optimize"), &stamp)?;
                    write(out, "optimized.sys", &o.system.to_text())?;
                    write(out, "optimize_trace.csv", &o.trace.render())?;
                    let summary = o.summary();
                    Ok((o, summary))
                })?;
                manifest.warnings.extend(o.result.warnings.iter().cloned());
                system = Some(o.system);
            }
            "vmc" => {
                let sys = system.as_ref().expect("checked by stage_list");
                let v = manifest.stage("vmc", |out| {
                    let (psi, h) = model.build(sys)?;
                    let v = vmc_stage(&psi, &h, &vmc_settings, stage_seed(seed, "vmc"), &stamp)?;
                    write(out, "vmc.csv", &v.table.render())?;
                    let summary = v.summary();
                    Ok((v, summary))
                })?;
                manifest.warnings.extend(v.warnings());
                walkers = Some(v.result.walkers);
                vmc_estimates = Some(v.estimates);
            }
            "dmc" => {
                let sys = system.as_ref().expect("checked by stage_list");
                let start = walkers.as_deref().expect("vmc runs before dmc");
                let d = manifest.stage("dmc", |out| {
                    let (psi, h) = model.build(sys)?;
                    let d = dmc_stage(&psi, &h, start, &dmc_settings, stage_seed(seed, "dmc"), &stamp)?;
                    for (suffix, t) in &d.tables {
                        write(out, &format!("dmc{suffix}.csv"), &t.render())?;
                    }
                    let summary = d.summary();
                    Ok((d, summary))
                })?;
                manifest.warnings.extend(d.warnings());
                dmc_estimates = Some(d.estimates);
            }
            "extrapolate" => {
                let (v, d) = (vmc_estimates.as_ref().expect("vmc ran"), dmc_estimates.as_ref().expect("dmc ran"));
                manifest.stage("extrapolate", |out| {
                    let (t, x) = extrapolation_table(v, d, &stamp)?;
                    write(out, "extrapolate.csv", &t.render())?;
                    Ok((
                        (),
                        json!(x
                            .iter()
                            .map(|(k, e)| (k.clone(), [e.value, e.error]))
                            .collect::<std::collections::BTreeMap<_, _>>()),
                    ))
                })?;
            }
            "scan" => {
                let scan = config.scan.as_ref().expect("checked by stage_list");
                let template = std::fs::read_to_string(&scan.template)
                    .map_err(|e| CliError::MissingInput { path: scan.template.clone().into(), message: e.to_string() })?;
                let s = manifest.stage("scan", |out| {
                    let s = scan_stage(
                        &template,
                        &scan.lengths,
                        &model,
                        &vmc_settings,
                        &dmc_settings,
                        stage_seed(seed, "scan"),
                        &stamp,
                    )?;
                    write(out, "scan.csv", &s.table.render())?;
                    let summary = json!({ "points": s.points.len(), "failures": s.failures });
                    Ok((s, summary))
                })?;
                manifest.warnings.extend(s.failures.iter().map(|(r, m)| format!("scan point R = {r} failed: {m}")));
                if s.points.is_empty() {
                    return Err(CliError::PartialScan { failed: s.failures.len(), total: scan.lengths.len() });
                }
                scanned = Some(s.points);
            }
            "spectro" => {
                let settings = config.spectro.clone().unwrap_or_default();
                let points = match (&settings.curve, &scanned) {
                    (Some(c), _) => load_curve(c)?.0,
                    (None, Some(p)) => p.clone(),
                    (None, None) => unreachable!("checked by stage_list"),
                };
                let s = manifest.stage("spectro", |out| {
                    let s = spectro_stage(&points, &settings, stage_seed(seed, "spectro"), &stamp)?;
                    write(out, "spectro.md", &s.report)?;
                    write(out, "spectro_curve.csv", &s.curve.render())?;
                    write(out, "spectro_levels.csv", &s.levels_table.render())?;
                    let summary = s.summary();
                    Ok((s, summary))
                })?;
                manifest.warnings.extend(s.warnings);
            }
            other => unreachable!("unknown stage {other}"),
        }
    }
    if let (Some(scan), Some(points)) = (&config.scan, &scanned) {
        if points.len() < scan.lengths.len() {
            return Err(CliError::PartialScan { failed: scan.lengths.len() - points.len(), total: scan.lengths.len() });
        }
    }
    Ok(())
}
