//! Command-line interface: argument definitions and single-stage commands.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::error::CliError;
use crate::inputs::{load_curve, load_system, ModelOptions};
use crate::manifest::RunManifest;
use crate::pipeline::{run_pipeline, Overrides};
use crate::stages::{
    dmc_stage, extrapolation_table, optimize_stage, scan_stage, spectro_stage, stage_seed, vmc_stage, DmcSettings,
    OptimizeSettings, SpectroSettings, Stamp, VmcSettings,
};
use crate::table::{write_file, Table};

#[derive(Debug, Parser)]
#[command(name = "qmcdip", version, about = "Quantum Monte Carlo energies, dipoles and spectroscopic constants")]
pub struct Cli {
    /// Worker threads (0 = all cores). Results do not depend on this.
    #[arg(long, global = true, env = "QMCDIP_THREADS")]
    pub threads: Option<usize>,
    /// Master seed; every stage seed is derived from it.
    #[arg(long, global = true, env = "QMCDIP_SEED")]
    pub seed: Option<u64>,
    /// Directory for outputs given as relative paths.
    #[arg(long, global = true, env = "QMCDIP_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    /// Drop CSFs with |c| below this fraction of the largest coefficient.
    #[arg(long, global = true, env = "QMCDIP_CSF_CUTOFF")]
    pub csf_cutoff: Option<f64>,
    /// Angular quadrature order for nonlocal ECP channels.
    #[arg(long, global = true, env = "QMCDIP_ECP_QUAD_ORDER")]
    pub ecp_quad_order: Option<u32>,
    /// Energy weight α of the optimization cost.
    #[arg(long, global = true, env = "QMCDIP_OPT_ALPHA")]
    pub opt_alpha: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Variational Monte Carlo; writes one row per block.
    Vmc(VmcArgs),
    /// Fixed-node diffusion Monte Carlo; writes one row per generation.
    Dmc(DmcArgs),
    /// Extrapolated dipole estimators 2·mixed − variational.
    Extrapolate(ExtrapolateArgs),
    /// Optimize Jastrow parameters; writes a re-readable system file.
    Optimize(OptimizeArgs),
    /// Spectroscopic constants and vibrational averages from a curve.
    Spectro(SpectroArgs),
    /// Run a TOML pipeline.
    Run(RunArgs),
    /// VMC + DMC at each bond length of a system template.
    Scan(ScanArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SystemArgs {
    /// System file or `fixture:NAME`.
    #[arg(long)]
    pub system: String,
    /// Bond length for diatomic fixtures, bohr.
    #[arg(long)]
    pub bond_length: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct VmcOpts {
    #[arg(long, default_value_t = VmcSettings::default().blocks)]
    pub blocks: usize,
    /// Sweeps per block.
    #[arg(long, default_value_t = VmcSettings::default().steps)]
    pub steps: usize,
    #[arg(long, default_value_t = VmcSettings::default().walkers)]
    pub walkers: usize,
    #[arg(long, default_value_t = VmcSettings::default().warmup)]
    pub warmup: usize,
    #[arg(long, default_value_t = VmcSettings::default().step_width)]
    pub step_width: f64,
    /// Drifted (Langevin) proposals.
    #[arg(long)]
    pub drift: bool,
}

impl VmcOpts {
    fn settings(&self) -> VmcSettings {
        VmcSettings {
            blocks: self.blocks,
            steps: self.steps,
            walkers: self.walkers,
            warmup: self.warmup,
            step_width: self.step_width,
            drift: self.drift,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DmcOpts {
    /// Time step(s); three or more trigger a τ → 0 extrapolation.
    #[arg(long, value_delimiter = ',', default_value = "0.01")]
    pub tau: Vec<f64>,
    #[arg(long, default_value_t = DmcSettings::default().population)]
    pub population: usize,
    /// Measurement generations.
    #[arg(long, default_value_t = DmcSettings::default().steps)]
    pub steps: usize,
    #[arg(long, default_value_t = DmcSettings::default().equilibration)]
    pub equilibration: usize,
    #[arg(long = "dmc-blocks", default_value_t = DmcSettings::default().blocks)]
    pub dmc_blocks: usize,
}

/// VMC pre-run that equilibrates the initial DMC population.
#[derive(Debug, Clone, Args)]
pub struct PrerunOpts {
    #[arg(long, default_value_t = 32)]
    pub vmc_walkers: usize,
    #[arg(long, default_value_t = 20)]
    pub vmc_blocks: usize,
    /// Sweeps per pre-run block.
    #[arg(long, default_value_t = 50)]
    pub vmc_steps: usize,
}

impl PrerunOpts {
    fn settings(&self) -> VmcSettings {
        VmcSettings { walkers: self.vmc_walkers, blocks: self.vmc_blocks, steps: self.vmc_steps, ..VmcSettings::default() }
    }
}

impl DmcOpts {
    fn settings(&self) -> DmcSettings {
        DmcSettings {
            tau: self.tau.clone(),
            population: self.population,
            equilibration: self.equilibration,
            steps: self.steps,
            blocks: self.dmc_blocks,
            feedback: None,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct VmcArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[command(flatten)]
    pub vmc: VmcOpts,
    #[arg(long, default_value = "vmc.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct DmcArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[command(flatten)]
    pub dmc: DmcOpts,
    #[command(flatten)]
    pub vmc: PrerunOpts,
    #[arg(long, default_value = "dmc.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ExtrapolateArgs {
    #[arg(long)]
    pub vmc: PathBuf,
    #[arg(long)]
    pub dmc: PathBuf,
    #[arg(long, default_value = "extrapolate.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Energy weight α; defaults to --opt-alpha, then 0.5.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = OptimizeSettings::default().samples)]
    pub samples: usize,
    /// Sample/minimize rounds.
    #[arg(long, default_value_t = OptimizeSettings::default().iterations)]
    pub iters: usize,
    /// Also optimize CSF coefficients.
    #[arg(long)]
    pub optimize_csf: bool,
    #[command(flatten)]
    pub vmc: VmcOpts,
    #[arg(long, default_value = "optimized.sys")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SpectroArgs {
    /// CSV with columns R,E,sigmaE,d,sigmad, or `fixture:morse-demo`.
    #[arg(long)]
    pub curve: String,
    /// Reduced mass, amu.
    #[arg(long)]
    pub mu: f64,
    /// `morse` or `polyK`.
    #[arg(long, default_value = "morse")]
    pub form: String,
    #[arg(long, default_value_t = 3)]
    pub states: usize,
    /// Bootstrap replicas (0 = covariance errors only).
    #[arg(long, default_value_t = 200)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 1)]
    pub dipole_degree: usize,
    #[arg(long, default_value = "spectro.md")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Pipeline configuration (TOML).
    pub config: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    /// System file with `{R}`, `{R/2}` or `{-R/2}` placeholders.
    pub template: PathBuf,
    /// Bond lengths, bohr.
    #[arg(long, value_delimiter = ',', required = true)]
    pub lengths: Vec<f64>,
    #[command(flatten)]
    pub dmc: DmcOpts,
    #[command(flatten)]
    pub vmc: PrerunOpts,
    #[arg(long, default_value = "scan.csv")]
    pub out: PathBuf,
}

struct Session {
    seed: u64,
    out_dir: Option<PathBuf>,
    model: ModelOptions,
}

impl Session {
    fn path(&self, p: &Path) -> PathBuf {
        match &self.out_dir {
            Some(d) if p.is_relative() => d.join(p),
            _ => p.to_path_buf(),
        }
    }

    fn stamp(&self, out: &Path, sha: Option<String>) -> Stamp {
        Stamp {
            manifest: manifest_path(out).file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
            seed: self.seed,
            system_sha256: sha,
        }
    }
}

/// Manifest written next to a single-command output: `x.csv` → `x.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

fn finish(manifest: &mut RunManifest, out: &Path, result: Result<(), CliError>) -> Result<(), CliError> {
    manifest.finish(&result);
    manifest.write(&manifest_path(out))?;
    result
}

/// Prints warnings and records them in the manifest.
fn warn(manifest: &mut RunManifest, warnings: Vec<String>) {
    for w in warnings {
        eprintln!("warning: {w}");
        manifest.warnings.push(w);
    }
}

fn write_outputs(outputs: &mut Vec<String>, path: &Path, text: &str) -> Result<(), CliError> {
    write_file(path, text)?;
    outputs.push(path.display().to_string());
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path.extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}{ext}"))
}

/// Executes a parsed command line.
pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    let session = Session {
        seed: cli.seed.unwrap_or(1),
        out_dir: cli.out_dir.clone(),
        model: ModelOptions { csf_cutoff: cli.csf_cutoff, ecp_quad_order: cli.ecp_quad_order },
    };
    let config = |args: serde_json::Value| {
        json!({
            "args": args,
            "csf_cutoff": cli.csf_cutoff,
            "ecp_quad_order": cli.ecp_quad_order,
            "opt_alpha": cli.opt_alpha,
        })
    };
    match &cli.command {
        Command::Vmc(a) => {
            let loaded = load_system(&a.system.system, a.system.bond_length)?;
            let out = session.path(&a.out);
            let settings = a.vmc.settings();
            let echo = config(
                json!({ "command": "vmc", "system": a.system.system, "bond_length": a.system.bond_length, "vmc": settings }),
            );
            let mut manifest = RunManifest::new("vmc", echo, session.seed, Some(loaded.sha256.clone()));
            let stamp = session.stamp(&out, Some(loaded.sha256.clone()));
            let result = manifest
                .stage("vmc", |outputs| {
                    let (psi, h) = session.model.build(&loaded.system)?;
                    let v = vmc_stage(&psi, &h, &settings, stage_seed(session.seed, "vmc"), &stamp)?;
                    write_outputs(outputs, &out, &v.table.render())?;
                    println!(
                        "E_VMC = {}  variance = {:.6e}  acceptance = {:.3}",
                        v.result.energy, v.result.variance, v.result.acceptance
                    );
                    let s = v.summary();
                    Ok((v.warnings(), s))
                })
                .map(|w| warn(&mut manifest, w));
            finish(&mut manifest, &out, result)
        }
        Command::Dmc(a) => {
            let loaded = load_system(&a.system.system, a.system.bond_length)?;
            let out = session.path(&a.out);
            let settings = a.dmc.settings();
            settings.validate()?;
            let warm = a.vmc.settings();
            let echo = config(
                json!({ "command": "dmc", "system": a.system.system, "bond_length": a.system.bond_length, "dmc": settings, "vmc": warm }),
            );
            let mut manifest = RunManifest::new("dmc", echo, session.seed, Some(loaded.sha256.clone()));
            let stamp = session.stamp(&out, Some(loaded.sha256.clone()));
            let result = (|| {
                let (psi, h) = session.model.build(&loaded.system)?;
                let v = manifest.stage("vmc", |_| {
                    let v = vmc_stage(&psi, &h, &warm, stage_seed(session.seed, "vmc"), &stamp)?;
                    let s = v.summary();
                    Ok((v, s))
                })?;
                let d = manifest.stage("dmc", |outputs| {
                    let mut d = dmc_stage(&psi, &h, &v.result.walkers, &settings, stage_seed(session.seed, "dmc"), &stamp)?;
                    d.tables[0].1.meta_estimate("energy_vmc", v.result.energy);
                    for (suffix, t) in &d.tables {
                        write_outputs(outputs, &with_suffix(&out, suffix), &t.render())?;
                    }
                    println!("E_DMC = {}  (E_VMC = {})", d.estimates["energy"], v.result.energy);
                    let s = d.summary();
                    Ok((d.warnings(), s))
                })?;
                warn(&mut manifest, d);
                Ok(())
            })();
            finish(&mut manifest, &out, result)
        }
        Command::Extrapolate(a) => {
            let out = session.path(&a.out);
            let (vt, dt) = (Table::read(&a.vmc)?, Table::read(&a.dmc)?);
            let echo = config(json!({ "command": "extrapolate", "vmc": a.vmc, "dmc": a.dmc }));
            let sha = vt.get("system_sha256").map(String::from);
            if sha.is_some() && sha.as_deref() != dt.get("system_sha256") {
                return Err(CliError::Config("the VMC and DMC tables come from different systems".into()));
            }
            let mut manifest = RunManifest::new("extrapolate", echo, session.seed, sha.clone());
            let stamp = session.stamp(&out, sha);
            let result = manifest.stage("extrapolate", |outputs| {
                let (t, x) = extrapolation_table(&vt.estimates(), &dt.estimates(), &stamp)?;
                write_outputs(outputs, &out, &t.render())?;
                for (k, e) in &x {
                    println!("{k} = {e}");
                }
                Ok((
                    (),
                    json!(x.iter().map(|(k, e)| (k.clone(), [e.value, e.error])).collect::<std::collections::BTreeMap<_, _>>()),
                ))
            });
            finish(&mut manifest, &out, result)
        }
        Command::Optimize(a) => {
            let loaded = load_system(&a.system.system, a.system.bond_length)?;
            let out = session.path(&a.out);
            let settings = OptimizeSettings {
                alpha: a.alpha.or(cli.opt_alpha).unwrap_or(OptimizeSettings::default().alpha),
                samples: a.samples,
                iterations: a.iters,
                optimize_csf: a.optimize_csf,
                ..OptimizeSettings::default()
            };
            let vmc = a.vmc.settings();
            let echo = config(json!({ "command": "optimize", "system": a.system.system, "optimize": settings, "vmc": vmc }));
            let mut manifest = RunManifest::new("optimize", echo, session.seed, Some(loaded.sha256.clone()));
            let stamp = session.stamp(&out, Some(loaded.sha256.clone()));
            let result = (|| {
                let o = manifest.stage("optimize", |outputs| {
                    let o = optimize_stage(
                        &loaded.system,
                        &session.model,
                        &settings,
                        &vmc,
                        stage_seed(session.seed, "optimize"),
                        &stamp,
                    )?;
                    write_outputs(outputs, &out, &o.system.to_text())?;
                    write_outputs(outputs, &with_suffix(&out, "_trace").with_extension("csv"), &o.trace.render())?;
                    println!("E: {} -> {}", o.result.initial_energy, o.result.final_energy);
                    let s = o.summary();
                    Ok((o, s))
                })?;
                manifest.warnings.extend(o.result.warnings);
                Ok(())
            })();
            finish(&mut manifest, &out, result)
        }
        Command::Spectro(a) => {
            let (points, sha) = load_curve(&a.curve)?;
            let out = session.path(&a.out);
            let settings = SpectroSettings {
                curve: Some(a.curve.clone()),
                mu: Some(a.mu),
                form: a.form.clone(),
                states: a.states,
                bootstrap: a.bootstrap,
                dipole_degree: a.dipole_degree,
            };
            let echo = config(json!({ "command": "spectro", "spectro": settings }));
            let mut manifest = RunManifest::new("spectro", echo, session.seed, Some(sha.clone()));
            let stamp = session.stamp(&out, Some(sha));
            let result = (|| {
                let s = manifest.stage("spectro", |outputs| {
                    let s = spectro_stage(&points, &settings, stage_seed(session.seed, "spectro"), &stamp)?;
                    write_outputs(outputs, &out, &s.report)?;
                    write_outputs(outputs, &with_suffix(&out, "_curve").with_extension("csv"), &s.curve.render())?;
                    write_outputs(outputs, &with_suffix(&out, "_levels").with_extension("csv"), &s.levels_table.render())?;
                    print!("{}", s.report);
                    let summary = s.summary();
                    Ok((s, summary))
                })?;
                manifest.warnings.extend(s.warnings);
                Ok(())
            })();
            finish(&mut manifest, &out, result)
        }
        Command::Run(a) => {
            let overrides = Overrides {
                seed: cli.seed,
                out_dir: cli.out_dir.clone(),
                csf_cutoff: cli.csf_cutoff,
                ecp_quad_order: cli.ecp_quad_order,
                opt_alpha: cli.opt_alpha,
            };
            let m = run_pipeline(&a.config, &overrides)?;
            for s in &m.stages {
                println!("{:<12} {:>9.2} s  {}", s.name, s.wall_seconds, s.outputs.join(", "));
            }
            for w in &m.warnings {
                eprintln!("warning: {w}");
            }
            Ok(())
        }
        Command::Scan(a) => {
            let template = std::fs::read_to_string(&a.template)
                .map_err(|e| CliError::MissingInput { path: a.template.clone(), message: e.to_string() })?;
            let sha = crate::inputs::sha256_hex(template.as_bytes());
            let out = session.path(&a.out);
            let (vmc, dmc) = (a.vmc.settings(), a.dmc.settings());
            let echo = config(json!({ "command": "scan", "template": a.template, "lengths": a.lengths, "vmc": vmc, "dmc": dmc }));
            let mut manifest = RunManifest::new("scan", echo, session.seed, Some(sha.clone()));
            let stamp = session.stamp(&out, Some(sha));
            let result = (|| {
                let s = manifest.stage("scan", |outputs| {
                    let s =
                        scan_stage(&template, &a.lengths, &session.model, &vmc, &dmc, stage_seed(session.seed, "scan"), &stamp)?;
                    write_outputs(outputs, &out, &s.table.render())?;
                    let summary = json!({ "points": s.points.len(), "failures": s.failures });
                    Ok((s, summary))
                })?;
                for (r, m) in &s.failures {
                    eprintln!("scan point R = {r} failed: {m}");
                    manifest.warnings.push(format!("scan point R = {r} failed: {m}"));
                }
                if s.failures.is_empty() {
                    Ok(())
                } else {
                    Err(CliError::PartialScan { failed: s.failures.len(), total: a.lengths.len() })
                }
            })();
            finish(&mut manifest, &out, result)
        }
    }
}
