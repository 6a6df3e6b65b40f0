//! Loading systems and curves from files or built-in fixtures.

use std::path::Path;

use sha2::{Digest, Sha256};

use qmcdip_core::hamiltonian::{Hamiltonian, DEFAULT_QUADRATURE_ORDER};
use qmcdip_core::spectroscopy::{read_curve, CurvePoint};
use qmcdip_core::system::{fixture, parse_system, Fixture, FixtureOptions, MolecularSystem};
use qmcdip_core::wavefunction::{truncate_expansion, TrialWavefunction};

use crate::error::CliError;

/// Prefix selecting a built-in fixture instead of a file.
pub const FIXTURE_PREFIX: &str = "fixture:";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone)]
pub struct LoadedSystem {
    pub system: MolecularSystem,
    /// SHA-256 of the input text.
    pub sha256: String,
}

fn fixture_named(name: &str, bond_length: Option<f64>) -> Result<Fixture, CliError> {
    fixture(name, &FixtureOptions { bond_length }).map_err(|e| CliError::Config(e.to_string()))
}

/// Reads a system file, or a fixture given as `fixture:NAME`.
pub fn load_system(source: &str, bond_length: Option<f64>) -> Result<LoadedSystem, CliError> {
    let text = match source.strip_prefix(FIXTURE_PREFIX) {
        Some(name) => match fixture_named(name, bond_length)? {
            Fixture::System(s) => s.to_text(),
            Fixture::Curve(_) => return Err(CliError::Config(format!("fixture '{name}' is a curve, not a system"))),
        },
        None => {
            std::fs::read_to_string(source).map_err(|e| CliError::MissingInput { path: source.into(), message: e.to_string() })?
        }
    };
    system_from_text(&text)
}

pub fn system_from_text(text: &str) -> Result<LoadedSystem, CliError> {
    let system = parse_system(text).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(LoadedSystem { system, sha256: sha256_hex(text.as_bytes()) })
}

/// Reads a curve CSV, or a curve fixture given as `fixture:NAME`.
pub fn load_curve(source: &str) -> Result<(Vec<CurvePoint>, String), CliError> {
    if let Some(name) = source.strip_prefix(FIXTURE_PREFIX) {
        return match fixture_named(name, None)? {
            Fixture::Curve(points) => {
                let hash = sha256_hex(qmcdip_core::spectroscopy::write_curve(&points).as_bytes());
                Ok((points, hash))
            }
            Fixture::System(_) => Err(CliError::Config(format!("fixture '{name}' is a system, not a curve"))),
        };
    }
    let bytes =
        std::fs::read(Path::new(source)).map_err(|e| CliError::MissingInput { path: source.into(), message: e.to_string() })?;
    let points = read_curve(bytes.as_slice()).map_err(|e| CliError::Config(format!("{source}: {e}")))?;
    Ok((points, sha256_hex(&bytes)))
}

/// Physics settings shared by every sampling stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelOptions {
    pub csf_cutoff: Option<f64>,
    pub ecp_quad_order: Option<u32>,
}

impl ModelOptions {
    /// Flags win over the system file's `[run]` section, which wins over
    /// built-in defaults.
    pub fn resolve(&self, system: &MolecularSystem) -> Result<(f64, u32), CliError> {
        let run_value = |key: &str| system.run.get(key).map(|v| v.trim().to_string());
        let cutoff = match (self.csf_cutoff, run_value("csf_cutoff")) {
            (Some(c), _) => c,
            (None, Some(v)) => v.parse().map_err(|_| CliError::Config(format!("bad csf_cutoff '{v}'")))?,
            (None, None) => 0.0,
        };
        let order = match (self.ecp_quad_order, run_value("ecp_quad_order")) {
            (Some(o), _) => o,
            (None, Some(v)) => v.parse().map_err(|_| CliError::Config(format!("bad ecp_quad_order '{v}'")))?,
            (None, None) => DEFAULT_QUADRATURE_ORDER,
        };
        if !(0.0..1.0).contains(&cutoff) {
            return Err(CliError::Config(format!("CSF cutoff must lie in [0, 1), got {cutoff}")));
        }
        Ok((cutoff, order))
    }

    /// Trial wavefunction and Hamiltonian after CSF truncation.
    pub fn build(&self, system: &MolecularSystem) -> Result<(TrialWavefunction, Hamiltonian), CliError> {
        let (cutoff, order) = self.resolve(system)?;
        let mut s = system.clone();
        if cutoff > 0.0 {
            s.expansion = truncate_expansion(&s.expansion, cutoff);
        }
        let psi = s.trial_wavefunction().map_err(|e| CliError::Config(e.to_string()))?;
        let h = Hamiltonian::from_system(&s, order).map_err(|e| CliError::Config(e.to_string()))?;
        Ok((psi, h))
    }
}
