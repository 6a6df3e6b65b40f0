//! Molecular systems: nuclei and electrons, one-particle orbitals, effective
//! core potentials, the text input format, built-in fixtures and orbital
//! grid export.

mod cube;
mod ecp;
mod fixtures;
mod geometry;
mod input;
mod orbitals;
pub mod units;

use std::collections::BTreeMap;

pub use cube::{export_orbital_grid, write_cube, GridBox, OrbitalGrid};
pub use ecp::{NonlocalChannel, RadialChannel, RadialTerm, SemilocalEcp};
pub use fixtures::{fixture, fixture_names, Fixture, FixtureOptions};
pub use geometry::{nuclear_dipole, Geometry, Nucleus};
pub use input::{parse_system, InputError};
pub use orbitals::{gaussian_norm, BasisFunction, BasisKind, CartesianShape, Orbital, OrbitalEval, OrbitalSet, Primitive};

use crate::wavefunction::{DeterminantExpansion, JastrowParams, TrialWavefunction, WavefunctionError};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("electron counts: {0}")]
    ElectronCounts(String),
    #[error("nucleus {nucleus} has non-positive charge {charge}")]
    NonPositiveCharge { nucleus: usize, charge: f64 },
    #[error("nuclei {0} and {1} coincide")]
    CoincidentNuclei(usize, usize),
    #[error("basis function '{label}' references missing center {center}")]
    MissingCenter { label: String, center: usize },
    #[error("basis: {0}")]
    Basis(String),
    #[error("ecp: {0}")]
    Ecp(String),
    #[error("unknown ecp '{0}'")]
    UnknownEcp(String),
    #[error("nucleus {nucleus} has charge {charge} but ecp '{ecp}' leaves {expected}")]
    EcpMismatch { nucleus: usize, ecp: String, charge: f64, expected: f64 },
    #[error("{spin} electrons: {electrons} exceed {orbitals} available orbitals")]
    TooFewOrbitals { spin: &'static str, electrons: usize, orbitals: usize },
    #[error("unknown fixture '{0}' (available: {1})")]
    UnknownFixture(String, String),
    #[error("orbital index {index} out of range ({count} orbitals)")]
    OrbitalIndex { index: usize, count: usize },
    #[error("grid: {0}")]
    Grid(String),
    #[error(transparent)]
    Wavefunction(#[from] WavefunctionError),
}

/// A fully specified calculation input: system, trial function and run
/// settings.
#[derive(Debug, Clone, PartialEq)]
pub struct MolecularSystem {
    pub geometry: Geometry,
    pub orbitals: OrbitalSet,
    pub ecps: Vec<SemilocalEcp>,
    pub expansion: DeterminantExpansion,
    pub jastrow: JastrowParams,
    /// Free-form `[run]` settings, key → value.
    pub run: BTreeMap<String, String>,
}

impl MolecularSystem {
    pub fn validate(&self) -> Result<(), SystemError> {
        let n_centers = self.geometry.nuclei().len();
        self.orbitals.validate(n_centers)?;
        for e in &self.ecps {
            e.validate()?;
        }
        for (i, n) in self.geometry.nuclei().iter().enumerate() {
            if let Some(name) = &n.ecp {
                let ecp = self.ecp(name).ok_or_else(|| SystemError::UnknownEcp(name.clone()))?;
                if (ecp.effective_charge() - n.charge).abs() > 1e-12 {
                    return Err(SystemError::EcpMismatch {
                        nucleus: i,
                        ecp: name.clone(),
                        charge: n.charge,
                        expected: ecp.effective_charge(),
                    });
                }
            }
        }
        let n_orb = self.orbitals.len();
        for (spin, count) in [("spin-up", self.geometry.n_up()), ("spin-down", self.geometry.n_down())] {
            if count > n_orb {
                return Err(SystemError::TooFewOrbitals { spin, electrons: count, orbitals: n_orb });
            }
        }
        self.expansion.validate_against(self.geometry.n_up(), self.geometry.n_down(), n_orb)?;
        self.jastrow.validate()?;
        Ok(())
    }

    pub fn ecp(&self, name: &str) -> Option<&SemilocalEcp> {
        self.ecps.iter().find(|e| e.name == name)
    }

    /// ECP attached to each nucleus, in nucleus order.
    pub fn nucleus_ecps(&self) -> Vec<Option<&SemilocalEcp>> {
        self.geometry.nuclei().iter().map(|n| n.ecp.as_deref().and_then(|name| self.ecp(name))).collect()
    }

    /// `Some(Z)` for all-electron nuclei, `None` where an ECP removes the cusp.
    pub fn cusp_charges(&self) -> Vec<Option<f64>> {
        self.geometry.nuclei().iter().map(|n| if n.ecp.is_some() { None } else { Some(n.charge) }).collect()
    }

    pub fn trial_wavefunction(&self) -> Result<TrialWavefunction, SystemError> {
        Ok(TrialWavefunction::new(&self.geometry, self.orbitals.clone(), self.expansion.clone(), self.jastrow.clone())?)
    }

    pub fn to_text(&self) -> String {
        input::to_text(self)
    }
}
