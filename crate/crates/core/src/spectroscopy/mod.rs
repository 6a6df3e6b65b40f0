//! Spectroscopic constants, vibrational levels and vibrationally averaged
//! dipoles from sampled potential-energy and dipole curves.
//!
//! Energies are hartree, lengths bohr and reduced masses electron masses
//! inside every computation; wavenumbers appear only in
//! [`SpectroscopicConstants`].

mod fit;
mod numerov;

pub use fit::{
    bootstrap, fit_curve, fit_dipole, form_disagreements, morse_potential, BootstrapSummary, CurveFit, CurveForm, FittedModel,
    MorseParams, PolynomialFit, SpectroscopicConstants,
};
pub use numerov::{numerov_solve, vibrational_average, BoundStates, RadialGrid, VibrationalState};

use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::system::units::{ANGSTROM_PER_BOHR, DEBYE_PER_AU, WAVENUMBER_PER_HARTREE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectroscopyError {
    #[error("{form} fit needs at least {needed} points, got {got}")]
    TooFewPoints { form: String, needed: usize, got: usize },
    #[error("point {index}: {message}")]
    InvalidPoint { index: usize, message: String },
    #[error("unbound fit: {0}")]
    Unbound(String),
    #[error("singular normal equations (condition number {condition:.3e})")]
    Singular { condition: f64 },
    #[error("fit did not converge after {0} iterations")]
    NoConvergence(usize),
    #[error("curve table: {0}")]
    Table(String),
    #[error("invalid radial grid: {0}")]
    InvalidGrid(String),
    #[error("grid too small: {side} turning point of state v={v} at E={energy:.6e} lies beyond the grid edge {edge} bohr")]
    GridTooSmall { side: &'static str, v: usize, energy: f64, edge: f64 },
    #[error("state v={v} extends over [{lo:.3}, {hi:.3}] bohr, outside the dipole fit range [{fit_lo:.3}, {fit_hi:.3}]")]
    Extrapolation { v: usize, lo: f64, hi: f64, fit_lo: f64, fit_hi: f64 },
    #[error("unknown unit '{0}'")]
    UnknownUnit(String),
    #[error("cannot convert {from} to {to}")]
    UnsupportedConversion { from: Unit, to: Unit },
}

/// One sampled point of a potential-energy and dipole curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "E")]
    pub energy: f64,
    #[serde(rename = "sigmaE")]
    pub sigma_energy: f64,
    /// Bond-axis dipole component, a.u.
    #[serde(rename = "d")]
    pub dipole: f64,
    #[serde(rename = "sigmad")]
    pub sigma_dipole: f64,
}

impl CurvePoint {
    pub fn validate(&self, index: usize) -> Result<(), SpectroscopyError> {
        let bad = |message: &str| Err(SpectroscopyError::InvalidPoint { index, message: message.into() });
        if !(self.r > 0.0) || !self.r.is_finite() {
            return bad("bond length must be positive");
        }
        if !self.energy.is_finite() || !self.dipole.is_finite() {
            return bad("non-finite value");
        }
        if !(self.sigma_energy >= 0.0) || !(self.sigma_dipole >= 0.0) {
            return bad("uncertainties must be non-negative");
        }
        Ok(())
    }
}

/// Reads a `R,E,sigmaE,d,sigmad` table. Lines starting with `#` are
/// metadata and skipped.
pub fn read_curve(reader: impl Read) -> Result<Vec<CurvePoint>, SpectroscopyError> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
    let mut points = Vec::new();
    for (index, row) in rdr.deserialize::<CurvePoint>().enumerate() {
        let p = row.map_err(|e| SpectroscopyError::Table(e.to_string()))?;
        p.validate(index)?;
        points.push(p);
    }
    Ok(points)
}

/// Writes the table body (header line plus rows) in the format
/// [`read_curve`] accepts.
pub fn write_curve(points: &[CurvePoint]) -> String {
    let mut out = String::from("R,E,sigmaE,d,sigmad\n");
    for p in points {
        out.push_str(&format!("{:?},{:?},{:?},{:?},{:?}\n", p.r, p.energy, p.sigma_energy, p.dipole, p.sigma_dipole));
    }
    out
}

/// Reduced mass of two nuclei given in amu.
pub fn reduced_mass_amu(m1: f64, m2: f64) -> f64 {
    m1 * m2 / (m1 + m2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Hartree,
    Wavenumber,
    AuDipole,
    Debye,
    Bohr,
    Angstrom,
}

impl Unit {
    /// Size of one of this unit in the atomic unit of its dimension.
    fn in_atomic(self) -> (u8, f64) {
        match self {
            Unit::Hartree => (0, 1.0),
            Unit::Wavenumber => (0, 1.0 / WAVENUMBER_PER_HARTREE),
            Unit::AuDipole => (1, 1.0),
            Unit::Debye => (1, 1.0 / DEBYE_PER_AU),
            Unit::Bohr => (2, 1.0),
            Unit::Angstrom => (2, 1.0 / ANGSTROM_PER_BOHR),
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Unit::Hartree => "hartree",
            Unit::Wavenumber => "cm-1",
            Unit::AuDipole => "au-dipole",
            Unit::Debye => "debye",
            Unit::Bohr => "bohr",
            Unit::Angstrom => "angstrom",
        })
    }
}

impl FromStr for Unit {
    type Err = SpectroscopyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "hartree" | "ha" | "eh" => Unit::Hartree,
            "cm-1" | "cm^-1" | "wavenumber" => Unit::Wavenumber,
            "au-dipole" | "ea0" | "au" => Unit::AuDipole,
            "debye" | "d" => Unit::Debye,
            "bohr" | "a0" => Unit::Bohr,
            "angstrom" | "a" => Unit::Angstrom,
            _ => return Err(SpectroscopyError::UnknownUnit(s.into())),
        })
    }
}

/// Converts between units of the same dimension with the fixed constants.
pub fn convert_units(value: f64, from: Unit, to: Unit) -> Result<f64, SpectroscopyError> {
    let (df, sf) = from.in_atomic();
    let (dt, st) = to.in_atomic();
    if df != dt {
        return Err(SpectroscopyError::UnsupportedConversion { from, to });
    }
    if from == to {
        return Ok(value);
    }
    // Multiply by the defined constant rather than divide by its inverse.
    Ok(match (from, to) {
        (Unit::Hartree, Unit::Wavenumber) => value * WAVENUMBER_PER_HARTREE,
        (Unit::AuDipole, Unit::Debye) => value * DEBYE_PER_AU,
        (Unit::Bohr, Unit::Angstrom) => value * ANGSTROM_PER_BOHR,
        _ => value * sf / st,
    })
}
