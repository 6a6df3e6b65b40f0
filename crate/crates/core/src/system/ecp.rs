//! Semilocal effective core potentials.
//!
//! Every radial channel is a sum of `c · r^{n−2} · exp(−α r²)` with
//! `n ∈ {0, 1, 2}`, the layout of standard published tabulations.

use crate::system::SystemError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialTerm {
    pub power: i32,
    pub exponent: f64,
    pub coefficient: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RadialChannel {
    pub terms: Vec<RadialTerm>,
}

impl RadialChannel {
    pub fn new(terms: Vec<RadialTerm>) -> Self {
        Self { terms }
    }

    pub fn value(&self, r: f64) -> f64 {
        self.terms.iter().map(|t| t.coefficient * r.powi(t.power - 2) * (-t.exponent * r * r).exp()).sum()
    }

    fn validate(&self, name: &str) -> Result<(), SystemError> {
        for t in &self.terms {
            if !(0..=2).contains(&t.power) {
                return Err(SystemError::Ecp(format!("{name}: radial power n={} outside {{0,1,2}}", t.power)));
            }
            if !(t.exponent > 0.0) || !t.exponent.is_finite() || !t.coefficient.is_finite() {
                return Err(SystemError::Ecp(format!("{name}: invalid term (alpha {}, c {})", t.exponent, t.coefficient)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonlocalChannel {
    pub l: u32,
    pub radial: RadialChannel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemilocalEcp {
    pub name: String,
    /// Atomic number of the bare element.
    pub z_full: f64,
    /// Number of core electrons removed.
    pub z_core: f64,
    pub local: RadialChannel,
    pub nonlocal: Vec<NonlocalChannel>,
}

impl SemilocalEcp {
    /// Charge the valence electrons see: Z_full − N_core.
    pub fn effective_charge(&self) -> f64 {
        self.z_full - self.z_core
    }

    pub fn l_max(&self) -> Option<u32> {
        self.nonlocal.iter().map(|c| c.l).max()
    }

    pub fn validate(&self) -> Result<(), SystemError> {
        if !(self.z_core >= 0.0) || !(self.z_full > self.z_core) {
            return Err(SystemError::Ecp(format!(
                "{}: need z_full > z_core ≥ 0 (got {} / {})",
                self.name, self.z_full, self.z_core
            )));
        }
        self.local.validate(&self.name)?;
        let mut seen = Vec::new();
        for c in &self.nonlocal {
            if c.l > 3 {
                return Err(SystemError::Ecp(format!("{}: l={} exceeds 3", self.name, c.l)));
            }
            if seen.contains(&c.l) {
                return Err(SystemError::Ecp(format!("{}: duplicate channel l={}", self.name, c.l)));
            }
            seen.push(c.l);
            c.radial.validate(&self.name)?;
        }
        Ok(())
    }
}
