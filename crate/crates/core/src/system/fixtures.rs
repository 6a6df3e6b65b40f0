//! Built-in verification systems with known reference values.
//!
//! | name         | electrons | reference                                   |
//! |--------------|-----------|---------------------------------------------|
//! | `H`          | 1↑        | exact trial, E = −1/2                        |
//! | `He-product` | 1↑ 1↓     | hydrogenic product ζ = 2, ⟨E⟩ = −Z² + 5Z/8  |
//! | `H2plus`     | 1↑        | LCAO trial, exact E from a grid eigensolve  |
//! | `H2`         | 1↑ 1↓     | symmetric LCAO + e-e Jastrow, ⟨d⟩ = 0       |
//! | `toy-ecp`    | 1↑        | one valence electron on a toy pseudo-atom   |
//! | `morse-demo` | curve     | synthetic Morse energy and linear dipole    |
//!
//! Dipole sign convention for diatomics: the bond-axis component is the
//! projection of d on the unit vector from the first nucleus to the second.

use std::collections::BTreeMap;

use crate::spectroscopy::{morse_potential, CurvePoint, MorseParams};
use crate::system::units::{ELECTRON_MASS_PER_AMU, WAVENUMBER_PER_HARTREE};
use crate::system::{
    BasisFunction, BasisKind, Geometry, MolecularSystem, NonlocalChannel, Nucleus, Orbital, OrbitalSet, RadialChannel,
    RadialTerm, SemilocalEcp, SystemError,
};
use crate::wavefunction::{DeterminantExpansion, JastrowParams, PadeTerm};
use crate::Vec3;

/// Slater exponent of the H2+ LCAO trial, close to its variational optimum at R = 2.
pub const H2PLUS_ZETA: f64 = 1.24;

#[derive(Debug, Clone, PartialEq)]
pub enum Fixture {
    System(Box<MolecularSystem>),
    Curve(Vec<CurvePoint>),
}

impl Fixture {
    pub fn system(self) -> Option<MolecularSystem> {
        match self {
            Fixture::System(s) => Some(*s),
            Fixture::Curve(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FixtureOptions {
    /// Bond length in bohr for the diatomic fixtures.
    pub bond_length: Option<f64>,
}

pub fn fixture_names() -> &'static [&'static str] {
    &["H", "He-product", "H2plus", "H2", "toy-ecp", "morse-demo"]
}

fn slater(label: &str, center: usize, zeta: f64) -> BasisFunction {
    BasisFunction { label: label.into(), center, kind: BasisKind::Slater { zeta } }
}

fn system(geometry: Geometry, orbitals: OrbitalSet, jastrow: JastrowParams, ecps: Vec<SemilocalEcp>) -> MolecularSystem {
    let expansion = DeterminantExpansion::single(geometry.n_up(), geometry.n_down());
    MolecularSystem { geometry, orbitals, ecps, expansion, jastrow, run: BTreeMap::new() }
}

fn diatomic_sigma(label: &str, bond: f64, zeta: f64, n_up: usize, n_down: usize) -> Result<(Geometry, OrbitalSet), SystemError> {
    if !(bond > 0.0) {
        return Err(SystemError::Basis(format!("bond length must be positive, got {bond}")));
    }
    let half = 0.5 * bond;
    let g = Geometry::new(
        vec![Nucleus::new(label, 1.0, Vec3::new(0.0, 0.0, -half)), Nucleus::new(label, 1.0, Vec3::new(0.0, 0.0, half))],
        n_up,
        n_down,
    )?;
    let orbitals = OrbitalSet::new(
        vec![slater("a1s", 0, zeta), slater("b1s", 1, zeta)],
        vec![Orbital { label: "sigma_g".into(), terms: vec![(0, 1.0), (1, 1.0)] }],
    );
    Ok((g, orbitals))
}

/// A one-valence-electron pseudo-atom: Z_full = 3, two core electrons
/// removed, s and p nonlocal channels.
pub fn toy_ecp() -> SemilocalEcp {
    SemilocalEcp {
        name: "toy".into(),
        z_full: 3.0,
        z_core: 2.0,
        local: RadialChannel::new(vec![
            RadialTerm { power: 1, exponent: 1.2, coefficient: -1.0 },
            RadialTerm { power: 2, exponent: 0.8, coefficient: -0.4 },
        ]),
        nonlocal: vec![
            NonlocalChannel { l: 0, radial: RadialChannel::new(vec![RadialTerm { power: 2, exponent: 1.0, coefficient: 1.5 }]) },
            NonlocalChannel { l: 1, radial: RadialChannel::new(vec![RadialTerm { power: 2, exponent: 0.7, coefficient: -0.3 }]) },
        ],
    }
}

/// Morse parameters of the `morse-demo` curve: R_e = 6.80 bohr,
/// D_e = 2700 cm⁻¹, ω_e = 167 cm⁻¹ for ⁷Li⁸⁸Sr.
pub fn morse_demo_params() -> MorseParams {
    let mu = crate::spectroscopy::reduced_mass_amu(7.016003, 87.905612) * ELECTRON_MASS_PER_AMU;
    MorseParams::from_constants(6.80, 2700.0 / WAVENUMBER_PER_HARTREE, 167.0 / WAVENUMBER_PER_HARTREE, mu, 0.0)
}

fn morse_demo() -> Vec<CurvePoint> {
    let p = morse_demo_params();
    (0..15)
        .map(|k| {
            let r = 5.6 + 0.3 * k as f64;
            CurvePoint {
                r,
                energy: morse_potential(&p, r),
                sigma_energy: 1e-5,
                dipole: -0.055 + 0.02 * (r - 6.8),
                sigma_dipole: 0.002,
            }
        })
        .collect()
}

pub fn fixture(name: &str, options: &FixtureOptions) -> Result<Fixture, SystemError> {
    let s = match name {
        "H" => {
            let g = Geometry::new(vec![Nucleus::new("H", 1.0, Vec3::zeros())], 1, 0)?;
            system(g, OrbitalSet::from_basis(vec![slater("1s", 0, 1.0)]), JastrowParams::default(), vec![])
        }
        "He-product" => {
            let g = Geometry::new(vec![Nucleus::new("He", 2.0, Vec3::zeros())], 1, 1)?;
            system(g, OrbitalSet::from_basis(vec![slater("1s", 0, 2.0)]), JastrowParams::default(), vec![])
        }
        "H2plus" => {
            let (g, o) = diatomic_sigma("H", options.bond_length.unwrap_or(2.0), H2PLUS_ZETA, 1, 0)?;
            system(g, o, JastrowParams::default(), vec![])
        }
        "H2" => {
            let (g, o) = diatomic_sigma("H", options.bond_length.unwrap_or(1.4), 1.19, 1, 1)?;
            let jastrow = JastrowParams { ee_anti: Some(PadeTerm::new(0.5, 1.0)), ..JastrowParams::default() };
            system(g, o, jastrow, vec![])
        }
        "toy-ecp" => {
            let ecp = toy_ecp();
            let g =
                Geometry::new(vec![Nucleus::new("X", ecp.effective_charge(), Vec3::zeros()).with_ecp(ecp.name.clone())], 1, 0)?;
            system(g, OrbitalSet::from_basis(vec![slater("2s", 0, 0.65)]), JastrowParams::default(), vec![ecp])
        }
        "morse-demo" => return Ok(Fixture::Curve(morse_demo())),
        other => return Err(SystemError::UnknownFixture(other.into(), fixture_names().join(", "))),
    };
    s.validate()?;
    Ok(Fixture::System(Box::new(s)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::parse_system;

    #[test]
    fn every_fixture_round_trips() {
        for name in fixture_names() {
            match fixture(name, &FixtureOptions::default()).unwrap() {
                Fixture::System(s) => {
                    let text = s.to_text();
                    let parsed = parse_system(&text).unwrap_or_else(|e| panic!("{name}: {e}\n{text}"));
                    assert_eq!(*s, parsed, "{name}");
                    assert_eq!(parsed.to_text(), text);
                }
                Fixture::Curve(points) => assert!(points.len() >= 4),
            }
        }
    }

    #[test]
    fn h_and_h2plus_geometry() {
        let h = fixture("H", &FixtureOptions::default()).unwrap().system().unwrap();
        assert_eq!(h.geometry.nuclei().len(), 1);
        assert_eq!(h.geometry.nuclei()[0].charge, 1.0);
        assert_eq!((h.geometry.n_up(), h.geometry.n_down()), (1, 0));
        let opts = FixtureOptions { bond_length: Some(2.0) };
        let h2p = fixture("H2plus", &opts).unwrap().system().unwrap();
        let pos = h2p.geometry.positions();
        assert_eq!(pos[0], Vec3::new(0.0, 0.0, -1.0));
        assert_eq!(pos[1], Vec3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn unknown_fixture() {
        assert!(fixture("Ne", &FixtureOptions::default()).is_err());
    }
}
