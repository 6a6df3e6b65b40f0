//! Local energy [HΨ_T]/Ψ_T, localized pseudopotentials and the dipole
//! operator.
//!
//! The nonlocal ECP part is localized on the trial function:
//! `Σ_ℓ v_ℓ(r)(2ℓ+1) ∮ P_ℓ(r̂·r̂′) Ψ_T(…r′…)/Ψ_T(…r…) dΩ′/4π`, evaluated on a
//! randomly rotated angular quadrature.

mod quadrature;

pub use quadrature::{gauss_legendre, legendre, random_rotation, AngularQuadrature};

use nalgebra::Rotation3;
use rand::Rng;
use thiserror::Error;

use crate::system::{nuclear_dipole, Geometry, MolecularSystem, SemilocalEcp};
use crate::wavefunction::{TrialWavefunction, Walker};
use crate::Vec3;

/// Default quadrature exactness, enough for channels up to ℓ = 2.
pub const DEFAULT_QUADRATURE_ORDER: u32 = 5;

/// Channels smaller than this at the electron's radius are skipped.
const NEGLIGIBLE_CHANNEL: f64 = 1e-16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HamiltonianError {
    #[error("quadrature order {order} cannot resolve ECP channels up to l={l_max}; need at least {}", 2 * l_max + 1)]
    QuadratureOrder { order: u32, l_max: u32 },
    #[error("nucleus {0} references an ECP that was not supplied")]
    MissingEcp(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LocalEnergyBreakdown {
    pub kinetic: f64,
    pub electron_nucleus: f64,
    pub electron_electron: f64,
    pub nucleus_nucleus: f64,
    pub ecp_local: f64,
    pub ecp_nonlocal: f64,
    pub total: f64,
}

impl LocalEnergyBreakdown {
    fn finish(mut self) -> Self {
        self.total = self.kinetic
            + self.electron_nucleus
            + self.electron_electron
            + self.nucleus_nucleus
            + self.ecp_local
            + self.ecp_nonlocal;
        self
    }

    pub fn potential(&self) -> f64 {
        self.total - self.kinetic
    }
}

/// d(R) = Σ_a Z_a R_a − Σ_i r_i.
pub fn dipole_local(geometry: &Geometry, electrons: &[Vec3]) -> Vec3 {
    electrons.iter().fold(nuclear_dipole(geometry), |acc, r| acc - r)
}

/// Electronic Hamiltonian for a fixed nuclear frame.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    geometry: Geometry,
    centers: Vec<Vec3>,
    charges: Vec<f64>,
    ecps: Vec<Option<SemilocalEcp>>,
    nucleus_nucleus: f64,
    nuclear_dipole: Vec3,
    quadrature: AngularQuadrature,
}

impl Hamiltonian {
    /// `ecps[a]` is the ECP on nucleus `a`, if any.
    pub fn new(geometry: &Geometry, ecps: Vec<Option<SemilocalEcp>>, quadrature_order: u32) -> Result<Self, HamiltonianError> {
        for (a, n) in geometry.nuclei().iter().enumerate() {
            if n.ecp.is_some() && ecps.get(a).is_none_or(|e| e.is_none()) {
                return Err(HamiltonianError::MissingEcp(a));
            }
        }
        let mut ecps = ecps;
        ecps.resize(geometry.nuclei().len(), None);
        let l_max = ecps.iter().flatten().filter_map(|e| e.l_max()).max().unwrap_or(0);
        let quadrature = AngularQuadrature::for_ecp(quadrature_order, l_max)?;
        Ok(Self {
            centers: geometry.positions(),
            charges: geometry.nuclei().iter().map(|n| n.charge).collect(),
            nucleus_nucleus: geometry.nuclear_repulsion(),
            nuclear_dipole: nuclear_dipole(geometry),
            geometry: geometry.clone(),
            ecps,
            quadrature,
        })
    }

    pub fn from_system(system: &MolecularSystem, quadrature_order: u32) -> Result<Self, HamiltonianError> {
        let ecps = system.nucleus_ecps().into_iter().map(|e| e.cloned()).collect();
        Self::new(&system.geometry, ecps, quadrature_order)
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn quadrature(&self) -> &AngularQuadrature {
        &self.quadrature
    }

    pub fn has_nonlocal(&self) -> bool {
        self.ecps.iter().flatten().any(|e| !e.nonlocal.is_empty())
    }

    pub fn dipole(&self, electrons: &[Vec3]) -> Vec3 {
        electrons.iter().fold(self.nuclear_dipole, |acc, r| acc - r)
    }

    /// Every term except the nonlocal ECP part.
    pub fn local_terms(&self, walker: &Walker) -> LocalEnergyBreakdown {
        let pos = walker.positions();
        let mut out = LocalEnergyBreakdown {
            kinetic: -0.5 * walker.value().laplacian_ratio,
            nucleus_nucleus: self.nucleus_nucleus,
            ..Default::default()
        };
        for (i, r) in pos.iter().enumerate() {
            for ((c, z), ecp) in self.centers.iter().zip(&self.charges).zip(&self.ecps) {
                let d = (r - c).norm();
                out.electron_nucleus -= z / d;
                if let Some(e) = ecp {
                    out.ecp_local += e.local.value(d);
                }
            }
            for s in &pos[..i] {
                out.electron_electron += 1.0 / (r - s).norm();
            }
        }
        out
    }

    /// Localized nonlocal ECP energy on a given quadrature frame.
    pub fn ecp_nonlocal_energy(&self, psi: &TrialWavefunction, walker: &Walker, frame: &AngularQuadrature) -> f64 {
        let pos = walker.positions();
        let mut total = 0.0;
        for (c, ecp) in self.centers.iter().zip(&self.ecps) {
            let Some(ecp) = ecp else { continue };
            if ecp.nonlocal.is_empty() {
                continue;
            }
            for (i, r) in pos.iter().enumerate() {
                let d = r - c;
                let dist = d.norm();
                let channels: Vec<(u32, f64)> = ecp
                    .nonlocal
                    .iter()
                    .map(|ch| (ch.l, ch.radial.value(dist)))
                    .filter(|(_, v)| v.abs() > NEGLIGIBLE_CHANNEL)
                    .collect();
                if channels.is_empty() {
                    continue;
                }
                let unit = d / dist;
                for (node, w) in frame.nodes().iter().zip(frame.weights()) {
                    let (log, sign) = walker.ratio(psi, i, c + node * dist);
                    if sign == 0.0 {
                        continue;
                    }
                    let ratio = sign * log.exp();
                    let cos = unit.dot(node);
                    for &(l, v) in &channels {
                        total += v * (2 * l + 1) as f64 * w * legendre(l, cos) * ratio;
                    }
                }
            }
        }
        total
    }

    /// Full local energy with the quadrature frame rotated by `rotation`.
    pub fn local_energy_with_rotation(
        &self,
        psi: &TrialWavefunction,
        walker: &Walker,
        rotation: &Rotation3<f64>,
    ) -> LocalEnergyBreakdown {
        let mut out = self.local_terms(walker);
        if self.has_nonlocal() {
            out.ecp_nonlocal = self.ecp_nonlocal_energy(psi, walker, &self.quadrature.rotated(rotation));
        }
        out.finish()
    }

    /// Full local energy; draws a random quadrature rotation only when a
    /// nonlocal channel is present.
    pub fn local_energy<R: Rng + ?Sized>(&self, psi: &TrialWavefunction, walker: &Walker, rng: &mut R) -> LocalEnergyBreakdown {
        let mut out = self.local_terms(walker);
        if self.has_nonlocal() {
            let frame = self.quadrature.rotated(&random_rotation(rng));
            out.ecp_nonlocal = self.ecp_nonlocal_energy(psi, walker, &frame);
        }
        out.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{
        fixture, BasisFunction, BasisKind, FixtureOptions, NonlocalChannel, Nucleus, OrbitalSet, RadialChannel, RadialTerm,
    };
    use crate::wavefunction::{DeterminantExpansion, JastrowParams};
    use rand::SeedableRng;

    fn setup(name: &str) -> (MolecularSystem, TrialWavefunction, Hamiltonian) {
        let s = fixture(name, &FixtureOptions::default()).unwrap().system().unwrap();
        let psi = s.trial_wavefunction().unwrap();
        let h = Hamiltonian::from_system(&s, DEFAULT_QUADRATURE_ORDER).unwrap();
        (s, psi, h)
    }

    fn rng() -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(5)
    }

    #[test]
    fn hydrogen_constant_local_energy() {
        let (_, psi, h) = setup("H");
        let mut rng = rng();
        for p in [Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.3, -2.0, 0.7), Vec3::new(4.0, 1.0, -3.0)] {
            let w = Walker::new(&psi, vec![p], 0).unwrap();
            let e = h.local_energy(&psi, &w, &mut rng);
            assert!((e.total + 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn he_product_breakdown() {
        let (_, psi, h) = setup("He-product");
        let w = Walker::new(&psi, vec![Vec3::new(0.0, 0.0, 0.5), Vec3::new(0.0, 0.0, -0.5)], 0).unwrap();
        let e = h.local_energy(&psi, &w, &mut rng());
        assert!((e.kinetic - 4.0).abs() < 1e-12);
        assert!((e.electron_nucleus + 8.0).abs() < 1e-12);
        assert!((e.electron_electron - 1.0).abs() < 1e-12);
        assert!((e.total + 3.0).abs() < 1e-12);
        let parts = e.kinetic + e.electron_nucleus + e.electron_electron + e.nucleus_nucleus + e.ecp_local + e.ecp_nonlocal;
        assert!((parts - e.total).abs() < 1e-12);
    }

    #[test]
    fn h2plus_matches_finite_difference_oracle() {
        let (s, psi, h) = setup("H2plus");
        let mut r = rng();
        for _ in 0..20 {
            let p = Vec3::new(r.random_range(-2.0..2.0), r.random_range(-2.0..2.0), r.random_range(-2.5..2.5));
            let w = Walker::new(&psi, vec![p], 0).unwrap();
            let e = h.local_energy(&psi, &w, &mut r).total;
            // Independent oracle: raw orbital values, fourth-order central differences.
            let f = |q: Vec3| s.orbitals.evaluate(0, &s.geometry.positions(), &q).value;
            let hstep = 1e-3;
            let mut lap = 0.0;
            for k in 0..3 {
                let mut dq = Vec3::zeros();
                dq[k] = hstep;
                lap += (-f(p + 2.0 * dq) + 16.0 * f(p + dq) - 30.0 * f(p) + 16.0 * f(p - dq) - f(p - 2.0 * dq))
                    / (12.0 * hstep * hstep);
            }
            let pot: f64 = s.geometry.nuclei().iter().map(|n| -n.charge / (p - n.position).norm()).sum::<f64>()
                + s.geometry.nuclear_repulsion();
            let oracle = -0.5 * lap / f(p) + pot;
            assert!((e - oracle).abs() < 1e-8 * oracle.abs().max(1.0), "{e} vs {oracle}");
        }
    }

    #[test]
    fn rotation_invariance() {
        let (_, psi, h) = setup("H2");
        let rot = Rotation3::from_euler_angles(0.3, -1.1, 2.0);
        let pos = vec![Vec3::new(0.2, 0.4, -0.3), Vec3::new(-0.5, 0.1, 0.9)];
        let w = Walker::new(&psi, pos.clone(), 0).unwrap();
        let e = h.local_energy(&psi, &w, &mut rng()).total;
        // Rotate electrons and nuclei together.
        let s = fixture("H2", &FixtureOptions::default()).unwrap().system().unwrap();
        let nuclei: Vec<Nucleus> =
            s.geometry.nuclei().iter().map(|n| Nucleus::new(n.label.clone(), n.charge, rot * n.position)).collect();
        let g = Geometry::new(nuclei, 1, 1).unwrap();
        let psi_r = TrialWavefunction::new(&g, s.orbitals.clone(), s.expansion.clone(), s.jastrow.clone()).unwrap();
        let h_r = Hamiltonian::new(&g, vec![None, None], DEFAULT_QUADRATURE_ORDER).unwrap();
        let w_r = Walker::new(&psi_r, pos.iter().map(|p| rot * p).collect(), 0).unwrap();
        let e_r = h_r.local_energy(&psi_r, &w_r, &mut rng()).total;
        assert!((e - e_r).abs() < 1e-10);
    }

    #[test]
    fn dipole_examples() {
        let (s, _, _) = setup("H");
        assert_eq!(dipole_local(&s.geometry, &[Vec3::new(0.0, 0.0, 0.3)]), Vec3::new(0.0, 0.0, -0.3));
        let (s, _, h) = setup("H2");
        let d = h.dipole(&[Vec3::new(0.1, 0.2, 0.5), Vec3::new(-0.3, 0.4, -0.5)]);
        assert_eq!(d.z, 0.0);
        let t = Vec3::new(1.0, 1.0, 1.0);
        let pos = [Vec3::new(0.1, 0.2, 0.5), Vec3::new(-0.3, 0.4, -0.7)];
        let moved: Vec<Vec3> = pos.iter().map(|p| p + t).collect();
        let d0 = dipole_local(&s.geometry, &pos);
        let d1 = dipole_local(&s.geometry.translated(t), &moved);
        assert!((d0 - d1).norm() < 1e-14);
    }

    /// ECP nucleus at the origin with one Slater s electron centred at
    /// `offset`, carried by a vanishing ghost charge when off-centre.
    fn ecp_atom(ecp: SemilocalEcp, zeta: f64, offset: Option<Vec3>) -> (TrialWavefunction, Hamiltonian) {
        let mut nuclei = vec![Nucleus::new("X", ecp.effective_charge(), Vec3::zeros()).with_ecp(ecp.name.clone())];
        if let Some(b) = offset {
            nuclei.push(Nucleus::new("G", 1e-9, b));
        }
        let center = nuclei.len() - 1;
        let mut ecps = vec![Some(ecp)];
        ecps.resize(nuclei.len(), None);
        let g = Geometry::new(nuclei, 1, 0).unwrap();
        let orb = OrbitalSet::from_basis(vec![BasisFunction { label: "s".into(), center, kind: BasisKind::Slater { zeta } }]);
        let psi = TrialWavefunction::new(&g, orb, DeterminantExpansion::single(1, 0), JastrowParams::default()).unwrap();
        let h = Hamiltonian::new(&g, ecps, 40).unwrap();
        (psi, h)
    }

    fn s_only(c: f64) -> SemilocalEcp {
        SemilocalEcp {
            name: "s".into(),
            z_full: 2.0,
            z_core: 1.0,
            local: RadialChannel::default(),
            nonlocal: vec![NonlocalChannel {
                l: 0,
                radial: RadialChannel::new(vec![RadialTerm { power: 2, exponent: 0.9, coefficient: c }]),
            }],
        }
    }

    #[test]
    fn no_nonlocal_channels_gives_zero() {
        let mut e = s_only(1.0);
        e.nonlocal.clear();
        e.local = RadialChannel::new(vec![RadialTerm { power: 0, exponent: 0.5, coefficient: 0.7 }]);
        let (psi, h) = ecp_atom(e, 1.0, Some(Vec3::new(0.0, 0.0, 0.4)));
        let w = Walker::new(&psi, vec![Vec3::new(0.3, 0.2, 0.1)], 0).unwrap();
        let b = h.local_energy(&psi, &w, &mut rng());
        assert_eq!(b.ecp_nonlocal, 0.0);
        // Local-only ECP is a plain potential evaluation.
        let r: f64 = Vec3::new(0.3, 0.2, 0.1).norm();
        assert_eq!(b.ecp_local, 0.7 * r.powi(-2) * (-0.5 * r * r).exp());
    }

    #[test]
    fn s_channel_matches_radial_oracle() {
        // Centred s function: the projection is v_0(r) exactly.
        let (psi, h) = ecp_atom(s_only(1.3), 1.0, None);
        let p = Vec3::new(0.4, -0.3, 0.5);
        let w = Walker::new(&psi, vec![p], 0).unwrap();
        let v = h.ecp_nonlocal_energy(&psi, &w, &AngularQuadrature::lebedev_14());
        let r = p.norm();
        assert!((v - 1.3 * (-0.9 * r * r).exp()).abs() < 1e-10);

        // Off-centre s function at distance b: the angular average of
        // e^{−ζ|r′−b|} is (1/2rb)∫_{|r−b|}^{r+b} s e^{−ζ s} ds.
        let b = 2.0;
        let zeta = 1.1;
        let (psi, h) = ecp_atom(s_only(1.3), zeta, Some(Vec3::new(0.0, 0.0, b)));
        let w = Walker::new(&psi, vec![p], 0).unwrap();
        let v = h.ecp_nonlocal_energy(&psi, &w, h.quadrature());
        let antiderivative = |s: f64| -(s / zeta + 1.0 / (zeta * zeta)) * (-zeta * s).exp();
        let avg = (antiderivative(r + b) - antiderivative((r - b).abs())) / (2.0 * r * b);
        let psi0 = (-zeta * (p - Vec3::new(0.0, 0.0, b)).norm()).exp();
        let oracle = 1.3 * (-0.9 * r * r).exp() * avg / psi0;
        assert!((v - oracle).abs() < 1e-10, "{v} vs {oracle}");
    }

    #[test]
    fn rejects_low_quadrature_order() {
        let s = fixture("toy-ecp", &FixtureOptions::default()).unwrap().system().unwrap();
        assert!(matches!(Hamiltonian::from_system(&s, 2), Err(HamiltonianError::QuadratureOrder { .. })));
        assert!(Hamiltonian::from_system(&s, 3).is_ok());
    }

    #[test]
    fn rotated_average_converges_to_high_order_value() {
        let s = fixture("toy-ecp", &FixtureOptions::default()).unwrap().system().unwrap();
        // Off-centre orbital breaks spherical symmetry so the quadrature matters.
        let mut s2 = s.clone();
        let g = Geometry::new(vec![s.geometry.nuclei()[0].clone(), Nucleus::new("G", 1e-9, Vec3::new(0.6, -0.4, 1.5))], 1, 0)
            .unwrap();
        s2.geometry = g;
        s2.orbitals.basis[0].center = 1;
        let psi = s2.trial_wavefunction().unwrap();
        let ecps = vec![Some(s.ecps[0].clone()), None];
        let low = Hamiltonian::new(&s2.geometry, ecps.clone(), 3).unwrap();
        let high = Hamiltonian::new(&s2.geometry, ecps, 41).unwrap();
        let w = Walker::new(&psi, vec![Vec3::new(0.5, 0.4, -0.3)], 0).unwrap();
        let exact = high.ecp_nonlocal_energy(&psi, &w, high.quadrature());
        let mut r = rng();
        let samples: Vec<f64> =
            (0..4000).map(|_| low.ecp_nonlocal_energy(&psi, &w, &low.quadrature().rotated(&random_rotation(&mut r)))).collect();
        let est = crate::stats::block_estimate(&samples);
        let spread =
            samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - samples.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread > 1e-8, "fixed-grid bias should vary with rotation");
        assert!((est.value - exact).abs() < 4.0 * est.error, "{} ± {} vs {exact}", est.value, est.error);
    }
}
