use crate::system::SystemError;
use crate::Vec3;

/// A nucleus (or pseudo-nucleus when an ECP is attached).
#[derive(Debug, Clone, PartialEq)]
pub struct Nucleus {
    /// Species label, used to match Jastrow terms and ECPs.
    pub label: String,
    /// Effective charge seen by valence electrons.
    pub charge: f64,
    pub position: Vec3,
    /// Name of the ECP in the system's table, if any.
    pub ecp: Option<String>,
}

impl Nucleus {
    pub fn new(label: impl Into<String>, charge: f64, position: Vec3) -> Self {
        Self { label: label.into(), charge, position, ecp: None }
    }

    pub fn with_ecp(mut self, name: impl Into<String>) -> Self {
        self.ecp = Some(name.into());
        self
    }
}

/// Nuclear frame plus electron counts. Electrons `0..n_up` are spin up, the
/// rest spin down.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    nuclei: Vec<Nucleus>,
    n_up: usize,
    n_down: usize,
}

impl Geometry {
    pub fn new(nuclei: Vec<Nucleus>, n_up: usize, n_down: usize) -> Result<Self, SystemError> {
        if n_up < n_down {
            return Err(SystemError::ElectronCounts(format!("n_up ({n_up}) must be at least n_down ({n_down})")));
        }
        if n_up + n_down == 0 {
            return Err(SystemError::ElectronCounts("no electrons".into()));
        }
        for (i, n) in nuclei.iter().enumerate() {
            if !(n.charge > 0.0) || !n.charge.is_finite() {
                return Err(SystemError::NonPositiveCharge { nucleus: i, charge: n.charge });
            }
            if !n.position.iter().all(|c| c.is_finite()) {
                return Err(SystemError::CoincidentNuclei(i, i));
            }
            for (j, m) in nuclei.iter().enumerate().take(i) {
                if n.position == m.position {
                    return Err(SystemError::CoincidentNuclei(j, i));
                }
            }
        }
        Ok(Self { nuclei, n_up, n_down })
    }

    pub fn nuclei(&self) -> &[Nucleus] {
        &self.nuclei
    }

    pub fn n_up(&self) -> usize {
        self.n_up
    }

    pub fn n_down(&self) -> usize {
        self.n_down
    }

    pub fn n_electrons(&self) -> usize {
        self.n_up + self.n_down
    }

    pub fn is_up(&self, electron: usize) -> bool {
        electron < self.n_up
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.nuclei.iter().map(|n| n.position).collect()
    }

    pub fn total_nuclear_charge(&self) -> f64 {
        self.nuclei.iter().map(|n| n.charge).sum()
    }

    /// Net charge of the system, nuclear minus electronic.
    pub fn net_charge(&self) -> f64 {
        self.total_nuclear_charge() - self.n_electrons() as f64
    }

    /// Σ_{a<b} Z_a Z_b / R_ab.
    pub fn nuclear_repulsion(&self) -> f64 {
        let mut e = 0.0;
        for (i, a) in self.nuclei.iter().enumerate() {
            for b in &self.nuclei[..i] {
                e += a.charge * b.charge / (a.position - b.position).norm();
            }
        }
        e
    }

    /// Unit vector from the first nucleus to the second; the bond axis for
    /// diatomics. `None` for single-centre systems.
    pub fn bond_axis(&self) -> Option<Vec3> {
        match self.nuclei.as_slice() {
            [a, b, ..] => Some((b.position - a.position).normalize()),
            _ => None,
        }
    }

    /// Returns a copy with every nucleus shifted by `t`.
    pub fn translated(&self, t: Vec3) -> Self {
        let mut g = self.clone();
        for n in &mut g.nuclei {
            n.position += t;
        }
        g
    }
}

/// Nuclear part of the dipole operator, Σ_a Z_a R_a (e·bohr).
pub fn nuclear_dipole(geometry: &Geometry) -> Vec3 {
    geometry.nuclei().iter().fold(Vec3::zeros(), |acc, n| acc + n.position * n.charge)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn h2(half: f64) -> Geometry {
        Geometry::new(
            vec![Nucleus::new("H", 1.0, Vec3::new(0.0, 0.0, -half)), Nucleus::new("H", 1.0, Vec3::new(0.0, 0.0, half))],
            1,
            1,
        )
        .unwrap()
    }

    #[test]
    fn dipole_examples() {
        assert_eq!(nuclear_dipole(&h2(0.7)), Vec3::zeros());
        let lisr = Geometry::new(
            vec![Nucleus::new("Li", 3.0, Vec3::zeros()), Nucleus::new("Sr", 38.0, Vec3::new(0.0, 0.0, 6.8))],
            21,
            20,
        )
        .unwrap();
        let d = nuclear_dipole(&lisr);
        assert!((d.z - 258.4).abs() < 1e-12);
        let h = Geometry::new(vec![Nucleus::new("H", 1.0, Vec3::new(0.0, 0.0, 1.0))], 1, 0).unwrap();
        assert_eq!(nuclear_dipole(&h), Vec3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn rejects_bad_geometries() {
        let a = Nucleus::new("H", 1.0, Vec3::zeros());
        assert!(matches!(Geometry::new(vec![a.clone(), a.clone()], 1, 1), Err(SystemError::CoincidentNuclei(0, 1))));
        assert!(Geometry::new(vec![a.clone()], 0, 1).is_err());
        assert!(Geometry::new(vec![a.clone()], 0, 0).is_err());
        assert!(Geometry::new(vec![Nucleus::new("X", 0.0, Vec3::zeros())], 1, 0).is_err());
    }

    #[test]
    fn nuclear_repulsion_h2() {
        assert!((h2(0.7).nuclear_repulsion() - 1.0 / 1.4).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn dipole_translation_equivariance(tx in -5.0..5.0f64, ty in -5.0..5.0f64, tz in -5.0..5.0f64) {
            let g = Geometry::new(vec![
                Nucleus::new("Li", 3.0, Vec3::new(0.1, -0.2, 0.0)),
                Nucleus::new("Sr", 10.0, Vec3::new(0.0, 0.3, 6.8)),
            ], 7, 6).unwrap();
            let t = Vec3::new(tx, ty, tz);
            let shifted = nuclear_dipole(&g.translated(t));
            let expected = nuclear_dipole(&g) + t * g.total_nuclear_charge();
            prop_assert!((shifted - expected).norm() < 1e-12);
        }
    }
}
