//! Multi-determinant (CI) expansions.
//!
//! A configuration state function is stored as its coefficient plus the list
//! of spin-up × spin-down determinant products it expands to, each with a
//! fixed weight inside the CSF.

use crate::wavefunction::WavefunctionError;

#[derive(Debug, Clone, PartialEq)]
pub struct Determinant {
    pub weight: f64,
    /// Occupied orbital indices for the spin-up electrons, in row order.
    pub up: Vec<usize>,
    pub down: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Csf {
    pub label: String,
    pub coefficient: f64,
    pub determinants: Vec<Determinant>,
}

impl Csf {
    pub fn single(label: impl Into<String>, coefficient: f64, up: Vec<usize>, down: Vec<usize>) -> Self {
        Self { label: label.into(), coefficient, determinants: vec![Determinant { weight: 1.0, up, down }] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeterminantExpansion {
    csfs: Vec<Csf>,
    reference: usize,
}

fn distinct(occ: &[usize]) -> bool {
    occ.iter().enumerate().all(|(i, a)| !occ[..i].contains(a))
}

impl DeterminantExpansion {
    pub fn new(csfs: Vec<Csf>, reference: usize) -> Result<Self, WavefunctionError> {
        if csfs.is_empty() {
            return Err(WavefunctionError::Expansion("no CSFs".into()));
        }
        if reference >= csfs.len() {
            return Err(WavefunctionError::Expansion(format!("reference index {reference} out of range")));
        }
        if csfs.iter().all(|c| c.coefficient == 0.0) {
            return Err(WavefunctionError::Expansion("all coefficients are zero".into()));
        }
        for c in &csfs {
            if !c.coefficient.is_finite() {
                return Err(WavefunctionError::Expansion(format!("CSF '{}' has non-finite coefficient", c.label)));
            }
            if c.determinants.is_empty() {
                return Err(WavefunctionError::Expansion(format!("CSF '{}' has no determinants", c.label)));
            }
            for d in &c.determinants {
                if !distinct(&d.up) || !distinct(&d.down) {
                    return Err(WavefunctionError::Expansion(format!("CSF '{}' repeats an orbital within one spin", c.label)));
                }
            }
        }
        Ok(Self { csfs, reference })
    }

    /// Closed/open-shell single determinant occupying the lowest orbitals.
    pub fn single(n_up: usize, n_down: usize) -> Self {
        Self { csfs: vec![Csf::single("ref", 1.0, (0..n_up).collect(), (0..n_down).collect())], reference: 0 }
    }

    pub fn csfs(&self) -> &[Csf] {
        &self.csfs
    }

    pub fn reference(&self) -> usize {
        self.reference
    }

    pub fn len(&self) -> usize {
        self.csfs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.csfs.is_empty()
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.csfs.iter().map(|c| c.coefficient).collect()
    }

    pub fn set_coefficient(&mut self, k: usize, value: f64) {
        self.csfs[k].coefficient = value;
    }

    /// Checks occupation lengths and orbital indices against the system.
    pub fn validate_against(&self, n_up: usize, n_down: usize, n_orbitals: usize) -> Result<(), WavefunctionError> {
        for c in &self.csfs {
            for d in &c.determinants {
                if d.up.len() != n_up || d.down.len() != n_down {
                    return Err(WavefunctionError::Expansion(format!(
                        "CSF '{}' occupies {}↑/{}↓ orbitals for {n_up}↑/{n_down}↓ electrons",
                        c.label,
                        d.up.len(),
                        d.down.len()
                    )));
                }
                if let Some(i) = d.up.iter().chain(&d.down).find(|&&i| i >= n_orbitals) {
                    return Err(WavefunctionError::Expansion(format!(
                        "CSF '{}' references orbital {i} but only {n_orbitals} exist",
                        c.label
                    )));
                }
            }
        }
        Ok(())
    }

    /// Copy with coefficients scaled to unit sum of squares.
    pub fn normalized(&self) -> Self {
        let norm = self.csfs.iter().map(|c| c.coefficient.powi(2)).sum::<f64>().sqrt();
        let mut out = self.clone();
        for c in &mut out.csfs {
            c.coefficient /= norm;
        }
        out
    }
}

/// Keeps CSFs with `|c_k| / max_j |c_j| ≥ cutoff` plus the reference, then
/// renormalises the kept coefficients to unit sum of squares.
pub fn truncate_expansion(expansion: &DeterminantExpansion, cutoff: f64) -> DeterminantExpansion {
    let max = expansion.csfs.iter().map(|c| c.coefficient.abs()).fold(0.0, f64::max);
    let mut kept = Vec::new();
    let mut reference = 0;
    for (k, c) in expansion.csfs.iter().enumerate() {
        if k == expansion.reference || c.coefficient.abs() / max >= cutoff {
            if k == expansion.reference {
                reference = kept.len();
            }
            kept.push(c.clone());
        }
    }
    DeterminantExpansion { csfs: kept, reference }.normalized()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn expansion(coefs: &[f64]) -> DeterminantExpansion {
        let csfs = coefs.iter().enumerate().map(|(k, &c)| Csf::single(format!("c{k}"), c, vec![k], vec![0])).collect();
        DeterminantExpansion::new(csfs, 0).unwrap()
    }

    #[test]
    fn truncation_example() {
        let t = truncate_expansion(&expansion(&[0.95, 0.20, 0.04]), 0.05);
        assert_eq!(t.len(), 2);
        let n = (0.95f64.powi(2) + 0.2f64.powi(2)).sqrt();
        assert!((t.coefficients()[0] - 0.95 / n).abs() < 1e-15);
        assert!((t.coefficients()[1] - 0.20 / n).abs() < 1e-15);
    }

    #[test]
    fn zero_cutoff_keeps_everything() {
        let e = expansion(&[0.9, -0.3, 0.01, 0.0]);
        let t = truncate_expansion(&e, 0.0);
        assert_eq!(t, e.normalized());
    }

    #[test]
    fn reference_always_kept() {
        let csfs = vec![Csf::single("a", 0.01, vec![0], vec![]), Csf::single("b", 1.0, vec![1], vec![])];
        let e = DeterminantExpansion::new(csfs, 0).unwrap();
        let t = truncate_expansion(&e, 0.5);
        assert_eq!(t.len(), 2);
        assert_eq!(t.csfs()[t.reference()].label, "a");
    }

    #[test]
    fn paper_cutoffs_select_subsets() {
        // CI-like coefficient lists; ratios to the largest weight decide.
        // 0.041/0.93 = 0.044 falls below 0.05; 0.031/0.97 = 0.032 stays above 0.03.
        let lisr = expansion(&[0.93, -0.21, 0.12, 0.06, 0.041, 0.02, 0.01]);
        let krb = expansion(&[0.97, 0.15, -0.05, 0.031, 0.027, 0.01]);
        assert_eq!(truncate_expansion(&lisr, 0.05).len(), 4);
        assert_eq!(truncate_expansion(&krb, 0.03).len(), 4);
    }

    #[test]
    fn rejects_invalid() {
        assert!(DeterminantExpansion::new(vec![], 0).is_err());
        assert!(DeterminantExpansion::new(vec![Csf::single("a", 0.0, vec![0], vec![])], 0).is_err());
        assert!(DeterminantExpansion::new(vec![Csf::single("a", 1.0, vec![0, 0], vec![])], 0).is_err());
        let e = expansion(&[1.0]);
        assert!(e.validate_against(1, 1, 1).is_ok());
        assert!(e.validate_against(2, 1, 3).is_err());
    }

    proptest! {
        #[test]
        fn truncation_is_idempotent(coefs in proptest::collection::vec(-1.0..1.0f64, 1..12), cutoff in 0.0..0.99f64) {
            prop_assume!(coefs.iter().any(|c| *c != 0.0));
            let e = expansion(&coefs);
            let once = truncate_expansion(&e, cutoff);
            let twice = truncate_expansion(&once, cutoff);
            prop_assert_eq!(once.len(), twice.len());
            for (a, b) in once.coefficients().iter().zip(twice.coefficients()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
