//! Numerical cusp diagnostics.
//!
//! Electron–nucleus cusps are the spherically averaged radial derivative of
//! ln|Ψ_T| as an electron approaches a nucleus. Electron–electron cusps are
//! the same derivative of J in the pair separation. Both are extrapolated
//! linearly from two small radii.

use std::fmt;

use crate::hamiltonian::AngularQuadrature;
use crate::wavefunction::{TrialWavefunction, ANTIPARALLEL_CUSP, PARALLEL_CUSP};
use crate::Vec3;

pub const CUSP_TOLERANCE: f64 = 1e-3;

const RADIUS: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CuspKind {
    ElectronNucleus { nucleus: usize },
    Antiparallel,
    Parallel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CuspCheck {
    pub kind: CuspKind,
    pub label: String,
    pub expected: f64,
    pub measured: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CuspReport {
    pub checks: Vec<CuspCheck>,
}

impl CuspReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn find(&self, kind: CuspKind) -> Option<&CuspCheck> {
        self.checks.iter().find(|c| c.kind == kind)
    }
}

impl fmt::Display for CuspReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{:<16} expected {:+.4}  measured {:+.6}  {}",
                c.label,
                c.expected,
                c.measured,
                if c.passed { "pass" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

/// Spectator positions: fixed, well separated, away from every nucleus.
fn spectators(psi: &TrialWavefunction, anchor: Vec3) -> Vec<Vec3> {
    let dirs =
        [Vec3::new(0.48, 0.64, 0.6), Vec3::new(-0.6, 0.48, -0.64), Vec3::new(0.64, -0.6, -0.48), Vec3::new(-0.36, -0.48, 0.8)];
    (0..psi.n_electrons()).map(|k| anchor + dirs[k % dirs.len()] * (1.3 + 0.45 * k as f64)).collect()
}

fn extrapolate(f: impl Fn(f64) -> Option<f64>) -> Option<f64> {
    let a = f(RADIUS)?;
    let b = f(0.5 * RADIUS)?;
    Some(2.0 * b - a)
}

fn check(kind: CuspKind, label: String, expected: f64, measured: Option<f64>) -> CuspCheck {
    let measured = measured.unwrap_or(f64::NAN);
    CuspCheck { kind, label, expected, measured, passed: (measured - expected).abs() <= CUSP_TOLERANCE }
}

/// Measures all applicable cusps. `charges[a]` is `Some(Z)` for an
/// all-electron nucleus and `None` for one carrying an ECP, which has no cusp.
pub fn check_cusps(psi: &TrialWavefunction, charges: &[Option<f64>]) -> CuspReport {
    let quad = AngularQuadrature::lebedev_14();
    let mut report = CuspReport::default();

    for (a, (center, charge)) in psi.centers().iter().zip(charges).enumerate() {
        let Some(z) = *charge else { continue };
        let base = spectators(psi, *center);
        let measured = extrapolate(|eps| {
            let mut acc = 0.0;
            for (dir, w) in quad.nodes().iter().zip(quad.weights()) {
                let mut pos = base.clone();
                pos[0] = center + dir * eps;
                let v = psi.evaluate(&pos).ok()?;
                if v.sign == 0.0 {
                    return None;
                }
                acc += w * v.gradient[0].dot(dir);
            }
            Some(acc)
        });
        report.checks.push(check(
            CuspKind::ElectronNucleus { nucleus: a },
            format!("e-n {}#{a}", psi.species()[a]),
            -z,
            measured,
        ));
    }

    let jastrow = psi.jastrow();
    let mut pair = |i: usize, j: usize, kind: CuspKind, label: &str, expected: f64| {
        let anchor = psi.centers().first().copied().unwrap_or_else(Vec3::zeros) + Vec3::new(0.31, -0.22, 0.17);
        let base = spectators(psi, anchor);
        let measured = extrapolate(|eps| {
            let mut pos = base.clone();
            pos[i] = anchor;
            pos[j] = anchor;
            let j0 = jastrow.evaluate(&pos).value;
            let mut acc = 0.0;
            for (dir, w) in quad.nodes().iter().zip(quad.weights()) {
                pos[j] = anchor + dir * eps;
                acc += w * (jastrow.evaluate(&pos).value - j0) / eps;
            }
            Some(acc)
        });
        report.checks.push(check(kind, label.into(), expected, measured));
    };
    let (nu, nd) = (psi.n_up(), psi.n_down());
    if nd > 0 {
        pair(0, nu, CuspKind::Antiparallel, "e-e antiparallel", ANTIPARALLEL_CUSP);
    }
    if nu >= 2 {
        pair(0, 1, CuspKind::Parallel, "e-e parallel", PARALLEL_CUSP);
    } else if nd >= 2 {
        pair(nu, nu + 1, CuspKind::Parallel, "e-e parallel", PARALLEL_CUSP);
    }
    report
}
