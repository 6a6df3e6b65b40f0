use crate::system::OrbitalEval;
use crate::wavefunction::trial::{Combination, SlaterState};
use crate::wavefunction::{TrialWavefunction, WavefunctionError, WavefunctionValue};
use crate::Vec3;

/// Accepted moves between full refactorisations of the Slater matrices.
const REFRESH_INTERVAL: u32 = 64;

/// |q| below this triggers refactorisation instead of a rank-one update.
const DEGENERATE_RATIO: f64 = 1e-8;

/// A proposed single-electron move with Ψ(R')/Ψ(R).
#[derive(Debug, Clone)]
pub struct MoveProposal {
    pub electron: usize,
    pub position: Vec3,
    /// ln|Ψ(R')/Ψ(R)|.
    pub log_ratio: f64,
    /// Sign of Ψ(R')/Ψ(R); 0 if R' is on a node.
    pub sign_ratio: f64,
    /// ∇_i ln|Ψ| at R' for the moved electron.
    pub gradient: Vec3,
    row: Vec<OrbitalEval>,
    det_ratios: Vec<f64>,
    fallback: bool,
}

impl MoveProposal {
    /// |Ψ(R')/Ψ(R)|².
    pub fn probability_ratio(&self) -> f64 {
        if self.sign_ratio == 0.0 {
            0.0
        } else {
            (2.0 * self.log_ratio).exp()
        }
    }

    /// Whether the move keeps the sign of Ψ.
    pub fn same_nodal_pocket(&self) -> bool {
        self.sign_ratio > 0.0
    }
}

/// One electron configuration with cached wavefunction data.
#[derive(Debug, Clone)]
pub struct Walker {
    pub id: u64,
    positions: Vec<Vec3>,
    value: WavefunctionValue,
    table: Vec<Vec<OrbitalEval>>,
    state: SlaterState,
    combination: Combination,
    jastrow_value: f64,
    pub local_energy: f64,
    /// Statistical weight, ≥ 0.
    pub weight: f64,
    /// Steps since the last accepted move.
    pub age: u32,
    since_refresh: u32,
}

impl Walker {
    pub fn new(psi: &TrialWavefunction, positions: Vec<Vec3>, id: u64) -> Result<Self, WavefunctionError> {
        psi.check_dimension(&positions)?;
        let table = psi.orbital_table(&positions);
        let state = psi.slater_state(&table);
        let (value, combination, jastrow_value) = psi.assemble(&positions, &table, &state);
        Ok(Self {
            id,
            positions,
            value,
            table,
            state,
            combination,
            jastrow_value,
            local_energy: f64::NAN,
            weight: 1.0,
            age: 0,
            since_refresh: 0,
        })
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn value(&self) -> &WavefunctionValue {
        &self.value
    }

    pub fn n_electrons(&self) -> usize {
        self.positions.len()
    }

    /// Rebuilds every cache from the positions.
    pub fn refresh(&mut self, psi: &TrialWavefunction) {
        self.table = psi.orbital_table(&self.positions);
        self.state = psi.slater_state(&self.table);
        let (value, combination, jastrow_value) = psi.assemble(&self.positions, &self.table, &self.state);
        self.value = value;
        self.combination = combination;
        self.jastrow_value = jastrow_value;
        self.since_refresh = 0;
    }

    fn ratio_inner(&self, psi: &TrialWavefunction, electron: usize, position: Vec3, with_gradient: bool) -> MoveProposal {
        let row = psi.orbital_row(&position);
        let (sets, r) = psi.spin_slot(electron);
        let up = psi.is_up(electron);
        let mats = if up { &self.state.up } else { &self.state.down };

        let fallback = self.value.sign == 0.0 || mats.iter().any(|m| m.is_none());
        if fallback {
            let mut moved = self.positions.clone();
            moved[electron] = position;
            let table = {
                let mut t = self.table.clone();
                t[electron] = row.clone();
                t
            };
            let state = psi.slater_state(&table);
            let (v, _, _) = psi.assemble(&moved, &table, &state);
            let (log_ratio, sign_ratio) = if v.sign == 0.0 {
                (f64::NEG_INFINITY, 0.0)
            } else if self.value.sign == 0.0 {
                (f64::INFINITY, v.sign)
            } else {
                (v.log_magnitude - self.value.log_magnitude, v.sign * self.value.sign)
            };
            return MoveProposal {
                electron,
                position,
                log_ratio,
                sign_ratio,
                gradient: v.gradient[electron],
                row,
                det_ratios: Vec::new(),
                fallback: true,
            };
        }

        let det_ratios: Vec<f64> = sets
            .iter()
            .zip(mats)
            .map(|(occ, m)| {
                let vals: Vec<f64> = occ.iter().map(|&o| row[o].value).collect();
                m.as_ref().map_or(0.0, |m| m.row_ratio(r, &vals))
            })
            .collect();
        let mut up_logs = TrialWavefunction::state_logs(&self.state.up);
        let mut down_logs = TrialWavefunction::state_logs(&self.state.down);
        let logs = if up { &mut up_logs } else { &mut down_logs };
        for (l, q) in logs.iter_mut().zip(&det_ratios) {
            if *q == 0.0 {
                *l = (f64::NEG_INFINITY, 0.0);
            } else {
                *l = (l.0 + q.abs().ln(), l.1 * q.signum());
            }
        }
        let combination = psi.combine(&up_logs, &down_logs);
        let delta_j = psi.jastrow().electron_value(electron, &position, &self.positions)
            - psi.jastrow().electron_value(electron, &self.positions[electron], &self.positions);
        let (log_ratio, sign_ratio) = if combination.sign == 0.0 {
            (f64::NEG_INFINITY, 0.0)
        } else {
            (combination.log - self.combination.log + delta_j, combination.sign * self.combination.sign)
        };

        let mut gradient = Vec3::zeros();
        if with_gradient && sign_ratio != 0.0 {
            let weights = psi.set_weights(electron, &combination.weights);
            for (((occ, m), q), w) in sets.iter().zip(mats).zip(&det_ratios).zip(weights) {
                let Some(m) = m else { continue };
                if *q == 0.0 || w == 0.0 {
                    continue;
                }
                let grads: Vec<Vec3> = occ.iter().map(|&o| row[o].gradient).collect();
                gradient += m.contract(r, &grads) * (w / q);
            }
            gradient += psi.jastrow().electron_gradient(electron, &position, &self.positions);
        }
        MoveProposal { electron, position, log_ratio, sign_ratio, gradient, row, det_ratios, fallback: false }
    }

    /// Ψ(R')/Ψ(R) and the new gradient for moving `electron` to `position`,
    /// via rank-one determinant ratios.
    pub fn propose(&self, psi: &TrialWavefunction, electron: usize, position: Vec3) -> MoveProposal {
        self.ratio_inner(psi, electron, position, true)
    }

    /// (ln|Ψ(R')/Ψ(R)|, sign) without the gradient.
    pub fn ratio(&self, psi: &TrialWavefunction, electron: usize, position: Vec3) -> (f64, f64) {
        let p = self.ratio_inner(psi, electron, position, false);
        (p.log_ratio, p.sign_ratio)
    }

    /// Applies an accepted proposal, updating inverses by Sherman–Morrison and
    /// refreshing the cached value and derivatives.
    pub fn accept(&mut self, psi: &TrialWavefunction, proposal: MoveProposal) {
        let i = proposal.electron;
        self.positions[i] = proposal.position;
        self.age = 0;
        self.since_refresh += 1;
        let degenerate = proposal
            .det_ratios
            .iter()
            .zip(if psi.is_up(i) { &self.state.up } else { &self.state.down })
            .any(|(q, m)| m.is_some() && !(q.abs() > DEGENERATE_RATIO));
        if proposal.fallback || degenerate || self.since_refresh >= REFRESH_INTERVAL {
            self.refresh(psi);
            return;
        }
        let (sets, r) = psi.spin_slot(i);
        let mats = if psi.is_up(i) { &mut self.state.up } else { &mut self.state.down };
        for ((occ, m), q) in sets.iter().zip(mats.iter_mut()).zip(&proposal.det_ratios) {
            if let Some(m) = m {
                let vals: Vec<f64> = occ.iter().map(|&o| proposal.row[o].value).collect();
                m.replace_row(r, &vals, *q);
            }
        }
        self.table[i] = proposal.row;
        let (value, combination, jastrow_value) = psi.assemble(&self.positions, &self.table, &self.state);
        self.value = value;
        self.combination = combination;
        self.jastrow_value = jastrow_value;
    }

    /// Marks a rejected move.
    pub fn reject(&mut self) {
        self.age += 1;
    }

    /// Moves `electron` and returns Ψ(R')/Ψ(R) as (log, sign); the move is
    /// always applied.
    pub fn update_after_single_move(&mut self, psi: &TrialWavefunction, electron: usize, position: Vec3) -> (f64, f64) {
        let p = self.propose(psi, electron, position);
        let out = (p.log_ratio, p.sign_ratio);
        self.accept(psi, p);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{BasisFunction, BasisKind, Geometry, Nucleus, OrbitalSet};
    use crate::wavefunction::trial::tests::{rich, sample_config};
    use crate::wavefunction::{DeterminantExpansion, JastrowParams};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn zero_move_is_identity() {
        let psi = rich();
        let pos = sample_config(&[0.1, 0.2, 0.3, -0.4, 0.5, 0.6, 0.7, -0.8, 0.9, 1.0, 0.1, -0.2, 0.3, 0.4, -0.5]);
        let w = Walker::new(&psi, pos.clone(), 0).unwrap();
        for i in 0..pos.len() {
            let (l, s) = w.ratio(&psi, i, pos[i]);
            assert!(l.abs() < 1e-12);
            assert_eq!(s, 1.0);
        }
    }

    #[test]
    fn long_random_walk_matches_full_evaluation() {
        let psi = rich();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let pos: Vec<Vec3> = (0..5)
            .map(|_| Vec3::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)))
            .collect();
        let mut w = Walker::new(&psi, pos, 0).unwrap();
        let mut checked = 0;
        for step in 0..12_000 {
            let i = step % 5;
            let new = w.positions()[i]
                + Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
            let p = w.propose(&psi, i, new);
            let mut moved = w.positions().to_vec();
            moved[i] = new;
            let full = psi.evaluate(&moved).unwrap();
            let old = w.value().clone();
            if full.sign != 0.0 && old.sign != 0.0 {
                let expected = full.log_magnitude - old.log_magnitude;
                assert!((p.log_ratio - expected).abs() < 1e-9, "step {step}");
                assert_eq!(p.sign_ratio, full.sign * old.sign);
                assert!((p.gradient - full.gradient[i]).norm() < 1e-8 * full.gradient[i].norm().max(1.0));
                checked += 1;
            }
            if p.log_ratio > rng.random::<f64>().ln() / 2.0 && p.sign_ratio != 0.0 {
                w.accept(&psi, p);
                let fresh = psi.evaluate(w.positions()).unwrap();
                assert!((w.value().log_magnitude - fresh.log_magnitude).abs() < 1e-10 * fresh.log_magnitude.abs().max(1.0));
                assert!((w.value().laplacian_ratio - fresh.laplacian_ratio).abs() < 1e-8 * fresh.laplacian_ratio.abs().max(1.0));
            } else {
                w.reject();
            }
        }
        assert!(checked > 10_000);
    }

    /// Two same-spin electrons in 1s and 2pz-like orbitals; moving electron 0
    /// across the nodal surface flips the sign.
    #[test]
    fn node_crossing_flips_sign() {
        let g = Geometry::new(vec![Nucleus::new("X", 2.0, Vec3::zeros())], 2, 0).unwrap();
        let basis = vec![
            BasisFunction { label: "s".into(), center: 0, kind: BasisKind::Slater { zeta: 2.0 } },
            BasisFunction {
                label: "pz".into(),
                center: 0,
                kind: BasisKind::Gaussian {
                    shape: crate::system::CartesianShape::Z,
                    primitives: vec![crate::system::Primitive { exponent: 0.5, coefficient: 1.0 }],
                },
            },
        ];
        let psi = TrialWavefunction::new(
            &g,
            OrbitalSet::from_basis(basis),
            DeterminantExpansion::single(2, 0),
            JastrowParams::default(),
        )
        .unwrap();
        let r1 = Vec3::new(0.3, -0.2, 0.4);
        let start = Vec3::new(-0.5, 0.7, 0.9);
        let end = Vec3::new(0.6, -0.1, -0.8);
        let sign_at = |t: f64| psi.evaluate(&[start + (end - start) * t, r1]).unwrap().sign;
        assert_ne!(sign_at(0.0), sign_at(1.0));
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if sign_at(mid) == sign_at(0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let w = Walker::new(&psi, vec![start + (end - start) * (lo - 1e-3), r1], 0).unwrap();
        let (_, s) = w.ratio(&psi, 0, start + (end - start) * (hi + 1e-3));
        assert_eq!(s, -1.0);
        let (_, s) = w.ratio(&psi, 0, start + (end - start) * (lo - 2e-3));
        assert_eq!(s, 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn ratio_matches_full_evaluation(c in proptest::collection::vec(-2.0..2.0f64, 15), i in 0usize..5, d in proptest::collection::vec(-1.0..1.0f64, 3)) {
            let psi = rich();
            let pos = sample_config(&c);
            let w = Walker::new(&psi, pos.clone(), 0).unwrap();
            prop_assume!(w.value().sign != 0.0);
            let new = pos[i] + Vec3::new(d[0], d[1], d[2]);
            let mut moved = pos.clone();
            moved[i] = new;
            let full = psi.evaluate(&moved).unwrap();
            prop_assume!(full.sign != 0.0);
            let (l, s) = w.ratio(&psi, i, new);
            let expected = full.log_magnitude - w.value().log_magnitude;
            prop_assert!((l - expected).abs() < 1e-9);
            prop_assert_eq!(s, full.sign * w.value().sign);
        }
    }
}
