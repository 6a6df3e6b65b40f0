use crate::system::{Geometry, OrbitalEval, OrbitalSet};
use crate::wavefunction::{
    lu_factor, DeterminantExpansion, Jastrow, JastrowParams, SlaterMatrix, WavefunctionError, WavefunctionValue,
};
use crate::Vec3;

/// One product D↑_up · D↓_down with its total coefficient.
#[derive(Debug, Clone, PartialEq)]
pub(super) struct Term {
    pub coefficient: f64,
    pub up: usize,
    pub down: usize,
}

/// Slater matrices for every distinct occupation of each spin. `None`
/// marks a singular matrix.
#[derive(Debug, Clone)]
pub(super) struct SlaterState {
    pub up: Vec<Option<SlaterMatrix>>,
    pub down: Vec<Option<SlaterMatrix>>,
}

/// log|Ψ_A|, its sign and the normalised weights c_k D_k / Ψ_A.
#[derive(Debug, Clone)]
pub(super) struct Combination {
    pub log: f64,
    pub sign: f64,
    pub weights: Vec<f64>,
}

impl Combination {
    fn node(n: usize) -> Self {
        Self { log: f64::NEG_INFINITY, sign: 0.0, weights: vec![0.0; n] }
    }
}

/// Sorts an occupation list and returns the permutation parity.
fn canonical(occ: &[usize]) -> (Vec<usize>, f64) {
    let mut v = occ.to_vec();
    let mut parity = 1.0;
    for i in 0..v.len() {
        for j in 0..v.len() - 1 - i {
            if v[j] > v[j + 1] {
                v.swap(j, j + 1);
                parity = -parity;
            }
        }
    }
    (v, parity)
}

fn intern(sets: &mut Vec<Vec<usize>>, occ: Vec<usize>) -> usize {
    match sets.iter().position(|s| *s == occ) {
        Some(k) => k,
        None => {
            sets.push(occ);
            sets.len() - 1
        }
    }
}

/// Ψ_T(R) = Σ_k c_k D↑_k D↓_k · e^{J(R)}, shared read-only between walkers.
#[derive(Debug, Clone)]
pub struct TrialWavefunction {
    orbitals: OrbitalSet,
    centers: Vec<Vec3>,
    species: Vec<String>,
    n_up: usize,
    n_down: usize,
    expansion: DeterminantExpansion,
    jastrow_params: JastrowParams,
    jastrow: Jastrow,
    pub(super) up_sets: Vec<Vec<usize>>,
    pub(super) down_sets: Vec<Vec<usize>>,
    pub(super) terms: Vec<Term>,
}

impl TrialWavefunction {
    pub fn new(
        geometry: &Geometry,
        orbitals: OrbitalSet,
        expansion: DeterminantExpansion,
        jastrow: JastrowParams,
    ) -> Result<Self, WavefunctionError> {
        let species = geometry.nuclei().iter().map(|n| n.label.clone()).collect();
        Self::assemble_new(orbitals, (species, geometry.positions()), geometry.n_up(), geometry.n_down(), expansion, jastrow)
    }

    fn assemble_new(
        orbitals: OrbitalSet,
        (species, centers): (Vec<String>, Vec<Vec3>),
        n_up: usize,
        n_down: usize,
        expansion: DeterminantExpansion,
        jastrow: JastrowParams,
    ) -> Result<Self, WavefunctionError> {
        orbitals.validate(centers.len()).map_err(|e| WavefunctionError::Orbitals(e.to_string()))?;
        expansion.validate_against(n_up, n_down, orbitals.len())?;
        let resolved = Jastrow::new(&jastrow, &species, &centers, n_up)?;

        let mut up_sets = Vec::new();
        let mut down_sets = Vec::new();
        let mut terms: Vec<Term> = Vec::new();
        for csf in expansion.csfs() {
            for det in &csf.determinants {
                let (up, pu) = canonical(&det.up);
                let (down, pd) = canonical(&det.down);
                let up = intern(&mut up_sets, up);
                let down = intern(&mut down_sets, down);
                let c = csf.coefficient * det.weight * pu * pd;
                match terms.iter_mut().find(|t| t.up == up && t.down == down) {
                    Some(t) => t.coefficient += c,
                    None => terms.push(Term { coefficient: c, up, down }),
                }
            }
        }
        Ok(Self {
            orbitals,
            centers,
            species,
            n_up,
            n_down,
            expansion,
            jastrow_params: jastrow,
            jastrow: resolved,
            up_sets,
            down_sets,
            terms,
        })
    }

    /// Same orbitals and frame with new expansion coefficients and Jastrow.
    pub fn with_parameters(&self, expansion: DeterminantExpansion, jastrow: JastrowParams) -> Result<Self, WavefunctionError> {
        let geometry_like = (self.species.clone(), self.centers.clone());
        Self::assemble_new(self.orbitals.clone(), geometry_like, self.n_up, self.n_down, expansion, jastrow)
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

    pub fn orbitals(&self) -> &OrbitalSet {
        &self.orbitals
    }

    pub fn centers(&self) -> &[Vec3] {
        &self.centers
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn expansion(&self) -> &DeterminantExpansion {
        &self.expansion
    }

    pub fn jastrow_params(&self) -> &JastrowParams {
        &self.jastrow_params
    }

    pub fn jastrow(&self) -> &Jastrow {
        &self.jastrow
    }

    /// Number of distinct determinant products after CSF expansion.
    pub fn n_products(&self) -> usize {
        self.terms.len()
    }

    pub(super) fn is_up(&self, electron: usize) -> bool {
        electron < self.n_up
    }

    /// (spin sets, row index) for an electron.
    pub(super) fn spin_slot(&self, electron: usize) -> (&[Vec<usize>], usize) {
        if self.is_up(electron) {
            (&self.up_sets, electron)
        } else {
            (&self.down_sets, electron - self.n_up)
        }
    }

    pub(super) fn orbital_row(&self, r: &Vec3) -> Vec<OrbitalEval> {
        let mut out = vec![OrbitalEval::default(); self.orbitals.len()];
        self.orbitals.evaluate_all(&self.centers, r, &mut out);
        out
    }

    pub(super) fn orbital_table(&self, positions: &[Vec3]) -> Vec<Vec<OrbitalEval>> {
        positions.iter().map(|r| self.orbital_row(r)).collect()
    }

    pub(super) fn slater_state(&self, table: &[Vec<OrbitalEval>]) -> SlaterState {
        let build = |sets: &[Vec<usize>], rows: &[Vec<OrbitalEval>]| -> Vec<Option<SlaterMatrix>> {
            sets.iter()
                .map(|occ| {
                    let n = occ.len();
                    let mut m = vec![0.0; n * n];
                    for (i, row) in rows.iter().enumerate() {
                        for (j, &o) in occ.iter().enumerate() {
                            m[i * n + j] = row[o].value;
                        }
                    }
                    SlaterMatrix::new(n, &m)
                })
                .collect()
        };
        SlaterState { up: build(&self.up_sets, &table[..self.n_up]), down: build(&self.down_sets, &table[self.n_up..]) }
    }

    /// Combines per-spin (log, sign) pairs into Ψ_A in the log domain.
    pub(super) fn combine(&self, up: &[(f64, f64)], down: &[(f64, f64)]) -> Combination {
        let n = self.terms.len();
        let logs: Vec<f64> = self
            .terms
            .iter()
            .map(|t| {
                if t.coefficient == 0.0 || up[t.up].1 == 0.0 || down[t.down].1 == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    up[t.up].0 + down[t.down].0
                }
            })
            .collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Combination::node(n);
        }
        let scaled: Vec<f64> = self
            .terms
            .iter()
            .zip(&logs)
            .map(
                |(t, &l)| {
                    if l == f64::NEG_INFINITY {
                        0.0
                    } else {
                        t.coefficient * up[t.up].1 * down[t.down].1 * (l - max).exp()
                    }
                },
            )
            .collect();
        let sum: f64 = scaled.iter().sum();
        if sum == 0.0 || !sum.is_finite() {
            return Combination::node(n);
        }
        Combination { log: max + sum.abs().ln(), sign: sum.signum(), weights: scaled.iter().map(|s| s / sum).collect() }
    }

    pub(super) fn state_logs(state: &[Option<SlaterMatrix>]) -> Vec<(f64, f64)> {
        state.iter().map(|m| m.as_ref().map_or((f64::NEG_INFINITY, 0.0), |m| (m.log_abs, m.sign))).collect()
    }

    /// Summed weight of each distinct occupation of the electron's spin.
    pub(super) fn set_weights(&self, electron: usize, weights: &[f64]) -> Vec<f64> {
        let up = self.is_up(electron);
        let mut out = vec![0.0; if up { self.up_sets.len() } else { self.down_sets.len() }];
        for (t, w) in self.terms.iter().zip(weights) {
            out[if up { t.up } else { t.down }] += w;
        }
        out
    }

    /// (∇_i Ψ_A / Ψ_A, ∇²_i Ψ_A / Ψ_A) from current inverses.
    pub(super) fn determinant_derivatives(
        &self,
        state: &SlaterState,
        combination: &Combination,
        electron: usize,
        row: &[OrbitalEval],
    ) -> (Vec3, f64) {
        let (sets, r) = self.spin_slot(electron);
        let mats = if self.is_up(electron) { &state.up } else { &state.down };
        let weights = self.set_weights(electron, &combination.weights);
        let mut g = Vec3::zeros();
        let mut l = 0.0;
        for ((occ, m), w) in sets.iter().zip(mats).zip(weights) {
            let Some(m) = m else { continue };
            if w == 0.0 {
                continue;
            }
            let grads: Vec<Vec3> = occ.iter().map(|&o| row[o].gradient).collect();
            let laps: Vec<f64> = occ.iter().map(|&o| row[o].laplacian).collect();
            g += m.contract(r, &grads) * w;
            l += m.contract(r, &laps) * w;
        }
        (g, l)
    }

    /// Derivative contributions of exactly singular determinants, which carry
    /// no inverse. Only rank n−1 matrices with a regular partner contribute;
    /// det is linear in each row, so ∂_i D and ∇²_i D are determinants with
    /// row i replaced by the orbital derivatives.
    fn singular_derivatives(
        &self,
        table: &[Vec<OrbitalEval>],
        state: &SlaterState,
        combination: &Combination,
    ) -> Vec<(Vec3, f64)> {
        let mut out = vec![(Vec3::zeros(), 0.0); self.n_electrons()];
        for t in &self.terms {
            if t.coefficient == 0.0 {
                continue;
            }
            let (up, down) = (&state.up[t.up], &state.down[t.down]);
            let (partner, occ, first) = match (up, down) {
                (None, Some(p)) => (p, &self.up_sets[t.up], 0),
                (Some(p), None) => (p, &self.down_sets[t.down], self.n_up),
                _ => continue,
            };
            let n = occ.len();
            let rows = &table[first..first + n];
            let base: Vec<f64> = rows.iter().flat_map(|row| occ.iter().map(move |&o| row[o].value)).collect();
            let scale = t.coefficient * partner.sign * combination.sign;
            let replaced = |r: usize, values: &dyn Fn(&OrbitalEval) -> f64| {
                let mut m = base.clone();
                for (j, &o) in occ.iter().enumerate() {
                    m[r * n + j] = values(&rows[r][o]);
                }
                let lu = lu_factor(n, &m);
                lu.sign * (lu.log_abs + partner.log_abs - combination.log).exp() * scale
            };
            for r in 0..n {
                let g = Vec3::new(replaced(r, &|e| e.gradient.x), replaced(r, &|e| e.gradient.y), replaced(r, &|e| e.gradient.z));
                let slot = &mut out[first + r];
                slot.0 += g;
                slot.1 += replaced(r, &|e| e.laplacian);
            }
        }
        out
    }

    /// Assembles the full value from a Slater state and orbital table.
    pub(super) fn assemble(
        &self,
        positions: &[Vec3],
        table: &[Vec<OrbitalEval>],
        state: &SlaterState,
    ) -> (WavefunctionValue, Combination, f64) {
        let combination = self.combine(&Self::state_logs(&state.up), &Self::state_logs(&state.down));
        let j = self.jastrow.evaluate(positions);
        let n = positions.len();
        if combination.sign == 0.0 {
            let value = WavefunctionValue {
                log_magnitude: f64::NEG_INFINITY,
                sign: 0.0,
                gradient: vec![Vec3::zeros(); n],
                laplacian_ratio: f64::NAN,
            };
            return (value, combination, j.value);
        }
        let any_singular = self.terms.iter().any(|t| state.up[t.up].is_none() || state.down[t.down].is_none());
        let extra = if any_singular { self.singular_derivatives(table, state, &combination) } else { Vec::new() };
        let mut gradient = Vec::with_capacity(n);
        let mut lap = 0.0;
        for i in 0..n {
            let (mut ga, mut la) = self.determinant_derivatives(state, &combination, i, &table[i]);
            if let Some((g, l)) = extra.get(i) {
                ga += g;
                la += l;
            }
            let gj = j.gradient[i];
            gradient.push(ga + gj);
            lap += la + 2.0 * ga.dot(&gj) + j.laplacian[i] + gj.norm_squared();
        }
        let value = WavefunctionValue {
            log_magnitude: combination.log + j.value,
            sign: combination.sign,
            gradient,
            laplacian_ratio: lap,
        };
        (value, combination, j.value)
    }

    pub(super) fn check_dimension(&self, positions: &[Vec3]) -> Result<(), WavefunctionError> {
        if positions.len() != self.n_electrons() {
            return Err(WavefunctionError::Dimension { expected: self.n_electrons(), got: positions.len() });
        }
        Ok(())
    }

    /// ln|Ψ_T|, sign, ∇ ln|Ψ_T| and Σ∇²Ψ_T/Ψ_T at `positions`.
    pub fn evaluate(&self, positions: &[Vec3]) -> Result<WavefunctionValue, WavefunctionError> {
        self.check_dimension(positions)?;
        let table = self.orbital_table(positions);
        let state = self.slater_state(&table);
        Ok(self.assemble(positions, &table, &state).0)
    }

    /// ln|Ψ_T| and sign only.
    pub fn log_value(&self, positions: &[Vec3]) -> Result<(f64, f64), WavefunctionError> {
        self.check_dimension(positions)?;
        let table = self.orbital_table(positions);
        let state = self.slater_state(&table);
        let c = self.combine(&Self::state_logs(&state.up), &Self::state_logs(&state.down));
        if c.sign == 0.0 {
            return Ok((f64::NEG_INFINITY, 0.0));
        }
        Ok((c.log + self.jastrow.evaluate(positions).value, c.sign))
    }
}
