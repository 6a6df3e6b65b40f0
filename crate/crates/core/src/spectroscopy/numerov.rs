//! Vibrational levels of a diatomic by Numerov shooting, and vibrational
//! averages over them.

use super::{PolynomialFit, SpectroscopyError};
use crate::stats::Estimate;
use nalgebra::DVector;

/// Probability mass allowed in each tail outside a state's support.
const SUPPORT_TAIL: f64 = 1e-6;
/// Values beyond this are rescaled during integration.
const RESCALE: f64 = 1e150;

/// Uniform grid on `[r_min, r_max]` with `points` nodes, bohr.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialGrid {
    pub r_min: f64,
    pub r_max: f64,
    pub points: usize,
}

impl RadialGrid {
    pub fn new(r_min: f64, r_max: f64, points: usize) -> Result<Self, SpectroscopyError> {
        if !(r_min.is_finite() && r_max.is_finite() && r_max > r_min) {
            return Err(SpectroscopyError::InvalidGrid(format!("bad range [{r_min}, {r_max}]")));
        }
        if points < 16 {
            return Err(SpectroscopyError::InvalidGrid(format!("need at least 16 points, got {points}")));
        }
        Ok(Self { r_min, r_max, points })
    }

    pub fn spacing(&self) -> f64 {
        (self.r_max - self.r_min) / (self.points - 1) as f64
    }

    pub fn r(&self, i: usize) -> f64 {
        self.r_min + self.spacing() * i as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.r(i)).collect()
    }
}

fn trapezoid(h: f64, f: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = f.collect();
    if v.is_empty() {
        return 0.0;
    }
    h * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[v.len() - 1]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct VibrationalState {
    pub v: usize,
    /// Hartree above the bottom of the well.
    pub energy: f64,
    pub grid: RadialGrid,
    /// χ_v on the grid nodes, normalized with the trapezoid rule.
    pub wavefunction: Vec<f64>,
}

impl VibrationalState {
    /// Trapezoid ∫ χ_v² f(R) dR.
    pub fn expectation(&self, f: impl Fn(f64) -> f64) -> f64 {
        let g = self.grid;
        trapezoid(g.spacing(), self.wavefunction.iter().enumerate().map(|(i, c)| c * c * f(g.r(i))))
    }

    pub fn norm(&self) -> f64 {
        self.expectation(|_| 1.0)
    }

    /// Sign changes of χ_v between grid nodes.
    pub fn nodes(&self) -> usize {
        let scale = self.wavefunction.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        let significant: Vec<f64> = self.wavefunction.iter().copied().filter(|c| c.abs() > 1e-12 * scale).collect();
        significant.windows(2).filter(|w| w[0] * w[1] < 0.0).count()
    }

    pub fn overlap(&self, other: &VibrationalState) -> f64 {
        let h = self.grid.spacing();
        trapezoid(h, self.wavefunction.iter().zip(&other.wavefunction).map(|(a, b)| a * b))
    }

    /// Interval holding all but a negligible tail of |χ_v|² on each side.
    pub fn support(&self) -> (f64, f64) {
        let g = self.grid;
        let h = g.spacing();
        let p: Vec<f64> = self.wavefunction.iter().map(|c| c * c).collect();
        let mut acc = 0.0;
        let mut lo = 0;
        for i in 1..p.len() {
            acc += 0.5 * h * (p[i - 1] + p[i]);
            if acc > SUPPORT_TAIL {
                break;
            }
            lo = i;
        }
        acc = 0.0;
        let mut hi = p.len() - 1;
        for i in (0..p.len() - 1).rev() {
            acc += 0.5 * h * (p[i] + p[i + 1]);
            if acc > SUPPORT_TAIL {
                break;
            }
            hi = i;
        }
        (g.r(lo), g.r(hi))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundStates {
    pub states: Vec<VibrationalState>,
    pub requested: usize,
    /// Absolute potential minimum, hartree.
    pub well_minimum: f64,
    /// Absolute energy above which states count as unbound, hartree.
    pub dissociation: f64,
}

impl BoundStates {
    pub fn is_complete(&self) -> bool {
        self.states.len() == self.requested
    }
}

/// Numerov weights `f_i = 1 + h²k_i²/12` with `k² = 2μ(E − V)`.
fn numerov_factors(potential: &[f64], mu: f64, energy: f64, h: f64) -> Vec<f64> {
    potential.iter().map(|v| 1.0 + h * h * 2.0 * mu * (energy - v) / 12.0).collect()
}

fn numerov_next(f: &[f64], y_prev: f64, y_cur: f64, i: usize, dir: isize) -> f64 {
    let next = (i as isize + dir) as usize;
    let prev = (i as isize - dir) as usize;
    ((12.0 - 10.0 * f[i]) * y_cur - f[prev] * y_prev) / f[next]
}

/// Sign changes of the outward solution with χ(r_min) = 0. Equals the
/// number of Dirichlet eigenvalues below `energy`.
fn count_nodes(potential: &[f64], mu: f64, energy: f64, h: f64) -> usize {
    let f = numerov_factors(potential, mu, energy, h);
    let (mut y0, mut y1) = (0.0, 1e-30);
    let mut nodes = 0;
    for i in 1..potential.len() - 1 {
        let mut y2 = numerov_next(&f, y0, y1, i, 1);
        if y2.abs() > RESCALE {
            y1 /= RESCALE;
            y2 /= RESCALE;
        }
        if y2 == 0.0 || y2 * y1 < 0.0 {
            nodes += 1;
            // Exact zeros count once.
            if y2 == 0.0 {
                y2 = -y1 * 1e-300;
            }
        }
        y0 = y1;
        y1 = y2;
    }
    nodes
}

/// Integrates from `start` toward `end` (inclusive) with zero boundary value.
fn integrate(f: &[f64], start: usize, end: usize) -> Vec<f64> {
    let n = f.len();
    let dir: isize = if end > start { 1 } else { -1 };
    let len = start.abs_diff(end) + 1;
    let mut y = vec![0.0; n];
    y[(start as isize + dir) as usize] = 1e-30;
    let mut i = (start as isize + dir) as usize;
    for _ in 1..len - 1 {
        let next = (i as isize + dir) as usize;
        y[next] = numerov_next(f, y[(i as isize - dir) as usize], y[i], i, dir);
        if y[next].abs() > RESCALE {
            y.iter_mut().for_each(|v| *v /= RESCALE);
        }
        i = next;
    }
    y
}

fn golden_minimum(potential: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    for _ in 0..200 {
        if potential(c) < potential(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
        if (b - a).abs() < 1e-14 * (a.abs() + b.abs()) {
            break;
        }
    }
    potential(0.5 * (a + b))
}

/// Lowest `n_states` solutions of `−χ''/(2μ) + V χ = E χ` with χ = 0 at the
/// grid ends, by node-counting bisection. `mu` in electron masses.
///
/// States must lie below `dissociation` (default: the lower of the two
/// edge values of V); fewer states are returned when the well holds fewer.
pub fn numerov_solve(
    potential: impl Fn(f64) -> f64,
    mu: f64,
    grid: RadialGrid,
    n_states: usize,
    dissociation: Option<f64>,
) -> Result<BoundStates, SpectroscopyError> {
    let grid = RadialGrid::new(grid.r_min, grid.r_max, grid.points)?;
    if !(mu > 0.0) {
        return Err(SpectroscopyError::InvalidGrid(format!("reduced mass must be positive, got {mu}")));
    }
    let h = grid.spacing();
    let r = grid.nodes();
    let v: Vec<f64> = r.iter().map(|&x| potential(x)).collect();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(SpectroscopyError::InvalidGrid("potential is not finite on the grid".into()));
    }
    let imin = (0..v.len()).min_by(|a, b| v[*a].total_cmp(&v[*b])).expect("non-empty");
    if imin == 0 || imin + 1 == v.len() {
        return Err(SpectroscopyError::InvalidGrid("potential has no interior minimum on the grid".into()));
    }
    let well_minimum = golden_minimum(&potential, r[imin - 1], r[imin + 1]);
    let edge_limit = v[0].min(v[v.len() - 1]);
    let limit = dissociation.unwrap_or(edge_limit);

    let mut states = Vec::with_capacity(n_states);
    for n in 0..n_states {
        if count_nodes(&v, mu, limit, h) <= n {
            break;
        }
        let (mut lo, mut hi) = (well_minimum, limit);
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if count_nodes(&v, mu, mid, h) > n {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let energy = 0.5 * (lo + hi);
        if v[0] <= energy {
            return Err(SpectroscopyError::GridTooSmall { side: "inner", v: n, energy, edge: grid.r_min });
        }
        if v[v.len() - 1] <= energy {
            return Err(SpectroscopyError::GridTooSmall { side: "outer", v: n, energy, edge: grid.r_max });
        }
        states.push(VibrationalState {
            v: n,
            energy: energy - well_minimum,
            grid,
            wavefunction: eigenfunction(&v, mu, energy, h),
        });
    }
    Ok(BoundStates { states, requested: n_states, well_minimum, dissociation: limit })
}

/// Outward and inward solutions matched at the outer classical turning point.
fn eigenfunction(v: &[f64], mu: f64, energy: f64, h: f64) -> Vec<f64> {
    let n = v.len();
    let f = numerov_factors(v, mu, energy, h);
    let mut m = (0..n).rev().find(|&i| v[i] < energy).unwrap_or(n / 2).clamp(2, n - 3);
    let outward = integrate(&f, 0, n - 1);
    let inward = integrate(&f, n - 1, 0);
    let peak = outward[..=m].iter().fold(0.0_f64, |a, y| a.max(y.abs()));
    while m > 2 && outward[m].abs() < 1e-6 * peak {
        m -= 1;
    }
    let scale = outward[m] / inward[m];
    let mut chi: Vec<f64> = (0..n).map(|i| if i <= m { outward[i] } else { inward[i] * scale }).collect();
    let norm = trapezoid(h, chi.iter().map(|c| c * c)).sqrt();
    let peak = chi.iter().fold(0.0_f64, |a, c| a.max(c.abs()));
    let sign = chi.iter().find(|c| c.abs() > 1e-3 * peak).map(|c| c.signum()).unwrap_or(1.0);
    chi.iter_mut().for_each(|c| *c *= sign / norm);
    chi
}

/// ⟨d⟩_v = ∫ χ_v² d(R) dR with the error propagated from the dipole-fit
/// covariance. Refuses to extrapolate the fit.
pub fn vibrational_average(dipole: &PolynomialFit, state: &VibrationalState) -> Result<Estimate, SpectroscopyError> {
    let (lo, hi) = state.support();
    let (fit_lo, fit_hi) = dipole.range;
    if lo < fit_lo || hi > fit_hi {
        return Err(SpectroscopyError::Extrapolation { v: state.v, lo, hi, fit_lo, fit_hi });
    }
    let moments = DVector::from_fn(dipole.coefficients.len(), |j, _| state.expectation(|r| dipole.t(r).powi(j as i32)));
    let value = moments.iter().zip(&dipole.coefficients).map(|(m, c)| m * c).sum();
    let error = moments.dot(&(&dipole.covariance * &moments)).max(0.0).sqrt();
    Ok(Estimate::new(value, error))
}
