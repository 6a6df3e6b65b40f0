//! Weighted least-squares fits of potential curves and dipole curves.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{CurvePoint, SpectroscopyError};
use crate::rng::{self, tag};
use crate::stats::Estimate;
use crate::system::units::WAVENUMBER_PER_HARTREE;

/// Smallest accepted ratio of smallest to largest singular value.
const MIN_CONDITION_RATIO: f64 = 1e-13;
const MAX_ITERATIONS: usize = 500;

/// `V(R) = D_e(1 − e^{−a(R−R_e)})² − D_e + offset`, hartree and bohr.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorseParams {
    pub r_e: f64,
    pub d_e: f64,
    pub a: f64,
    pub offset: f64,
}

impl MorseParams {
    /// From R_e, D_e and ω_e (hartree) for reduced mass `mu` in electron masses.
    pub fn from_constants(r_e: f64, d_e: f64, omega_e: f64, mu: f64, offset: f64) -> Self {
        Self { r_e, d_e, a: omega_e * (mu / (2.0 * d_e)).sqrt(), offset }
    }

    /// Harmonic frequency ω_e = a·√(2D_e/μ), hartree.
    pub fn omega(&self, mu: f64) -> f64 {
        self.a * (2.0 * self.d_e / mu).sqrt()
    }

    fn as_vec(&self) -> [f64; 4] {
        [self.r_e, self.d_e, self.a, self.offset]
    }

    fn from_slice(p: &[f64]) -> Self {
        Self { r_e: p[0], d_e: p[1], a: p[2], offset: p[3] }
    }
}

pub fn morse_potential(p: &MorseParams, r: f64) -> f64 {
    let x = (-p.a * (r - p.r_e)).exp();
    p.d_e * (x * x - 2.0 * x) + p.offset
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveForm {
    Morse,
    Polynomial { degree: usize },
}

impl CurveForm {
    fn min_points(self) -> usize {
        match self {
            CurveForm::Morse => 4,
            CurveForm::Polynomial { degree } => degree + 2,
        }
    }
}

impl fmt::Display for CurveForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurveForm::Morse => f.write_str("morse"),
            CurveForm::Polynomial { degree } => write!(f, "poly{degree}"),
        }
    }
}

impl FromStr for CurveForm {
    type Err = String;

    /// `morse`, `polyK` or `polynomial:K`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        if s == "morse" {
            return Ok(CurveForm::Morse);
        }
        let degree = s
            .strip_prefix("polynomial:")
            .or_else(|| s.strip_prefix("poly"))
            .and_then(|d| d.parse::<usize>().ok())
            .ok_or_else(|| format!("unknown curve form '{s}' (expected morse, polyK)"))?;
        if degree < 2 {
            return Err(format!("polynomial degree must be at least 2, got {degree}"));
        }
        Ok(CurveForm::Polynomial { degree })
    }
}

/// R_e in bohr; D_e and ω_e in cm⁻¹.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectroscopicConstants {
    pub r_e: Estimate,
    pub d_e: Estimate,
    pub omega_e: Estimate,
}

impl SpectroscopicConstants {
    pub fn values(&self) -> [f64; 3] {
        [self.r_e.value, self.d_e.value, self.omega_e.value]
    }

    pub fn errors(&self) -> [f64; 3] {
        [self.r_e.error, self.d_e.error, self.omega_e.error]
    }

    fn from_parts(values: [f64; 3], errors: [f64; 3]) -> Self {
        Self {
            r_e: Estimate::new(values[0], errors[0]),
            d_e: Estimate::new(values[1], errors[1]),
            omega_e: Estimate::new(values[2], errors[2]),
        }
    }
}

/// Polynomial in `t = (R − center)/scale` with its parameter covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialFit {
    pub center: f64,
    pub scale: f64,
    pub coefficients: Vec<f64>,
    pub covariance: DMatrix<f64>,
    /// Bond-length range of the fitted data.
    pub range: (f64, f64),
    pub chi2: f64,
}

impl PolynomialFit {
    pub fn t(&self, r: f64) -> f64 {
        (r - self.center) / self.scale
    }

    /// Basis values t^j at `r`.
    pub fn basis(&self, r: f64) -> Vec<f64> {
        let t = self.t(r);
        let mut v = Vec::with_capacity(self.coefficients.len());
        let mut p = 1.0;
        for _ in 0..self.coefficients.len() {
            v.push(p);
            p *= t;
        }
        v
    }

    pub fn value(&self, r: f64) -> f64 {
        poly_eval(&self.coefficients, self.t(r))
    }

    pub fn derivative(&self, r: f64) -> f64 {
        poly_derivative(&self.coefficients, self.t(r), 1) / self.scale
    }

    pub fn second_derivative(&self, r: f64) -> f64 {
        poly_derivative(&self.coefficients, self.t(r), 2) / (self.scale * self.scale)
    }

    /// Standard error of the fitted value at `r`.
    pub fn value_error(&self, r: f64) -> f64 {
        let b = DVector::from_vec(self.basis(r));
        (b.dot(&(&self.covariance * &b))).max(0.0).sqrt()
    }
}

fn poly_eval(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ck| acc * t + ck)
}

fn poly_derivative(c: &[f64], t: f64, order: usize) -> f64 {
    let mut acc = 0.0;
    for (k, &ck) in c.iter().enumerate().rev() {
        if k < order {
            break;
        }
        let falling: f64 = (0..order).map(|j| (k - j) as f64).product();
        acc += ck * falling * t.powi((k - order) as i32);
    }
    acc
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Morse(MorseParams),
    Polynomial(PolynomialFit),
}

impl FittedModel {
    pub fn value(&self, r: f64) -> f64 {
        match self {
            FittedModel::Morse(p) => morse_potential(p, r),
            FittedModel::Polynomial(p) => p.value(r),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveFit {
    pub form: CurveForm,
    pub constants: SpectroscopicConstants,
    pub model: FittedModel,
    pub parameters: Vec<f64>,
    pub covariance: DMatrix<f64>,
    /// `E_i − V(R_i)` in input order.
    pub residuals: Vec<f64>,
    pub chi2: f64,
    pub range: (f64, f64),
}

/// Weights `1/σ²`; all-zero σ means unit weights with the covariance scaled
/// by the residual variance afterwards.
fn weights(sigmas: impl Iterator<Item = f64>) -> (Vec<f64>, bool) {
    let s: Vec<f64> = sigmas.collect();
    let unit = s.iter().all(|&x| x == 0.0);
    if unit {
        return (vec![1.0; s.len()], true);
    }
    // A single zero σ among nonzero ones is pinned with a large finite weight.
    let floor = s.iter().copied().filter(|&x| x > 0.0).fold(f64::INFINITY, f64::min) * 1e-3;
    (s.iter().map(|&x| 1.0 / x.max(floor).powi(2)).collect(), false)
}

fn covariance_scale(unit: bool, chi2: f64, n: usize, p: usize) -> f64 {
    match (unit, n > p) {
        (false, _) => 1.0,
        (true, true) => chi2 / (n - p) as f64,
        (true, false) => 0.0,
    }
}

/// Solves the weighted linear least-squares problem `design·c ≈ y`.
fn linear_least_squares(
    design: DMatrix<f64>,
    y: &[f64],
    w: &[f64],
) -> Result<(DVector<f64>, DMatrix<f64>, f64), SpectroscopyError> {
    let sw: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
    let mut a = design.clone();
    for (i, s) in sw.iter().enumerate() {
        a.row_mut(i).scale_mut(*s);
    }
    let b = DVector::from_iterator(y.len(), y.iter().zip(&sw).map(|(y, s)| y * s));
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > smax * MIN_CONDITION_RATIO) {
        return Err(SpectroscopyError::Singular { condition: smax / smin });
    }
    let (u, vt) = (svd.u.as_ref().expect("u"), svd.v_t.as_ref().expect("v_t"));
    let inv_s = svd.singular_values.map(|s| 1.0 / s);
    let coeffs = vt.transpose() * DMatrix::from_diagonal(&inv_s) * (u.transpose() * &b);
    let cov = vt.transpose() * DMatrix::from_diagonal(&inv_s.map(|x| x * x)) * vt;
    let resid = &design * &coeffs;
    let chi2 = resid.iter().zip(y).zip(w).map(|((f, y), w)| w * (y - f).powi(2)).sum();
    Ok((coeffs, cov, chi2))
}

fn check_points(points: &[CurvePoint], form: CurveForm) -> Result<(f64, f64), SpectroscopyError> {
    if points.len() < form.min_points() {
        return Err(SpectroscopyError::TooFewPoints { form: form.to_string(), needed: form.min_points(), got: points.len() });
    }
    for (i, p) in points.iter().enumerate() {
        p.validate(i)?;
    }
    let lo = points.iter().map(|p| p.r).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.r).fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

fn poly_fit(r: &[f64], y: &[f64], sigma: &[f64], degree: usize) -> Result<PolynomialFit, SpectroscopyError> {
    let lo = r.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let center = 0.5 * (lo + hi);
    let scale = if hi > lo { 0.5 * (hi - lo) } else { 1.0 };
    let (w, unit) = weights(sigma.iter().copied());
    let design = DMatrix::from_fn(r.len(), degree + 1, |i, j| ((r[i] - center) / scale).powi(j as i32));
    let (c, cov, chi2) = linear_least_squares(design, y, &w)?;
    let s = covariance_scale(unit, chi2, r.len(), degree + 1);
    Ok(PolynomialFit { center, scale, coefficients: c.iter().copied().collect(), covariance: cov * s, range: (lo, hi), chi2 })
}

/// Weighted polynomial fit of the bond-axis dipole curve.
pub fn fit_dipole(points: &[CurvePoint], degree: usize) -> Result<PolynomialFit, SpectroscopyError> {
    let form = CurveForm::Polynomial { degree };
    if points.len() < degree + 1 {
        return Err(SpectroscopyError::TooFewPoints { form: form.to_string(), needed: degree + 1, got: points.len() });
    }
    for (i, p) in points.iter().enumerate() {
        p.validate(i)?;
    }
    let r: Vec<f64> = points.iter().map(|p| p.r).collect();
    let d: Vec<f64> = points.iter().map(|p| p.dipole).collect();
    let s: Vec<f64> = points.iter().map(|p| p.sigma_dipole).collect();
    poly_fit(&r, &d, &s, degree)
}

/// Interior minimum of a polynomial inside its data range.
fn polynomial_minimum(fit: &PolynomialFit, start: Option<f64>) -> Result<f64, SpectroscopyError> {
    let (lo, hi) = fit.range;
    let mut r = match start {
        Some(r) => r,
        None => {
            let n = 4000;
            let (k, _) = (0..=n)
                .map(|k| (k, fit.value(lo + (hi - lo) * k as f64 / n as f64)))
                .fold((0, f64::INFINITY), |best, (k, v)| if v < best.1 { (k, v) } else { best });
            if k == 0 || k == n {
                return Err(SpectroscopyError::Unbound("fitted polynomial has no interior minimum".into()));
            }
            lo + (hi - lo) * k as f64 / n as f64
        }
    };
    for _ in 0..100 {
        let curvature = fit.second_derivative(r);
        if !(curvature > 0.0) {
            return Err(SpectroscopyError::Unbound("non-positive curvature at the fitted minimum".into()));
        }
        let step = fit.derivative(r) / curvature;
        r -= step;
        if step.abs() <= 1e-15 * r.abs() {
            break;
        }
    }
    if !(r > lo && r < hi) {
        return Err(SpectroscopyError::Unbound(format!("fitted minimum {r} outside the data range")));
    }
    Ok(r)
}

/// Polynomial D_e is measured from the fitted value at the largest sampled
/// bond length.
fn polynomial_constants(fit: &PolynomialFit, mu: f64, start: Option<f64>) -> Result<[f64; 3], SpectroscopyError> {
    let r_e = polynomial_minimum(fit, start)?;
    let d_e = fit.value(fit.range.1) - fit.value(r_e);
    let omega = (fit.second_derivative(r_e) / mu).sqrt();
    Ok([r_e, d_e * WAVENUMBER_PER_HARTREE, omega * WAVENUMBER_PER_HARTREE])
}

fn morse_constants(p: &MorseParams, mu: f64) -> [f64; 3] {
    [p.r_e, p.d_e * WAVENUMBER_PER_HARTREE, p.omega(mu) * WAVENUMBER_PER_HARTREE]
}

/// Linear propagation of the parameter covariance through `f` by central
/// differences with steps of a small fraction of each parameter's error.
fn propagate(params: &[f64], cov: &DMatrix<f64>, f: impl Fn(&[f64]) -> Result<[f64; 3], SpectroscopyError>) -> [f64; 3] {
    let n = params.len();
    let mut jac = DMatrix::zeros(3, n);
    for j in 0..n {
        let sd = cov[(j, j)].max(0.0).sqrt();
        if sd == 0.0 {
            continue;
        }
        let h = 1e-4 * sd;
        let mut plus = params.to_vec();
        let mut minus = params.to_vec();
        plus[j] += h;
        minus[j] -= h;
        if let (Ok(a), Ok(b)) = (f(&plus), f(&minus)) {
            for k in 0..3 {
                jac[(k, j)] = (a[k] - b[k]) / (2.0 * h);
            }
        }
    }
    let out = &jac * cov * jac.transpose();
    [0, 1, 2].map(|k| out[(k, k)].max(0.0).sqrt())
}

struct Weighted {
    r: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
}

impl Weighted {
    fn chi2(&self, p: &MorseParams) -> f64 {
        self.r.iter().zip(&self.y).zip(&self.w).map(|((r, y), w)| w * (morse_potential(p, *r) - y).powi(2)).sum()
    }

    /// Weighted residuals and Jacobian.
    fn linearize(&self, p: &MorseParams) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.r.len();
        let mut res = DVector::zeros(n);
        let mut jac = DMatrix::zeros(n, 4);
        for i in 0..n {
            let sw = self.w[i].sqrt();
            let dr = self.r[i] - p.r_e;
            let x = (-p.a * dr).exp();
            let dv_dx = p.d_e * (2.0 * x - 2.0);
            res[i] = sw * (p.d_e * (x * x - 2.0 * x) + p.offset - self.y[i]);
            jac[(i, 0)] = sw * dv_dx * p.a * x;
            jac[(i, 1)] = sw * (x * x - 2.0 * x);
            jac[(i, 2)] = sw * dv_dx * (-dr * x);
            jac[(i, 3)] = sw;
        }
        (res, jac)
    }

    /// Best (D_e, offset) for fixed R_e and a.
    fn linear_part(&self, r_e: f64, a: f64) -> Option<MorseParams> {
        let design = DMatrix::from_fn(self.r.len(), 2, |i, j| {
            let x = (-a * (self.r[i] - r_e)).exp();
            if j == 0 {
                x * x - 2.0 * x
            } else {
                1.0
            }
        });
        let (c, _, _) = linear_least_squares(design, &self.y, &self.w).ok()?;
        (c[0] > 0.0).then(|| MorseParams { r_e, d_e: c[0], a, offset: c[1] })
    }
}

fn initial_morse(data: &Weighted, order: &[usize]) -> Result<MorseParams, SpectroscopyError> {
    let k = order.iter().enumerate().min_by(|a, b| data.y[*a.1].total_cmp(&data.y[*b.1])).map(|(k, _)| k).expect("non-empty");
    if k == 0 || k + 1 == order.len() {
        return Err(SpectroscopyError::Unbound("lowest energy lies at the edge of the scan".into()));
    }
    let (x0, x1, x2) = (data.r[order[k - 1]], data.r[order[k]], data.r[order[k + 1]]);
    let (y0, y1, y2) = (data.y[order[k - 1]], data.y[order[k]], data.y[order[k + 1]]);
    let d1 = (y1 - y0) / (x1 - x0);
    let d2 = (y2 - y1) / (x2 - x1);
    let curvature = (d2 - d1) / (0.5 * (x2 - x0));
    let r_e = if curvature > 0.0 { (0.5 * (x0 + x1) - d1 / curvature).clamp(x0, x2) } else { x1 };
    let span = data.r[order[order.len() - 1]] - data.r[order[0]];
    (0..120)
        .map(|j| 0.05 / span * (1000.0_f64).powf(j as f64 / 119.0))
        .filter_map(|a| data.linear_part(r_e, a))
        .min_by(|p, q| data.chi2(p).total_cmp(&data.chi2(q)))
        .ok_or_else(|| SpectroscopyError::Unbound("no bound Morse well fits the data".into()))
}

fn levenberg_marquardt(data: &Weighted, start: MorseParams) -> Result<MorseParams, SpectroscopyError> {
    let mut p = start;
    let mut chi2 = data.chi2(&p);
    let mut lambda = 1e-3;
    for _ in 0..MAX_ITERATIONS {
        let (res, jac) = data.linearize(&p);
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &res;
        loop {
            let mut a = jtj.clone();
            for d in 0..4 {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-300);
            }
            let step = a.lu().solve(&(-&g));
            let candidate = step.as_ref().map(|s| {
                let v: Vec<f64> = p.as_vec().iter().zip(s.iter()).map(|(a, b)| a + b).collect();
                MorseParams::from_slice(&v)
            });
            match candidate {
                Some(c) if c.d_e > 0.0 && c.a > 0.0 && data.chi2(&c) <= chi2 => {
                    let new_chi2 = data.chi2(&c);
                    let small_step = step
                        .as_ref()
                        .map(|s| s.iter().zip(p.as_vec()).all(|(d, x)| d.abs() <= 1e-13 * x.abs().max(1e-300)))
                        .unwrap_or(true);
                    let small_gain = chi2 - new_chi2 <= 1e-15 * chi2;
                    p = c;
                    chi2 = new_chi2;
                    lambda = (lambda / 3.0).max(1e-15);
                    if small_step || small_gain {
                        return Ok(p);
                    }
                    break;
                }
                _ => {
                    lambda *= 4.0;
                    if lambda > 1e20 {
                        // No downhill direction left: converged to working precision.
                        return Ok(p);
                    }
                }
            }
        }
    }
    Err(SpectroscopyError::NoConvergence(MAX_ITERATIONS))
}

/// Weighted least-squares fit of a potential curve. `mu` is the reduced
/// mass in electron masses.
pub fn fit_curve(points: &[CurvePoint], form: CurveForm, mu: f64) -> Result<CurveFit, SpectroscopyError> {
    let range = check_points(points, form)?;
    let r: Vec<f64> = points.iter().map(|p| p.r).collect();
    let y: Vec<f64> = points.iter().map(|p| p.energy).collect();
    let sigma: Vec<f64> = points.iter().map(|p| p.sigma_energy).collect();
    match form {
        CurveForm::Morse => {
            let (w, unit) = weights(sigma.iter().copied());
            let data = Weighted { r: r.clone(), y: y.clone(), w };
            let mut order: Vec<usize> = (0..r.len()).collect();
            order.sort_by(|a, b| r[*a].total_cmp(&r[*b]));
            let p = levenberg_marquardt(&data, initial_morse(&data, &order)?)?;
            if !(p.r_e > range.0 && p.r_e < range.1) {
                return Err(SpectroscopyError::Unbound(format!("fitted R_e = {} outside the scan", p.r_e)));
            }
            let (_, jac) = data.linearize(&p);
            let svd = jac.clone().svd(false, false);
            let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
            if !(smin > smax * MIN_CONDITION_RATIO) {
                return Err(SpectroscopyError::Singular { condition: smax / smin });
            }
            let chi2 = data.chi2(&p);
            let cov = (jac.transpose() * &jac).try_inverse().ok_or(SpectroscopyError::Singular { condition: smax / smin })?
                * covariance_scale(unit, chi2, r.len(), 4);
            let params = p.as_vec().to_vec();
            let errors = propagate(&params, &cov, |q| Ok(morse_constants(&MorseParams::from_slice(q), mu)));
            Ok(CurveFit {
                form,
                constants: SpectroscopicConstants::from_parts(morse_constants(&p, mu), errors),
                model: FittedModel::Morse(p),
                parameters: params,
                covariance: cov,
                residuals: y.iter().zip(&r).map(|(y, r)| y - morse_potential(&p, *r)).collect(),
                chi2,
                range,
            })
        }
        CurveForm::Polynomial { degree } => {
            let fit = poly_fit(&r, &y, &sigma, degree)?;
            let values = polynomial_constants(&fit, mu, None)?;
            let errors = propagate(&fit.coefficients, &fit.covariance, |c| {
                let trial = PolynomialFit { coefficients: c.to_vec(), ..fit.clone() };
                polynomial_constants(&trial, mu, Some(values[0]))
            });
            Ok(CurveFit {
                form,
                constants: SpectroscopicConstants::from_parts(values, errors),
                parameters: fit.coefficients.clone(),
                covariance: fit.covariance.clone(),
                residuals: y.iter().zip(&r).map(|(y, r)| y - fit.value(*r)).collect(),
                chi2: fit.chi2,
                range,
                model: FittedModel::Polynomial(fit),
            })
        }
    }
}

/// Parametric bootstrap over the point energies.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapSummary {
    /// Central values from the unperturbed fit, errors from the replica spread.
    pub constants: SpectroscopicConstants,
    pub replicas: Vec<[f64; 3]>,
    pub failed: usize,
}

/// Refits `replicas` copies of the curve with every energy redrawn from
/// N(E_i, σ_i²). Replica `k` draws from its own stream, so the result does
/// not depend on the thread count.
pub fn bootstrap(
    points: &[CurvePoint],
    form: CurveForm,
    mu: f64,
    replicas: usize,
    seed: u64,
) -> Result<BootstrapSummary, SpectroscopyError> {
    let central = fit_curve(points, form, mu)?;
    let results: Vec<Option<[f64; 3]>> = (0..replicas)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng::stream(seed, &[tag::BOOTSTRAP, k as u64]);
            let noisy: Vec<CurvePoint> = points
                .iter()
                .map(|p| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    CurvePoint { energy: p.energy + p.sigma_energy * z, ..*p }
                })
                .collect();
            fit_curve(&noisy, form, mu).ok().map(|f| f.constants.values())
        })
        .collect();
    let ok: Vec<[f64; 3]> = results.iter().flatten().copied().collect();
    let failed = replicas - ok.len();
    let values = central.constants.values();
    let errors = [0, 1, 2].map(|k| {
        if ok.len() < 2 {
            return f64::INFINITY;
        }
        let m = ok.iter().map(|v| v[k]).sum::<f64>() / ok.len() as f64;
        (ok.iter().map(|v| (v[k] - m).powi(2)).sum::<f64>() / (ok.len() - 1) as f64).sqrt()
    });
    Ok(BootstrapSummary { constants: SpectroscopicConstants::from_parts(values, errors), replicas: ok, failed })
}

/// R_e and ω_e values on which two fits differ by more than their combined
/// uncertainty. D_e is skipped: a polynomial's D_e depends on the sampled range.
pub fn form_disagreements(a: &SpectroscopicConstants, b: &SpectroscopicConstants) -> Vec<String> {
    let names = ["R_e", "D_e", "omega_e"];
    let (va, ea, vb, eb) = (a.values(), a.errors(), b.values(), b.errors());
    [0, 2]
        .into_iter()
        .filter(|&k| (va[k] - vb[k]).abs() > ea[k].hypot(eb[k]))
        .map(|k| format!("{}: {} vs {} (combined σ {:.3e})", names[k], va[k], vb[k], ea[k].hypot(eb[k])))
        .collect()
}
