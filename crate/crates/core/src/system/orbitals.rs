//! One-particle basis functions and molecular orbitals built from them.

use crate::system::SystemError;
use crate::Vec3;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

/// Cartesian angular factor x^a y^b z^c of a Gaussian, up to d functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CartesianShape {
    S,
    X,
    Y,
    Z,
    XX,
    YY,
    ZZ,
    XY,
    XZ,
    YZ,
}

impl CartesianShape {
    pub fn powers(self) -> [i32; 3] {
        use CartesianShape::*;
        match self {
            S => [0, 0, 0],
            X => [1, 0, 0],
            Y => [0, 1, 0],
            Z => [0, 0, 1],
            XX => [2, 0, 0],
            YY => [0, 2, 0],
            ZZ => [0, 0, 2],
            XY => [1, 1, 0],
            XZ => [1, 0, 1],
            YZ => [0, 1, 1],
        }
    }

    pub fn angular_momentum(self) -> i32 {
        self.powers().iter().sum()
    }
}

impl fmt::Display for CartesianShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use CartesianShape::*;
        let s = match self {
            S => "s",
            X => "x",
            Y => "y",
            Z => "z",
            XX => "xx",
            YY => "yy",
            ZZ => "zz",
            XY => "xy",
            XZ => "xz",
            YZ => "yz",
        };
        f.write_str(s)
    }
}

impl FromStr for CartesianShape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        use CartesianShape::*;
        Ok(match s {
            "s" => S,
            "x" | "px" => X,
            "y" | "py" => Y,
            "z" | "pz" => Z,
            "xx" | "dxx" => XX,
            "yy" | "dyy" => YY,
            "zz" | "dzz" => ZZ,
            "xy" | "dxy" => XY,
            "xz" | "dxz" => XZ,
            "yz" | "dyz" => YZ,
            _ => return Err(format!("unknown Cartesian shape '{s}'")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primitive {
    /// Exponent α, bohr⁻².
    pub exponent: f64,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BasisKind {
    /// Contracted Cartesian Gaussian; each primitive is normalised.
    Gaussian { shape: CartesianShape, primitives: Vec<Primitive> },
    /// Normalised 1s Slater function √(ζ³/π)·e^{−ζr}, ζ in bohr⁻¹.
    Slater { zeta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisFunction {
    pub label: String,
    /// Index of the nucleus the function is centred on.
    pub center: usize,
    pub kind: BasisKind,
}

/// A molecular orbital as a linear combination of basis functions.
#[derive(Debug, Clone, PartialEq)]
pub struct Orbital {
    pub label: String,
    /// `(basis index, coefficient)` pairs.
    pub terms: Vec<(usize, f64)>,
}

/// Value, gradient and Laplacian of a one-particle function at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitalEval {
    pub value: f64,
    pub gradient: Vec3,
    pub laplacian: f64,
}

impl Default for OrbitalEval {
    fn default() -> Self {
        Self { value: 0.0, gradient: Vec3::zeros(), laplacian: 0.0 }
    }
}

fn double_factorial_odd(n: i32) -> f64 {
    // (2n−1)!!
    (1..=n).map(|k| (2 * k - 1) as f64).product()
}

/// Normalisation of x^a y^b z^c e^{−αr²}.
pub fn gaussian_norm(alpha: f64, powers: [i32; 3]) -> f64 {
    let l: i32 = powers.iter().sum();
    let denom: f64 = powers.iter().map(|&p| double_factorial_odd(p)).product();
    (2.0 * alpha / PI).powf(0.75) * (4.0 * alpha).powf(l as f64 / 2.0) / denom.sqrt()
}

/// (p, dp/dx, d²p/dx²) for p(x) = x^a e^{−αx²}, without the exponential.
fn cartesian_factor(a: i32, alpha: f64, x: f64) -> (f64, f64, f64) {
    let pw = |k: i32| if k < 0 { 0.0 } else { x.powi(k) };
    let af = a as f64;
    let f0 = pw(a);
    let f1 = af * pw(a - 1) - 2.0 * alpha * pw(a + 1);
    let f2 = af * (af - 1.0) * pw(a - 2) - 2.0 * alpha * (2.0 * af + 1.0) * pw(a) + 4.0 * alpha * alpha * pw(a + 2);
    (f0, f1, f2)
}

impl BasisFunction {
    pub fn validate(&self, n_centers: usize) -> Result<(), SystemError> {
        if self.center >= n_centers {
            return Err(SystemError::MissingCenter { label: self.label.clone(), center: self.center });
        }
        match &self.kind {
            BasisKind::Gaussian { primitives, .. } => {
                if primitives.is_empty() {
                    return Err(SystemError::Basis(format!("'{}' has no primitives", self.label)));
                }
                if let Some(p) = primitives.iter().find(|p| !(p.exponent > 0.0) || !p.coefficient.is_finite()) {
                    return Err(SystemError::Basis(format!(
                        "'{}' has invalid primitive (exponent {}, coefficient {})",
                        self.label, p.exponent, p.coefficient
                    )));
                }
            }
            BasisKind::Slater { zeta } => {
                if !(*zeta > 0.0) || !zeta.is_finite() {
                    return Err(SystemError::Basis(format!("'{}' has non-positive Slater exponent {zeta}", self.label)));
                }
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, centers: &[Vec3], r: &Vec3) -> OrbitalEval {
        let d = r - centers[self.center];
        match &self.kind {
            BasisKind::Slater { zeta } => {
                let dist = d.norm();
                let norm = (zeta.powi(3) / PI).sqrt();
                let f = norm * (-zeta * dist).exp();
                let gradient = if dist > 0.0 { d * (-zeta * f / dist) } else { Vec3::zeros() };
                OrbitalEval { value: f, gradient, laplacian: (zeta * zeta - 2.0 * zeta / dist) * f }
            }
            BasisKind::Gaussian { shape, primitives } => {
                let [a, b, c] = shape.powers();
                let r2 = d.norm_squared();
                let mut out = OrbitalEval::default();
                for p in primitives {
                    let alpha = p.exponent;
                    let e = p.coefficient * gaussian_norm(alpha, [a, b, c]) * (-alpha * r2).exp();
                    let (x0, x1, x2) = cartesian_factor(a, alpha, d.x);
                    let (y0, y1, y2) = cartesian_factor(b, alpha, d.y);
                    let (z0, z1, z2) = cartesian_factor(c, alpha, d.z);
                    out.value += e * x0 * y0 * z0;
                    out.gradient += Vec3::new(x1 * y0 * z0, x0 * y1 * z0, x0 * y0 * z1) * e;
                    out.laplacian += e * (x2 * y0 * z0 + x0 * y2 * z0 + x0 * y0 * z2);
                }
                out
            }
        }
    }
}

/// Basis functions plus the molecular orbitals expanded in them.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitalSet {
    pub basis: Vec<BasisFunction>,
    pub orbitals: Vec<Orbital>,
}

impl OrbitalSet {
    pub fn new(basis: Vec<BasisFunction>, orbitals: Vec<Orbital>) -> Self {
        Self { basis, orbitals }
    }

    /// One orbital per basis function with unit coefficient.
    pub fn from_basis(basis: Vec<BasisFunction>) -> Self {
        let orbitals = basis.iter().enumerate().map(|(i, b)| Orbital { label: b.label.clone(), terms: vec![(i, 1.0)] }).collect();
        Self { basis, orbitals }
    }

    pub fn len(&self) -> usize {
        self.orbitals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orbitals.is_empty()
    }

    pub fn validate(&self, n_centers: usize) -> Result<(), SystemError> {
        for b in &self.basis {
            b.validate(n_centers)?;
        }
        for o in &self.orbitals {
            if o.terms.is_empty() {
                return Err(SystemError::Basis(format!("orbital '{}' is empty", o.label)));
            }
            if let Some((i, _)) = o.terms.iter().find(|(i, _)| *i >= self.basis.len()) {
                return Err(SystemError::Basis(format!("orbital '{}' references missing basis function {i}", o.label)));
            }
        }
        Ok(())
    }

    /// Whether any orbital contains a Slater function centred on `center`.
    pub fn has_slater_on(&self, center: usize) -> bool {
        self.basis.iter().any(|b| b.center == center && matches!(b.kind, BasisKind::Slater { .. }))
    }

    /// Evaluates every orbital at `r` into `out` (length `self.len()`).
    pub fn evaluate_all(&self, centers: &[Vec3], r: &Vec3, out: &mut [OrbitalEval]) {
        let basis: Vec<OrbitalEval> = self.basis.iter().map(|b| b.evaluate(centers, r)).collect();
        for (o, slot) in self.orbitals.iter().zip(out.iter_mut()) {
            let mut acc = OrbitalEval::default();
            for &(i, c) in &o.terms {
                let b = &basis[i];
                acc.value += c * b.value;
                acc.gradient += b.gradient * c;
                acc.laplacian += c * b.laplacian;
            }
            *slot = acc;
        }
    }

    pub fn evaluate(&self, index: usize, centers: &[Vec3], r: &Vec3) -> OrbitalEval {
        let mut acc = OrbitalEval::default();
        for &(i, c) in &self.orbitals[index].terms {
            let b = self.basis[i].evaluate(centers, r);
            acc.value += c * b.value;
            acc.gradient += b.gradient * c;
            acc.laplacian += c * b.laplacian;
        }
        acc
    }
}
