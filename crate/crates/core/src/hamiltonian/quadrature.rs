//! Spherical quadrature rules on the unit sphere, weights normalised to 1.

use nalgebra::{Quaternion, Rotation3, UnitQuaternion};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::hamiltonian::HamiltonianError;
use crate::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct AngularQuadrature {
    nodes: Vec<Vec3>,
    weights: Vec<f64>,
    order: u32,
}

fn push_sym(nodes: &mut Vec<Vec3>, weights: &mut Vec<f64>, points: &[[f64; 3]], w: f64) {
    for p in points {
        nodes.push(Vec3::new(p[0], p[1], p[2]));
        weights.push(w);
    }
}

fn axes() -> Vec<[f64; 3]> {
    vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]
}

fn corners() -> Vec<[f64; 3]> {
    let c = 1.0 / 3f64.sqrt();
    let mut v = Vec::new();
    for sx in [1.0, -1.0] {
        for sy in [1.0, -1.0] {
            for sz in [1.0, -1.0] {
                v.push([sx * c, sy * c, sz * c]);
            }
        }
    }
    v
}

fn edges() -> Vec<[f64; 3]> {
    let e = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = Vec::new();
    for s1 in [1.0, -1.0] {
        for s2 in [1.0, -1.0] {
            v.push([s1 * e, s2 * e, 0.0]);
            v.push([s1 * e, 0.0, s2 * e]);
            v.push([0.0, s1 * e, s2 * e]);
        }
    }
    v
}

/// All sign and position permutations of (a, a, b).
fn aab(a: f64, b: f64) -> Vec<[f64; 3]> {
    let mut v = Vec::new();
    for s1 in [1.0, -1.0] {
        for s2 in [1.0, -1.0] {
            for s3 in [1.0, -1.0] {
                v.push([s1 * a, s2 * a, s3 * b]);
                v.push([s1 * a, s3 * b, s2 * a]);
                v.push([s3 * b, s1 * a, s2 * a]);
            }
        }
    }
    v
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

impl AngularQuadrature {
    /// 6 points, exact through L = 3.
    pub fn lebedev_6() -> Self {
        let (mut n, mut w) = (Vec::new(), Vec::new());
        push_sym(&mut n, &mut w, &axes(), 1.0 / 6.0);
        Self { nodes: n, weights: w, order: 3 }
    }

    /// 14 points, exact through L = 5.
    pub fn lebedev_14() -> Self {
        let (mut n, mut w) = (Vec::new(), Vec::new());
        push_sym(&mut n, &mut w, &axes(), 1.0 / 15.0);
        push_sym(&mut n, &mut w, &corners(), 3.0 / 40.0);
        Self { nodes: n, weights: w, order: 5 }
    }

    /// 26 points, exact through L = 7.
    pub fn lebedev_26() -> Self {
        let (mut n, mut w) = (Vec::new(), Vec::new());
        push_sym(&mut n, &mut w, &axes(), 1.0 / 21.0);
        push_sym(&mut n, &mut w, &edges(), 4.0 / 105.0);
        push_sym(&mut n, &mut w, &corners(), 9.0 / 280.0);
        Self { nodes: n, weights: w, order: 7 }
    }

    /// 50 points, exact through L = 11.
    pub fn lebedev_50() -> Self {
        let (mut n, mut w) = (Vec::new(), Vec::new());
        push_sym(&mut n, &mut w, &axes(), 4.0 / 315.0);
        push_sym(&mut n, &mut w, &edges(), 64.0 / 2835.0);
        push_sym(&mut n, &mut w, &corners(), 27.0 / 1280.0);
        let l = 1.0 / 11f64.sqrt();
        push_sym(&mut n, &mut w, &aab(l, 3.0 * l), 14641.0 / 725760.0);
        Self { nodes: n, weights: w, order: 11 }
    }

    /// Gauss–Legendre in cos θ times a uniform φ grid, exact through `order`.
    pub fn product(order: u32) -> Self {
        let n_theta = (order as usize + 2) / 2;
        let n_phi = order as usize + 1;
        let (x, wx) = gauss_legendre(n_theta);
        let mut nodes = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        for (c, wc) in x.iter().zip(&wx) {
            let s = (1.0 - c * c).max(0.0).sqrt();
            for k in 0..n_phi {
                let phi = 2.0 * std::f64::consts::PI * k as f64 / n_phi as f64;
                nodes.push(Vec3::new(s * phi.cos(), s * phi.sin(), *c));
                weights.push(wc / (2.0 * n_phi as f64));
            }
        }
        Self { nodes, weights, order }
    }

    /// Smallest built-in rule exact through `order`.
    pub fn with_order(order: u32) -> Self {
        match order {
            0..=3 => Self::lebedev_6(),
            4..=5 => Self::lebedev_14(),
            6..=7 => Self::lebedev_26(),
            8..=11 => Self::lebedev_50(),
            _ => Self::product(order),
        }
    }

    /// Rule for ECP channels up to `l_max`, rejecting orders below 2·l_max + 1.
    pub fn for_ecp(order: u32, l_max: u32) -> Result<Self, HamiltonianError> {
        if order < 2 * l_max + 1 {
            return Err(HamiltonianError::QuadratureOrder { order, l_max });
        }
        Ok(Self::with_order(order))
    }

    pub fn nodes(&self) -> &[Vec3] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Highest spherical-harmonic degree integrated exactly.
    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn rotated(&self, rotation: &Rotation3<f64>) -> Self {
        Self { nodes: self.nodes.iter().map(|n| rotation * n).collect(), weights: self.weights.clone(), order: self.order }
    }
}

/// Uniformly distributed rotation from a normalised Gaussian quaternion.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Rotation3<f64> {
    let q = Quaternion::new(
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
    );
    UnitQuaternion::from_quaternion(q).to_rotation_matrix()
}

/// Legendre polynomial P_l(x).
pub fn legendre(l: u32, x: f64) -> f64 {
    match l {
        0 => 1.0,
        1 => x,
        2 => 0.5 * (3.0 * x * x - 1.0),
        3 => 0.5 * (5.0 * x * x * x - 3.0 * x),
        _ => {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=l {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            p1
        }
    }
}
