//! Dense LU factorisation and rank-one inverse updates for Slater matrices.
//!
//! Matrices are row-major `n × n` with `A[i][j] = φ_j(r_i)`: rows are
//! electrons, columns occupied orbitals.

/// ln|det A|, sign and A⁻¹. `inverse` is `None` when A is singular.
#[derive(Debug, Clone, PartialEq)]
pub struct LuFactor {
    pub log_abs: f64,
    pub sign: f64,
    pub inverse: Option<Vec<f64>>,
}

/// LU with partial pivoting.
pub fn lu_factor(n: usize, matrix: &[f64]) -> LuFactor {
    assert_eq!(matrix.len(), n * n);
    if n == 0 {
        return LuFactor { log_abs: 0.0, sign: 1.0, inverse: Some(Vec::new()) };
    }
    let mut a = matrix.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    let mut log_abs = 0.0;
    for k in 0..n {
        let (p, pivot) = (k..n).map(|i| (i, a[i * n + k].abs())).fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
        if !(pivot > 0.0) || !pivot.is_finite() {
            return LuFactor { log_abs: f64::NEG_INFINITY, sign: 0.0, inverse: None };
        }
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            perm.swap(k, p);
            sign = -sign;
        }
        let d = a[k * n + k];
        if d < 0.0 {
            sign = -sign;
        }
        log_abs += d.abs().ln();
        for i in k + 1..n {
            let f = a[i * n + k] / d;
            a[i * n + k] = f;
            for j in k + 1..n {
                a[i * n + j] -= f * a[k * n + j];
            }
        }
    }
    // Solve L U x = P e_c for each column c of the inverse.
    let mut inv = vec![0.0; n * n];
    let mut col = vec![0.0; n];
    for c in 0..n {
        for i in 0..n {
            col[i] = if perm[i] == c { 1.0 } else { 0.0 };
        }
        for i in 0..n {
            let mut s = col[i];
            for j in 0..i {
                s -= a[i * n + j] * col[j];
            }
            col[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = col[i];
            for j in i + 1..n {
                s -= a[i * n + j] * col[j];
            }
            col[i] = s / a[i * n + i];
        }
        for i in 0..n {
            inv[i * n + c] = col[i];
        }
    }
    LuFactor { log_abs, sign, inverse: Some(inv) }
}

/// A Slater matrix kept as its inverse plus log-determinant.
#[derive(Debug, Clone, PartialEq)]
pub struct SlaterMatrix {
    n: usize,
    inverse: Vec<f64>,
    pub log_abs: f64,
    pub sign: f64,
}

impl SlaterMatrix {
    /// `None` if the matrix is singular.
    pub fn new(n: usize, matrix: &[f64]) -> Option<Self> {
        let lu = lu_factor(n, matrix);
        lu.inverse.map(|inverse| Self { n, inverse, log_abs: lu.log_abs, sign: lu.sign })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// (A⁻¹)_{jr}.
    pub fn inverse(&self, j: usize, r: usize) -> f64 {
        self.inverse[j * self.n + r]
    }

    /// det(A')/det(A) when row `r` is replaced by `row`.
    pub fn row_ratio(&self, r: usize, row: &[f64]) -> f64 {
        (0..self.n).map(|j| row[j] * self.inverse(j, r)).sum()
    }

    /// Σ_j v_j (A⁻¹)_{jr}: contracts orbital derivatives at electron `r`.
    pub fn contract<T>(&self, r: usize, values: &[T]) -> T
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
    {
        let mut acc = values[0] * self.inverse(0, r);
        for (j, v) in values.iter().enumerate().skip(1) {
            acc = acc + *v * self.inverse(j, r);
        }
        acc
    }

    /// Sherman–Morrison update for replacing row `r` by `row`, where
    /// `ratio = row_ratio(r, row)` is nonzero.
    pub fn replace_row(&mut self, r: usize, row: &[f64], ratio: f64) {
        let n = self.n;
        let mut t = vec![0.0; n];
        for (c, tc) in t.iter_mut().enumerate() {
            let s: f64 = (0..n).map(|k| row[k] * self.inverse[k * n + c]).sum();
            *tc = (s - if c == r { 1.0 } else { 0.0 }) / ratio;
        }
        let col: Vec<f64> = (0..n).map(|j| self.inverse[j * n + r]).collect();
        for j in 0..n {
            for c in 0..n {
                self.inverse[j * n + c] -= col[j] * t[c];
            }
        }
        self.log_abs += ratio.abs().ln();
        if ratio < 0.0 {
            self.sign = -self.sign;
        }
    }
}
