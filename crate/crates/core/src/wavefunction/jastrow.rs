//! Jastrow correlation factor e^J.
//!
//! J(R) = Σ_{i<j} u_σσ'(r_ij) + Σ_{i,a} χ_a(r_ia) + Σ_a Σ_{i<j} f_a(r_ia, r_ja, r_ij)
//!
//! One- and two-body terms are Padé functions `b1·r/(1 + b2·r)` plus
//! polynomial corrections `fc(r)·Σ_k p_k r^k` (k ≥ 2) that leave the cusp
//! untouched. Three-body terms are symmetrised monomials
//! `(r_ia^l r_ja^m + r_ia^m r_ja^l)·r_ij^n·fc(r_ia)·fc(r_ja)` with
//! l, m, n ≠ 1. The cutoff `fc(x) = 1 − 10x³ + 15x⁴ − 6x⁵`, x = r/r_c, has
//! zero slope at the origin and is C² at r_c.

use crate::wavefunction::WavefunctionError;
use crate::Vec3;

/// Smooth cutoff and its first two derivatives with respect to r.
pub fn cutoff_function(r: f64, rc: f64) -> (f64, f64, f64) {
    if r >= rc {
        return (0.0, 0.0, 0.0);
    }
    let x = r / rc;
    let x2 = x * x;
    let y = 1.0 - x;
    // Factored forms stay accurate as x → 1.
    let f = y * y * y * (1.0 + 3.0 * x + 6.0 * x2);
    let d = -30.0 * x2 * y * y / rc;
    let dd = -60.0 * x * y * (1.0 - 2.0 * x) / (rc * rc);
    (f, d, dd)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PadeTerm {
    pub b1: f64,
    pub b2: f64,
    /// Coefficients of r², r³, … inside the cutoff.
    pub poly: Vec<f64>,
    pub cutoff: f64,
}

impl PadeTerm {
    pub fn new(b1: f64, b2: f64) -> Self {
        Self { b1, b2, poly: Vec::new(), cutoff: 0.0 }
    }

    /// (u, u', u'') at r.
    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        let den = 1.0 + self.b2 * r;
        let mut u = self.b1 * r / den;
        let mut du = self.b1 / (den * den);
        let mut ddu = -2.0 * self.b1 * self.b2 / (den * den * den);
        if !self.poly.is_empty() && r < self.cutoff {
            let (fc, dfc, ddfc) = cutoff_function(r, self.cutoff);
            let (mut p, mut dp, mut ddp) = (0.0, 0.0, 0.0);
            for (k, c) in self.poly.iter().enumerate() {
                let n = (k + 2) as i32;
                let nf = n as f64;
                p += c * r.powi(n);
                dp += c * nf * r.powi(n - 1);
                ddp += c * nf * (nf - 1.0) * r.powi(n - 2);
            }
            u += fc * p;
            du += dfc * p + fc * dp;
            ddu += ddfc * p + 2.0 * dfc * dp + fc * ddp;
        }
        (u, du, ddu)
    }

    fn validate(&self, what: &str) -> Result<(), WavefunctionError> {
        if !self.b1.is_finite() || !self.b2.is_finite() || self.b2 < 0.0 {
            return Err(WavefunctionError::Jastrow(format!("{what}: need finite b1 and b2 ≥ 0 (got {}, {})", self.b1, self.b2)));
        }
        if !self.poly.is_empty() && !(self.cutoff > 0.0) {
            return Err(WavefunctionError::Jastrow(format!("{what}: polynomial terms need a positive cutoff")));
        }
        if self.poly.iter().any(|p| !p.is_finite()) {
            return Err(WavefunctionError::Jastrow(format!("{what}: non-finite polynomial coefficient")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeBodyMonomial {
    pub l: u32,
    pub m: u32,
    pub n: u32,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThreeBodyTerm {
    pub species: String,
    pub cutoff: f64,
    pub monomials: Vec<ThreeBodyMonomial>,
}

/// (g, g', g'') for g(r) = r^p·fc(r).
fn radial_power(p: u32, r: f64, fc: (f64, f64, f64)) -> (f64, f64, f64) {
    let pi = p as i32;
    let pf = p as f64;
    let pw = |k: i32| if k < 0 { 0.0 } else { r.powi(k) };
    let (f, df, ddf) = fc;
    let q = pw(pi);
    let dq = pf * pw(pi - 1);
    let ddq = pf * (pf - 1.0) * pw(pi - 2);
    (q * f, dq * f + q * df, ddq * f + 2.0 * dq * df + q * ddf)
}

/// Partial derivatives of a three-body function f(a, b, c).
#[derive(Debug, Clone, Copy, Default)]
struct ThreeBodyDerivs {
    f: f64,
    fa: f64,
    fb: f64,
    /// f_c / c, finite at c → 0 for the allowed powers.
    fc_over_c: f64,
    faa: f64,
    fbb: f64,
    fcc: f64,
    fac: f64,
    fbc: f64,
}

impl ThreeBodyTerm {
    fn eval(&self, a: f64, b: f64, c: f64) -> ThreeBodyDerivs {
        let mut out = ThreeBodyDerivs::default();
        if a >= self.cutoff || b >= self.cutoff {
            return out;
        }
        let fca = cutoff_function(a, self.cutoff);
        let fcb = cutoff_function(b, self.cutoff);
        for mono in &self.monomials {
            let n = mono.n as i32;
            let nf = mono.n as f64;
            let pw = |k: i32| if k < 0 { 0.0 } else { c.powi(k) };
            let cc = pw(n);
            let dc = nf * pw(n - 1);
            let dc_over_c = nf * pw(n - 2);
            let ddc = nf * (nf - 1.0) * pw(n - 2);
            let (la, dla, ddla) = radial_power(mono.l, a, fca);
            let (ma, dma, ddma) = radial_power(mono.m, a, fca);
            let (lb, dlb, ddlb) = radial_power(mono.l, b, fcb);
            let (mb, dmb, ddmb) = radial_power(mono.m, b, fcb);
            let (s, sa, sb, saa, sbb) = if mono.l == mono.m {
                (la * lb, dla * lb, la * dlb, ddla * lb, la * ddlb)
            } else {
                (la * mb + ma * lb, dla * mb + dma * lb, la * dmb + ma * dlb, ddla * mb + ddma * lb, la * ddmb + ma * ddlb)
            };
            let k = mono.coefficient;
            out.f += k * cc * s;
            out.fa += k * cc * sa;
            out.fb += k * cc * sb;
            out.fc_over_c += k * dc_over_c * s;
            out.faa += k * cc * saa;
            out.fbb += k * cc * sbb;
            out.fcc += k * ddc * s;
            out.fac += k * dc * sa;
            out.fbc += k * dc * sb;
        }
        out
    }

    fn validate(&self) -> Result<(), WavefunctionError> {
        if !(self.cutoff > 0.0) {
            return Err(WavefunctionError::Jastrow(format!("three-body term for '{}' needs a positive cutoff", self.species)));
        }
        for m in &self.monomials {
            if m.l == 1 || m.m == 1 || m.n == 1 {
                return Err(WavefunctionError::Jastrow(format!(
                    "three-body monomial ({} {} {}) would alter a cusp; powers of 1 are not allowed",
                    m.l, m.m, m.n
                )));
            }
            if !m.coefficient.is_finite() {
                return Err(WavefunctionError::Jastrow("non-finite three-body coefficient".into()));
            }
        }
        Ok(())
    }
}

/// Jastrow parameters as read from the `[jastrow]` section.
#[derive(Debug, Clone, PartialEq)]
pub struct JastrowParams {
    /// Force the e-e `b1` values to the exact cusps (½ antiparallel, ¼ parallel).
    pub cusp: bool,
    pub ee_anti: Option<PadeTerm>,
    pub ee_para: Option<PadeTerm>,
    /// Electron–nucleus terms keyed by nuclear species label.
    pub en: Vec<(String, PadeTerm)>,
    pub een: Vec<ThreeBodyTerm>,
}

impl Default for JastrowParams {
    fn default() -> Self {
        Self { cusp: true, ee_anti: None, ee_para: None, en: Vec::new(), een: Vec::new() }
    }
}

pub const ANTIPARALLEL_CUSP: f64 = 0.5;
pub const PARALLEL_CUSP: f64 = 0.25;

impl JastrowParams {
    pub fn is_empty(&self) -> bool {
        self.ee_anti.is_none() && self.ee_para.is_none() && self.en.is_empty() && self.een.is_empty()
    }

    /// Copy with cusp-fixed coefficients applied.
    pub fn effective(&self) -> Self {
        let mut out = self.clone();
        if self.cusp {
            if let Some(t) = &mut out.ee_anti {
                t.b1 = ANTIPARALLEL_CUSP;
            }
            if let Some(t) = &mut out.ee_para {
                t.b1 = PARALLEL_CUSP;
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), WavefunctionError> {
        if let Some(t) = &self.ee_anti {
            t.validate("ee anti")?;
        }
        if let Some(t) = &self.ee_para {
            t.validate("ee para")?;
        }
        for (s, t) in &self.en {
            t.validate(&format!("en {s}"))?;
        }
        for t in &self.een {
            t.validate()?;
        }
        Ok(())
    }

    /// Named free parameters, in a fixed order. Cusp-fixed `b1` values are
    /// excluded.
    pub fn parameters_mut(&mut self) -> Vec<(String, &mut f64)> {
        fn pade<'a>(out: &mut Vec<(String, &'a mut f64)>, prefix: String, t: &'a mut PadeTerm, b1_free: bool) {
            if b1_free {
                out.push((format!("{prefix}.b1"), &mut t.b1));
            }
            out.push((format!("{prefix}.b2"), &mut t.b2));
            for (k, p) in t.poly.iter_mut().enumerate() {
                out.push((format!("{prefix}.p{}", k + 2), p));
            }
        }
        let cusp = self.cusp;
        let mut out = Vec::new();
        if let Some(t) = &mut self.ee_anti {
            pade(&mut out, "ee.anti".into(), t, !cusp);
        }
        if let Some(t) = &mut self.ee_para {
            pade(&mut out, "ee.para".into(), t, !cusp);
        }
        for (s, t) in &mut self.en {
            pade(&mut out, format!("en.{s}"), t, true);
        }
        for t in &mut self.een {
            for m in &mut t.monomials {
                out.push((format!("een.{}.c{}{}{}", t.species, m.l, m.m, m.n), &mut m.coefficient));
            }
        }
        out
    }

    pub fn parameter_names(&self) -> Vec<String> {
        let mut c = self.clone();
        c.parameters_mut().into_iter().map(|(n, _)| n).collect()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        let mut c = self.clone();
        c.parameters_mut().into_iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<(), WavefunctionError> {
        match self.parameters_mut().into_iter().find(|(n, _)| n == name) {
            Some((_, v)) => {
                *v = value;
                Ok(())
            }
            None => Err(WavefunctionError::Jastrow(format!("unknown parameter '{name}'"))),
        }
    }
}

/// Value and per-electron derivatives of J.
#[derive(Debug, Clone, PartialEq)]
pub struct JastrowEval {
    pub value: f64,
    pub gradient: Vec<Vec3>,
    /// ∇²_i J for each electron.
    pub laplacian: Vec<f64>,
}

/// Jastrow factor bound to a nuclear frame.
#[derive(Debug, Clone)]
pub struct Jastrow {
    params: JastrowParams,
    centers: Vec<Vec3>,
    en_term: Vec<Option<usize>>,
    een_term: Vec<Option<usize>>,
    n_up: usize,
}

fn unit(d: &Vec3, r: f64) -> Vec3 {
    if r > 0.0 {
        d / r
    } else {
        Vec3::zeros()
    }
}

impl Jastrow {
    pub fn new(params: &JastrowParams, labels: &[String], centers: &[Vec3], n_up: usize) -> Result<Self, WavefunctionError> {
        params.validate()?;
        let params = params.effective();
        let find = |species: &str| labels.iter().any(|l| l == species);
        for (s, _) in &params.en {
            if !find(s) {
                return Err(WavefunctionError::Jastrow(format!("no nucleus with species '{s}'")));
            }
        }
        for t in &params.een {
            if !find(&t.species) {
                return Err(WavefunctionError::Jastrow(format!("no nucleus with species '{}'", t.species)));
            }
        }
        let en_term = labels.iter().map(|l| params.en.iter().position(|(s, _)| s == l)).collect();
        let een_term = labels.iter().map(|l| params.een.iter().position(|t| &t.species == l)).collect();
        Ok(Self { params, centers: centers.to_vec(), en_term, een_term, n_up })
    }

    pub fn params(&self) -> &JastrowParams {
        &self.params
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    fn pair_term(&self, i: usize, j: usize) -> Option<&PadeTerm> {
        let same = (i < self.n_up) == (j < self.n_up);
        if same {
            self.params.ee_para.as_ref()
        } else {
            self.params.ee_anti.as_ref()
        }
    }

    pub fn evaluate(&self, pos: &[Vec3]) -> JastrowEval {
        let n = pos.len();
        let mut out = JastrowEval { value: 0.0, gradient: vec![Vec3::zeros(); n], laplacian: vec![0.0; n] };
        if self.is_empty() {
            return out;
        }
        for i in 0..n {
            for (a, c) in self.centers.iter().enumerate() {
                if let Some(k) = self.en_term[a] {
                    let d = pos[i] - c;
                    let r = d.norm();
                    let (u, du, ddu) = self.params.en[k].1.eval(r);
                    out.value += u;
                    out.gradient[i] += unit(&d, r) * du;
                    out.laplacian[i] += ddu + 2.0 * du / r;
                }
            }
            for j in 0..i {
                if let Some(t) = self.pair_term(i, j) {
                    let d = pos[i] - pos[j];
                    let r = d.norm();
                    let (u, du, ddu) = t.eval(r);
                    let g = unit(&d, r) * du;
                    let l = ddu + 2.0 * du / r;
                    out.value += u;
                    out.gradient[i] += g;
                    out.gradient[j] -= g;
                    out.laplacian[i] += l;
                    out.laplacian[j] += l;
                }
            }
        }
        for (a, c) in self.centers.iter().enumerate() {
            let Some(k) = self.een_term[a] else { continue };
            let term = &self.params.een[k];
            for i in 0..n {
                for j in 0..i {
                    let di = pos[i] - c;
                    let dj = pos[j] - c;
                    let dij = pos[i] - pos[j];
                    let (ra, rb, rc) = (di.norm(), dj.norm(), dij.norm());
                    let t = term.eval(ra, rb, rc);
                    let ua = unit(&di, ra);
                    let ub = unit(&dj, rb);
                    let uc = unit(&dij, rc);
                    out.value += t.f;
                    out.gradient[i] += ua * t.fa + dij * t.fc_over_c;
                    out.gradient[j] += ub * t.fb - dij * t.fc_over_c;
                    let cc = t.fcc + 2.0 * t.fc_over_c;
                    out.laplacian[i] += t.faa + 2.0 * t.fa / ra + cc + 2.0 * t.fac * ua.dot(&uc);
                    out.laplacian[j] += t.fbb + 2.0 * t.fb / rb + cc - 2.0 * t.fbc * ub.dot(&uc);
                }
            }
        }
        out
    }

    /// Sum of all terms of J that involve electron `i`, with `i` at `ri`
    /// and the others at `pos`.
    pub fn electron_value(&self, i: usize, ri: &Vec3, pos: &[Vec3]) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let mut v = 0.0;
        for (a, c) in self.centers.iter().enumerate() {
            if let Some(k) = self.en_term[a] {
                v += self.params.en[k].1.eval((ri - c).norm()).0;
            }
        }
        for (j, rj) in pos.iter().enumerate() {
            if j == i {
                continue;
            }
            if let Some(t) = self.pair_term(i, j) {
                v += t.eval((ri - rj).norm()).0;
            }
            for (a, c) in self.centers.iter().enumerate() {
                if let Some(k) = self.een_term[a] {
                    v += self.params.een[k].eval((ri - c).norm(), (rj - c).norm(), (ri - rj).norm()).f;
                }
            }
        }
        v
    }

    /// ∇_i J with electron `i` at `ri`.
    pub fn electron_gradient(&self, i: usize, ri: &Vec3, pos: &[Vec3]) -> Vec3 {
        let mut g = Vec3::zeros();
        if self.is_empty() {
            return g;
        }
        for (a, c) in self.centers.iter().enumerate() {
            if let Some(k) = self.en_term[a] {
                let d = ri - c;
                let r = d.norm();
                g += unit(&d, r) * self.params.en[k].1.eval(r).1;
            }
        }
        for (j, rj) in pos.iter().enumerate() {
            if j == i {
                continue;
            }
            let d = ri - rj;
            let r = d.norm();
            if let Some(t) = self.pair_term(i, j) {
                g += unit(&d, r) * t.eval(r).1;
            }
            for (a, c) in self.centers.iter().enumerate() {
                if let Some(k) = self.een_term[a] {
                    let di = ri - c;
                    let ra = di.norm();
                    let t = self.params.een[k].eval(ra, (rj - c).norm(), r);
                    g += unit(&di, ra) * t.fa + d * t.fc_over_c;
                }
            }
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_params() -> JastrowParams {
        JastrowParams {
            cusp: true,
            ee_anti: Some(PadeTerm { b1: 0.0, b2: 1.2, poly: vec![0.05, -0.02], cutoff: 4.0 }),
            ee_para: Some(PadeTerm { b1: 0.0, b2: 0.7, poly: vec![0.03], cutoff: 3.5 }),
            en: vec![("A".into(), PadeTerm { b1: -0.3, b2: 0.9, poly: vec![0.1], cutoff: 3.0 })],
            een: vec![ThreeBodyTerm {
                species: "A".into(),
                cutoff: 4.0,
                monomials: vec![
                    ThreeBodyMonomial { l: 0, m: 0, n: 2, coefficient: 0.02 },
                    ThreeBodyMonomial { l: 2, m: 0, n: 0, coefficient: -0.03 },
                    ThreeBodyMonomial { l: 2, m: 2, n: 2, coefficient: 0.01 },
                    ThreeBodyMonomial { l: 0, m: 3, n: 3, coefficient: 0.004 },
                ],
            }],
        }
    }

    fn jastrow() -> Jastrow {
        let labels = vec!["A".to_string(), "B".to_string()];
        let centers = vec![Vec3::new(0.0, 0.0, -0.6), Vec3::new(0.0, 0.0, 0.8)];
        Jastrow::new(&full_params(), &labels, &centers, 2).unwrap()
    }

    fn config() -> Vec<Vec3> {
        vec![Vec3::new(0.3, -0.2, 0.1), Vec3::new(-0.5, 0.4, -0.9), Vec3::new(0.7, 0.6, 0.5), Vec3::new(-0.1, -0.8, 1.2)]
    }

    #[test]
    fn cutoff_smoothness() {
        let rc = 2.0;
        let (f, d, dd) = cutoff_function(0.0, rc);
        assert_eq!((f, d, dd), (1.0, 0.0, 0.0));
        let (f, d, dd) = cutoff_function(rc * (1.0 - 1e-9), rc);
        assert!(f.abs() < 1e-20 && d.abs() < 1e-15 && dd.abs() < 1e-7);
        let h = 1e-5;
        for r in [0.3, 1.1, 1.7] {
            let (_, d, dd) = cutoff_function(r, rc);
            let fd = (cutoff_function(r + h, rc).0 - cutoff_function(r - h, rc).0) / (2.0 * h);
            let fdd = (cutoff_function(r + h, rc).1 - cutoff_function(r - h, rc).1) / (2.0 * h);
            assert!((d - fd).abs() < 1e-8);
            assert!((dd - fdd).abs() < 1e-7);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let j = jastrow();
        let pos = config();
        let ev = j.evaluate(&pos);
        let h = 1e-4;
        for i in 0..pos.len() {
            let mut lap = 0.0;
            for k in 0..3 {
                let mut p = pos.clone();
                p[i][k] += h;
                let jp = j.evaluate(&p).value;
                p[i][k] -= 2.0 * h;
                let jm = j.evaluate(&p).value;
                let g = (jp - jm) / (2.0 * h);
                assert!((g - ev.gradient[i][k]).abs() < 1e-7, "grad e{i} k{k}: {g} vs {}", ev.gradient[i][k]);
                lap += (jp - 2.0 * ev.value + jm) / (h * h);
            }
            assert!((lap - ev.laplacian[i]).abs() < 1e-5, "lap e{i}: {lap} vs {}", ev.laplacian[i]);
        }
    }

    #[test]
    fn single_electron_terms_consistent() {
        let j = jastrow();
        let pos = config();
        let full = j.evaluate(&pos);
        for i in 0..pos.len() {
            let new = Vec3::new(0.2, 0.1, -0.3) + pos[i];
            let mut moved = pos.clone();
            moved[i] = new;
            let delta = j.evaluate(&moved).value - full.value;
            let local = j.electron_value(i, &new, &pos) - j.electron_value(i, &pos[i], &pos);
            assert!((delta - local).abs() < 1e-12);
            let g = j.electron_gradient(i, &pos[i], &pos);
            assert!((g - full.gradient[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn same_spin_exchange_symmetry() {
        let j = jastrow();
        let pos = config();
        let mut swapped = pos.clone();
        swapped.swap(0, 1);
        assert!((j.evaluate(&pos).value - j.evaluate(&swapped).value).abs() < 1e-13);
        let mut swapped = pos.clone();
        swapped.swap(2, 3);
        assert!((j.evaluate(&pos).value - j.evaluate(&swapped).value).abs() < 1e-13);
    }

    #[test]
    fn cusp_fixed_b1_not_a_parameter() {
        let p = full_params();
        let names = p.parameter_names();
        assert!(!names.contains(&"ee.anti.b1".to_string()));
        assert!(names.contains(&"ee.anti.b2".to_string()));
        assert!(names.contains(&"en.A.b1".to_string()));
        assert!(names.contains(&"een.A.c002".to_string()));
        let mut q = p.clone();
        q.set("ee.anti.b2", 3.0).unwrap();
        assert_eq!(q.get("ee.anti.b2"), Some(3.0));
        assert!(q.set("nope", 1.0).is_err());
        let e = p.effective();
        assert_eq!(e.ee_anti.unwrap().b1, 0.5);
        assert_eq!(e.ee_para.unwrap().b1, 0.25);
    }

    #[test]
    fn rejects_cusp_breaking_monomials() {
        let mut p = full_params();
        p.een[0].monomials.push(ThreeBodyMonomial { l: 1, m: 0, n: 0, coefficient: 0.1 });
        assert!(p.validate().is_err());
        let mut p = full_params();
        p.ee_anti.as_mut().unwrap().b2 = -0.5;
        assert!(p.validate().is_err());
    }
}
