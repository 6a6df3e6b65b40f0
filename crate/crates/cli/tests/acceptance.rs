//! Acceptance criteria. Each test prints one `[PASS]`/`[FAIL]` line and
//! asserts on the same condition; tests share a lock so runtimes are
//! measured without contention.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::Mutex;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use qmcdip_core::dmc::{extrapolate_timestep, extrapolated_estimator, run_dmc, DmcConfig, TimestepPoint};
use qmcdip_core::hamiltonian::{AngularQuadrature, Hamiltonian, DEFAULT_QUADRATURE_ORDER};
use qmcdip_core::optimizer::{optimize, OptimizationConfig};
use qmcdip_core::rng;
use qmcdip_core::spectroscopy::{
    bootstrap, fit_curve, fit_dipole, morse_potential, numerov_solve, reduced_mass_amu, vibrational_average, CurveForm,
    CurvePoint, MorseParams, RadialGrid,
};
use qmcdip_core::stats::Estimate;
use qmcdip_core::system::units::{ELECTRON_MASS_PER_AMU, WAVENUMBER_PER_HARTREE};
use qmcdip_core::system::{
    fixture, BasisFunction, BasisKind, FixtureOptions, Geometry, MolecularSystem, NonlocalChannel, Nucleus, OrbitalSet,
    RadialChannel, RadialTerm, SemilocalEcp,
};
use qmcdip_core::vmc::{run_vmc, VmcConfig};
use qmcdip_core::wavefunction::{DeterminantExpansion, JastrowParams, PadeTerm, TrialWavefunction, Walker};
use qmcdip_core::Vec3;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

/// Writes to the process stderr directly so the line survives test output capture.
fn verdict(id: u32, name: &str, pass: bool, detail: String) {
    let line = format!("\n[{}] {id:>2} {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    std::io::stderr().write_all(line.as_bytes()).unwrap();
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn load(name: &str, jastrow: Option<JastrowParams>) -> (MolecularSystem, TrialWavefunction, Hamiltonian) {
    let mut s = fixture(name, &FixtureOptions::default()).unwrap().system().unwrap();
    if let Some(j) = jastrow {
        s.jastrow = j;
    }
    let h = Hamiltonian::from_system(&s, DEFAULT_QUADRATURE_ORDER).unwrap();
    let psi = s.trial_wavefunction().unwrap();
    (s, psi, h)
}

fn lisr_mu() -> f64 {
    reduced_mass_amu(7.016003, 87.905612) * ELECTRON_MASS_PER_AMU
}

fn krb_mu() -> f64 {
    reduced_mass_amu(38.963706, 86.909180) * ELECTRON_MASS_PER_AMU
}

fn cm(x: f64) -> f64 {
    x / WAVENUMBER_PER_HARTREE
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

/// Lowest eigenvalue of a symmetric operator by Lanczos without
/// reorthogonalization; ghost copies do not move the lowest Ritz value.
fn lanczos_lowest(n: usize, start: &[f64], apply: impl Fn(&[f64], &mut [f64])) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let s = norm(start);
    let mut q: Vec<f64> = start.iter().map(|x| x / s).collect();
    let mut q_prev = vec![0.0; n];
    let mut w = vec![0.0; n];
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    let mut last = f64::INFINITY;
    for it in 1..=4000 {
        apply(&q, &mut w);
        let a: f64 = w.iter().zip(&q).map(|(x, y)| x * y).sum();
        let b_prev = beta.last().copied().unwrap_or(0.0);
        for i in 0..n {
            w[i] -= a * q[i] + b_prev * q_prev[i];
        }
        alpha.push(a);
        let b = norm(&w);
        if it % 50 == 0 || b < 1e-14 {
            let e = tridiagonal_lowest(&alpha, &beta);
            if (e - last).abs() < 1e-12 || b < 1e-14 {
                return e;
            }
            last = e;
        }
        beta.push(b);
        std::mem::swap(&mut q_prev, &mut q);
        for i in 0..n {
            q[i] = w[i] / b;
        }
    }
    last
}

/// Smallest eigenvalue of the tridiagonal (α, β) by Sturm-count bisection.
fn tridiagonal_lowest(alpha: &[f64], beta: &[f64]) -> f64 {
    let m = alpha.len();
    let bound = (0..m)
        .map(|i| {
            let off = if i > 0 { beta[i - 1].abs() } else { 0.0 } + if i + 1 < m { beta[i].abs() } else { 0.0 };
            (alpha[i] - off, alpha[i] + off)
        })
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| (lo.min(a), hi.max(b)));
    let below = |x: f64| {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..m {
            let b2 = if i > 0 { beta[i - 1] * beta[i - 1] } else { 0.0 };
            d = alpha[i] - x - if i > 0 { b2 / d } else { 0.0 };
            if d == 0.0 {
                d = 1e-300;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    let (mut lo, mut hi) = bound;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if below(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// H2+ ground state on an even-parity octant grid: cell-centred 7-point
/// Laplacian, mirror faces at x, y, z = 0, ψ = 0 beyond `extent`. Nuclei at
/// (0, 0, ±R/2) sit on cell corners. Returns the total energy with 1/R.
fn h2plus_grid_energy(bond: f64, spacing: f64, extent: f64) -> f64 {
    let n = (extent / spacing).round() as usize;
    let c = |i: usize| (i as f64 + 0.5) * spacing;
    let idx = |i: usize, j: usize, k: usize| (k * n + j) * n + i;
    let half = 0.5 * bond;
    let mut v = vec![0.0; n * n * n];
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let (x, y, z) = (c(i), c(j), c(k));
                let rho2 = x * x + y * y;
                v[idx(i, j, k)] = -1.0 / (rho2 + (z - half).powi(2)).sqrt() - 1.0 / (rho2 + (z + half).powi(2)).sqrt();
            }
        }
    }
    let inv_h2 = 1.0 / (spacing * spacing);
    let apply = |psi: &[f64], out: &mut [f64]| {
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let p = psi[idx(i, j, k)];
                    let nb = |a: Option<usize>| a.map_or(0.0, |a| psi[a]);
                    let lower = |t: usize, mirror: usize| if t == 0 { Some(mirror) } else { None };
                    let sum = nb(if i + 1 < n { Some(idx(i + 1, j, k)) } else { None })
                        + nb(if i > 0 { Some(idx(i - 1, j, k)) } else { lower(i, idx(i, j, k)) })
                        + nb(if j + 1 < n { Some(idx(i, j + 1, k)) } else { None })
                        + nb(if j > 0 { Some(idx(i, j - 1, k)) } else { lower(j, idx(i, j, k)) })
                        + nb(if k + 1 < n { Some(idx(i, j, k + 1)) } else { None })
                        + nb(if k > 0 { Some(idx(i, j, k - 1)) } else { lower(k, idx(i, j, k)) });
                    out[idx(i, j, k)] = 0.5 * inv_h2 * (6.0 * p - sum) + v[idx(i, j, k)] * p;
                }
            }
        }
    };
    let start: Vec<f64> = (0..n * n * n)
        .map(|a| {
            let (i, j, k) = (a % n, (a / n) % n, a / (n * n));
            let rho2 = c(i).powi(2) + c(j).powi(2);
            (-(rho2 + (c(k) - half).powi(2)).sqrt()).exp() + (-(rho2 + (c(k) + half).powi(2)).sqrt()).exp()
        })
        .collect();
    lanczos_lowest(n * n * n, &start, apply) + 1.0 / bond
}

/// Richardson fit E(h) = E₀ + a h² + b h³ through three spacings.
fn richardson(points: &[(f64, f64)]) -> f64 {
    solve3(points.iter().map(|&(h, _)| [1.0, h * h, h * h * h]).collect(), points.iter().map(|p| p.1).collect())[0]
}

/// 3×3 linear solve by Cramer's rule.
fn solve3(a: Vec<[f64; 3]>, b: Vec<f64>) -> [f64; 3] {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let base = [a[0], a[1], a[2]];
    let d = det(&base);
    let mut x = [0.0; 3];
    for (col, xc) in x.iter_mut().enumerate() {
        let mut m = base;
        for row in 0..3 {
            m[row][col] = b[row];
        }
        *xc = det(&m) / d;
    }
    x
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let (mut f, mut r) = (1.0, 0.0);
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Radius with CDF 1 − e^{−x}(1 + x + x²/2), x = 2ζr (hydrogenic 1s density).
fn hydrogenic_radius(u: f64, zeta: f64) -> f64 {
    let mut x: f64 = 3.0;
    for _ in 0..60 {
        let f = 1.0 - (-x).exp() * (1.0 + x + 0.5 * x * x) - u;
        let df = 0.5 * x * x * (-x).exp();
        x = (x - f / df.max(1e-300)).clamp(1e-12, 80.0);
    }
    x / (2.0 * zeta)
}

/// ⟨1/r₁₂⟩ over two independent 1s densities by 6D Halton integration.
fn he_repulsion_qmc(zeta: f64, n: u64) -> f64 {
    let bases = [2, 3, 5, 7, 11, 13];
    let point = |i: u64, off: usize| {
        let r = hydrogenic_radius(radical_inverse(i, bases[off]), zeta);
        let ct = 2.0 * radical_inverse(i, bases[off + 1]) - 1.0;
        let phi = 2.0 * std::f64::consts::PI * radical_inverse(i, bases[off + 2]);
        let st = (1.0 - ct * ct).sqrt();
        Vec3::new(r * st * phi.cos(), r * st * phi.sin(), r * ct)
    };
    (1..=n).map(|i| 1.0 / (point(i, 0) - point(i, 3)).norm()).sum::<f64>() / n as f64
}

fn assoc_legendre(l: i32, m: i32, x: f64) -> f64 {
    let mut pmm = 1.0;
    let s = (1.0 - x * x).sqrt();
    let mut fact = 1.0;
    for _ in 0..m {
        pmm *= -fact * s;
        fact += 2.0;
    }
    if l == m {
        return pmm;
    }
    let mut pmmp1 = x * (2 * m + 1) as f64 * pmm;
    if l == m + 1 {
        return pmmp1;
    }
    let mut pll = 0.0;
    for ll in m + 2..=l {
        pll = (x * (2 * ll - 1) as f64 * pmmp1 - (ll + m - 1) as f64 * pmm) / (ll - m) as f64;
        pmm = pmmp1;
        pmmp1 = pll;
    }
    pll
}

/// Orthonormal real spherical harmonic.
fn real_ylm(l: i32, m: i32, n: &Vec3) -> f64 {
    let phi = n.y.atan2(n.x);
    let ratio: f64 = (l - m.abs() + 1..=l + m.abs()).map(|k| k as f64).product();
    let norm =
        ((2 * l + 1) as f64 / (4.0 * std::f64::consts::PI) / ratio).sqrt() * if m == 0 { 1.0 } else { std::f64::consts::SQRT_2 };
    let p = norm * assoc_legendre(l, m.abs(), n.z.clamp(-1.0, 1.0));
    match m.cmp(&0) {
        std::cmp::Ordering::Greater => p * (m as f64 * phi).cos(),
        std::cmp::Ordering::Less => p * ((-m) as f64 * phi).sin(),
        std::cmp::Ordering::Equal => p,
    }
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_exact_trial_zero_variance() {
    let _g = serial();
    let t0 = Instant::now();
    let (_, psi, h) = load("H", None);
    let r = run_vmc(&psi, &h, &VmcConfig::default()).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let pass = (r.energy.value + 0.5).abs() < 1e-12 && r.variance < 1e-20 && secs < 10.0;
    verdict(1, "exact-trial zero variance", pass, format!("E = {}, variance = {:e}, {secs:.2} s", r.energy.value, r.variance));
}

#[test]
fn criterion_02_h2plus_dmc_matches_grid_oracle() {
    let _g = serial();
    let t_oracle = Instant::now();
    let grid: Vec<(f64, f64)> = [4.0, 6.0, 8.0].iter().map(|&k| (1.0 / k, h2plus_grid_energy(2.0, 1.0 / k, 12.0))).collect();
    let oracle = richardson(&grid);
    // The same fit through the two finest spacings only, as a stability check.
    let h2_only = (grid[2].1 * grid[2].0.powi(-2) - grid[1].1 * grid[1].0.powi(-2)) / (grid[2].0.powi(-2) - grid[1].0.powi(-2));
    println!(
        "   H2+ grid oracle: E(h) = {:?} -> E0 = {oracle:.7} (h² only: {h2_only:.7}), {:.1} s",
        grid,
        t_oracle.elapsed().as_secs_f64()
    );
    assert!((oracle - h2_only).abs() < 2e-4, "oracle extrapolation unstable");

    let t0 = Instant::now();
    let opts = FixtureOptions { bond_length: Some(2.0) };
    let s = fixture("H2plus", &opts).unwrap().system().unwrap();
    let psi = s.trial_wavefunction().unwrap();
    let h = Hamiltonian::from_system(&s, DEFAULT_QUADRATURE_ORDER).unwrap();
    let start = run_vmc(&psi, &h, &VmcConfig { blocks: 20, steps_per_block: 50, walkers: 100, seed: 21, ..VmcConfig::default() })
        .unwrap()
        .walkers;
    let mut points = Vec::new();
    for (k, tau) in [0.02_f64, 0.04, 0.08].into_iter().enumerate() {
        let cfg = DmcConfig {
            tau,
            target_population: 2000,
            equilibration_steps: (2.0 / tau).round() as usize,
            measurement_steps: (200.0 / tau).round() as usize,
            blocks: 20,
            seed: 100 + k as u64,
            ..DmcConfig::default()
        };
        let r = run_dmc(&psi, &h, &start, &cfg).unwrap();
        println!("   tau = {tau}: E_mixed = {}", r.energy_mixed);
        points.push(TimestepPoint { tau, energy: r.energy_mixed, dipole: r.dipole_mixed });
    }
    let study = extrapolate_timestep(&points).unwrap();
    let e = study.energy();
    let secs = t0.elapsed().as_secs_f64();
    let pass = (e.value - oracle).abs() < 1e-3 && secs < 600.0;
    verdict(
        2,
        "H2+ τ-extrapolated DMC vs grid eigensolve",
        pass,
        format!("E_DMC(τ→0) = {e}, oracle = {oracle:.7}, |Δ| = {:.2e}, {secs:.1} s", (e.value - oracle).abs()),
    );
}

#[test]
fn criterion_03_he_product_vmc_expectation() {
    let _g = serial();
    // Closed form: E(ζ = Z) = −Z² + ⟨1/r₁₂⟩ with ⟨1/r₁₂⟩ = 5ζ/8.
    let repulsion = he_repulsion_qmc(2.0, 400_000);
    let oracle = -4.0 + repulsion;
    println!("   quasi-random 6D oracle: ⟨1/r12⟩ = {repulsion:.5} (5ζ/8 = 1.25), E = {oracle:.5}");
    assert!((oracle + 2.75).abs() < 2e-3, "closed form not confirmed");

    let t0 = Instant::now();
    let (_, psi, h) = load("He-product", None);
    let cfg = VmcConfig { blocks: 40, steps_per_block: 400, walkers: 32, seed: 3, ..VmcConfig::default() };
    let r = run_vmc(&psi, &h, &cfg).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let pass = r.energy.within(-2.75, 2.0) && r.energy.error <= 0.005 && secs < 120.0;
    verdict(3, "He-product VMC = −2.75", pass, format!("E = {}, σ = {:.4}, {secs:.1} s", r.energy, r.energy.error));
}

#[test]
fn criterion_04_variational_inequality() {
    let _g = serial();
    let mut lines = Vec::new();
    let mut pass = true;
    for (k, name) in ["H", "He-product", "H2plus", "H2", "toy-ecp"].into_iter().enumerate() {
        let (_, psi, h) = load(name, None);
        let seed = 40 + k as u64;
        let v = run_vmc(&psi, &h, &VmcConfig { blocks: 40, steps_per_block: 200, walkers: 32, seed, ..VmcConfig::default() })
            .unwrap();
        let cfg = DmcConfig {
            tau: 0.02,
            target_population: 300,
            equilibration_steps: 200,
            measurement_steps: 2000,
            blocks: 20,
            seed,
            ..DmcConfig::default()
        };
        let d = run_dmc(&psi, &h, &v.walkers, &cfg).unwrap();
        let combined = v.energy.error.hypot(d.energy_mixed.error);
        let ok = d.energy_mixed.value <= v.energy.value + 3.0 * combined;
        pass &= ok;
        lines.push(format!("{name}: DMC {} vs VMC {}", d.energy_mixed, v.energy));
    }
    verdict(4, "variational inequality E_DMC ≤ E_VMC + 3σ", pass, lines.join("; "));
}

#[test]
fn criterion_05_jastrow_optimization_gain() {
    let _g = serial();
    let jastrow = |b2: f64| JastrowParams { ee_anti: Some(PadeTerm::new(0.5, b2)), ..JastrowParams::default() };
    let vmc = VmcConfig { blocks: 20, steps_per_block: 100, walkers: 16, seed: 5, ..VmcConfig::default() };
    // 1D scan establishing that −2.85 is reachable within the family.
    let scan: Vec<(f64, Estimate)> = [0.1, 0.3, 1.0, 2.0]
        .into_iter()
        .map(|b2| {
            let (_, psi, h) = load("He-product", Some(jastrow(b2)));
            (b2, run_vmc(&psi, &h, &vmc).unwrap().energy)
        })
        .collect();
    println!("   b2 scan: {}", scan.iter().map(|(b, e)| format!("{b}: {e}")).collect::<Vec<_>>().join(", "));
    assert!(scan.iter().any(|(_, e)| e.value <= -2.85), "threshold not reachable in the scan");

    let t0 = Instant::now();
    let (_, psi, h) = load("He-product", Some(jastrow(2.0)));
    let cfg = OptimizationConfig { vmc: VmcConfig { seed: 55, ..vmc }, ..OptimizationConfig::default() };
    let r = optimize(&psi, &h, &cfg).unwrap();
    let pass = r.final_energy.value <= -2.85;
    verdict(
        5,
        "Jastrow optimization reaches ≤ −2.85",
        pass,
        format!(
            "b2 {:?} -> {:?}, E {} -> {}, {:.1} s",
            r.initial,
            r.parameters,
            r.initial_energy,
            r.final_energy,
            t0.elapsed().as_secs_f64()
        ),
    );
}

#[test]
fn criterion_06_extrapolated_estimator() {
    let _g = serial();
    // Arithmetic identity on synthetic inputs.
    let mut rng = rng::stream(6, &[]);
    let mut identity = true;
    for _ in 0..10_000 {
        let m: f64 = StandardNormal.sample(&mut rng);
        let v: f64 = StandardNormal.sample(&mut rng);
        let (sm, sv) = (0.1 * rng.random::<f64>(), 0.1 * rng.random::<f64>());
        let x = extrapolated_estimator(Estimate::new(m, sm), Estimate::new(v, sv));
        identity &= x.value == 2.0 * m - v && x.error == (4.0 * sm * sm + sv * sv).sqrt();
    }

    let (_, psi, h) = load("H", None);
    let v = run_vmc(&psi, &h, &VmcConfig { blocks: 40, steps_per_block: 1000, walkers: 32, seed: 6, ..VmcConfig::default() })
        .unwrap();
    // Blocks of 2000 generations span ~20 dipole autocorrelation times.
    let cfg = DmcConfig {
        tau: 0.02,
        target_population: 200,
        equilibration_steps: 200,
        measurement_steps: 40_000,
        blocks: 20,
        seed: 6,
        ..DmcConfig::default()
    };
    let d = run_dmc(&psi, &h, &v.walkers, &cfg).unwrap();
    let mut pass = identity;
    let mut parts = Vec::new();
    for k in 0..3 {
        let x = extrapolated_estimator(d.dipole_mixed[k], v.dipole[k]);
        // ext - var = 2 (mixed - var) shares the VMC sample; its error is 2 hypot(σ_mixed, σ_var).
        let combined = 2.0 * d.dipole_mixed[k].error.hypot(v.dipole[k].error);
        pass &= (x.value - v.dipole[k].value).abs() <= 2.0 * combined;
        parts.push(format!("d_{}: ext {x} var {}", ["x", "y", "z"][k], v.dipole[k]));
    }
    verdict(6, "extrapolated = variational for an exact trial", pass, format!("identity {identity}; {}", parts.join("; ")));
}

#[test]
fn criterion_07_h2_dipole_symmetry() {
    let _g = serial();
    let (_, psi, h) = load("H2", None);
    let v = run_vmc(&psi, &h, &VmcConfig { blocks: 40, steps_per_block: 1000, walkers: 32, seed: 7, ..VmcConfig::default() })
        .unwrap();
    // Blocks of 2000 generations span ~20 dipole autocorrelation times.
    let cfg = DmcConfig {
        tau: 0.02,
        target_population: 300,
        equilibration_steps: 200,
        measurement_steps: 40_000,
        blocks: 20,
        seed: 7,
        ..DmcConfig::default()
    };
    let d = run_dmc(&psi, &h, &v.walkers, &cfg).unwrap();
    let pass = v.dipole.iter().chain(&d.dipole_mixed).all(|e| e.within(0.0, 2.0));
    let fmt = |a: &[Estimate; 3]| a.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(", ");
    verdict(
        7,
        "H2 dipole = 0 (VMC and DMC mixed)",
        pass,
        format!("VMC ({}), DMC ({}), DMC blocking ratio {:.2?}", fmt(&v.dipole), fmt(&d.dipole_mixed), d.blocking_ratio),
    );
}

fn morse_points(p: &MorseParams, lo: f64, hi: f64, n: usize, sigma: f64) -> Vec<CurvePoint> {
    (0..n)
        .map(|k| {
            let r = lo + (hi - lo) * k as f64 / (n - 1) as f64;
            CurvePoint { r, energy: morse_potential(p, r), sigma_energy: sigma, dipole: 0.0, sigma_dipole: 0.0 }
        })
        .collect()
}

#[test]
fn criterion_08_spectroscopy_round_trip() {
    let _g = serial();
    let cases = [("LiSr", lisr_mu(), [6.80, 2700.0, 167.0], (5.6, 9.8)), ("KRb", krb_mu(), [7.58, 3800.0, 77.0], (6.4, 11.0))];
    let mut pass = true;
    let mut parts = Vec::new();
    for (c, (name, mu, truth, (lo, hi))) in cases.into_iter().enumerate() {
        let p = MorseParams::from_constants(truth[0], cm(truth[1]), cm(truth[2]), mu, -0.3);
        let clean = fit_curve(&morse_points(&p, lo, hi, 15, 1e-5), CurveForm::Morse, mu).unwrap();
        let worst = clean.constants.values().iter().zip(truth).map(|(x, t)| ((x - t) / t).abs()).fold(0.0, f64::max);
        pass &= worst < 1e-3;

        // Noise calibrated so the fitted D_e carries a ±300 cm⁻¹ error bar.
        let unit = fit_curve(&morse_points(&p, lo, hi, 15, 1e-5), CurveForm::Morse, mu).unwrap().constants.d_e.error;
        let sigma = 1e-5 * 300.0 / unit;
        let mut covered = [0usize; 3];
        let replicas = 200;
        for k in 0..replicas {
            let mut rng = rng::stream(800 + c as u64, &[k]);
            let noisy: Vec<CurvePoint> = morse_points(&p, lo, hi, 15, sigma)
                .into_iter()
                .map(|q| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    CurvePoint { energy: q.energy + sigma * z, ..q }
                })
                .collect();
            let b = bootstrap(&noisy, CurveForm::Morse, mu, 100, rng::derive(81, &[c as u64, k])).unwrap();
            for (i, (v, e)) in b.constants.values().iter().zip(b.constants.errors()).enumerate() {
                covered[i] += usize::from((v - truth[i]).abs() <= 2.0 * e);
            }
        }
        let frac = covered.map(|n| n as f64 / replicas as f64);
        pass &= frac.iter().all(|f| *f >= 0.9);
        parts.push(format!(
            "{name}: clean max rel err {worst:.1e}; σ_E = {sigma:.2e} Ha, 2σ coverage R_e/D_e/ω_e = {:.3}/{:.3}/{:.3}",
            frac[0], frac[1], frac[2]
        ));
    }
    verdict(8, "Morse round trip and bootstrap coverage", pass, parts.join("; "));
}

#[test]
fn criterion_09_numerov_levels() {
    let _g = serial();
    let mu = lisr_mu();
    let p = MorseParams::from_constants(6.80, cm(2700.0), cm(167.0), mu, -0.3);
    let omega = p.omega(mu);
    let grid = RadialGrid::new(5.3, 12.0, 8001).unwrap();
    let morse = numerov_solve(|r| morse_potential(&p, r), mu, grid, 6, None).unwrap();
    let morse_err = morse
        .states
        .iter()
        .map(|s| {
            let x = s.v as f64 + 0.5;
            let exact = omega * x - omega * omega / (4.0 * p.d_e) * x * x;
            ((s.energy - exact) / exact).abs()
        })
        .fold(0.0, f64::max);

    let harmonic =
        numerov_solve(|r| 0.5 * mu * omega * omega * (r - 6.8).powi(2), mu, RadialGrid::new(5.0, 8.6, 6001).unwrap(), 6, None)
            .unwrap();
    let harmonic_err = harmonic
        .states
        .iter()
        .map(|s| ((s.energy - (s.v as f64 + 0.5) * omega) / ((s.v as f64 + 0.5) * omega)).abs())
        .fold(0.0, f64::max);
    let pass = morse.states.len() == 6 && harmonic.states.len() == 6 && morse_err < 1e-4 && harmonic_err < 1e-6;
    verdict(
        9,
        "Numerov vs closed-form spectra (v ≤ 5)",
        pass,
        format!("Morse max rel err {morse_err:.1e}, harmonic {harmonic_err:.1e}"),
    );
}

#[test]
fn criterion_10_vibrational_average_consistency() {
    let _g = serial();
    let mu = lisr_mu();
    let p = MorseParams::from_constants(6.80, cm(2700.0), cm(167.0), mu, 0.0);
    let (d0, slope) = (-0.055, 0.02);
    let points: Vec<CurvePoint> = (0..15)
        .map(|k| {
            let r = 5.2 + 0.5 * k as f64;
            CurvePoint {
                r,
                energy: morse_potential(&p, r),
                sigma_energy: 1e-5,
                dipole: d0 + slope * (r - 6.8),
                sigma_dipole: 0.002,
            }
        })
        .collect();
    let dipole = fit_dipole(&points, 1).unwrap();
    let states =
        numerov_solve(|r| morse_potential(&p, r), mu, RadialGrid::new(5.2, 12.2, 8001).unwrap(), 2, None).unwrap().states;
    let (s0, s1) = (&states[0], &states[1]);
    let (a0, a1) = (vibrational_average(&dipole, s0).unwrap(), vibrational_average(&dipole, s1).unwrap());
    let shift = s1.expectation(|r| r) - s0.expectation(|r| r);
    let fitted_slope = dipole.derivative(6.8);
    let residual = (a1.value - a0.value - fitted_slope * shift).abs();
    let relative = (a1.value - a0.value).abs() / a0.value.abs();
    let pass = residual < 1e-10 && relative < 0.05;
    verdict(
        10,
        "⟨d⟩₁ − ⟨d⟩₀ = d′·Δ⟨R⟩ for a linear dipole",
        pass,
        format!("⟨d⟩₀ = {a0}, ⟨d⟩₁ = {a1}, Δ⟨R⟩ = {shift:.5}, identity residual {residual:.1e}, relative change {relative:.3}"),
    );
}

/// ECP nucleus at the origin and one Slater s electron centred at `offset`
/// (carried by a vanishing ghost charge when off-centre).
fn ecp_atom(ecp: SemilocalEcp, zeta: f64, offset: Option<Vec3>) -> (TrialWavefunction, Hamiltonian) {
    let mut nuclei = vec![Nucleus::new("X", ecp.effective_charge(), Vec3::zeros()).with_ecp(ecp.name.clone())];
    if let Some(b) = offset {
        nuclei.push(Nucleus::new("G", 1e-9, b));
    }
    let center = nuclei.len() - 1;
    let mut ecps = vec![Some(ecp)];
    ecps.resize(nuclei.len(), None);
    let g = Geometry::new(nuclei, 1, 0).unwrap();
    let orb = OrbitalSet::from_basis(vec![BasisFunction { label: "s".into(), center, kind: BasisKind::Slater { zeta } }]);
    let psi = TrialWavefunction::new(&g, orb, DeterminantExpansion::single(1, 0), JastrowParams::default()).unwrap();
    (psi, Hamiltonian::new(&g, ecps, 81).unwrap())
}

#[test]
fn criterion_11_ecp_machinery() {
    let _g = serial();
    let positions = [Vec3::new(0.3, 0.2, 0.1), Vec3::new(-1.2, 0.4, 0.9), Vec3::new(0.0, 0.0, 2.5)];
    let mut rng = rng::stream(11, &[]);

    // Local-only ECP: a plain potential evaluation.
    let local = RadialChannel::new(vec![
        RadialTerm { power: 1, exponent: 1.2, coefficient: -1.0 },
        RadialTerm { power: 2, exponent: 0.8, coefficient: -0.4 },
        RadialTerm { power: 0, exponent: 0.5, coefficient: 0.7 },
    ]);
    let ecp = SemilocalEcp { name: "loc".into(), z_full: 3.0, z_core: 2.0, local: local.clone(), nonlocal: vec![] };
    let (psi, h) = ecp_atom(ecp, 0.8, Some(Vec3::new(0.0, 0.4, 0.0)));
    let mut local_ok = true;
    for p in positions {
        let b = h.local_energy(&psi, &Walker::new(&psi, vec![p], 0).unwrap(), &mut rng);
        local_ok &= b.ecp_nonlocal == 0.0 && b.ecp_local == local.value(p.norm());
    }

    // Quadrature exactness for every rule up to its declared order.
    let rules = [
        AngularQuadrature::lebedev_6(),
        AngularQuadrature::lebedev_14(),
        AngularQuadrature::lebedev_26(),
        AngularQuadrature::lebedev_50(),
        AngularQuadrature::product(15),
    ];
    let mut worst_ylm: f64 = 0.0;
    for q in &rules {
        worst_ylm = worst_ylm.max((q.weights().iter().sum::<f64>() - 1.0).abs());
        for l in 1..=q.order() as i32 {
            for m in -l..=l {
                let s: f64 = q.nodes().iter().zip(q.weights()).map(|(n, w)| w * real_ylm(l, m, n)).sum();
                worst_ylm = worst_ylm.max(s.abs());
            }
        }
    }

    // s channel, off-centre s orbital: the angular average of e^{−ζ|r′−b|}
    // over the sphere |r′| = r is (1/2rb)∫_{|r−b|}^{r+b} s e^{−ζs} ds.
    let s_ecp = |c: f64| SemilocalEcp {
        name: "s".into(),
        z_full: 2.0,
        z_core: 1.0,
        local: RadialChannel::default(),
        nonlocal: vec![NonlocalChannel {
            l: 0,
            radial: RadialChannel::new(vec![RadialTerm { power: 2, exponent: 0.9, coefficient: c }]),
        }],
    };
    let (b, zeta, c) = (2.0, 1.1, 1.3);
    let (psi, h) = ecp_atom(s_ecp(c), zeta, Some(Vec3::new(0.0, 0.0, b)));
    let mut worst_s: f64 = 0.0;
    for p in positions {
        let w = Walker::new(&psi, vec![p], 0).unwrap();
        let v = h.ecp_nonlocal_energy(&psi, &w, h.quadrature());
        let r = p.norm();
        let anti = |s: f64| -(s / zeta + 1.0 / (zeta * zeta)) * (-zeta * s).exp();
        let avg = (anti(r + b) - anti((r - b).abs())) / (2.0 * r * b);
        let oracle = c * (-0.9 * r * r).exp() * avg / (-zeta * (p - Vec3::new(0.0, 0.0, b)).norm()).exp();
        worst_s = worst_s.max((v - oracle).abs());
    }
    let pass = local_ok && worst_ylm < 1e-12 && worst_s < 1e-10;
    verdict(
        11,
        "ECP local-only, quadrature exactness, s-channel oracle",
        pass,
        format!("local-only exact: {local_ok}; max |∫Y_lm| {worst_ylm:.1e}; s-channel max err {worst_s:.1e}"),
    );
}

fn run_binary(dir: &Path, threads: &str, args: &[&str]) {
    let o = Command::new(env!("CARGO_BIN_EXE_qmcdip"))
        .current_dir(dir)
        .args(["--threads", threads, "--seed", "12"])
        .args(args)
        .env_remove("QMCDIP_SEED")
        .env_remove("QMCDIP_THREADS")
        .env_remove("QMCDIP_OUT_DIR")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn output_tables(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv" || x == "md"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn criterion_12_bitwise_reproducible_across_threads() {
    let _g = serial();
    let dirs: Vec<_> = ["1", "4"]
        .iter()
        .map(|threads| {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path();
            run_binary(
                p,
                threads,
                &["vmc", "--system", "fixture:H2", "--blocks", "20", "--steps", "50", "--walkers", "16", "--out", "vmc.csv"],
            );
            let dmc = ["--population", "100", "--equilibration", "50", "--steps", "200", "--dmc-blocks", "20"];
            let mut args = vec!["dmc", "--system", "fixture:H2", "--tau", "0.02", "--out", "dmc.csv"];
            args.extend(dmc);
            run_binary(p, threads, &args);
            let mut args = vec!["dmc", "--system", "fixture:H2plus", "--tau", "0.02,0.04,0.08", "--out", "study.csv"];
            args.extend(dmc);
            run_binary(p, threads, &args);
            run_binary(p, threads, &["extrapolate", "--vmc", "vmc.csv", "--dmc", "dmc.csv"]);
            run_binary(p, threads, &["spectro", "--curve", "fixture:morse-demo", "--mu", "6.4926", "--bootstrap", "100"]);
            (output_tables(p), dir)
        })
        .collect();
    let (a, b) = (&dirs[0].0, &dirs[1].0);
    let names: Vec<_> = a.iter().map(|(n, _)| n.clone()).collect();
    let pass = a == b && a.len() >= 10;
    verdict(
        12,
        "bitwise-identical tables at --threads 1 and 4",
        pass,
        format!("{} files compared: {}", a.len(), names.join(", ")),
    );
}
