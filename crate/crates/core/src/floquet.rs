//! Weak-drive (linear response) Floquet scattering.
//!
//! Within the single-excitation ansatz the coherences oscillate as
//! `p_j(t) = Σ_n p_j^(n) e^{−i(ω+nΩ)t}` and the harmonics obey
//!
//! ```text
//! (ω+nΩ) p_j^(n) = (ω₀ − iΓ₂^(j)) p_j^(n)
//!                + (A_m/2) (e^{−iα_j} p_j^(n−1) + e^{+iα_j} p_j^(n+1))
//!                − (iΓ₁/2) Σ_{k≠j} e^{iφ|j−k|} p_k^(n)
//!                + (Ω_R/2) e^{iφj} δ_{n,0}
//! ```
//!
//! Γ₂ is the total coherence decay, so the radiative self-term Γ₁/2 is already
//! contained in it and only `k ≠ j` appears in the exchange sum. Emitters are
//! numbered `j = 1..N` in the order the probe meets them.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::bessel::{truncation_order, BesselTable};
use crate::error::{Error, Result};
use crate::scene::{EmitterParams, ModulationConfig, Scene};

/// Default convergence tolerance of [`choose_truncation`].
pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-8;
/// Hard ceiling on the sideband truncation order.
pub const TRUNCATION_CEILING: usize = 64;
/// Bound on the neglected Bessel weight `Σ_{|n|>n_cut} J_n²` in closed forms.
pub const BESSEL_TAIL_TOL: f64 = 1e-12;
pub const BESSEL_ORDER_CEILING: usize = 400;
/// Maximum accepted relative residual of the dense solve.
pub const RESIDUAL_TOL: f64 = 1e-10;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn check_single(p: &EmitterParams, m: &ModulationConfig) -> Result<()> {
    p.validate()?;
    m.validate()?;
    Ok(())
}

/// Elastic transmission of one modulated emitter as a Bessel series.
pub fn single_qubit_t0(p: &EmitterParams, m: &ModulationConfig, omega: f64) -> Result<Complex64> {
    check_single(p, m)?;
    let x = p.mod_amp / m.omega_mod;
    let n_cut = truncation_order(x, BESSEL_TAIL_TOL, BESSEL_ORDER_CEILING)?;
    let j = BesselTable::new(x, n_cut);
    let k = n_cut as i64;
    let sum: Complex64 = (-k..=k)
        .map(|n| {
            let den = Complex64::new(p.omega0 + n as f64 * m.omega_mod - omega, -p.gamma2);
            Complex64::new(0.0, 0.5 * p.gamma1) * j.get(n).powi(2) / den
        })
        .sum();
    Ok(1.0 + sum)
}

/// Closed-form sideband amplitude p^(n) of a single modulated emitter driven
/// with Rabi frequency `rabi`.
///
/// The modulation `A_m cos(Ωt + α)` contributes the factor `(−1)^n e^{−inα}`
/// in front of the symmetric double-Bessel sum.
pub fn single_qubit_pn(
    p: &EmitterParams,
    m: &ModulationConfig,
    omega: f64,
    n: i64,
    rabi: f64,
) -> Result<Complex64> {
    check_single(p, m)?;
    let x = p.mod_amp / m.omega_mod;
    let n_cut = truncation_order(x, BESSEL_TAIL_TOL, BESSEL_ORDER_CEILING)? as i64;
    let j = BesselTable::new(x, (n_cut + n.abs()) as usize);
    let sum: Complex64 = (-n_cut..=n_cut)
        .map(|k| {
            let den = Complex64::new(omega + k as f64 * m.omega_mod - p.omega0, p.gamma2);
            j.get(k - n) * j.get(k) / den
        })
        .sum();
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let phase = Complex64::from_polar(sign, -(n as f64) * p.mod_phase);
    Ok(phase * 0.5 * rabi * sum)
}

/// Dense Floquet linear system `A p = b` over (emitter, sideband) pairs.
#[derive(Clone, Debug)]
pub struct FloquetSystem {
    pub matrix: DMatrix<Complex64>,
    pub rhs: DVector<Complex64>,
    pub n_emitters: usize,
    pub n_max: usize,
}

impl FloquetSystem {
    /// Flat index of amplitude `p_j^(n)` with 0-based emitter `j`.
    pub fn index(&self, j: usize, n: i64) -> usize {
        flat_index(self.n_emitters, self.n_max, j, n)
    }
}

fn flat_index(n_emitters: usize, n_max: usize, j: usize, n: i64) -> usize {
    (n + n_max as i64) as usize * n_emitters + j
}

pub fn assemble_floquet_system(scene: &Scene, n_max: usize) -> Result<FloquetSystem> {
    scene.check()?;
    let array = scene.oriented_array();
    let n_em = array.len();
    let dim = n_em * (2 * n_max + 1);
    let omega = scene.drive.omega;
    let big_omega = scene.modulation.omega_mod;
    let gamma1 = array.gamma1();
    let phi = array.phi;

    let mut matrix = DMatrix::<Complex64>::zeros(dim, dim);
    let mut rhs = DVector::<Complex64>::zeros(dim);
    let nm = n_max as i64;
    for n in -nm..=nm {
        for (j, e) in array.emitters.iter().enumerate() {
            let row = flat_index(n_em, n_max, j, n);
            matrix[(row, row)] =
                Complex64::new(omega + n as f64 * big_omega - e.omega0, e.gamma2);
            let half_am = 0.5 * e.mod_amp;
            if n > -nm {
                matrix[(row, flat_index(n_em, n_max, j, n - 1))] =
                    -half_am * Complex64::from_polar(1.0, -e.mod_phase);
            }
            if n < nm {
                matrix[(row, flat_index(n_em, n_max, j, n + 1))] =
                    -half_am * Complex64::from_polar(1.0, e.mod_phase);
            }
            for k in (0..n_em).filter(|&k| k != j) {
                let dist = (j as f64 - k as f64).abs();
                matrix[(row, flat_index(n_em, n_max, k, n))] =
                    I * 0.5 * gamma1 * Complex64::from_polar(1.0, phi * dist);
            }
            if n == 0 {
                rhs[row] = 0.5 * scene.drive.rabi * Complex64::from_polar(1.0, phi * (j + 1) as f64);
            }
        }
    }
    Ok(FloquetSystem { matrix, rhs, n_emitters: n_em, n_max })
}

/// Sideband amplitudes `p_j^(n)`; rows are emitters, columns sidebands
/// `−n_max..=n_max`.
#[derive(Clone, Debug)]
pub struct FloquetSolution {
    pub amplitudes: DMatrix<Complex64>,
    pub n_max: usize,
    pub residual: f64,
}

impl FloquetSolution {
    pub fn amplitude(&self, j: usize, n: i64) -> Complex64 {
        if n.unsigned_abs() as usize > self.n_max {
            return Complex64::new(0.0, 0.0);
        }
        self.amplitudes[(j, (n + self.n_max as i64) as usize)]
    }

    pub fn n_emitters(&self) -> usize {
        self.amplitudes.nrows()
    }

    /// Whether every `|p_j^(n)|` shrinks monotonically once `|n|` exceeds
    /// `onset` (normally `ceil(A_m/Ω)`).
    pub fn tail_decays(&self, onset: usize) -> bool {
        let nm = self.n_max as i64;
        (0..self.n_emitters()).all(|j| {
            let mut ok = true;
            for sign in [-1i64, 1] {
                let mut prev = f64::INFINITY;
                for k in (onset as i64 + 1)..=nm {
                    let a = self.amplitude(j, sign * k).norm();
                    if a > prev * (1.0 + 1e-9) + 1e-300 {
                        ok = false;
                    }
                    prev = a;
                }
            }
            ok
        })
    }
}

pub fn solve_sidebands(scene: &Scene, n_max: usize) -> Result<FloquetSolution> {
    let system = assemble_floquet_system(scene, n_max)?;
    let lu = system.matrix.clone().lu();
    let x = lu.solve(&system.rhs).ok_or_else(|| {
        Error::SingularSystem("LU factorization found a zero pivot (Γ₂ = 0?)".into())
    })?;
    if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::SingularSystem("non-finite amplitudes".into()));
    }
    let rhs_norm = system.rhs.norm();
    let residual = if rhs_norm > 0.0 {
        (&system.matrix * &x - &system.rhs).norm() / rhs_norm
    } else {
        0.0
    };
    if residual > RESIDUAL_TOL {
        return Err(Error::SingularSystem(format!("relative residual {residual:e}")));
    }
    let n_em = system.n_emitters;
    let cols = 2 * n_max + 1;
    let amplitudes = DMatrix::from_fn(n_em, cols, |j, c| x[c * n_em + j]);
    Ok(FloquetSolution { amplitudes, n_max, residual })
}

/// Complex reflection `r^(n)` and transmission `t^(n)`, n = −n_max..=n_max.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct SidebandSpectrum {
    pub r: Vec<Complex64>,
    pub t: Vec<Complex64>,
    pub n_max: usize,
}

impl SidebandSpectrum {
    pub fn r(&self, n: i64) -> Complex64 {
        self.get(&self.r, n)
    }

    pub fn t(&self, n: i64) -> Complex64 {
        self.get(&self.t, n)
    }

    fn get(&self, v: &[Complex64], n: i64) -> Complex64 {
        if n.unsigned_abs() as usize > self.n_max {
            Complex64::new(0.0, 0.0)
        } else {
            v[(n + self.n_max as i64) as usize]
        }
    }

    pub fn orders(&self) -> impl Iterator<Item = i64> {
        let nm = self.n_max as i64;
        -nm..=nm
    }

    /// `Σ_n (|r^(n)|² + |t^(n)|²)`.
    pub fn total_power(&self) -> f64 {
        self.r.iter().chain(&self.t).map(|c| c.norm_sqr()).sum()
    }
}

/// Converts amplitudes into scattering coefficients. The solution must come
/// from `scene` (same port and a nonzero Rabi frequency).
pub fn scattering_coefficients(sol: &FloquetSolution, scene: &Scene) -> Result<SidebandSpectrum> {
    scene.check()?;
    let rabi = scene.drive.rabi;
    if rabi <= 0.0 {
        return Err(Error::Undefined("scattering coefficients need a nonzero Rabi frequency".into()));
    }
    let array = scene.oriented_array();
    if array.len() != sol.n_emitters() {
        return Err(Error::invalid("emitters", "solution does not match the scene"));
    }
    let pref = -I * array.gamma1() / rabi;
    let phi = array.phi;
    let nm = sol.n_max as i64;
    let mut r = Vec::with_capacity(2 * sol.n_max + 1);
    let mut t = Vec::with_capacity(2 * sol.n_max + 1);
    for n in -nm..=nm {
        let mut back = Complex64::new(0.0, 0.0);
        let mut fwd = Complex64::new(0.0, 0.0);
        for j in 0..array.len() {
            let p = sol.amplitude(j, n);
            let ph = phi * (j + 1) as f64;
            back += Complex64::from_polar(1.0, ph) * p;
            fwd += Complex64::from_polar(1.0, -ph) * p;
        }
        r.push(pref * back);
        t.push(if n == 0 { 1.0 + pref * fwd } else { pref * fwd });
    }
    Ok(SidebandSpectrum { r, t, n_max: sol.n_max })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Truncation {
    /// Picked by [`choose_truncation`] at the default tolerance.
    Auto,
    Fixed(usize),
}

/// Linear-response coefficients. The Rabi frequency drops out, so a zero
/// drive is replaced by a unit probe internally.
pub fn sideband_spectrum(scene: &Scene, truncation: Truncation) -> Result<SidebandSpectrum> {
    scene.check()?;
    let probe = if scene.drive.rabi > 0.0 {
        scene.clone()
    } else {
        scene.with_rabi(scene.array.gamma1())
    };
    let n_max = match truncation {
        Truncation::Fixed(n) => n,
        Truncation::Auto => choose_truncation(&probe, DEFAULT_TRUNCATION_TOL)?,
    };
    let sol = solve_sidebands(&probe, n_max)?;
    scattering_coefficients(&sol, &probe)
}

fn spectrum_at(scene: &Scene, n_max: usize) -> Result<SidebandSpectrum> {
    let sol = solve_sidebands(scene, n_max)?;
    scattering_coefficients(&sol, scene)
}

/// Smallest `n_max` for which doubling the truncation changes no
/// `|r^(n)|`, `|t^(n)|` with `|n| ≤ n_max` by `tol` or more.
pub fn choose_truncation(scene: &Scene, tol: f64) -> Result<usize> {
    scene.check()?;
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be > 0"));
    }
    if scene.array.max_mod_amp() == 0.0 {
        return Ok(0);
    }
    let probe = if scene.drive.rabi > 0.0 {
        scene.clone()
    } else {
        scene.with_rabi(scene.array.gamma1())
    };
    for n in 1..=TRUNCATION_CEILING {
        let coarse = spectrum_at(&probe, n)?;
        let fine = spectrum_at(&probe, 2 * n)?;
        let converged = coarse.orders().all(|k| {
            (coarse.r(k).norm() - fine.r(k).norm()).abs() < tol
                && (coarse.t(k).norm() - fine.t(k).norm()).abs() < tol
        });
        if converged {
            return Ok(n);
        }
    }
    Err(Error::NonConvergence(format!(
        "sideband truncation did not converge to {tol:e} below n_max = {TRUNCATION_CEILING}"
    )))
}
