//! Master-equation solver for N driven, modulated emitters with
//! waveguide-mediated exchange and correlated decay.
//!
//! Everything is integrated in the frame rotating at the drive frequency, in
//! which the long-time state is exactly periodic with the modulation period.

mod density;
mod generator;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

pub use density::{DensityMatrix, DensityTrajectory, HERMITICITY_TOL, POSITIVITY_TOL, TRACE_TOL};
pub use generator::{build_generator, DephasingModel, Generator, Superoperator, MAX_EMITTERS};

use crate::error::{Error, Result};
use crate::floquet::SidebandSpectrum;
use crate::scene::{FrequencyGrid, Scene, TWO_PI};
use crate::spectrum::{one_sided_transform, CoherentLine, SpectralDensity};
use crate::sweep;

use density::bit;

/// Largest accepted `dt × fastest rate` for [`evolve`].
pub const MAX_PHASE_PER_STEP: f64 = 0.05 * TWO_PI;
/// Largest accepted step-halving discrepancy (Frobenius norm).
pub const STEP_HALVING_TOL: f64 = 1e-6;
/// Two states one period apart closer than this count as periodic.
pub const STATIONARITY_TOL: f64 = 1e-6;
/// Emission spectra are limited to this many emitters.
pub const MAX_PSD_EMITTERS: usize = 4;
/// Absolute-time samples per modulation period for the correlator average.
pub const PHASE_SAMPLES: usize = 64;
/// The correlator is integrated until it falls below this fraction of its start.
pub const CORRELATOR_CUTOFF: f64 = 1e-6;
/// Hard cap on the correlator window, in units of 1/Γ₁.
pub const MAX_WINDOW_GAMMA1: f64 = 200.0;
/// Phase advance per step used for steady states and spectra.
const STEADY_PHASE_PER_STEP: f64 = 0.05;
/// Monodromy matrices are formed up to this Hilbert-space dimension.
const MONODROMY_MAX_DIM: usize = 8;
const MAX_RELAXATION_PERIODS: usize = 20_000;
const MAX_COHERENT_ORDER: usize = 32;

type C64 = Complex64;
type Mat = DMatrix<C64>;

fn rk4<F>(f: F, t: f64, y: &Mat, h: f64) -> Mat
where
    F: Fn(f64, &Mat) -> Mat,
{
    let half = C64::new(0.5 * h, 0.0);
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &(y + &k1 * half));
    let k3 = f(t + 0.5 * h, &(y + &k2 * half));
    let k4 = f(t + h, &(y + &k3 * C64::new(h, 0.0)));
    y + (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * C64::new(h / 6.0, 0.0)
}

fn hermitize(m: &Mat) -> Mat {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Options for [`evolve`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveOptions {
    pub model: DephasingModel,
    /// Repeat the run at `dt/2` and compare final states.
    pub error_check: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { model: DephasingModel::default(), error_check: true }
    }
}

fn step_error(rho: &DensityMatrix, t: f64) -> Option<Error> {
    let herm = rho.hermiticity_error();
    if herm > HERMITICITY_TOL {
        return Some(Error::PositivityLost(format!("Hermiticity error {herm:e} at t = {t:e}")));
    }
    let tr = rho.trace();
    if (tr - 1.0).norm() > TRACE_TOL {
        return Some(Error::PositivityLost(format!("trace {tr} at t = {t:e}")));
    }
    let min = rho.min_eigenvalue();
    if min < -POSITIVITY_TOL {
        return Some(Error::PositivityLost(format!("eigenvalue {min:e} at t = {t:e}")));
    }
    None
}

fn integrate(
    generator: &Generator,
    rho0: &Mat,
    t0: f64,
    steps: usize,
    dt: f64,
    record: bool,
) -> Result<(Vec<f64>, Vec<DensityMatrix>)> {
    let n = generator.n_qubits();
    let mut times = vec![t0];
    let mut states = vec![DensityMatrix::from_raw(n, rho0.clone())];
    let mut y = rho0.clone();
    for k in 0..steps {
        let t = t0 + k as f64 * dt;
        y = rk4(|t, r| generator.apply(t, r), t, &y, dt);
        let t_next = t0 + (k + 1) as f64 * dt;
        let state = DensityMatrix::from_raw(n, y.clone());
        if let Some(e) = step_error(&state, t_next) {
            return Err(e);
        }
        if record || k + 1 == steps {
            times.push(t_next);
            states.push(state);
        }
    }
    Ok((times, states))
}

/// Fixed-step RK4 evolution of `rho0` over `t_span` with step `dt`
/// (adjusted down so that it divides the span). Every step is checked for
/// Hermiticity, unit trace and positivity.
pub fn evolve(
    rho0: &DensityMatrix,
    scene: &Scene,
    t_span: (f64, f64),
    dt: f64,
    options: EvolveOptions,
) -> Result<DensityTrajectory> {
    let generator = build_generator(scene, options.model)?;
    if rho0.n_qubits() != generator.n_qubits() {
        return Err(Error::invalid("rho0", "qubit count does not match the array"));
    }
    rho0.check()?;
    let (t0, t1) = t_span;
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err(Error::invalid("t_span", "must be finite with end > start"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", "must be > 0"));
    }
    let steps = ((t1 - t0) / dt).ceil().max(1.0) as usize;
    let h = (t1 - t0) / steps as f64;
    let phase = h * generator.fastest_rate();
    if phase > MAX_PHASE_PER_STEP {
        return Err(Error::StepSizeTooLarge(format!(
            "dt × fastest rate = {phase:.3} rad exceeds {MAX_PHASE_PER_STEP:.3}"
        )));
    }
    let (times, states) = integrate(&generator, rho0.matrix(), t0, steps, h, true)?;
    let mut error_estimate = None;
    if options.error_check {
        let (_, fine) = integrate(&generator, rho0.matrix(), t0, 2 * steps, 0.5 * h, false)?;
        let err = fine.last().expect("final state").distance(states.last().expect("final state"));
        if err > STEP_HALVING_TOL {
            return Err(Error::StepSizeTooLarge(format!("step-halving discrepancy {err:e}")));
        }
        error_estimate = Some(err);
    }
    Ok(DensityTrajectory { times, states, dt: h, error_estimate })
}

fn steps_per_period(generator: &Generator) -> usize {
    let period = TWO_PI / generator.omega_mod();
    let raw = (period * generator.fastest_rate() / STEADY_PHASE_PER_STEP).ceil() as usize;
    raw.max(2 * PHASE_SAMPLES).div_ceil(PHASE_SAMPLES) * PHASE_SAMPLES
}

fn monodromy_fixed_point(generator: &Generator, steps: usize, h: f64) -> Result<Mat> {
    let sup = generator.superoperator();
    let d = generator.dim();
    let d2 = d * d;
    let mut phi = Mat::identity(d2, d2);
    for k in 0..steps {
        phi = rk4(|t, x| sup.apply(t, x), k as f64 * h, &phi, h);
    }
    let mut system = phi - Mat::identity(d2, d2);
    // Replace one equation by the trace condition.
    for col in 0..d2 {
        system[(0, col)] = C64::new(0.0, 0.0);
    }
    for a in 0..d {
        system[(0, a + d * a)] = C64::new(1.0, 0.0);
    }
    let mut rhs = DVector::zeros(d2);
    rhs[0] = C64::new(1.0, 0.0);
    let x = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NonStationary("monodromy has no unique fixed point".into()))?;
    Ok(hermitize(&Mat::from_column_slice(d, d, x.as_slice())))
}

fn relaxed_start(generator: &Generator, steps: usize, h: f64) -> Result<Mat> {
    let mut rho = DensityMatrix::ground(generator.n_qubits()).matrix().clone();
    for _ in 0..MAX_RELAXATION_PERIODS {
        let start = rho.clone();
        for k in 0..steps {
            rho = rk4(|t, r| generator.apply(t, r), k as f64 * h, &rho, h);
        }
        if (&rho - &start).norm() < 1e-3 * STATIONARITY_TOL {
            return Ok(hermitize(&rho));
        }
    }
    Err(Error::NonStationary(format!("no periodic state after {MAX_RELAXATION_PERIODS} periods")))
}

/// One modulation period of the periodic attractor, sampled at
/// `t_k = k T / P`, `k = 0..=P` (the last sample closes the orbit).
pub fn periodic_orbit(scene: &Scene, model: DephasingModel) -> Result<DensityTrajectory> {
    let generator = build_generator(scene, model)?;
    let steps = steps_per_period(&generator);
    let h = TWO_PI / generator.omega_mod() / steps as f64;
    let start = if generator.dim() <= MONODROMY_MAX_DIM {
        monodromy_fixed_point(&generator, steps, h)?
    } else {
        relaxed_start(&generator, steps, h)?
    };
    let (times, states) = integrate(&generator, &start, 0.0, steps, h, true)?;
    let gap = states[0].distance(&states[steps]);
    if gap > STATIONARITY_TOL {
        return Err(Error::NonStationary(format!("orbit does not close (gap {gap:e})")));
    }
    Ok(DensityTrajectory { times, states, dt: h, error_estimate: None })
}

/// Coherent sideband amplitudes at arbitrary drive power.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoherentSidebands {
    pub spectrum: SidebandSpectrum,
    /// Drive power `(Ω_R/Γ₁)²`.
    pub power: f64,
}

impl CoherentSidebands {
    pub fn r(&self, n: i64) -> C64 {
        self.spectrum.r(n)
    }

    pub fn t(&self, n: i64) -> C64 {
        self.spectrum.t(n)
    }

    /// `Σ_{n≠0} (|r_n|² + |t_n|²)`.
    pub fn inelastic_power(&self) -> f64 {
        self.spectrum
            .orders()
            .filter(|&n| n != 0)
            .map(|n| self.r(n).norm_sqr() + self.t(n).norm_sqr())
            .sum()
    }
}

/// `⟨σ_j⟩_n = (1/P) Σ_k ⟨σ_j⟩(t_k) e^{inΩt_k}` over the given samples.
fn fourier_coherences(times: &[f64], coherences: &[Vec<C64>], omega_mod: f64, n: i64) -> Vec<C64> {
    let p = times.len() as f64;
    coherences
        .iter()
        .map(|c| {
            c.iter()
                .zip(times)
                .map(|(v, &t)| v * C64::from_polar(1.0, n as f64 * omega_mod * t))
                .sum::<C64>()
                / p
        })
        .collect()
}

/// Extracts `r_n`, `t_n` (`|n| ≤ n_max`) from the last modulation period of
/// a trajectory. The step must divide the period and the trajectory must
/// repeat itself over that period.
///
/// `r_n = −(iΓ₁/Ω_R) Σ_j e^{iφj} ⟨σ_j⟩_n` and
/// `t_n = δ_{n0} − (iΓ₁/Ω_R) Σ_j e^{−iφj} ⟨σ_j⟩_n`, emitters counted from 1
/// in the order the incident wave meets them.
pub fn coherent_sidebands(
    trajectory: &DensityTrajectory,
    scene: &Scene,
    n_max: usize,
) -> Result<CoherentSidebands> {
    scene.check()?;
    let rabi = scene.drive.rabi;
    if rabi <= 0.0 {
        return Err(Error::Undefined("sidebands need a nonzero Rabi frequency".into()));
    }
    let array = scene.oriented_array();
    if trajectory.states[0].n_qubits() != array.len() {
        return Err(Error::invalid("trajectory", "qubit count does not match the array"));
    }
    let omega_mod = scene.modulation.omega_mod;
    let ratio = TWO_PI / omega_mod / trajectory.dt;
    let p = ratio.round() as usize;
    if p == 0 || (ratio - p as f64).abs() > 1e-6 * ratio {
        return Err(Error::invalid("trajectory.dt", "must divide the modulation period"));
    }
    let len = trajectory.states.len();
    if len < p + 1 || trajectory.times.len() != len {
        return Err(Error::NonStationary("trajectory shorter than one modulation period".into()));
    }
    let gap = trajectory.states[len - 1].distance(&trajectory.states[len - 1 - p]);
    if gap > STATIONARITY_TOL {
        return Err(Error::NonStationary(format!("state changes by {gap:e} over the last period")));
    }
    let window = len - 1 - p..len - 1;
    let times = &trajectory.times[window.clone()];
    let coherences: Vec<Vec<C64>> = (0..array.len())
        .map(|j| trajectory.states[window.clone()].iter().map(|r| r.coherence(j)).collect())
        .collect();

    let g1 = array.gamma1();
    let pref = C64::new(0.0, -g1 / rabi);
    let nm = n_max as i64;
    let mut r = Vec::with_capacity(2 * n_max + 1);
    let mut t = Vec::with_capacity(2 * n_max + 1);
    for n in -nm..=nm {
        let s = fourier_coherences(times, &coherences, omega_mod, n);
        let mut back = C64::new(0.0, 0.0);
        let mut fwd = C64::new(0.0, 0.0);
        for (j, v) in s.iter().enumerate() {
            let ph = array.phi * (j + 1) as f64;
            back += C64::from_polar(1.0, ph) * v;
            fwd += C64::from_polar(1.0, -ph) * v;
        }
        r.push(pref * back);
        t.push(if n == 0 { 1.0 + pref * fwd } else { pref * fwd });
    }
    Ok(CoherentSidebands {
        spectrum: SidebandSpectrum { r, t, n_max },
        power: (rabi / g1).powi(2),
    })
}

/// Sidebands on the periodic attractor of `scene`.
pub fn steady_sidebands(scene: &Scene, n_max: usize, model: DephasingModel) -> Result<CoherentSidebands> {
    let orbit = periodic_orbit(scene, model)?;
    coherent_sidebands(&orbit, scene, n_max)
}

/// Output spectra in the forward (transmitted) and backward (reflected)
/// directions, detunings measured from the drive.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmissionPsd {
    pub transmission: SpectralDensity,
    pub reflection: SpectralDensity,
}

/// `Σ_j c_j σ_j` acting from the left.
fn lower_left(n: usize, coeffs: &[C64], rho: &Mat) -> Mat {
    let d = rho.nrows();
    let mut out = Mat::zeros(d, d);
    for (j, &c) in coeffs.iter().enumerate() {
        let bj = bit(n, j);
        for b in 0..d {
            for a in (0..d).filter(|a| a & bj == 0) {
                out[(a, b)] += c * rho[(a | bj, b)];
            }
        }
    }
    out
}

/// `Tr((Σ_j c_j σ_j)† χ)`.
fn raised_trace(n: usize, coeffs: &[C64], chi: &Mat) -> C64 {
    let d = chi.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for (j, &c) in coeffs.iter().enumerate() {
        let bj = bit(n, j);
        let s: C64 = (0..d).filter(|b| b & bj == 0).map(|b| chi[(b, b | bj)]).sum();
        acc += c.conj() * s;
    }
    acc
}

fn expectation(n: usize, coeffs: &[C64], rho: &Mat) -> C64 {
    let state = DensityMatrix::from_raw(n, rho.clone());
    coeffs.iter().enumerate().map(|(j, c)| c * state.coherence(j)).sum()
}

/// `⟨δσ_c†(t₀+τ) δσ_c(t₀)⟩` on the τ grid by quantum regression.
fn fluctuation_correlator(
    generator: &Generator,
    coeffs: &[C64],
    rho: &Mat,
    t0: f64,
    h: f64,
    max_len: usize,
) -> Vec<C64> {
    let n = generator.n_qubits();
    let mean = expectation(n, coeffs, rho);
    let mut chi = lower_left(n, coeffs, rho) - rho * mean;
    let n0 = chi.norm();
    let mut out = Vec::new();
    if n0 == 0.0 {
        return out;
    }
    for k in 0..max_len {
        out.push(raised_trace(n, coeffs, &chi));
        if chi.norm() < CORRELATOR_CUTOFF * n0 {
            break;
        }
        chi = rk4(|t, r| generator.apply(t, r), t0 + k as f64 * h, &chi, h);
    }
    out
}

fn average(correlators: &[Vec<C64>]) -> Vec<C64> {
    let len = correlators.iter().map(Vec::len).max().unwrap_or(0);
    let mut avg = vec![C64::new(0.0, 0.0); len];
    for c in correlators {
        for (a, v) in avg.iter_mut().zip(c) {
            *a += v / correlators.len() as f64;
        }
    }
    avg
}

/// Forward and backward output spectra: incoherent part from the two-time
/// fluctuation correlator of `Σ_j e^{∓iφj} σ_j`, scaled by Γ₁/2, plus coherent
/// lines at `nΩ` with weights `Ω_R²/(2Γ₁) |t_n|²` and `Ω_R²/(2Γ₁) |r_n|²`.
pub fn emission_psd(scene: &Scene, grid: &FrequencyGrid, model: DephasingModel) -> Result<EmissionPsd> {
    scene.check()?;
    let grid = grid.validate()?;
    let n_emitters = scene.array.len();
    if n_emitters > MAX_PSD_EMITTERS {
        return Err(Error::DimensionTooLarge(n_emitters, MAX_PSD_EMITTERS));
    }
    let detunings = grid.points();
    if scene.drive.rabi == 0.0 {
        return Ok(EmissionPsd {
            transmission: SpectralDensity::zeros(detunings.clone()),
            reflection: SpectralDensity::zeros(detunings),
        });
    }
    let generator = build_generator(scene, model)?;
    let orbit = periodic_orbit(scene, model)?;
    let steps = orbit.states.len() - 1;
    let h = orbit.dt;
    let array = scene.oriented_array();
    let g1 = array.gamma1();
    let fwd: Vec<C64> =
        (0..n_emitters).map(|j| C64::from_polar(1.0, -array.phi * (j + 1) as f64)).collect();
    let bwd: Vec<C64> = fwd.iter().map(|c| c.conj()).collect();

    let phases = if array.max_mod_amp() == 0.0 { 1 } else { PHASE_SAMPLES };
    let stride = steps / phases;
    let max_len = (MAX_WINDOW_GAMMA1 / g1 / h).ceil() as usize;
    let pairs = sweep::map_indexed(phases, |k| {
        let idx = k * stride;
        let rho = orbit.states[idx].matrix();
        let t0 = orbit.times[idx];
        (
            fluctuation_correlator(&generator, &fwd, rho, t0, h, max_len),
            fluctuation_correlator(&generator, &bwd, rho, t0, h, max_len),
        )
    });
    let (f_corr, b_corr): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    let f_avg = average(&f_corr);
    let b_avg = average(&b_corr);
    let density = |avg: &[C64]| -> Vec<f64> {
        detunings.iter().map(|&nu| 0.5 * g1 * one_sided_transform(avg, h, nu).max(0.0)).collect()
    };

    let n_lines = (steps / 2 - 1).min(MAX_COHERENT_ORDER);
    let sidebands = coherent_sidebands(&orbit, scene, n_lines)?;
    let flux = scene.drive.rabi.powi(2) / (2.0 * g1);
    let lines = |amp: &dyn Fn(i64) -> C64| -> Vec<CoherentLine> {
        sidebands
            .spectrum
            .orders()
            .filter_map(|n| {
                let weight = flux * amp(n).norm_sqr();
                (weight > 1e-16 * flux).then_some(CoherentLine {
                    detuning: n as f64 * scene.modulation.omega_mod,
                    weight,
                })
            })
            .collect()
    };
    Ok(EmissionPsd {
        transmission: SpectralDensity {
            detunings: detunings.clone(),
            incoherent: density(&f_avg),
            coherent: lines(&|n| sidebands.t(n)),
        },
        reflection: SpectralDensity {
            detunings: detunings.clone(),
            incoherent: density(&b_avg),
            coherent: lines(&|n| sidebands.r(n)),
        },
    })
}
