//! Driven, frequency-modulated single emitter in the Bloch-vector picture.
//!
//! In the frame rotating at the drive frequency ω the spin obeys
//! `dS/dt = Ω'(t) × S − Γ(S − S₀)` with `Ω'(t) = [Ω_R, 0, ω₀ − ω + A_m cos(Ωt + α)]`,
//! relaxation `Γ(S − S₀) = [Γ₂ S_x, Γ₂ S_y, Γ₁ (S_z + 1/2)]` and `S₀ = [0, 0, −1/2]`.
//! The precession sense is the Heisenberg one, so a drive field rotating
//! counter-clockwise about z is resonant with the emitter.

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scene::{DriveConfig, EmitterParams, FrequencyGrid, ModulationConfig, TWO_PI};
use crate::spectrum::{one_sided_transform, CoherentLine, SpectralDensity};
use crate::sweep;

/// Largest accepted `dt × fastest rate`.
pub const MAX_PHASE_PER_STEP: f64 = 0.05 * TWO_PI;
/// Absolute-time samples per modulation period for the correlator average.
pub const PHASE_SAMPLES: usize = 64;
/// The correlator is integrated until it falls below this fraction of its start.
pub const CORRELATOR_CUTOFF: f64 = 1e-6;
/// Hard cap on the correlator window, in units of 1/Γ₁.
pub const MAX_WINDOW_GAMMA1: f64 = 200.0;
/// Phase advance per step used for spectra.
const SPECTRUM_PHASE_PER_STEP: f64 = 0.05;

type C64 = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpinState {
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
}

impl SpinState {
    /// Equilibrium spin, all population in the ground state.
    pub const GROUND: SpinState = SpinState { sx: 0.0, sy: 0.0, sz: -0.5 };

    pub fn new(sx: f64, sy: f64, sz: f64) -> Self {
        Self { sx, sy, sz }
    }

    pub fn norm(&self) -> f64 {
        (self.sx * self.sx + self.sy * self.sy + self.sz * self.sz).sqrt()
    }

    /// `⟨S₋⟩ = ⟨S_x⟩ − i⟨S_y⟩`, the emitter coherence.
    pub fn lowering(&self) -> C64 {
        C64::new(self.sx, -self.sy)
    }

    fn to_array(self) -> [f64; 3] {
        [self.sx, self.sy, self.sz]
    }

    fn from_array(a: [f64; 3]) -> Self {
        Self { sx: a[0], sy: a[1], sz: a[2] }
    }

    fn distance(&self, other: &SpinState) -> f64 {
        ((self.sx - other.sx).powi(2) + (self.sy - other.sy).powi(2) + (self.sz - other.sz).powi(2))
            .sqrt()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpinTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<SpinState>,
    pub dt: f64,
}

impl SpinTrajectory {
    pub fn last(&self) -> SpinState {
        *self.states.last().expect("trajectory is never empty")
    }

    pub fn max_norm(&self) -> f64 {
        self.states.iter().map(SpinState::norm).fold(0.0, f64::max)
    }
}

/// Rotating-frame Bloch generator `dS/dt = M(t) S + b`.
#[derive(Clone, Copy, Debug)]
struct BlochModel {
    detuning: f64,
    rabi: f64,
    mod_amp: f64,
    mod_freq: f64,
    mod_phase: f64,
    gamma1: f64,
    gamma2: f64,
}

impl BlochModel {
    fn new(p: &EmitterParams, drive: &DriveConfig, m: &ModulationConfig) -> Result<Self> {
        p.validate()?;
        m.validate()?;
        if !(drive.rabi >= 0.0) || !drive.rabi.is_finite() {
            return Err(Error::invalid("drive.rabi", "must be finite and >= 0"));
        }
        Ok(Self {
            detuning: p.omega0 - drive.omega,
            rabi: drive.rabi,
            mod_amp: p.mod_amp,
            mod_freq: m.omega_mod,
            mod_phase: p.mod_phase,
            gamma1: p.gamma1,
            gamma2: p.gamma2,
        })
    }

    fn field_z(&self, t: f64) -> f64 {
        self.detuning + self.mod_amp * (self.mod_freq * t + self.mod_phase).cos()
    }

    fn fastest_rate(&self) -> f64 {
        [
            self.detuning.abs() + self.mod_amp,
            self.rabi,
            self.mod_freq,
            self.gamma1,
            self.gamma2,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    fn period(&self) -> f64 {
        TWO_PI / self.mod_freq
    }

    /// Linear part: precession about `Ω'(t) = [Ω_R, 0, f_z(t)]` plus relaxation.
    fn matrix(&self, t: f64) -> [[f64; 3]; 3] {
        let wx = self.rabi;
        let wz = self.field_z(t);
        // (Ω × S)_x = −Ω_z S_y, (Ω × S)_y = Ω_z S_x − Ω_x S_z, (Ω × S)_z = Ω_x S_y.
        [
            [-self.gamma2, -wz, 0.0],
            [wz, -self.gamma2, -wx],
            [0.0, wx, -self.gamma1],
        ]
    }

    fn offset(&self) -> [f64; 3] {
        [0.0, 0.0, -0.5 * self.gamma1]
    }

    fn rhs(&self, t: f64, s: [f64; 3], affine: bool) -> [f64; 3] {
        let m = self.matrix(t);
        let mut out = [0.0; 3];
        for i in 0..3 {
            out[i] = m[i][0] * s[0] + m[i][1] * s[1] + m[i][2] * s[2];
        }
        if affine {
            let b = self.offset();
            for i in 0..3 {
                out[i] += b[i];
            }
        }
        out
    }

    fn rhs_complex(&self, t: f64, s: [C64; 3]) -> [C64; 3] {
        let m = self.matrix(t);
        let mut out = [C64::new(0.0, 0.0); 3];
        for i in 0..3 {
            out[i] = s[0] * m[i][0] + s[1] * m[i][1] + s[2] * m[i][2];
        }
        out
    }

    fn step(&self, t: f64, s: [f64; 3], dt: f64, affine: bool) -> [f64; 3] {
        rk4(|tt, y| self.rhs(tt, y, affine), t, s, dt)
    }

    fn check_step(&self, dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::invalid("dt", "must be > 0"));
        }
        let phase = dt * self.fastest_rate();
        if phase > MAX_PHASE_PER_STEP {
            return Err(Error::StepSizeTooLarge(format!(
                "dt = {dt:e} s advances the fastest rotating-frame rate by {phase:.3} rad (max {MAX_PHASE_PER_STEP:.3})"
            )));
        }
        Ok(())
    }

    /// State at t = 0 (mod T) on the periodic attractor, from the one-period
    /// monodromy `S(T) = Φ S(0) + s_p`.
    fn periodic_start(&self, steps: usize) -> Result<SpinState> {
        let h = self.period() / steps as f64;
        let mut particular = [0.0; 3];
        let mut basis = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        for k in 0..steps {
            let t = k as f64 * h;
            particular = self.step(t, particular, h, true);
            for b in basis.iter_mut() {
                *b = self.step(t, *b, h, false);
            }
        }
        let phi = Matrix3::from_fn(|i, j| basis[j][i]);
        let lhs = Matrix3::identity() - phi;
        let rhs = nalgebra::Vector3::from(particular);
        let s = lhs.lu().solve(&rhs).ok_or_else(|| {
            Error::NonStationary("one-period map has a unit eigenvalue".into())
        })?;
        let start = SpinState::new(s[0], s[1], s[2]);
        // Attractor test: one more period must reproduce the start.
        let mut y = start.to_array();
        for k in 0..steps {
            y = self.step(k as f64 * h, y, h, true);
        }
        let err = SpinState::from_array(y).distance(&start);
        if !(err < 1e-9) {
            return Err(Error::NonStationary(format!("periodic orbit mismatch {err:e}")));
        }
        Ok(start)
    }

    fn steps_per_period(&self, multiple: usize) -> usize {
        let raw = (self.period() * self.fastest_rate() / SPECTRUM_PHASE_PER_STEP).ceil() as usize;
        let raw = raw.max(4 * multiple);
        raw.div_ceil(multiple) * multiple
    }
}

fn rk4<F>(f: F, t: f64, y: [f64; 3], dt: f64) -> [f64; 3]
where
    F: Fn(f64, [f64; 3]) -> [f64; 3],
{
    let add = |a: [f64; 3], b: [f64; 3], s: f64| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]];
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * dt, add(y, k1, 0.5 * dt));
    let k3 = f(t + 0.5 * dt, add(y, k2, 0.5 * dt));
    let k4 = f(t + dt, add(y, k3, dt));
    let mut out = y;
    for i in 0..3 {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn rk4_complex<F>(f: F, t: f64, y: [C64; 3], dt: f64) -> [C64; 3]
where
    F: Fn(f64, [C64; 3]) -> [C64; 3],
{
    let add = |a: [C64; 3], b: [C64; 3], s: f64| [a[0] + b[0] * s, a[1] + b[1] * s, a[2] + b[2] * s];
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * dt, add(y, k1, 0.5 * dt));
    let k3 = f(t + 0.5 * dt, add(y, k2, 0.5 * dt));
    let k4 = f(t + dt, add(y, k3, dt));
    let mut out = y;
    for i in 0..3 {
        out[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0);
    }
    out
}

fn integrate_with<F>(start: SpinState, t_span: (f64, f64), dt: f64, mut step: F) -> Result<SpinTrajectory>
where
    F: FnMut(f64, [f64; 3], f64) -> [f64; 3],
{
    let (t0, t1) = t_span;
    if !(t1 >= t0) {
        return Err(Error::invalid("t_span", "end must not precede start"));
    }
    let steps = ((t1 - t0) / dt).round() as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut y = start.to_array();
    times.push(t0);
    states.push(start);
    for k in 0..steps {
        let t = t0 + k as f64 * dt;
        y = step(t, y, dt);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::StepSizeTooLarge(format!("non-finite state at t = {t:e}")));
        }
        times.push(t0 + (k + 1) as f64 * dt);
        states.push(SpinState::from_array(y));
    }
    Ok(SpinTrajectory { times, states, dt })
}

/// Rotating-frame trajectory starting from the ground state at `t_span.0`.
pub fn integrate_bloch(
    p: &EmitterParams,
    drive: &DriveConfig,
    m: &ModulationConfig,
    t_span: (f64, f64),
    dt: f64,
) -> Result<SpinTrajectory> {
    integrate_bloch_from(p, drive, m, SpinState::GROUND, t_span, dt)
}

pub fn integrate_bloch_from(
    p: &EmitterParams,
    drive: &DriveConfig,
    m: &ModulationConfig,
    start: SpinState,
    t_span: (f64, f64),
    dt: f64,
) -> Result<SpinTrajectory> {
    let model = BlochModel::new(p, drive, m)?;
    model.check_step(dt)?;
    integrate_with(start, t_span, dt, |t, y, h| model.step(t, y, h, true))
}

/// Lab-frame trajectory under `Ω̃(t) = [Ω_R cos ωt, Ω_R sin ωt, ω₀ + A_m cos(Ωt + α)]`.
/// `dt` must resolve ω₀ itself, so this is only practical for scaled-down models.
pub fn integrate_bloch_lab(
    p: &EmitterParams,
    drive: &DriveConfig,
    m: &ModulationConfig,
    start: SpinState,
    t_span: (f64, f64),
    dt: f64,
) -> Result<SpinTrajectory> {
    let model = BlochModel::new(p, drive, m)?;
    let fastest = (p.omega0.abs() + p.mod_amp).max(drive.omega.abs()).max(model.fastest_rate());
    if !(dt > 0.0) || dt * fastest > MAX_PHASE_PER_STEP {
        return Err(Error::StepSizeTooLarge(format!("dt = {dt:e} s does not resolve the lab frame")));
    }
    let w = drive.omega;
    let rhs = move |t: f64, s: [f64; 3]| {
        let f = [
            model.rabi * (w * t).cos(),
            model.rabi * (w * t).sin(),
            p.omega0 + model.mod_amp * (model.mod_freq * t + model.mod_phase).cos(),
        ];
        let cross = [f[1] * s[2] - f[2] * s[1], f[2] * s[0] - f[0] * s[2], f[0] * s[1] - f[1] * s[0]];
        [
            cross[0] - model.gamma2 * s[0],
            cross[1] - model.gamma2 * s[1],
            cross[2] - model.gamma1 * (s[2] + 0.5),
        ]
    };
    integrate_with(start, t_span, dt, |t, y, h| rk4(rhs, t, y, h))
}

/// Lab-frame spin expressed in the frame rotating at `omega` about z.
pub fn to_rotating_frame(s: SpinState, omega: f64, t: f64) -> SpinState {
    let (sin, cos) = (omega * t).sin_cos();
    SpinState::new(cos * s.sx + sin * s.sy, -sin * s.sx + cos * s.sy, s.sz)
}

/// Rotating-frame spin at `t = 0` on the periodic attractor.
pub fn periodic_state(p: &EmitterParams, drive: &DriveConfig, m: &ModulationConfig) -> Result<SpinState> {
    let model = BlochModel::new(p, drive, m)?;
    model.periodic_start(model.steps_per_period(PHASE_SAMPLES))
}

/// Resonance-fluorescence spectrum `Re ∫ dτ e^{−iντ} ⟨⟨S₊(t+τ) S₋(t)⟩⟩_t` on a
/// grid of detection detunings ν from the drive.
///
/// The correlator follows from quantum regression on the Bloch generator;
/// the absolute-time average runs over one modulation period. The incoherent
/// part uses the fluctuation `δS = S − ⟨S⟩`; the coherent part appears as
/// lines at ν = nΩ with weight `|⟨S₋⟩_n|²`.
pub fn emission_spectrum(
    p: &EmitterParams,
    drive: &DriveConfig,
    m: &ModulationConfig,
    grid: &FrequencyGrid,
) -> Result<SpectralDensity> {
    let model = BlochModel::new(p, drive, m)?;
    let grid = grid.validate()?;
    let phases = if model.mod_amp == 0.0 { 1 } else { PHASE_SAMPLES };
    let steps = model.steps_per_period(PHASE_SAMPLES);
    let h = model.period() / steps as f64;
    let start = model.periodic_start(steps)?;

    // Periodic orbit sampled on the step grid.
    let mut orbit = Vec::with_capacity(steps);
    let mut y = start.to_array();
    for k in 0..steps {
        orbit.push(SpinState::from_array(y));
        y = model.step(k as f64 * h, y, h, true);
    }

    let max_len = (MAX_WINDOW_GAMMA1 / model.gamma1 / h).ceil() as usize;
    let stride = steps / phases;
    let correlators = sweep::map_indexed(phases, |k| {
        fluctuation_correlator(&model, &orbit, k * stride, h, max_len)
    });
    let len = correlators.iter().map(Vec::len).max().unwrap_or(0);
    let mut avg = vec![C64::new(0.0, 0.0); len];
    for c in &correlators {
        for (a, v) in avg.iter_mut().zip(c) {
            *a += v / phases as f64;
        }
    }
    let detunings = grid.points();
    let incoherent = detunings
        .iter()
        .map(|&nu| one_sided_transform(&avg, h, nu).max(0.0))
        .collect();

    let coherent = coherent_lines(&orbit, model.mod_freq, h);
    Ok(SpectralDensity { detunings, incoherent, coherent })
}

/// `⟨δS₊(t₀+τ) δS₋(t₀)⟩` on the τ grid, with `t₀ = start_index · h`.
fn fluctuation_correlator(
    model: &BlochModel,
    orbit: &[SpinState],
    start_index: usize,
    h: f64,
    max_len: usize,
) -> Vec<C64> {
    let s = orbit[start_index];
    let c = s.lowering();
    let i = C64::new(0.0, 1.0);
    // v_k(0) = ⟨S_k S₋⟩ from the spin-1/2 product rules.
    let v0 = [
        C64::new(0.25 + 0.5 * s.sz, 0.0),
        -i * (0.5 * s.sz + 0.25),
        i * 0.5 * s.sy - 0.5 * s.sx,
    ];
    let mut dv = [v0[0] - c * s.sx, v0[1] - c * s.sy, v0[2] - c * s.sz];
    let norm = |v: &[C64; 3]| (v[0].norm_sqr() + v[1].norm_sqr() + v[2].norm_sqr()).sqrt();
    let n0 = norm(&dv);
    let mut out = Vec::new();
    if n0 == 0.0 {
        return out;
    }
    let t0 = start_index as f64 * h;
    for k in 0..max_len {
        out.push(dv[0] + i * dv[1]);
        if norm(&dv) < CORRELATOR_CUTOFF * n0 {
            break;
        }
        dv = rk4_complex(|t, y| model.rhs_complex(t, y), t0 + k as f64 * h, dv, h);
    }
    out
}

fn coherent_lines(orbit: &[SpinState], mod_freq: f64, h: f64) -> Vec<CoherentLine> {
    let steps = orbit.len();
    let n_lines = ((steps / 2).saturating_sub(1)).min(32) as i64;
    let mut lines = Vec::new();
    for n in -n_lines..=n_lines {
        let c: C64 = orbit
            .iter()
            .enumerate()
            .map(|(k, s)| s.lowering() * C64::from_polar(1.0, n as f64 * mod_freq * k as f64 * h))
            .sum::<C64>()
            / steps as f64;
        let weight = c.norm_sqr();
        if weight > 1e-16 {
            lines.push(CoherentLine { detuning: n as f64 * mod_freq, weight });
        }
    }
    lines
}

/// Nine emission frequencies `ω + pΩ_R′ + qΩ_R″` of the nested Mollow triplets,
/// reported as detunings from the drive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MollowLines {
    pub rabi_prime: f64,
    pub rabi_double_prime: f64,
    /// `lines[p + 1][q + 1]` for p, q ∈ {−1, 0, 1}.
    pub lines: [[f64; 3]; 3],
}

impl MollowLines {
    pub fn line(&self, p: i32, q: i32) -> f64 {
        self.lines[(p + 1) as usize][(q + 1) as usize]
    }
}

/// Analytic nested-Mollow frequencies. `detuning` is ω₀ − ω and `mod_amp` the
/// modulation amplitude; valid for `mod_amp ≪ rabi ≪ ω₀`.
pub fn nested_mollow_lines(rabi: f64, detuning: f64, mod_amp: f64, m: &ModulationConfig) -> MollowLines {
    if !(mod_amp < 0.5 * rabi) {
        log::warn!("nested Mollow formula used outside mod_amp << rabi ({mod_amp:e} vs {rabi:e})");
    }
    let rp = (rabi * rabi + detuning * detuning).sqrt();
    let a = if rp > 0.0 { rabi * mod_amp / (2.0 * rp) } else { 0.0 };
    let rpp = (a * a + (rp - m.omega_mod).powi(2)).sqrt();
    let mut lines = [[0.0; 3]; 3];
    for (pi, p) in [-1.0, 0.0, 1.0].into_iter().enumerate() {
        for (qi, q) in [-1.0, 0.0, 1.0].into_iter().enumerate() {
            lines[pi][qi] = p * rp + q * rpp;
        }
    }
    MollowLines { rabi_prime: rp, rabi_double_prime: rpp, lines }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::single_qubit_pn;
    use crate::scene::mhz_to_angular;

    fn emitter(gamma2_mhz: f64) -> EmitterParams {
        EmitterParams::new(mhz_to_angular(6129.0), mhz_to_angular(4.4), mhz_to_angular(gamma2_mhz))
    }

    #[test]
    fn free_decay_relaxes_to_ground() {
        let p = emitter(3.9);
        let drive = DriveConfig::new(p.omega0, 0.0);
        let m = ModulationConfig::new(mhz_to_angular(20.0));
        let start = SpinState::new(0.3, 0.2, 0.1);
        let dt = 1e-10;
        let t_end = 2e-7;
        let tr = integrate_bloch_from(&p, &drive, &m, start, (0.0, t_end), dt).unwrap();
        let s = tr.last();
        let decay = |g: f64| (-g * t_end).exp();
        // On resonance with no drive the transverse spin does not precess.
        assert!((s.sx - 0.3 * decay(p.gamma2)).abs() < 1e-9);
        assert!((s.sy - 0.2 * decay(p.gamma2)).abs() < 1e-9);
        assert!((s.sz + 0.5 - 0.6 * decay(p.gamma1)).abs() < 1e-9);
    }

    #[test]
    fn strong_drive_saturates() {
        let p = emitter(3.9);
        let drive = DriveConfig::new(p.omega0, 50.0 * p.gamma1);
        let m = ModulationConfig::new(mhz_to_angular(20.0));
        let dt = 0.02 / drive.rabi;
        let tr = integrate_bloch(&p, &drive, &m, (0.0, 3e-6), dt).unwrap();
        let tail = &tr.states[tr.states.len() / 2..];
        let mean_sz = tail.iter().map(|s| s.sz).sum::<f64>() / tail.len() as f64;
        assert!(mean_sz.abs() < 1e-3, "mean Sz = {mean_sz}");
        assert!(tr.max_norm() <= 0.5 + 1e-6);
    }

    #[test]
    fn modulated_drive_settles_on_a_periodic_orbit() {
        let p = emitter(3.9);
        let rabi = mhz_to_angular(52.0);
        let p = p.with_modulation(0.2 * rabi, 0.0);
        let drive = DriveConfig::new(p.omega0, rabi);
        let m = ModulationConfig::new(rabi);
        let period = m.period();
        let steps = 400;
        let dt = period / steps as f64;
        let n_periods = (12.0 / p.gamma1 / period).ceil() as usize + 2;
        let tr = integrate_bloch(&p, &drive, &m, (0.0, n_periods as f64 * period), dt).unwrap();
        let end = tr.states.len() - 1;
        let a = tr.states[end];
        let b = tr.states[end - steps];
        assert!(a.distance(&b) < 1e-5, "period mismatch {}", a.distance(&b));
        // Not a fixed point: the orbit genuinely oscillates.
        let half = tr.states[end - steps / 2];
        assert!(a.distance(&half) > 1e-3);
        let start = periodic_state(&p, &drive, &m).unwrap();
        assert!(start.distance(&tr.states[end - (end % steps)]) < 1e-5);
        assert!(tr.max_norm() <= 0.5 + 1e-6);
    }

    #[test]
    fn coarse_steps_are_rejected() {
        let p = emitter(3.9);
        let drive = DriveConfig::new(p.omega0, mhz_to_angular(52.0));
        let m = ModulationConfig::new(mhz_to_angular(20.0));
        let r = integrate_bloch(&p, &drive, &m, (0.0, 1e-6), 1e-8);
        assert!(matches!(r, Err(Error::StepSizeTooLarge(_))));
    }

    #[test]
    fn weak_drive_coherence_matches_linear_response() {
        let p = emitter(3.9).with_modulation(mhz_to_angular(25.0), 0.7);
        let m = ModulationConfig::new(mhz_to_angular(20.0));
        let rabi = 1e-3 * p.gamma1;
        let w = p.omega0 + mhz_to_angular(-6.0);
        let drive = DriveConfig::new(w, rabi);
        let model = BlochModel::new(&p, &drive, &m).unwrap();
        let steps = model.steps_per_period(64);
        let h = model.period() / steps as f64;
        let start = model.periodic_start(steps).unwrap();
        let mut orbit = Vec::new();
        let mut y = start.to_array();
        for k in 0..steps {
            orbit.push(SpinState::from_array(y));
            y = model.step(k as f64 * h, y, h, true);
        }
        for n in -2..=2i64 {
            let c: C64 = orbit
                .iter()
                .enumerate()
                .map(|(k, s)| s.lowering() * C64::from_polar(1.0, n as f64 * m.omega_mod * k as f64 * h))
                .sum::<C64>()
                / steps as f64;
            let want = single_qubit_pn(&p, &m, w, n, rabi).unwrap();
            assert!((c - want).norm() < 1e-3 * want.norm() + 1e-12, "n={n}: {c} vs {want}");
        }
    }

    #[test]
    fn lab_and_rotating_frames_agree() {
        // Scaled-down transition frequency so the lab frame is affordable.
        let p = EmitterParams::new(TWO_PI * 400e6, TWO_PI * 4.4e6, TWO_PI * 3.9e6)
            .with_modulation(TWO_PI * 8e6, 0.4);
        let drive = DriveConfig::new(TWO_PI * 395e6, TWO_PI * 30e6);
        let m = ModulationConfig::new(TWO_PI * 25e6);
        let dt = 2.5e-12;
        let t_end = 1e-7;
        let start = SpinState::new(0.1, -0.2, -0.3);
        let lab = integrate_bloch_lab(&p, &drive, &m, start, (0.0, t_end), dt).unwrap();
        let rot = integrate_bloch_from(&p, &drive, &m, start, (0.0, t_end), dt).unwrap();
        for k in (0..lab.states.len()).step_by(997) {
            let back = to_rotating_frame(lab.states[k], drive.omega, lab.times[k]);
            assert!(back.distance(&rot.states[k]) < 1e-8, "k={k}");
        }
    }

    #[test]
    fn undriven_emitter_does_not_emit() {
        let p = emitter(3.9);
        let drive = DriveConfig::new(p.omega0, 0.0);
        let m = ModulationConfig::new(mhz_to_angular(20.0));
        let grid = FrequencyGrid::new(-mhz_to_angular(30.0), mhz_to_angular(30.0), 61).unwrap();
        let s = emission_spectrum(&p, &drive, &m, &grid).unwrap();
        assert!(s.incoherent.iter().all(|&v| v == 0.0));
        assert!(s.coherent.is_empty());
    }

    #[test]
    fn weak_drive_dephasing_line_has_half_width_gamma2() {
        // Pure dephasing dominates the incoherent emission at weak drive,
        // giving a Lorentzian of half-width Γ₂ centred on the drive.
        let p = emitter(8.8);
        let drive = DriveConfig::new(p.omega0, 0.01 * p.gamma1);
        let m = ModulationConfig::new(mhz_to_angular(20.0));
        let g2 = p.gamma2;
        let grid = FrequencyGrid::new(-3.0 * g2, 3.0 * g2, 601).unwrap();
        let s = emission_spectrum(&p, &drive, &m, &grid).unwrap();
        let peak = s.incoherent[300];
        let half = s
            .detunings
            .iter()
            .zip(&s.incoherent)
            .skip(300)
            .find(|(_, &v)| v < 0.5 * peak)
            .map(|(&x, _)| x)
            .unwrap();
        assert!((half - g2).abs() < 0.02 * g2, "half width {half:e} vs {g2:e}");
        let sym = (s.incoherent[200] - s.incoherent[400]).abs() / s.incoherent[200];
        assert!(sym < 1e-6);
    }

    #[test]
    fn resonant_mollow_triplet() {
        let p = emitter(2.2);
        let rabi = 10.0 * p.gamma1;
        let drive = DriveConfig::new(p.omega0, rabi);
        let m = ModulationConfig::new(mhz_to_angular(20.0));
        let grid = FrequencyGrid::new(-2.0 * rabi, 2.0 * rabi, 801).unwrap();
        let s = emission_spectrum(&p, &drive, &m, &grid).unwrap();
        let peaks: Vec<f64> = s.incoherent_peaks().iter().take(3).map(|p| p.0).collect();
        let step = grid.step();
        for target in [0.0, rabi, -rabi] {
            assert!(
                peaks.iter().any(|&x| (x - target).abs() <= 0.05 * rabi),
                "no peak near {target:e}: {peaks:?}"
            );
        }
        // Mirror symmetry about the drive.
        for k in 0..400 {
            let a = s.incoherent[400 + k];
            let b = s.incoherent[400 - k];
            assert!((a - b).abs() <= 0.01 * a.max(b) + 1e-30, "k={k}");
        }
        let _ = step;
    }

    #[test]
    fn mollow_formula_limits() {
        let rabi = mhz_to_angular(52.0);
        let m = ModulationConfig::new(mhz_to_angular(40.0));
        let l = nested_mollow_lines(rabi, 0.0, 0.0, &m);
        assert!((l.rabi_double_prime - (rabi - m.omega_mod).abs()).abs() < 1e-6);
        assert_eq!(l.line(0, 0), 0.0);

        let m = ModulationConfig::new(rabi);
        let l = nested_mollow_lines(rabi, 0.0, 0.2 * rabi, &m);
        assert!((l.rabi_double_prime - 0.1 * rabi).abs() < 1e-6);
        assert!((crate::scene::angular_to_mhz(l.rabi_double_prime) - 5.2).abs() < 1e-9);
        for p in -1..=1 {
            assert!((l.line(p, 1) + l.line(-p, -1)).abs() < 1e-6);
        }
    }
}
