//! Directionality metrics, α–detuning maps, isolator and gyrator figures of
//! merit, and drive-power maps.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floquet::{sideband_spectrum, SidebandSpectrum, Truncation};
use crate::lindblad::{steady_sidebands, DephasingModel};
use crate::scene::{
    DriveConfig, EmitterParams, ModulationConfig, Port, Scene, WaveguideArray, TWO_PI,
};
use crate::sweep;

/// Stokes sideband, the default for directionality metrics.
pub const STOKES: i64 = -1;
/// Below this |t_n| the phase of a transmission coefficient is not reported.
pub const MIN_PHASE_AMPLITUDE: f64 = 1e-9;

/// `(P→ − P↩)/(P→ + P↩)`.
pub fn directivity(p_forward: f64, p_backward: f64) -> Result<f64> {
    if !(p_forward >= 0.0 && p_backward >= 0.0) || !p_forward.is_finite() || !p_backward.is_finite() {
        return Err(Error::invalid("power", "must be finite and >= 0"));
    }
    let total = p_forward + p_backward;
    if total == 0.0 {
        return Err(Error::Undefined("directivity of zero scattered power".into()));
    }
    Ok((p_forward - p_backward) / total)
}

/// Which solver produces the sideband amplitudes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverTier {
    /// Linear-response Floquet solver (weak drive).
    #[default]
    Floquet,
    /// Master equation at the scene's Rabi frequency.
    Lindblad,
}

/// Sideband amplitudes of `scene` from the chosen solver, `|n| ≤ n_max` at least.
pub fn sidebands(scene: &Scene, n_max: usize, tier: SolverTier) -> Result<SidebandSpectrum> {
    match tier {
        SolverTier::Floquet => sideband_spectrum(scene, Truncation::Auto).map(|s| {
            if s.n_max >= n_max {
                s
            } else {
                pad(s, n_max)
            }
        }),
        SolverTier::Lindblad => {
            steady_sidebands(scene, n_max, DephasingModel::default()).map(|s| s.spectrum)
        }
    }
}

fn pad(s: SidebandSpectrum, n_max: usize) -> SidebandSpectrum {
    let nm = n_max as i64;
    SidebandSpectrum {
        r: (-nm..=nm).map(|n| s.r(n)).collect(),
        t: (-nm..=nm).map(|n| s.t(n)).collect(),
        n_max,
    }
}

/// Forward/backward power of one sideband for one (α, detuning) cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DirectionalityRecord {
    /// Modulation phase of the second emitter relative to the first (rad).
    pub alpha: f64,
    /// Probe detuning from the first emitter's resonance (rad/s).
    pub detuning: f64,
    pub p_forward: f64,
    pub p_backward: f64,
    /// `None` when nothing is scattered into the sideband.
    pub directivity: Option<f64>,
}

impl DirectionalityRecord {
    fn new(alpha: f64, detuning: f64, p_forward: f64, p_backward: f64) -> Self {
        Self { alpha, detuning, p_forward, p_backward, directivity: directivity(p_forward, p_backward).ok() }
    }
}

/// Grid of [`DirectionalityRecord`]s, rows indexed by α and columns by detuning.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepMap {
    pub alphas: Vec<f64>,
    pub detunings: Vec<f64>,
    pub sideband: i64,
    pub tier: SolverTier,
    pub records: Vec<DirectionalityRecord>,
}

impl SweepMap {
    pub fn get(&self, i_alpha: usize, i_detuning: usize) -> &DirectionalityRecord {
        &self.records[i_alpha * self.detunings.len() + i_detuning]
    }

    /// Largest forward or backward power in the map, the joint normalization.
    pub fn scale(&self) -> f64 {
        self.records.iter().map(|r| r.p_forward.max(r.p_backward)).fold(0.0, f64::max)
    }

    /// `(p_forward, p_backward)` of every cell divided by [`scale`](Self::scale).
    pub fn normalized(&self) -> Vec<(f64, f64)> {
        let s = self.scale();
        let s = if s > 0.0 { s } else { 1.0 };
        self.records.iter().map(|r| (r.p_forward / s, r.p_backward / s)).collect()
    }

    /// Records at fixed detuning index, one per α.
    pub fn alpha_cut(&self, i_detuning: usize) -> Vec<DirectionalityRecord> {
        (0..self.alphas.len()).map(|i| *self.get(i, i_detuning)).collect()
    }
}

/// Forward (`|t_n|²`) and backward (`|r_n|²`) sideband power from the left
/// port over an α × detuning grid. The second emitter's modulation phase is
/// set to the first one's plus α in every cell.
pub fn alpha_frequency_map(
    scene: &Scene,
    alphas: &[f64],
    detunings: &[f64],
    n: i64,
    tier: SolverTier,
) -> Result<SweepMap> {
    scene.check()?;
    if scene.array.len() < 2 {
        return Err(Error::invalid("qubits", "the map needs at least two emitters"));
    }
    if alphas.is_empty() || detunings.is_empty() {
        return Err(Error::invalid("grid", "alpha and detuning grids must be non-empty"));
    }
    let base = scene.with_port(Port::Left);
    let alpha0 = base.array.emitters[0].mod_phase;
    let cols = detunings.len();
    let records = sweep::try_map_indexed(alphas.len() * cols, |idx| {
        let (alpha, detuning) = (alphas[idx / cols], detunings[idx % cols]);
        let cell = base.with_mod_phase(1, alpha0 + alpha).with_detuning(detuning);
        let s = sidebands(&cell, n.unsigned_abs() as usize, tier)?;
        Ok(DirectionalityRecord::new(alpha, detuning, s.t(n).norm_sqr(), s.r(n).norm_sqr()))
    })?;
    Ok(SweepMap { alphas: alphas.to_vec(), detunings: detunings.to_vec(), sideband: n, tier, records })
}

/// Number of sign changes of `values` around a closed loop (the sequence is
/// taken as periodic). Exact zeros are skipped.
pub fn periodic_sign_changes(values: &[f64]) -> usize {
    let signs: Vec<bool> = values.iter().filter(|v| **v != 0.0).map(|v| *v > 0.0).collect();
    if signs.len() < 2 {
        return 0;
    }
    (0..signs.len()).filter(|&i| signs[i] != signs[(i + 1) % signs.len()]).count()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IsolatorMetrics {
    /// Forward transmission `S₂₁` (power).
    pub s21: f64,
    /// Reverse transmission `S₁₂` (power).
    pub s12: f64,
    /// `10 log₁₀(S₂₁/S₁₂)`.
    pub isolation_db: f64,
    /// `−10 log₁₀ S₂₁`, positive for loss.
    pub insertion_loss_db: f64,
}

/// Isolation and insertion loss from forward and reverse transmitted powers.
pub fn isolator_metrics(s21: f64, s12: f64) -> Result<IsolatorMetrics> {
    if !(s21.is_finite() && s12.is_finite() && s21 >= 0.0 && s12 >= 0.0) {
        return Err(Error::invalid("power", "must be finite and >= 0"));
    }
    if s12 == 0.0 || s21 == 0.0 {
        return Err(Error::Undefined("isolation needs nonzero transmission both ways".into()));
    }
    Ok(IsolatorMetrics {
        s21,
        s12,
        isolation_db: 10.0 * (s21 / s12).log10(),
        insertion_loss_db: -10.0 * s21.log10(),
    })
}

/// [`isolator_metrics`] of sideband `n` with `S₂₁ = |t_n|²` from the left port
/// and `S₁₂ = |t_n|²` from the right port, using the linear-response solver.
pub fn isolator_at(scene: &Scene, n: i64) -> Result<IsolatorMetrics> {
    let n_max = n.unsigned_abs() as usize;
    let left = sidebands(&scene.with_port(Port::Left), n_max, SolverTier::Floquet)?;
    let right = sidebands(&scene.with_port(Port::Right), n_max, SolverTier::Floquet)?;
    isolator_metrics(left.t(n).norm_sqr(), right.t(n).norm_sqr())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GyratorPhase {
    pub t_left: Complex64,
    pub t_right: Complex64,
    /// `arg(t_left) − arg(t_right)` reduced to `[0, 2π)`.
    pub phase_difference: f64,
}

impl GyratorPhase {
    /// Distance of the phase difference from π.
    pub fn deviation_from_pi(&self) -> f64 {
        (self.phase_difference - PI).abs()
    }
}

/// Phase between left- and right-incident transmission into sideband `n`
/// (linear response).
pub fn gyrator_check(scene: &Scene, n: i64) -> Result<GyratorPhase> {
    let n_max = n.unsigned_abs() as usize;
    let t_left = sidebands(&scene.with_port(Port::Left), n_max, SolverTier::Floquet)?.t(n);
    let t_right = sidebands(&scene.with_port(Port::Right), n_max, SolverTier::Floquet)?.t(n);
    let smallest = t_left.norm().min(t_right.norm());
    if smallest < MIN_PHASE_AMPLITUDE {
        return Err(Error::AmplitudeTooSmall(smallest));
    }
    let phase_difference = (t_left.arg() - t_right.arg()).rem_euclid(TWO_PI);
    Ok(GyratorPhase { t_left, t_right, phase_difference })
}

/// Two emitters a quarter wavelength apart with `Ω = A_m = 5Γ₁` and modulation
/// phases (0, π), the setting of the drive-power maps.
pub fn power_map_scene(omega0: f64, gamma1: f64, gamma2: f64) -> Scene {
    let e = EmitterParams::new(omega0, gamma1, gamma2);
    Scene::new(
        WaveguideArray::new(
            vec![e.with_modulation(5.0 * gamma1, 0.0), e.with_modulation(5.0 * gamma1, PI)],
            PI / 2.0,
        ),
        DriveConfig::new(omega0, 0.0),
        ModulationConfig::new(5.0 * gamma1),
    )
}

/// Coherent scattering at one (Rabi frequency, detuning) cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerCell {
    pub rabi: f64,
    pub detuning: f64,
    /// `(Ω_R/Γ₁)²`.
    pub power: f64,
    pub r_elastic: f64,
    pub t_elastic: f64,
    /// `Σ_{n≠0} |r_n|²`.
    pub r_inelastic: f64,
    /// `Σ_{n≠0} |t_n|²`.
    pub t_inelastic: f64,
    pub stokes_forward: f64,
    pub stokes_backward: f64,
}

/// Cells ordered with the Rabi frequency as the slow index.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PowerMap {
    pub rabis: Vec<f64>,
    pub detunings: Vec<f64>,
    pub n_max: usize,
    pub cells: Vec<PowerCell>,
}

impl PowerMap {
    pub fn get(&self, i_rabi: usize, i_detuning: usize) -> &PowerCell {
        &self.cells[i_rabi * self.detunings.len() + i_detuning]
    }

    pub fn row(&self, i_rabi: usize) -> &[PowerCell] {
        let c = self.detunings.len();
        &self.cells[i_rabi * c..(i_rabi + 1) * c]
    }
}

/// Elastic and inelastic reflection/transmission from the master equation
/// over Rabi frequency × detuning, sidebands summed up to `n_max`.
pub fn power_map(
    scene: &Scene,
    rabis: &[f64],
    detunings: &[f64],
    n_max: usize,
    model: DephasingModel,
) -> Result<PowerMap> {
    scene.check()?;
    if rabis.is_empty() || detunings.is_empty() {
        return Err(Error::invalid("grid", "rabi and detuning grids must be non-empty"));
    }
    if let Some(bad) = rabis.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return Err(Error::invalid("rabi", format!("{bad} must be finite and > 0")));
    }
    let base = scene.with_port(Port::Left);
    let g1 = base.array.gamma1();
    let cols = detunings.len();
    let cells = sweep::try_map_indexed(rabis.len() * cols, |idx| {
        let (rabi, detuning) = (rabis[idx / cols], detunings[idx % cols]);
        let cell = base.with_rabi(rabi).with_detuning(detuning);
        let s = steady_sidebands(&cell, n_max, model)?;
        let inelastic = |f: &dyn Fn(i64) -> Complex64| -> f64 {
            s.spectrum.orders().filter(|&n| n != 0).map(|n| f(n).norm_sqr()).sum()
        };
        Ok(PowerCell {
            rabi,
            detuning,
            power: (rabi / g1).powi(2),
            r_elastic: s.r(0).norm_sqr(),
            t_elastic: s.t(0).norm_sqr(),
            r_inelastic: inelastic(&|n| s.r(n)),
            t_inelastic: inelastic(&|n| s.t(n)),
            stokes_forward: s.t(STOKES).norm_sqr(),
            stokes_backward: s.r(STOKES).norm_sqr(),
        })
    })?;
    Ok(PowerMap { rabis: rabis.to_vec(), detunings: detunings.to_vec(), n_max, cells })
}
