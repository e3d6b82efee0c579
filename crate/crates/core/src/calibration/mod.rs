//! Background normalization and least-squares calibration of qubit and
//! modulation parameters from transmission spectra.
//!
//! Fits run internally in units of 10⁶ rad/s; results are reported in rad/s.

mod lm;

use std::io::Read;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use lm::{levenberg_marquardt, LmFit, MAX_ITERATIONS, PARAM_STEP_TOL};

use crate::error::{Error, Result};
use crate::floquet::single_qubit_t0;
use crate::scene::{EmitterParams, ModulationConfig, TWO_PI};

/// Two-sided 95 % normal quantile used for confidence intervals.
pub const Z_95: f64 = 1.959_963_984_540_054;
/// Relative tolerance when comparing two frequency grids.
pub const GRID_RTOL: f64 = 1e-9;
/// Required spectral span, in dip half-widths.
pub const MIN_SPAN_LINEWIDTHS: f64 = 5.0;
const UNIT: f64 = 1e6;
const SCAN_POINTS: usize = 400;

/// Transmitted power `|t|²` on a probe-frequency grid (Hz).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasuredSpectrum {
    pub freqs_hz: Vec<f64>,
    pub power: Vec<f64>,
}

impl MeasuredSpectrum {
    pub fn new(freqs_hz: Vec<f64>, power: Vec<f64>) -> Result<Self> {
        if freqs_hz.len() != power.len() {
            return Err(Error::invalid("power", "length differs from the frequency grid"));
        }
        if freqs_hz.is_empty() {
            return Err(Error::invalid("freqs_hz", "must not be empty"));
        }
        if let Some(i) = freqs_hz.iter().position(|f| !f.is_finite()) {
            return Err(Error::invalid(format!("freqs_hz[{i}]"), "must be finite"));
        }
        if let Some(i) = power.iter().position(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::invalid(format!("power[{i}]"), "must be finite and >= 0"));
        }
        Ok(Self { freqs_hz, power })
    }

    pub fn len(&self) -> usize {
        self.freqs_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs_hz.is_empty()
    }

    /// Reads a CSV with header `freq_mhz,power`.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let rows = read_two_columns(reader, ("freq_mhz", "power"))?;
        let (f, p): (Vec<f64>, Vec<f64>) = rows.into_iter().map(|(f, p)| (f * 1e6, p)).unzip();
        Self::new(f, p)
    }

    fn angular_scaled(&self) -> Vec<f64> {
        self.freqs_hz.iter().map(|f| TWO_PI * f / UNIT).collect()
    }
}

fn read_two_columns<R: Read>(reader: R, header: (&str, &str)) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let head = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    if head.len() != 2 || &head[0] != header.0 || &head[1] != header.1 {
        return Err(Error::Parse(format!("expected header `{},{}`", header.0, header.1)));
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let parse = |k: usize| {
            rec[k]
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("row {}: `{}`: {e}", line + 1, &rec[k])))
        };
        out.push((parse(0)?, parse(1)?));
    }
    Ok(out)
}

/// Reads calibration pairs from a CSV with header `av_vpp,am_mhz`, returning
/// `(A_V in volts, A_m in rad/s)`.
pub fn read_calibration_pairs<R: Read>(reader: R) -> Result<Vec<(f64, f64)>> {
    Ok(read_two_columns(reader, ("av_vpp", "am_mhz"))?
        .into_iter()
        .map(|(v, a)| (v, TWO_PI * a * 1e6))
        .collect())
}

/// `|t|² / |t_bg|²` point by point.
pub fn normalize_transmission(raw: &MeasuredSpectrum, background: &MeasuredSpectrum) -> Result<MeasuredSpectrum> {
    if raw.len() != background.len() {
        return Err(Error::GridMismatch(format!("{} vs {} points", raw.len(), background.len())));
    }
    for (i, (a, b)) in raw.freqs_hz.iter().zip(&background.freqs_hz).enumerate() {
        if (a - b).abs() > GRID_RTOL * a.abs().max(b.abs()) {
            return Err(Error::GridMismatch(format!("point {i}: {a} Hz vs {b} Hz")));
        }
    }
    if let Some(i) = background.power.iter().position(|&p| p == 0.0) {
        return Err(Error::ZeroBackground(i));
    }
    let power = raw.power.iter().zip(&background.power).map(|(a, b)| a / b).collect();
    MeasuredSpectrum::new(raw.freqs_hz.clone(), power)
}

/// Transmission of an unmodulated emitter,
/// `((ω₀−ω)² + (Γ₂−Γ₁/2)²) / ((ω₀−ω)² + Γ₂²)`.
pub fn lorentzian_transmission(omega: f64, omega0: f64, gamma1: f64, gamma2: f64) -> f64 {
    let d2 = (omega0 - omega).powi(2);
    (d2 + (gamma2 - 0.5 * gamma1).powi(2)) / (d2 + gamma2 * gamma2)
}

/// A fitted value with the half-width of its 95 % confidence interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub ci95: f64,
}

impl Estimate {
    fn new(value: f64, variance: Option<f64>) -> Self {
        let ci95 = variance.filter(|v| *v >= 0.0).map_or(f64::INFINITY, |v| Z_95 * v.sqrt());
        Self { value, ci95 }
    }

    pub fn contains(&self, x: f64) -> bool {
        (x - self.value).abs() <= self.ci95
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QubitFit {
    pub omega0: Estimate,
    pub gamma1: Estimate,
    pub gamma2: Estimate,
    pub residual_norm: f64,
    pub iterations: usize,
}

impl QubitFit {
    pub fn emitter(&self) -> EmitterParams {
        EmitterParams::new(self.omega0.value, self.gamma1.value, self.gamma2.value)
    }
}

/// Half-width of the dip around `imin` at half depth below a unit baseline.
fn dip_half_width(x: &[f64], y: &[f64], imin: usize) -> Option<f64> {
    let level = 0.5 * (1.0 + y[imin]);
    let crossing = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = imin;
        for i in range {
            if y[i] >= level {
                let t = (level - y[prev]) / (y[i] - y[prev]);
                return Some(x[prev] + t * (x[i] - x[prev]));
            }
            prev = i;
        }
        None
    };
    let right = crossing(&mut (imin + 1..x.len()));
    let left = crossing(&mut (0..imin).rev());
    match (left, right) {
        (Some(l), Some(r)) => Some(0.5 * (r - l)),
        (Some(l), None) => Some(x[imin] - l),
        (None, Some(r)) => Some(r - x[imin]),
        (None, None) => None,
    }
}

/// Fits `(ω₀, Γ₁, Γ₂)` of an unmodulated emitter to a normalized spectrum.
///
/// Start point: ω₀ at the minimum, Γ₂ from the half-width of the dip and
/// Γ₁ = 2Γ₂(1 − √min).
pub fn fit_qubit_params(sp: &MeasuredSpectrum) -> Result<QubitFit> {
    if sp.len() < 4 {
        return Err(Error::DegenerateInput("a qubit fit needs at least 4 points".into()));
    }
    let x = sp.angular_scaled();
    let y = &sp.power;
    let (imin, &ymin) = y.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty");
    let ymax = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if ymax - ymin <= 1e-9 * ymax.max(1.0) {
        return Err(Error::FitDiverged("spectrum is flat".into()));
    }
    let omega0 = x[imin];
    let gamma2 = dip_half_width(&x, y, imin)
        .filter(|w| *w > 0.0)
        .ok_or_else(|| Error::FitDiverged("no resolvable dip".into()))?;
    let gamma1 = 2.0 * gamma2 * (1.0 - ymin.min(1.0).sqrt());
    let span = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - x.iter().cloned().fold(f64::INFINITY, f64::min);
    if span < MIN_SPAN_LINEWIDTHS * gamma2 {
        return Err(Error::invalid("spectrum", format!("spans fewer than {MIN_SPAN_LINEWIDTHS} linewidths")));
    }
    let residual = |p: &[f64]| -> Result<DVector<f64>> {
        Ok(DVector::from_iterator(
            x.len(),
            x.iter().zip(y).map(|(&w, &v)| lorentzian_transmission(w, p[0], p[1], p[2]) - v),
        ))
    };
    let scales = [gamma2, gamma2, gamma2];
    let fit = levenberg_marquardt(residual, &[omega0, gamma1.max(1e-3 * gamma2), gamma2], &scales)?;
    let p = &fit.params;
    if !(p.iter().all(|v| v.is_finite()) && p[1] > 0.0 && p[2] > 0.0) {
        return Err(Error::FitDiverged(format!("unphysical parameters {p:?}")));
    }
    if p[2] < 0.5 * p[1] * (1.0 - 1e-6) {
        return Err(Error::FitDiverged("fitted Γ₂ < Γ₁/2".into()));
    }
    let var = |i: usize| fit.covariance.as_ref().map(|c| c[(i, i)] * UNIT * UNIT);
    Ok(QubitFit {
        omega0: Estimate::new(p[0] * UNIT, var(0)),
        gamma1: Estimate::new(p[1] * UNIT, var(1)),
        gamma2: Estimate::new(p[2] * UNIT, var(2)),
        residual_norm: fit.residual_norm,
        iterations: fit.iterations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModulationFit {
    pub mod_amp: Estimate,
    pub residual_norm: f64,
}

/// One-parameter fit of the modulation amplitude with the qubit parameters
/// held fixed: a coarse scan over `[0, span/2]` followed by local refinement.
pub fn fit_modulation_amplitude(
    sp: &MeasuredSpectrum,
    known: &EmitterParams,
    m: &ModulationConfig,
) -> Result<ModulationFit> {
    let known = known.validate()?;
    let m = m.validate()?;
    if sp.len() < 2 {
        return Err(Error::DegenerateInput("a modulation fit needs at least 2 points".into()));
    }
    let omegas: Vec<f64> = sp.freqs_hz.iter().map(|f| TWO_PI * f).collect();
    let y = &sp.power;
    let model = |a: f64| -> Result<DVector<f64>> {
        let p = known.with_modulation(a.abs() * UNIT, 0.0);
        let mut out = DVector::zeros(omegas.len());
        for (k, (&w, &v)) in omegas.iter().zip(y).enumerate() {
            out[k] = single_qubit_t0(&p, &m, w)?.norm_sqr() - v;
        }
        Ok(out)
    };
    let span = (omegas.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - omegas.iter().cloned().fold(f64::INFINITY, f64::min))
        / UNIT;
    let a_max = 0.5 * span;
    let mut best = (0.0, f64::INFINITY);
    for i in 0..=SCAN_POINTS {
        let a = a_max * i as f64 / SCAN_POINTS as f64;
        let cost = model(a)?.norm_squared();
        if cost < best.1 {
            best = (a, cost);
        }
    }
    if !best.1.is_finite() {
        return Err(Error::FitDiverged("model is not finite".into()));
    }
    let scale = (m.omega_mod / UNIT).max(a_max / SCAN_POINTS as f64);
    let fit = levenberg_marquardt(|p: &[f64]| model(p[0]), &[best.0], &[scale])?;
    let a = fit.params[0].abs();
    if a > a_max {
        return Err(Error::FitDiverged(format!("amplitude {a} outside the scanned range")));
    }
    let var = fit.covariance.as_ref().map(|c| c[(0, 0)] * UNIT * UNIT);
    Ok(ModulationFit { mod_amp: Estimate::new(a * UNIT, var), residual_norm: fit.residual_norm })
}

/// Straight-line conversion from drive voltage to modulation amplitude.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CalibrationCurve {
    /// rad/s per volt.
    pub slope: f64,
    /// rad/s.
    pub intercept: f64,
    pub residual_norm: f64,
    pub n_points: usize,
}

impl CalibrationCurve {
    pub fn eval(&self, volts: f64) -> f64 {
        self.intercept + self.slope * volts
    }
}

/// Ordinary least-squares line through `(A_V, A_m)` pairs.
pub fn fit_linear_calibration(pairs: &[(f64, f64)]) -> Result<CalibrationCurve> {
    if pairs.iter().any(|(v, a)| !(v.is_finite() && a.is_finite())) {
        return Err(Error::invalid("pairs", "must be finite"));
    }
    let n = pairs.len() as f64;
    let mean_v = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_a = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let svv: f64 = pairs.iter().map(|p| (p.0 - mean_v).powi(2)).sum();
    let distinct = pairs.iter().any(|p| p.0 != pairs[0].0);
    if pairs.len() < 2 || !distinct || svv == 0.0 {
        return Err(Error::DegenerateInput("need at least two distinct voltages".into()));
    }
    let sva: f64 = pairs.iter().map(|p| (p.0 - mean_v) * (p.1 - mean_a)).sum();
    let slope = sva / svv;
    let intercept = mean_a - slope * mean_v;
    let residual_norm = pairs.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>().sqrt();
    Ok(CalibrationCurve { slope, intercept, residual_norm, n_points: pairs.len() })
}
