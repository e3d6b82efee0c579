//! Domain types shared by every solver.
//!
//! All rates and frequencies are angular (rad/s). Conversion from the
//! `f/(2π)` values used in config files happens in [`crate::config`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};

pub const TWO_PI: f64 = 2.0 * PI;

/// Relative tolerance used when checking that all emitters share one Γ₁.
const COMMON_GAMMA1_RTOL: f64 = 1e-12;

/// Converts an ordinary frequency in Hz to an angular frequency in rad/s.
pub fn hz_to_angular(f: f64) -> f64 {
    TWO_PI * f
}

pub fn mhz_to_angular(f_mhz: f64) -> f64 {
    hz_to_angular(f_mhz * 1e6)
}

pub fn angular_to_mhz(w: f64) -> f64 {
    w / TWO_PI / 1e6
}

/// One two-level emitter with a sinusoidally modulated transition frequency
/// `omega0 + mod_amp * cos(Ω t + mod_phase)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmitterParams {
    pub omega0: f64,
    /// Radiative decay rate into the waveguide.
    pub gamma1: f64,
    /// Total coherence decay rate; `gamma1 / 2` is the radiative-only limit.
    pub gamma2: f64,
    pub mod_amp: f64,
    pub mod_phase: f64,
}

impl EmitterParams {
    pub fn new(omega0: f64, gamma1: f64, gamma2: f64) -> Self {
        Self { omega0, gamma1, gamma2, mod_amp: 0.0, mod_phase: 0.0 }
    }

    pub fn with_modulation(mut self, mod_amp: f64, mod_phase: f64) -> Self {
        self.mod_amp = mod_amp;
        self.mod_phase = mod_phase;
        self
    }

    /// Pure-dephasing part of the coherence decay, `Γ₂ − Γ₁/2`.
    pub fn pure_dephasing(&self) -> f64 {
        self.gamma2 - 0.5 * self.gamma1
    }

    pub(crate) fn violations(&self, prefix: &str) -> Vec<Violation> {
        let mut out = Vec::new();
        let field = |name: &str| {
            if prefix.is_empty() {
                name.to_string()
            } else {
                format!("{prefix}.{name}")
            }
        };
        for (name, value) in [
            ("omega0", self.omega0),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("mod_amp", self.mod_amp),
            ("mod_phase", self.mod_phase),
        ] {
            if !value.is_finite() {
                out.push(Violation::new(field(name), "must be finite"));
            }
        }
        if !(self.gamma1 > 0.0) {
            out.push(Violation::new(field("gamma1"), "must be > 0"));
        }
        if !(self.gamma2 >= 0.5 * self.gamma1) {
            out.push(Violation::new(field("gamma2"), "must be >= gamma1/2"));
        }
        if !(self.mod_amp >= 0.0) {
            out.push(Violation::new(field("mod_amp"), "must be >= 0"));
        }
        out
    }

    pub fn validate(self) -> Result<Self> {
        let v = self.violations("");
        if v.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidParameter(v))
        }
    }
}

/// Emitters ordered along the waveguide, adjacent ones separated by the
/// propagation phase `phi = ω₀ d / c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveguideArray {
    pub emitters: Vec<EmitterParams>,
    pub phi: f64,
}

impl WaveguideArray {
    pub fn new(emitters: Vec<EmitterParams>, phi: f64) -> Self {
        Self { emitters, phi }
    }

    pub fn len(&self) -> usize {
        self.emitters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.emitters.is_empty()
    }

    /// The common radiative rate. Only meaningful on a validated array.
    pub fn gamma1(&self) -> f64 {
        self.emitters[0].gamma1
    }

    /// Resonance of the first emitter; probe detunings are measured from it.
    pub fn reference_omega0(&self) -> f64 {
        self.emitters[0].omega0
    }

    pub fn max_mod_amp(&self) -> f64 {
        self.emitters.iter().map(|e| e.mod_amp).fold(0.0, f64::max)
    }

    /// Mirror image of the array: emitter order reversed.
    pub fn reversed(&self) -> Self {
        let mut emitters = self.emitters.clone();
        emitters.reverse();
        Self { emitters, phi: self.phi }
    }

    /// Copy with emitter `j`'s modulation phase replaced.
    pub fn with_mod_phase(&self, j: usize, alpha: f64) -> Self {
        let mut out = self.clone();
        out.emitters[j].mod_phase = alpha;
        out
    }

    pub(crate) fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.emitters.is_empty() {
            out.push(Violation::new("emitters", "list must be non-empty"));
        }
        for (j, e) in self.emitters.iter().enumerate() {
            out.extend(e.violations(&format!("emitters[{j}]")));
        }
        if let Some(first) = self.emitters.first() {
            for (j, e) in self.emitters.iter().enumerate().skip(1) {
                let scale = first.gamma1.abs().max(e.gamma1.abs());
                if (e.gamma1 - first.gamma1).abs() > COMMON_GAMMA1_RTOL * scale {
                    out.push(Violation::new(
                        format!("emitters[{j}].gamma1"),
                        "all emitters must share a common gamma1",
                    ));
                }
            }
        }
        if !(self.phi >= 0.0 && self.phi < TWO_PI) {
            out.push(Violation::new("phi", "must lie in [0, 2π)"));
        }
        out
    }

    pub fn validate(self) -> Result<Self> {
        let v = self.violations();
        if v.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidParameter(v))
        }
    }
}

/// Waveguide port through which the probe enters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Port {
    #[default]
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveConfig {
    /// Probe angular frequency ω.
    pub omega: f64,
    /// Rabi frequency Ω_R of the incident wave.
    pub rabi: f64,
    pub port: Port,
}

impl DriveConfig {
    pub fn new(omega: f64, rabi: f64) -> Self {
        Self { omega, rabi, port: Port::Left }
    }

    pub fn from_port(mut self, port: Port) -> Self {
        self.port = port;
        self
    }

    pub(crate) fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !self.omega.is_finite() {
            out.push(Violation::new("drive.omega", "must be finite"));
        }
        if !(self.rabi >= 0.0) || !self.rabi.is_finite() {
            out.push(Violation::new("drive.rabi", "must be finite and >= 0"));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulationConfig {
    /// Modulation angular frequency Ω.
    pub omega_mod: f64,
}

impl ModulationConfig {
    pub fn new(omega_mod: f64) -> Self {
        Self { omega_mod }
    }

    pub fn period(&self) -> f64 {
        TWO_PI / self.omega_mod
    }

    pub(crate) fn violations(&self) -> Vec<Violation> {
        if self.omega_mod > 0.0 && self.omega_mod.is_finite() {
            Vec::new()
        } else {
            vec![Violation::new("modulation.omega_mod", "must be finite and > 0")]
        }
    }

    pub fn validate(self) -> Result<Self> {
        let v = self.violations();
        if v.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidParameter(v))
        }
    }
}

/// Uniform grid of `count` points from `start` to `stop` inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl FrequencyGrid {
    pub fn new(start: f64, stop: f64, count: usize) -> Result<Self> {
        Self { start, stop, count }.validate()
    }

    pub fn validate(self) -> Result<Self> {
        let mut v = Vec::new();
        if self.count < 2 {
            v.push(Violation::new("grid.count", "must be >= 2"));
        }
        if !(self.start < self.stop) || !self.start.is_finite() || !self.stop.is_finite() {
            v.push(Violation::new("grid", "requires finite start < stop"));
        }
        if v.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidParameter(v))
        }
    }

    pub fn step(&self) -> f64 {
        (self.stop - self.start) / (self.count - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.count {
            self.stop
        } else {
            self.start + i as f64 * self.step()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.point(i)).collect()
    }
}

/// A complete scattering setup: emitters, probe and modulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub array: WaveguideArray,
    pub drive: DriveConfig,
    pub modulation: ModulationConfig,
}

impl Scene {
    pub fn new(array: WaveguideArray, drive: DriveConfig, modulation: ModulationConfig) -> Self {
        Self { array, drive, modulation }
    }

    /// Returns the scene unchanged when every invariant holds, otherwise one
    /// violation per broken invariant.
    pub fn validate(self) -> Result<Self> {
        let mut v = self.array.violations();
        v.extend(self.drive.violations());
        v.extend(self.modulation.violations());
        if v.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidParameter(v))
        }
    }

    pub(crate) fn check(&self) -> Result<()> {
        self.clone().validate().map(|_| ())
    }

    /// Emitters in the order the incident wave meets them.
    pub fn oriented_array(&self) -> WaveguideArray {
        match self.drive.port {
            Port::Left => self.array.clone(),
            Port::Right => self.array.reversed(),
        }
    }

    pub fn with_probe(&self, omega: f64) -> Self {
        let mut out = self.clone();
        out.drive.omega = omega;
        out
    }

    /// Probe placed at `detuning` from the reference resonance.
    pub fn with_detuning(&self, detuning: f64) -> Self {
        self.with_probe(self.array.reference_omega0() + detuning)
    }

    pub fn with_rabi(&self, rabi: f64) -> Self {
        let mut out = self.clone();
        out.drive.rabi = rabi;
        out
    }

    pub fn with_port(&self, port: Port) -> Self {
        let mut out = self.clone();
        out.drive.port = port;
        out
    }

    pub fn with_mod_phase(&self, j: usize, alpha: f64) -> Self {
        let mut out = self.clone();
        out.array = out.array.with_mod_phase(j, alpha);
        out
    }

    /// Adds `delta` to every emitter's modulation phase.
    pub fn with_global_phase_shift(&self, delta: f64) -> Self {
        let mut out = self.clone();
        for e in &mut out.array.emitters {
            e.mod_phase += delta;
        }
        out
    }

    pub fn probe_detuning(&self) -> f64 {
        self.drive.omega - self.array.reference_omega0()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emitter() -> EmitterParams {
        EmitterParams::new(mhz_to_angular(6129.0), mhz_to_angular(4.4), mhz_to_angular(3.9))
    }

    fn scene(emitters: Vec<EmitterParams>) -> Scene {
        Scene::new(
            WaveguideArray::new(emitters, PI / 2.0),
            DriveConfig::new(mhz_to_angular(6129.0), 0.0),
            ModulationConfig::new(mhz_to_angular(20.0)),
        )
    }

    #[test]
    fn radiative_limit_is_accepted() {
        let mut e = emitter();
        e.gamma2 = e.gamma1 / 2.0;
        assert!(scene(vec![e]).validate().is_ok());
    }

    #[test]
    fn gamma2_below_half_gamma1_is_rejected() {
        let mut e = emitter();
        e.gamma2 = 0.4 * e.gamma1;
        let err = scene(vec![e]).validate().unwrap_err();
        assert_eq!(err.fields(), vec!["emitters[0].gamma2"]);
    }

    #[test]
    fn empty_array_is_rejected() {
        let err = scene(vec![]).validate().unwrap_err();
        assert_eq!(err.fields(), vec!["emitters"]);
    }

    #[test]
    fn every_violation_is_reported() {
        let mut e = emitter();
        e.gamma1 = -1.0;
        e.mod_amp = -1.0;
        let mut s = scene(vec![e]);
        s.array.phi = 7.0;
        s.drive.rabi = -1.0;
        s.modulation.omega_mod = 0.0;
        let err = s.validate().unwrap_err();
        let fields = err.fields();
        for f in [
            "emitters[0].gamma1",
            "emitters[0].mod_amp",
            "phi",
            "drive.rabi",
            "modulation.omega_mod",
        ] {
            assert!(fields.contains(&f), "missing {f} in {fields:?}");
        }
    }

    #[test]
    fn mixed_gamma1_is_rejected() {
        let a = emitter();
        let mut b = emitter();
        b.gamma1 *= 1.01;
        b.gamma2 = b.gamma1;
        let err = scene(vec![a, b]).validate().unwrap_err();
        assert_eq!(err.fields(), vec!["emitters[1].gamma1"]);
    }

    #[test]
    fn validate_is_idempotent() {
        let s = scene(vec![emitter(), emitter()]);
        let once = s.clone().validate().unwrap();
        let twice = once.clone().validate().unwrap();
        assert_eq!(once, twice);
        assert_eq!(once, s);
    }

    #[test]
    fn hz_conversion() {
        assert_eq!(hz_to_angular(0.0), 0.0);
        assert!((hz_to_angular(4.4e6) - TWO_PI * 4.4e6).abs() < 1e-6);
        assert!((hz_to_angular(20e6) - TWO_PI * 2.0e7).abs() < 1e-6);
        assert!((angular_to_mhz(mhz_to_angular(6129.0)) - 6129.0).abs() < 1e-9);
    }

    #[test]
    fn grid_endpoints_are_exact() {
        let g = FrequencyGrid::new(-1.0, 1.0, 5).unwrap();
        assert_eq!(g.points(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert!(FrequencyGrid::new(1.0, 1.0, 5).is_err());
        assert!(FrequencyGrid::new(0.0, 1.0, 1).is_err());
    }
}
