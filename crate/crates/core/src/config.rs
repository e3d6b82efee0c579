//! JSON scene description.
//!
//! Every frequency and rate is given in MHz using the `f/(2π)` convention
//! (`gamma1_mhz: 4.4` means Γ₁ = 2π·4.4 MHz). Phases are in units of π.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{
    angular_to_mhz, mhz_to_angular, DriveConfig, EmitterParams, ModulationConfig, Port, Scene,
    WaveguideArray,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitConfig {
    pub f0_mhz: f64,
    pub gamma1_mhz: f64,
    pub gamma2_mhz: f64,
    #[serde(default)]
    pub am_mhz: f64,
    #[serde(default)]
    pub alpha_over_pi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    pub f_mhz: f64,
    #[serde(default)]
    pub rabi_mhz: f64,
    #[serde(default)]
    pub port: Port,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulationSection {
    pub omega_mhz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub qubits: Vec<QubitConfig>,
    #[serde(default)]
    pub phi_over_pi: f64,
    pub drive: DriveSection,
    pub modulation: ModulationSection,
}

impl SceneConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Converts to angular units and validates.
    pub fn to_scene(&self) -> Result<Scene> {
        let emitters = self
            .qubits
            .iter()
            .map(|q| EmitterParams {
                omega0: mhz_to_angular(q.f0_mhz),
                gamma1: mhz_to_angular(q.gamma1_mhz),
                gamma2: mhz_to_angular(q.gamma2_mhz),
                mod_amp: mhz_to_angular(q.am_mhz),
                mod_phase: q.alpha_over_pi * PI,
            })
            .collect();
        Scene::new(
            WaveguideArray::new(emitters, self.phi_over_pi * PI),
            DriveConfig {
                omega: mhz_to_angular(self.drive.f_mhz),
                rabi: mhz_to_angular(self.drive.rabi_mhz),
                port: self.drive.port,
            },
            ModulationConfig::new(mhz_to_angular(self.modulation.omega_mhz)),
        )
        .validate()
    }

    pub fn from_scene(scene: &Scene) -> Self {
        Self {
            qubits: scene
                .array
                .emitters
                .iter()
                .map(|e| QubitConfig {
                    f0_mhz: angular_to_mhz(e.omega0),
                    gamma1_mhz: angular_to_mhz(e.gamma1),
                    gamma2_mhz: angular_to_mhz(e.gamma2),
                    am_mhz: angular_to_mhz(e.mod_amp),
                    alpha_over_pi: e.mod_phase / PI,
                })
                .collect(),
            phi_over_pi: scene.array.phi / PI,
            drive: DriveSection {
                f_mhz: angular_to_mhz(scene.drive.omega),
                rabi_mhz: angular_to_mhz(scene.drive.rabi),
                port: scene.drive.port,
            },
            modulation: ModulationSection { omega_mhz: angular_to_mhz(scene.modulation.omega_mod) },
        }
    }
}
