//! Photon scattering from frequency-modulated two-level emitters coupled to a
//! one-dimensional waveguide.
//!
//! * [`floquet`]: weak-drive sideband amplitudes and scattering coefficients.
//! * [`bloch`]: single-emitter Bloch dynamics and resonance fluorescence.
//! * [`lindblad`]: master equation for N emitters at arbitrary drive power.
//! * [`analysis`]: directivity, phase/detuning maps, isolator and gyrator figures.
//! * [`calibration`]: normalization and least-squares fits of transmission data.
//!
//! Internally every frequency is angular (rad/s).

pub mod analysis;
pub mod bessel;
pub mod bloch;
pub mod calibration;
pub mod config;
pub mod error;
pub mod floquet;
pub mod lindblad;
pub mod scene;
pub mod spectrum;
pub mod sweep;

pub use error::{Error, Result, Violation};
pub use scene::{
    hz_to_angular, mhz_to_angular, angular_to_mhz, DriveConfig, EmitterParams, FrequencyGrid,
    ModulationConfig, Port, Scene, WaveguideArray,
};
