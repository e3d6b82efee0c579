//! Command-line surface. Every frequency is in MHz (`f/(2π)` convention).

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use modmirror::analysis::SolverTier;
use modmirror::lindblad::DephasingModel;
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "modmirror", version, about = "Photon scattering from frequency-modulated emitters in a waveguide")]
pub struct Cli {
    /// Directory that receives the CSV outputs and manifest.json
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    /// Worker threads for grid sweeps
    #[arg(long, global = true, env = "MODMIRROR_WORKERS")]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Single-emitter elastic transmission |t_0|² against probe frequency
    SingleQubit(SingleQubitArgs),
    /// Weak-drive sideband amplitudes r_n, t_n
    Sidebands(SidebandsArgs),
    /// Resonance fluorescence of one modulated emitter against modulation frequency
    Mollow(MollowArgs),
    /// Emission spectrum of a driven array from the master equation
    Psd(PsdArgs),
    /// Forward/backward sideband power over modulation phase and detuning
    Map(MapArgs),
    /// Elastic and inelastic scattering against drive power and detuning
    PowerMap(PowerMapArgs),
    /// Calibration fits of measured transmission
    Fit(FitArgs),
    /// Phase between left- and right-incident transmission into a sideband
    Gyrator(GyratorArgs),
    /// Isolation and insertion loss of a sideband against modulation phase
    Isolator(IsolatorArgs),
    /// Repeat a run from its manifest.json
    #[serde(skip)]
    Rerun(RerunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SingleQubit(_) => "single-qubit",
            Command::Sidebands(_) => "sidebands",
            Command::Mollow(_) => "mollow",
            Command::Psd(_) => "psd",
            Command::Map(_) => "map",
            Command::PowerMap(_) => "power-map",
            Command::Fit(_) => "fit",
            Command::Gyrator(_) => "gyrator",
            Command::Isolator(_) => "isolator",
            Command::Rerun(_) => "rerun",
        }
    }
}

/// `START:STOP:COUNT`, endpoints included.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Sweep {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Sweep {
    pub const fn new(start: f64, stop: f64, count: usize) -> Self {
        Self { start, stop, count }
    }

    pub fn points(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.start],
            n => (0..n).map(|i| self.start + (self.stop - self.start) * i as f64 / (n - 1) as f64).collect(),
        }
    }
}

impl FromStr for Sweep {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected START:STOP:COUNT, got {s:?}"));
        }
        let num = |p: &str| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}"));
        let (start, stop) = (num(parts[0])?, num(parts[1])?);
        let count = parts[2].trim().parse::<usize>().map_err(|e| format!("{:?}: {e}", parts[2]))?;
        if !(start.is_finite() && stop.is_finite()) {
            return Err("sweep endpoints must be finite".into());
        }
        if count == 0 {
            return Err("sweep needs at least one point".into());
        }
        Ok(Self { start, stop, count })
    }
}

impl TryFrom<String> for Sweep {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<Sweep> for String {
    fn from(s: Sweep) -> String {
        s.to_string()
    }
}

impl fmt::Display for Sweep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}:{:?}:{}", self.start, self.stop, self.count)
    }
}

/// Sideband truncation: `auto` or a fixed |n| bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum NMax {
    Auto,
    Fixed(usize),
}

impl FromStr for NMax {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(NMax::Auto);
        }
        s.parse().map(NMax::Fixed).map_err(|_| format!("expected `auto` or a count, got {s:?}"))
    }
}

impl TryFrom<String> for NMax {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<NMax> for String {
    fn from(n: NMax) -> String {
        match n {
            NMax::Auto => "auto".into(),
            NMax::Fixed(k) => k.to_string(),
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    #[default]
    Floquet,
    Lindblad,
}

impl From<Tier> for SolverTier {
    fn from(t: Tier) -> Self {
        match t {
            Tier::Floquet => SolverTier::Floquet,
            Tier::Lindblad => SolverTier::Lindblad,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dephasing {
    #[default]
    PureDephasing,
    KernelDiagonal,
}

impl From<Dephasing> for DephasingModel {
    fn from(d: Dephasing) -> Self {
        match d {
            Dephasing::PureDephasing => DephasingModel::PureDephasing,
            Dephasing::KernelDiagonal => DephasingModel::KernelDiagonal,
        }
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleQubitArgs {
    /// Scene file; the first qubit and the modulation are used
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub f0_mhz: Option<f64>,
    #[arg(long)]
    pub gamma1_mhz: Option<f64>,
    #[arg(long)]
    pub gamma2_mhz: Option<f64>,
    /// Modulation amplitude
    #[arg(long)]
    pub am_mhz: Option<f64>,
    /// Modulation frequency
    #[arg(long)]
    pub omega_mhz: Option<f64>,
    /// Probe frequencies, default f0 ± 70 MHz
    #[arg(long, allow_hyphen_values = true)]
    pub sweep: Option<Sweep>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidebandsArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "auto")]
    pub nmax: NMax,
    #[arg(long, value_enum, default_value_t)]
    pub tier: Tier,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MollowArgs {
    /// Scene file; the first qubit and the drive are used
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Modulation frequencies
    #[arg(long, allow_hyphen_values = true, default_value = "30:70:41")]
    pub omega_scan: Sweep,
    /// Detection detunings from the drive
    #[arg(long, allow_hyphen_values = true, default_value = "-80:80:641")]
    pub detection: Sweep,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Detection detunings from the drive
    #[arg(long, allow_hyphen_values = true, default_value = "-60:60:481")]
    pub detection: Sweep,
    #[arg(long, value_enum, default_value_t)]
    pub dephasing: Dephasing,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Points of α over [−π, π]
    #[arg(long, default_value_t = 81)]
    pub alpha_steps: usize,
    #[arg(long, default_value_t = 161)]
    pub detuning_steps: usize,
    /// Probe detuning range from the first qubit, START:STOP
    #[arg(long, allow_hyphen_values = true, default_value = "-60:60")]
    pub detuning_range: String,
    /// Sideband orders, one output file each
    #[arg(long, allow_negative_numbers = true, default_values_t = [-1])]
    pub sideband: Vec<i64>,
    /// Detuning of the D(α) cut, default −Ω
    #[arg(long, allow_hyphen_values = true)]
    pub cut_detuning_mhz: Option<f64>,
    #[arg(long, value_enum, default_value_t)]
    pub tier: Tier,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerMapArgs {
    /// Scene file; without it two quarter-wave qubits with Ω = A_m = 5Γ₁ and α = (0, π)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// log₁₀ (Ω_R/Γ₁)²
    #[arg(long, allow_hyphen_values = true, default_value = "-2:2:21")]
    pub log_power: Sweep,
    /// Probe detunings from the first qubit
    #[arg(long, allow_hyphen_values = true, default_value = "-30:30:61")]
    pub detuning: Sweep,
    #[arg(long, default_value_t = 3)]
    pub nmax: usize,
    #[arg(long, value_enum, default_value_t)]
    pub dephasing: Dephasing,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitArgs {
    #[command(subcommand)]
    pub kind: FitKind,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitKind {
    /// ω₀, Γ₁, Γ₂ of an unmodulated qubit
    Qubit(FitSpectrumArgs),
    /// Modulation amplitude with the qubit parameters held fixed
    Modulation(FitModulationArgs),
    /// Linear drive-voltage to modulation-amplitude conversion
    Calibration(FitCalibrationArgs),
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSpectrumArgs {
    /// CSV with header `freq_mhz,power`
    #[arg(long)]
    pub spectrum: PathBuf,
    /// Background trace on the same grid; the spectrum is divided by it
    #[arg(long)]
    pub background: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitModulationArgs {
    #[command(flatten)]
    pub data: FitSpectrumArgs,
    /// Scene file; the first qubit and the modulation frequency are used
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub f0_mhz: Option<f64>,
    #[arg(long)]
    pub gamma1_mhz: Option<f64>,
    #[arg(long)]
    pub gamma2_mhz: Option<f64>,
    #[arg(long)]
    pub omega_mhz: Option<f64>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitCalibrationArgs {
    /// CSV with header `av_vpp,am_mhz`
    #[arg(long)]
    pub pairs: PathBuf,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GyratorArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true, default_value_t = 1)]
    pub sideband: i64,
    /// Probe detunings from the first qubit
    #[arg(long, allow_hyphen_values = true, default_value = "-60:60:121")]
    pub scan: Sweep,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolatorArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true, default_value_t = -1)]
    pub sideband: i64,
    /// Points of α over [−π, π]
    #[arg(long, default_value_t = 81)]
    pub alpha_steps: usize,
}

#[derive(Args, Debug, Clone, PartialEq)]
pub struct RerunArgs {
    pub manifest: PathBuf,
}
