//! Subcommand bodies. Each returns the record that goes into the manifest.

use std::f64::consts::PI;
use std::fs::File;
use std::path::{Path, PathBuf};

use modmirror::analysis::{
    alpha_frequency_map, gyrator_check, isolator_at, power_map, power_map_scene, sidebands, SolverTier,
};
use modmirror::bloch::{emission_spectrum, nested_mollow_lines};
use modmirror::calibration::{
    fit_linear_calibration, fit_modulation_amplitude, fit_qubit_params, normalize_transmission,
    read_calibration_pairs, Estimate, MeasuredSpectrum,
};
use modmirror::config::{DriveSection, ModulationSection, QubitConfig, SceneConfig};
use modmirror::floquet::{choose_truncation, single_qubit_t0, DEFAULT_TRUNCATION_TOL};
use modmirror::lindblad::emission_psd;
use modmirror::spectrum::SpectralDensity;
use modmirror::{angular_to_mhz, mhz_to_angular, sweep, Error, FrequencyGrid, ModulationConfig, Port};
use serde::Serialize;

use crate::args::*;
use crate::output::{Cell, RunRecord, Table};
use crate::CliError;

/// Per-MHz density from a per-(rad/s) one.
const PER_MHZ: f64 = 2.0 * PI * 1e6;

pub struct Ctx {
    pub out: PathBuf,
    /// Resolved scene taken from a manifest; wins over `--config`.
    pub config: Option<SceneConfig>,
}

impl Ctx {
    fn scene_config(&self, path: &Option<PathBuf>, default: impl FnOnce() -> SceneConfig) -> Result<SceneConfig, CliError> {
        if let Some(c) = &self.config {
            return Ok(c.clone());
        }
        match path {
            Some(p) => Ok(SceneConfig::from_json(&read_text(p)?)?),
            None => Ok(default()),
        }
    }

    fn dir(&self) -> &Path {
        &self.out
    }
}

fn read_text(p: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))
}

fn open(p: &Path) -> Result<File, CliError> {
    File::open(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))
}

fn qubit(f0: f64, g1: f64, g2: f64, am: f64, alpha_over_pi: f64) -> QubitConfig {
    QubitConfig { f0_mhz: f0, gamma1_mhz: g1, gamma2_mhz: g2, am_mhz: am, alpha_over_pi }
}

fn scene_config(qubits: Vec<QubitConfig>, phi_over_pi: f64, f_mhz: f64, rabi_mhz: f64, omega_mhz: f64) -> SceneConfig {
    SceneConfig {
        qubits,
        phi_over_pi,
        drive: DriveSection { f_mhz, rabi_mhz, port: Port::Left },
        modulation: ModulationSection { omega_mhz },
    }
}

/// Two identical qubits a quarter wavelength apart, the second modulated
/// with phase `alpha_over_pi`·π.
fn pair_config(alpha_over_pi: f64, f_mhz: f64, rabi_mhz: f64) -> SceneConfig {
    scene_config(
        vec![qubit(6000.0, 4.4, 4.1, 30.0, 0.0), qubit(6000.0, 4.4, 4.1, 30.0, alpha_over_pi)],
        0.5,
        f_mhz,
        rabi_mhz,
        20.0,
    )
}

fn tier_name(t: Tier) -> String {
    match t {
        Tier::Floquet => "floquet".into(),
        Tier::Lindblad => "lindblad".into(),
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    Sweep::new(a, b, n).points()
}

fn mhz_grid(s: &Sweep) -> Result<FrequencyGrid, CliError> {
    Ok(FrequencyGrid::new(mhz_to_angular(s.start), mhz_to_angular(s.stop), s.count)?)
}

fn nan_if(e: Error, tolerated: fn(&Error) -> bool) -> Result<(), CliError> {
    if tolerated(&e) {
        log::warn!("{e}");
        Ok(())
    } else {
        Err(e.into())
    }
}

pub fn single_qubit(ctx: &Ctx, a: &SingleQubitArgs) -> Result<RunRecord, CliError> {
    let mut cfg = ctx.scene_config(&a.config, || {
        scene_config(vec![qubit(6130.0, 4.4, 3.9, 0.0, 0.0)], 0.0, 6130.0, 0.0, 20.0)
    })?;
    cfg.qubits.truncate(1);
    let q = cfg.qubits.first_mut().ok_or_else(|| CliError::Input("config has no qubits".into()))?;
    q.f0_mhz = a.f0_mhz.unwrap_or(q.f0_mhz);
    q.gamma1_mhz = a.gamma1_mhz.unwrap_or(q.gamma1_mhz);
    q.gamma2_mhz = a.gamma2_mhz.unwrap_or(q.gamma2_mhz);
    q.am_mhz = a.am_mhz.unwrap_or(q.am_mhz);
    let f0 = q.f0_mhz;
    cfg.modulation.omega_mhz = a.omega_mhz.unwrap_or(cfg.modulation.omega_mhz);
    let scene = cfg.to_scene()?;
    let (p, m) = (scene.array.emitters[0], scene.modulation);
    let probe = a.sweep.unwrap_or(Sweep::new(f0 - 70.0, f0 + 70.0, 281)).points();

    let t0 = sweep::try_map_indexed(probe.len(), |i| single_qubit_t0(&p, &m, mhz_to_angular(probe[i])))?;
    let mut table = Table::new(&["freq_mhz", "re_t0", "im_t0", "abs_t0_sq"]);
    for (f, t) in probe.iter().zip(&t0) {
        table.push(vec![Cell::F(*f), Cell::F(t.re), Cell::F(t.im), Cell::F(t.norm_sqr())]);
    }
    let mut rec = RunRecord::new(Some(cfg), tier_name(Tier::Floquet));
    rec.shape("probe", &[probe.len()]);
    rec.table(ctx.dir(), "single_qubit.csv", &table)?;
    Ok(rec)
}

pub fn sidebands_cmd(ctx: &Ctx, a: &SidebandsArgs) -> Result<RunRecord, CliError> {
    let cfg = ctx.scene_config(&a.config, || pair_config(0.0, 6000.0, 0.0))?;
    let scene = cfg.to_scene()?;
    let n_max = match a.nmax {
        NMax::Auto => choose_truncation(&scene, DEFAULT_TRUNCATION_TOL)?,
        NMax::Fixed(k) => k,
    };
    let s = sidebands(&scene, n_max, SolverTier::from(a.tier))?;
    let mut table = Table::new(&["n", "re_r", "im_r", "re_t", "im_t"]);
    for n in -(n_max as i64)..=n_max as i64 {
        let (r, t) = (s.r(n), s.t(n));
        table.push(vec![Cell::I(n), Cell::F(r.re), Cell::F(r.im), Cell::F(t.re), Cell::F(t.im)]);
    }
    let mut rec = RunRecord::new(Some(cfg), tier_name(a.tier));
    rec.shape("orders", &[2 * n_max + 1]);
    rec.table(ctx.dir(), "sidebands.csv", &table)?;
    Ok(rec)
}

pub fn mollow(ctx: &Ctx, a: &MollowArgs) -> Result<RunRecord, CliError> {
    let mut cfg = ctx.scene_config(&a.config, || {
        scene_config(vec![qubit(6000.0, 4.4, 3.9, 10.4, 0.0)], 0.0, 6000.0, 52.0, 52.0)
    })?;
    cfg.qubits.truncate(1);
    let scene = cfg.to_scene()?;
    let (p, drive) = (scene.array.emitters[0], scene.drive);
    let grid = mhz_grid(&a.detection)?;
    let omegas = a.omega_scan.points();
    if omegas.iter().any(|w| !(*w > 0.0)) {
        return Err(CliError::Input("modulation frequencies must be > 0".into()));
    }

    let spectra = sweep::try_map_indexed(omegas.len(), |i| {
        emission_spectrum(&p, &drive, &ModulationConfig::new(mhz_to_angular(omegas[i])), &grid)
    })?;
    let mut density = Table::new(&["omega_mhz", "detection_mhz", "incoherent_per_mhz"]);
    let mut coherent = Table::new(&["omega_mhz", "detuning_mhz", "weight"]);
    let mut lines = Table::new(&["omega_mhz", "p", "q", "line_mhz"]);
    for (w, s) in omegas.iter().zip(&spectra) {
        for (d, v) in s.detunings.iter().zip(&s.incoherent) {
            density.push(vec![Cell::F(*w), Cell::F(angular_to_mhz(*d)), Cell::F(v * PER_MHZ)]);
        }
        for l in &s.coherent {
            coherent.push(vec![Cell::F(*w), Cell::F(angular_to_mhz(l.detuning)), Cell::F(l.weight)]);
        }
        let m = ModulationConfig::new(mhz_to_angular(*w));
        let nested = nested_mollow_lines(drive.rabi, p.omega0 - drive.omega, p.mod_amp, &m);
        for pp in -1..=1 {
            for q in -1..=1 {
                lines.push(vec![Cell::F(*w), Cell::I(pp as i64), Cell::I(q as i64), Cell::F(angular_to_mhz(nested.line(pp, q)))]);
            }
        }
    }
    let mut rec = RunRecord::new(Some(cfg), Some("bloch".to_string()));
    rec.shape("spectrum", &[omegas.len(), a.detection.count]);
    rec.table(ctx.dir(), "mollow.csv", &density)?;
    rec.table(ctx.dir(), "mollow_coherent.csv", &coherent)?;
    rec.table(ctx.dir(), "mollow_lines.csv", &lines)?;
    Ok(rec)
}

pub fn psd(ctx: &Ctx, a: &PsdArgs) -> Result<RunRecord, CliError> {
    let cfg = ctx.scene_config(&a.config, || pair_config(0.0, 6000.0, 10.0))?;
    let scene = cfg.to_scene()?;
    let grid = mhz_grid(&a.detection)?;
    let out = emission_psd(&scene, &grid, a.dephasing.into())?;

    let mut density = Table::new(&["detection_mhz", "transmission_per_mhz", "reflection_per_mhz"]);
    for i in 0..out.transmission.detunings.len() {
        density.push(vec![
            Cell::F(angular_to_mhz(out.transmission.detunings[i])),
            Cell::F(out.transmission.incoherent[i] * PER_MHZ),
            Cell::F(out.reflection.incoherent[i] * PER_MHZ),
        ]);
    }
    let mut lines = Table::new(&["port", "detuning_mhz", "weight"]);
    let mut push_lines = |name: &str, s: &SpectralDensity| {
        for l in &s.coherent {
            lines.push(vec![Cell::S(name.into()), Cell::F(angular_to_mhz(l.detuning)), Cell::F(l.weight)]);
        }
    };
    push_lines("transmission", &out.transmission);
    push_lines("reflection", &out.reflection);

    let mut rec = RunRecord::new(Some(cfg), tier_name(Tier::Lindblad));
    rec.shape("detection", &[a.detection.count]);
    rec.table(ctx.dir(), "psd.csv", &density)?;
    rec.table(ctx.dir(), "psd_lines.csv", &lines)?;
    Ok(rec)
}

fn optional(x: Option<f64>) -> Cell {
    Cell::F(x.unwrap_or(f64::NAN))
}

pub fn map(ctx: &Ctx, a: &MapArgs) -> Result<RunRecord, CliError> {
    let cfg = ctx.scene_config(&a.config, || pair_config(0.0, 6000.0, 0.0))?;
    let scene = cfg.to_scene()?;
    if a.alpha_steps == 0 || a.detuning_steps == 0 {
        return Err(CliError::Input("--alpha-steps and --detuning-steps must be >= 1".into()));
    }
    let range: Sweep = format!("{}:{}", a.detuning_range, a.detuning_steps)
        .parse()
        .map_err(|e| CliError::Input(format!("--detuning-range: {e}")))?;
    let alphas = linspace(-PI, PI, a.alpha_steps);
    let detunings: Vec<f64> = range.points().into_iter().map(mhz_to_angular).collect();
    let cut = mhz_to_angular(a.cut_detuning_mhz.unwrap_or(-cfg.modulation.omega_mhz));
    let tier = SolverTier::from(a.tier);

    let mut rec = RunRecord::new(Some(cfg.clone()), tier_name(a.tier));
    rec.shape("map", &[alphas.len(), detunings.len()]);
    rec.shape("cut", &[alphas.len()]);
    for &n in &a.sideband {
        let m = alpha_frequency_map(&scene, &alphas, &detunings, n, tier)?;
        let mut table = Table::new(&["alpha_over_pi", "detuning_mhz", "p_fwd", "p_bwd", "directivity"]);
        for (r, (f, b)) in m.records.iter().zip(m.normalized()) {
            table.push(vec![Cell::F(r.alpha / PI), Cell::F(angular_to_mhz(r.detuning)), Cell::F(f), Cell::F(b), optional(r.directivity)]);
        }
        rec.table(ctx.dir(), &format!("map_n{n}.csv"), &table)?;

        let c = alpha_frequency_map(&scene, &alphas, &[cut], n, tier)?;
        let mut table = Table::new(&["alpha_over_pi", "detuning_mhz", "p_fwd", "p_bwd", "directivity"]);
        for r in &c.records {
            table.push(vec![Cell::F(r.alpha / PI), Cell::F(angular_to_mhz(r.detuning)), Cell::F(r.p_forward), Cell::F(r.p_backward), optional(r.directivity)]);
        }
        rec.table(ctx.dir(), &format!("cut_n{n}.csv"), &table)?;
    }
    Ok(rec)
}

pub fn power_map_cmd(ctx: &Ctx, a: &PowerMapArgs) -> Result<RunRecord, CliError> {
    let cfg = ctx.scene_config(&a.config, || {
        let g1 = mhz_to_angular(4.4);
        SceneConfig::from_scene(&power_map_scene(mhz_to_angular(6000.0), g1, 0.5 * g1))
    })?;
    let scene = cfg.to_scene()?;
    let g1 = scene.array.gamma1();
    let log_power = a.log_power.points();
    let rabis: Vec<f64> = log_power.iter().map(|x| g1 * 10f64.powf(0.5 * x)).collect();
    let detunings: Vec<f64> = a.detuning.points().into_iter().map(mhz_to_angular).collect();
    let pm = power_map(&scene, &rabis, &detunings, a.nmax, a.dephasing.into())?;

    let mut table = Table::new(&[
        "log10_power", "rabi_mhz", "detuning_mhz", "r_elastic", "t_elastic", "r_inelastic", "t_inelastic",
        "stokes_fwd", "stokes_bwd",
    ]);
    for (i, x) in log_power.iter().enumerate() {
        for c in pm.row(i) {
            table.push(vec![
                Cell::F(*x),
                Cell::F(angular_to_mhz(c.rabi)),
                Cell::F(angular_to_mhz(c.detuning)),
                Cell::F(c.r_elastic),
                Cell::F(c.t_elastic),
                Cell::F(c.r_inelastic),
                Cell::F(c.t_inelastic),
                Cell::F(c.stokes_forward),
                Cell::F(c.stokes_backward),
            ]);
        }
    }
    let mut rec = RunRecord::new(Some(cfg), tier_name(Tier::Lindblad));
    rec.shape("power_map", &[rabis.len(), detunings.len()]);
    rec.table(ctx.dir(), "power_map.csv", &table)?;
    Ok(rec)
}

/// A fitted value in MHz.
#[derive(Serialize)]
struct EstimateMhz {
    value: f64,
    ci95: f64,
}

impl From<Estimate> for EstimateMhz {
    fn from(e: Estimate) -> Self {
        Self { value: angular_to_mhz(e.value), ci95: angular_to_mhz(e.ci95) }
    }
}

fn estimate_table(rows: &[(&str, &EstimateMhz)]) -> Table {
    let mut t = Table::new(&["parameter", "value", "ci95"]);
    for (name, e) in rows {
        t.push(vec![Cell::S(name.to_string()), Cell::F(e.value), Cell::F(e.ci95)]);
    }
    t
}

fn load_spectrum(a: &FitSpectrumArgs) -> Result<MeasuredSpectrum, CliError> {
    let raw = MeasuredSpectrum::from_csv(open(&a.spectrum)?)?;
    match &a.background {
        Some(b) => Ok(normalize_transmission(&raw, &MeasuredSpectrum::from_csv(open(b)?)?)?),
        None => Ok(raw),
    }
}

pub fn fit(ctx: &Ctx, a: &FitArgs) -> Result<RunRecord, CliError> {
    match &a.kind {
        FitKind::Qubit(s) => {
            let sp = load_spectrum(s)?;
            let f = fit_qubit_params(&sp)?;
            #[derive(Serialize)]
            struct Out {
                f0_mhz: EstimateMhz,
                gamma1_mhz: EstimateMhz,
                gamma2_mhz: EstimateMhz,
                residual_norm: f64,
                iterations: usize,
            }
            let out = Out {
                f0_mhz: f.omega0.into(),
                gamma1_mhz: f.gamma1.into(),
                gamma2_mhz: f.gamma2.into(),
                residual_norm: f.residual_norm,
                iterations: f.iterations,
            };
            let table = estimate_table(&[("f0_mhz", &out.f0_mhz), ("gamma1_mhz", &out.gamma1_mhz), ("gamma2_mhz", &out.gamma2_mhz)]);
            let mut rec = RunRecord::new(None, Some("lorentzian".to_string()));
            rec.shape("spectrum", &[sp.len()]);
            rec.table(ctx.dir(), "fit_qubit.csv", &table)?;
            rec.json(ctx.dir(), "fit_qubit.json", &out)?;
            Ok(rec)
        }
        FitKind::Modulation(m) => {
            let base = match (&ctx.config, &m.config) {
                (None, None) => None,
                _ => Some(ctx.scene_config(&m.config, || unreachable!())?),
            };
            let q0 = base.as_ref().and_then(|c| c.qubits.first());
            let pick = |flag: Option<f64>, from: Option<f64>, name: &str| {
                flag.or(from).ok_or_else(|| CliError::Input(format!("--{name} or --config is required")))
            };
            let f0 = pick(m.f0_mhz, q0.map(|q| q.f0_mhz), "f0-mhz")?;
            let g1 = pick(m.gamma1_mhz, q0.map(|q| q.gamma1_mhz), "gamma1-mhz")?;
            let g2 = pick(m.gamma2_mhz, q0.map(|q| q.gamma2_mhz), "gamma2-mhz")?;
            let omega = pick(m.omega_mhz, base.as_ref().map(|c| c.modulation.omega_mhz), "omega-mhz")?;
            let cfg = scene_config(vec![qubit(f0, g1, g2, 0.0, 0.0)], 0.0, f0, 0.0, omega);
            let scene = cfg.to_scene()?;
            let sp = load_spectrum(&m.data)?;
            let f = fit_modulation_amplitude(&sp, &scene.array.emitters[0], &scene.modulation)?;
            #[derive(Serialize)]
            struct Out {
                am_mhz: EstimateMhz,
                residual_norm: f64,
            }
            let out = Out { am_mhz: f.mod_amp.into(), residual_norm: f.residual_norm };
            let table = estimate_table(&[("am_mhz", &out.am_mhz)]);
            let mut rec = RunRecord::new(Some(cfg), Some("floquet".to_string()));
            rec.shape("spectrum", &[sp.len()]);
            rec.table(ctx.dir(), "fit_modulation.csv", &table)?;
            rec.json(ctx.dir(), "fit_modulation.json", &out)?;
            Ok(rec)
        }
        FitKind::Calibration(c) => {
            let pairs = read_calibration_pairs(open(&c.pairs)?)?;
            let f = fit_linear_calibration(&pairs)?;
            #[derive(Serialize)]
            struct Out {
                slope_mhz_per_vpp: f64,
                intercept_mhz: f64,
                residual_norm_mhz: f64,
                n_points: usize,
            }
            let out = Out {
                slope_mhz_per_vpp: angular_to_mhz(f.slope),
                intercept_mhz: angular_to_mhz(f.intercept),
                residual_norm_mhz: angular_to_mhz(f.residual_norm),
                n_points: f.n_points,
            };
            let mut table = Table::new(&["parameter", "value"]);
            table.push(vec![Cell::S("slope_mhz_per_vpp".into()), Cell::F(out.slope_mhz_per_vpp)]);
            table.push(vec![Cell::S("intercept_mhz".into()), Cell::F(out.intercept_mhz)]);
            let mut rec = RunRecord::new(None, Some("linear".to_string()));
            rec.shape("pairs", &[pairs.len()]);
            rec.table(ctx.dir(), "fit_calibration.csv", &table)?;
            rec.json(ctx.dir(), "fit_calibration.json", &out)?;
            Ok(rec)
        }
    }
}

pub fn gyrator(ctx: &Ctx, a: &GyratorArgs) -> Result<RunRecord, CliError> {
    let cfg = ctx.scene_config(&a.config, || pair_config(1.0, 6000.0, 0.0))?;
    let scene = cfg.to_scene()?;
    let detunings = a.scan.points();
    let cells = sweep::map_indexed(detunings.len(), |i| gyrator_check(&scene.with_detuning(mhz_to_angular(detunings[i])), a.sideband));

    let mut table = Table::new(&[
        "detuning_mhz", "re_t_left", "im_t_left", "re_t_right", "im_t_right", "phase_diff_over_pi",
    ]);
    for (d, g) in detunings.iter().zip(cells) {
        match g {
            Ok(g) => table.push(vec![
                Cell::F(*d),
                Cell::F(g.t_left.re),
                Cell::F(g.t_left.im),
                Cell::F(g.t_right.re),
                Cell::F(g.t_right.im),
                Cell::F(g.phase_difference / PI),
            ]),
            Err(e) => {
                nan_if(e, |e| matches!(e, Error::AmplitudeTooSmall(_)))?;
                let mut row = vec![Cell::F(*d)];
                row.extend((0..5).map(|_| Cell::F(f64::NAN)));
                table.push(row);
            }
        }
    }
    let mut rec = RunRecord::new(Some(cfg), tier_name(Tier::Floquet));
    rec.shape("scan", &[detunings.len()]);
    rec.table(ctx.dir(), "gyrator.csv", &table)?;
    Ok(rec)
}

pub fn isolator(ctx: &Ctx, a: &IsolatorArgs) -> Result<RunRecord, CliError> {
    let cfg = ctx.scene_config(&a.config, || pair_config(0.0, 6020.0, 0.0))?;
    let scene = cfg.to_scene()?;
    if scene.array.len() < 2 {
        return Err(CliError::Input("the isolator scan needs at least two qubits".into()));
    }
    if a.alpha_steps == 0 {
        return Err(CliError::Input("--alpha-steps must be >= 1".into()));
    }
    let alphas = linspace(-PI, PI, a.alpha_steps);
    let alpha0 = scene.array.emitters[0].mod_phase;
    let cells = sweep::map_indexed(alphas.len(), |i| isolator_at(&scene.with_mod_phase(1, alpha0 + alphas[i]), a.sideband));

    let mut table = Table::new(&["alpha_over_pi", "s21", "s12", "isolation_db", "insertion_loss_db"]);
    for (alpha, m) in alphas.iter().zip(cells) {
        match m {
            Ok(m) => table.push(vec![
                Cell::F(alpha / PI),
                Cell::F(m.s21),
                Cell::F(m.s12),
                Cell::F(m.isolation_db),
                Cell::F(m.insertion_loss_db),
            ]),
            Err(e) => {
                nan_if(e, |e| matches!(e, Error::Undefined(_)))?;
                let mut row = vec![Cell::F(alpha / PI)];
                row.extend((0..4).map(|_| Cell::F(f64::NAN)));
                table.push(row);
            }
        }
    }
    let mut rec = RunRecord::new(Some(cfg), tier_name(Tier::Floquet));
    rec.shape("alpha", &[alphas.len()]);
    rec.table(ctx.dir(), "isolator.csv", &table)?;
    Ok(rec)
}
