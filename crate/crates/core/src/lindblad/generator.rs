use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::density::bit;
use crate::error::{Error, Result};
use crate::scene::Scene;

/// Largest array the master-equation solver accepts.
pub const MAX_EMITTERS: usize = 8;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// How the coherence rate Γ₂ enters the dissipator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DephasingModel {
    /// Pure dephasing `(Γ₂ − Γ₁/2)/2 · (σz ρ σz − ρ)` on top of the radiative
    /// kernel, so populations decay at Γ₁ and coherences at Γ₂.
    #[default]
    PureDephasing,
    /// Γ₂ − Γ₁/2 added to the diagonal of the jump kernel itself; this also
    /// speeds up population decay.
    KernelDiagonal,
}

/// Liouvillian of N modulated emitters in the frame rotating with the drive.
///
/// `ρ̇ = −i(H_eff ρ − ρ H_eff†) + 2 Σ_jk c_jk σ_j ρ σ_k† + Σ_j (γ_j/2)(σz_j ρ σz_j − ρ)`
/// with `H_eff = H(t) − i Σ_jk c_jk σ_k† σ_j`. The only time dependence is the
/// diagonal modulation term, split as `cos(Ωt) d_c − sin(Ωt) d_s`.
#[derive(Clone, Debug)]
pub struct Generator {
    n_qubits: usize,
    dim: usize,
    omega_mod: f64,
    h_eff: DMatrix<Complex64>,
    kernel: DMatrix<f64>,
    /// Rate at which `(γ/2)(σz ρ σz − ρ)` damps coherences, i.e. γ.
    dephasing: Vec<f64>,
    mod_cos: Vec<f64>,
    mod_sin: Vec<f64>,
    fastest_rate: f64,
}

impl Generator {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn omega_mod(&self) -> f64 {
        self.omega_mod
    }

    /// Jump kernel `c_jk`.
    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    /// Static part of the effective Hamiltonian.
    pub fn effective_hamiltonian(&self) -> &DMatrix<Complex64> {
        &self.h_eff
    }

    /// Upper bound on the angular rate of any matrix element.
    pub fn fastest_rate(&self) -> f64 {
        self.fastest_rate
    }

    fn modulation_diagonal(&self, t: f64) -> Vec<f64> {
        let (s, c) = (self.omega_mod * t).sin_cos();
        self.mod_cos.iter().zip(&self.mod_sin).map(|(a, b)| c * a - s * b).collect()
    }

    /// `ρ̇` at time `t`; `rho` need not be a valid state.
    pub fn apply(&self, t: f64, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let diag = self.modulation_diagonal(t);
        self.apply_with_diagonal(&diag, rho)
    }

    fn apply_with_diagonal(&self, diag: &[f64], rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let d = self.dim;
        let hr = &self.h_eff * rho;
        let mut out = DMatrix::zeros(d, d);
        let rh = rho * self.h_eff.adjoint();
        for b in 0..d {
            for a in 0..d {
                let mod_term = (diag[a] - diag[b]) * rho[(a, b)];
                out[(a, b)] = -I * (hr[(a, b)] - rh[(a, b)] + mod_term);
            }
        }
        let n = self.n_qubits;
        for j in 0..n {
            let bj = bit(n, j);
            for k in 0..n {
                let c = self.kernel[(j, k)];
                if c == 0.0 {
                    continue;
                }
                let bk = bit(n, k);
                for b in (0..d).filter(|b| b & bk == 0) {
                    for a in (0..d).filter(|a| a & bj == 0) {
                        out[(a, b)] += 2.0 * c * rho[(a | bj, b | bk)];
                    }
                }
            }
        }
        for (j, &g) in self.dephasing.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let bj = bit(n, j);
            for b in 0..d {
                for a in 0..d {
                    if (a ^ b) & bj != 0 {
                        out[(a, b)] -= g * rho[(a, b)];
                    }
                }
            }
        }
        out
    }

    /// Column-major superoperator split `L(t) = L₀ + cos(Ωt) diag(l_c) − sin(Ωt) diag(l_s)`,
    /// vectorised as `vec(ρ)[a + d b] = ρ_ab`.
    pub fn superoperator(&self) -> Superoperator {
        let d = self.dim;
        let d2 = d * d;
        let zeros = vec![0.0; d];
        let mut l0 = DMatrix::zeros(d2, d2);
        let mut basis = DMatrix::zeros(d, d);
        for col in 0..d2 {
            let (a, b) = (col % d, col / d);
            basis[(a, b)] = Complex64::new(1.0, 0.0);
            let image = self.apply_with_diagonal(&zeros, &basis);
            l0.column_mut(col).copy_from_slice(image.as_slice());
            basis[(a, b)] = Complex64::new(0.0, 0.0);
        }
        let diag_of = |v: &[f64]| {
            DVector::from_fn(d2, |idx, _| {
                let (a, b) = (idx % d, idx / d);
                -I * (v[a] - v[b])
            })
        };
        Superoperator {
            static_part: l0,
            cos_part: diag_of(&self.mod_cos),
            sin_part: diag_of(&self.mod_sin),
            omega_mod: self.omega_mod,
        }
    }
}

/// Matrix form of a [`Generator`] acting on `vec(ρ)`.
#[derive(Clone, Debug)]
pub struct Superoperator {
    pub static_part: DMatrix<Complex64>,
    pub cos_part: DVector<Complex64>,
    pub sin_part: DVector<Complex64>,
    pub omega_mod: f64,
}

impl Superoperator {
    pub fn dim(&self) -> usize {
        self.static_part.nrows()
    }

    fn coefficients(&self, t: f64) -> DVector<Complex64> {
        let (s, c) = (self.omega_mod * t).sin_cos();
        &self.cos_part * Complex64::new(c, 0.0) - &self.sin_part * Complex64::new(s, 0.0)
    }

    /// `L(t) x` for a vector or a block of column vectors.
    pub fn apply(&self, t: f64, x: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut out = &self.static_part * x;
        let diag = self.coefficients(t);
        for col in 0..x.ncols() {
            for row in 0..x.nrows() {
                out[(row, col)] += diag[row] * x[(row, col)];
            }
        }
        out
    }
}

/// Builds the Liouvillian for `scene`, emitters taken in the order the
/// incident wave meets them.
pub fn build_generator(scene: &Scene, model: DephasingModel) -> Result<Generator> {
    scene.check()?;
    let array = scene.oriented_array();
    let n = array.len();
    if n > MAX_EMITTERS {
        return Err(Error::DimensionTooLarge(n, MAX_EMITTERS));
    }
    let d = 1usize << n;
    let g1 = array.gamma1();
    let phi = array.phi;
    let omega = scene.drive.omega;
    let rabi = scene.drive.rabi;

    let mut kernel = DMatrix::from_fn(n, n, |j, k| 0.5 * g1 * (phi * (j as f64 - k as f64)).cos());
    let mut dephasing = vec![0.0; n];
    for (j, e) in array.emitters.iter().enumerate() {
        match model {
            DephasingModel::PureDephasing => dephasing[j] = e.pure_dephasing(),
            DephasingModel::KernelDiagonal => kernel[(j, j)] += e.pure_dephasing(),
        }
    }

    let mut h = DMatrix::<Complex64>::zeros(d, d);
    for a in 0..d {
        for (j, e) in array.emitters.iter().enumerate() {
            if a & bit(n, j) != 0 {
                h[(a, a)] += e.omega0 - omega;
            }
        }
    }
    // Exchange Σ_{j≠k} (Γ₁/2) sin(φ|j−k|) σ_j† σ_k.
    for j in 0..n {
        for k in (0..n).filter(|&k| k != j) {
            let g = 0.5 * g1 * (phi * j.abs_diff(k) as f64).sin();
            let (bj, bk) = (bit(n, j), bit(n, k));
            for a in (0..d).filter(|a| a & bk != 0 && a & bj == 0) {
                h[(a ^ bk | bj, a)] += g;
            }
        }
    }
    // Drive (Ω_R/2)(e^{iφ(j+1)} σ_j† + h.c.).
    for j in 0..n {
        let bj = bit(n, j);
        let amp = Complex64::from_polar(0.5 * rabi, phi * (j + 1) as f64);
        for a in (0..d).filter(|a| a & bj == 0) {
            h[(a | bj, a)] += amp;
            h[(a, a | bj)] += amp.conj();
        }
    }
    // Non-Hermitian part −i Σ_jk c_jk σ_k† σ_j.
    for j in 0..n {
        for k in 0..n {
            let c = kernel[(j, k)];
            let (bj, bk) = (bit(n, j), bit(n, k));
            for a in (0..d).filter(|a| a & bj != 0) {
                let lowered = a ^ bj;
                if lowered & bk == 0 {
                    h[(lowered | bk, a)] -= I * c;
                }
            }
        }
    }

    let mut mod_cos = vec![0.0; d];
    let mut mod_sin = vec![0.0; d];
    for a in 0..d {
        for (j, e) in array.emitters.iter().enumerate() {
            if a & bit(n, j) != 0 {
                mod_cos[a] += e.mod_amp * e.mod_phase.cos();
                mod_sin[a] += e.mod_amp * e.mod_phase.sin();
            }
        }
    }

    let max_detuning = array
        .emitters
        .iter()
        .map(|e| (e.omega0 - omega).abs() + e.mod_amp)
        .fold(0.0, f64::max);
    let max_decay = array.emitters.iter().map(|e| e.gamma2 + e.gamma1).fold(0.0, f64::max);
    let fastest_rate = (max_detuning * n as f64)
        .max(scene.modulation.omega_mod)
        .max(rabi * n as f64)
        .max(g1 * n as f64)
        .max(max_decay);

    Ok(Generator {
        n_qubits: n,
        dim: d,
        omega_mod: scene.modulation.omega_mod,
        h_eff: h,
        kernel,
        dephasing,
        mod_cos,
        mod_sin,
        fastest_rate,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::scene::{mhz_to_angular, DriveConfig, EmitterParams, ModulationConfig, WaveguideArray};

    fn scene(n: usize, phi: f64, rabi: f64, am: f64) -> Scene {
        let e = EmitterParams::new(mhz_to_angular(6000.0), mhz_to_angular(4.4), mhz_to_angular(3.0))
            .with_modulation(mhz_to_angular(am), 0.7);
        Scene::new(
            WaveguideArray::new(vec![e; n], phi),
            DriveConfig::new(mhz_to_angular(6003.0), mhz_to_angular(rabi)),
            ModulationConfig::new(mhz_to_angular(20.0)),
        )
    }

    fn random_hermitian(d: usize, seed: u64) -> DMatrix<Complex64> {
        let mut state = seed;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let m = DMatrix::from_fn(d, d, |_, _| Complex64::new(next(), next()));
        (&m + m.adjoint()) * Complex64::new(0.5, 0.0)
    }

    #[test]
    fn bare_decay_rate() {
        let s = scene(1, 0.0, 0.0, 0.0);
        let g = build_generator(&s, DephasingModel::PureDephasing).unwrap();
        let mut rho = DMatrix::zeros(2, 2);
        rho[(1, 1)] = Complex64::new(1.0, 0.0);
        let dot = g.apply(0.3, &rho);
        assert!((dot[(1, 1)].re + mhz_to_angular(4.4)).abs() < 1e-6);
        assert!((dot[(0, 0)].re - mhz_to_angular(4.4)).abs() < 1e-6);
    }

    #[test]
    fn quarter_wave_kernel_is_purely_coherent() {
        let s = scene(2, PI / 2.0, 1.0, 0.0);
        let g = build_generator(&s, DephasingModel::PureDephasing).unwrap();
        let g1 = mhz_to_angular(4.4);
        assert!(g.kernel()[(0, 1)].abs() < 1e-9 * g1);
        // ⟨10| H |01⟩ carries the exchange (Γ₁/2) sin(π/2).
        assert!((g.effective_hamiltonian()[(0b10, 0b01)].re - 0.5 * g1).abs() < 1e-9 * g1);
    }

    #[test]
    fn trace_free_and_hermiticity_preserving() {
        for n in 1..=3 {
            for model in [DephasingModel::PureDephasing, DephasingModel::KernelDiagonal] {
                let g = build_generator(&scene(n, 0.9, 7.0, 15.0), model).unwrap();
                let rho = random_hermitian(g.dim(), n as u64 + 11);
                let dot = g.apply(1.3e-8, &rho);
                let scale = dot.norm();
                assert!(dot.trace().norm() < 1e-12 * scale);
                assert!((&dot - dot.adjoint()).norm() < 1e-12 * scale);
            }
        }
    }

    #[test]
    fn superoperator_matches_action() {
        let g = build_generator(&scene(2, 0.4, 3.0, 12.0), DephasingModel::PureDephasing).unwrap();
        let sup = g.superoperator();
        let rho = random_hermitian(4, 5);
        let t = 7.7e-9;
        let direct = g.apply(t, &rho);
        let x = DMatrix::from_column_slice(16, 1, rho.as_slice());
        let via = sup.apply(t, &x);
        assert!((DMatrix::from_column_slice(4, 4, via.as_slice()) - direct).norm() < 1e-6);
    }

    #[test]
    fn dimension_guard() {
        let err = build_generator(&scene(9, 0.0, 1.0, 0.0), DephasingModel::PureDephasing).unwrap_err();
        assert!(matches!(err, Error::DimensionTooLarge(9, 8)));
    }

    #[test]
    fn kernel_diagonal_model_speeds_population_decay() {
        let s = scene(1, 0.0, 0.0, 0.0);
        let g = build_generator(&s, DephasingModel::KernelDiagonal).unwrap();
        let mut rho = DMatrix::zeros(2, 2);
        rho[(1, 1)] = Complex64::new(1.0, 0.0);
        let expected = mhz_to_angular(4.4) + 2.0 * (mhz_to_angular(3.0) - mhz_to_angular(2.2));
        assert!((g.apply(0.0, &rho)[(1, 1)].re + expected).abs() < 1e-6);
    }
}
