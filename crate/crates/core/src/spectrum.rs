//! Emission spectra and the one-sided Fourier transform used to build them.

use num_complex::Complex64;
use serde::Serialize;

/// A delta-like spectral component at `detuning` carrying `weight`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoherentLine {
    pub detuning: f64,
    pub weight: f64,
}

/// Power spectral density on a detection grid, measured as detuning from the
/// drive (rad/s). The incoherent part is a density (per rad/s); coherent lines
/// are kept separately and binned only on request.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralDensity {
    pub detunings: Vec<f64>,
    pub incoherent: Vec<f64>,
    pub coherent: Vec<CoherentLine>,
}

impl SpectralDensity {
    pub fn zeros(detunings: Vec<f64>) -> Self {
        let n = detunings.len();
        Self { detunings, incoherent: vec![0.0; n], coherent: Vec::new() }
    }

    fn step(&self) -> f64 {
        if self.detunings.len() < 2 {
            1.0
        } else {
            (self.detunings[self.detunings.len() - 1] - self.detunings[0])
                / (self.detunings.len() - 1) as f64
        }
    }

    /// Incoherent density plus every coherent line that falls on the grid,
    /// deposited into its nearest bin as `weight / bin_width`.
    pub fn total(&self) -> Vec<f64> {
        let mut out = self.incoherent.clone();
        let h = self.step();
        let first = self.detunings[0];
        for line in &self.coherent {
            let k = ((line.detuning - first) / h).round();
            if k >= 0.0 && (k as usize) < out.len() {
                out[k as usize] += line.weight / h;
            }
        }
        out
    }

    /// Coherent line nearest to `detuning`, if any lies within `tol`.
    pub fn coherent_near(&self, detuning: f64, tol: f64) -> Option<CoherentLine> {
        self.coherent
            .iter()
            .copied()
            .filter(|l| (l.detuning - detuning).abs() <= tol)
            .min_by(|a, b| {
                (a.detuning - detuning).abs().total_cmp(&(b.detuning - detuning).abs())
            })
    }

    /// Local maxima of the incoherent density as `(detuning, value)`, strongest first.
    pub fn incoherent_peaks(&self) -> Vec<(f64, f64)> {
        local_maxima(&self.detunings, &self.incoherent)
    }
}

/// Interior local maxima of `y(x)`, sorted by decreasing height.
pub fn local_maxima(x: &[f64], y: &[f64]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = (1..y.len().saturating_sub(1))
        .filter(|&i| y[i] > y[i - 1] && y[i] >= y[i + 1])
        .map(|i| (x[i], y[i]))
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1));
    out
}

/// `(1/π) Re ∫_0^∞ e^{−iντ} C(τ) dτ` for `C` sampled at `τ_k = k h` and zero
/// afterwards. Each interval is integrated exactly for the linear
/// interpolant, so the error does not grow with `ν h`.
pub fn one_sided_transform(samples: &[Complex64], h: f64, nu: f64) -> f64 {
    if samples.len() < 2 {
        return 0.0;
    }
    let x = nu * h;
    // e0 = ∫_0^h e^{−iνs} ds, e1 = ∫_0^h s e^{−iνs} ds / h.
    let (e0, e1) = if x.abs() < 1e-3 {
        let ix = Complex64::new(0.0, x);
        (
            h * (1.0 - ix / 2.0 - x * x / 6.0),
            h * (0.5 - ix / 3.0 - x * x / 8.0),
        )
    } else {
        let a = Complex64::new(0.0, -nu);
        let eah = Complex64::from_polar(1.0, -x);
        let e0 = (eah - 1.0) / a;
        let e1 = (eah * (h / a - 1.0 / (a * a)) + 1.0 / (a * a)) / h;
        (e0, e1)
    };
    let step = Complex64::from_polar(1.0, -x);
    let mut phase = Complex64::new(1.0, 0.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..samples.len() - 1 {
        let c0 = samples[k];
        let c1 = samples[k + 1];
        acc += phase * (c0 * (e0 - e1) + c1 * e1);
        phase *= step;
        if k % 256 == 255 {
            // Re-anchor to keep the accumulated phase on the unit circle.
            phase = Complex64::from_polar(1.0, -x * (k + 1) as f64);
        }
    }
    acc.re / std::f64::consts::PI
}
