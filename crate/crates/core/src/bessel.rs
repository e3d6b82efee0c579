//! Integer-order Bessel functions of the first kind, J_n(x).
//!
//! Values are generated by Miller's backward recurrence normalized with
//! `J_0 + 2 Σ J_2k = 1`, which is stable for every order at once.

use crate::error::{Error, Result};

const RESCALE_ABOVE: f64 = 1e250;

/// J_0(x) ..= J_nmax(x) for any real x.
pub fn bessel_j_sequence(nmax: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; nmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    let reach = (nmax as f64).max(ax);
    let mut start = (reach + 20.0 + (50.0 * reach).sqrt()) as usize;
    start += start % 2;

    // Backward recurrence J_{k-1} = (2k/x) J_k − J_{k+1}.
    let mut above = 0.0_f64;
    let mut current = 1e-300_f64;
    let mut even_sum = 0.0_f64;
    for k in (1..=start).rev() {
        let below = 2.0 * k as f64 / ax * current - above;
        above = current;
        current = below;
        let order = k - 1;
        if order <= nmax {
            out[order] = current;
        }
        if order % 2 == 0 && order > 0 {
            even_sum += current;
        }
        if current.abs() > RESCALE_ABOVE {
            let s = 1.0 / RESCALE_ABOVE;
            current *= s;
            above *= s;
            even_sum *= s;
            for v in out.iter_mut() {
                *v *= s;
            }
        }
    }
    let norm = current + 2.0 * even_sum;
    for (n, v) in out.iter_mut().enumerate() {
        *v /= norm;
        if x < 0.0 && n % 2 == 1 {
            *v = -*v;
        }
    }
    out
}

/// J_n(x) for integer (possibly negative) order.
pub fn bessel_j(n: i64, x: f64) -> f64 {
    let table = BesselTable::new(x, n.unsigned_abs() as usize);
    table.get(n)
}

/// Cached J_n(x) for |n| ≤ nmax at fixed argument.
#[derive(Clone, Debug)]
pub struct BesselTable {
    x: f64,
    values: Vec<f64>,
}

impl BesselTable {
    pub fn new(x: f64, nmax: usize) -> Self {
        Self { x, values: bessel_j_sequence(nmax, x) }
    }

    pub fn argument(&self) -> f64 {
        self.x
    }

    pub fn nmax(&self) -> usize {
        self.values.len() - 1
    }

    /// J_n(x); zero beyond the tabulated range.
    pub fn get(&self, n: i64) -> f64 {
        let k = n.unsigned_abs() as usize;
        match self.values.get(k) {
            Some(&v) if n < 0 && k % 2 == 1 => -v,
            Some(&v) => v,
            None => 0.0,
        }
    }
}

/// Smallest `n_cut` with `Σ_{|n|>n_cut} J_n²(x) < tail_tol`.
pub fn truncation_order(x: f64, tail_tol: f64, ceiling: usize) -> Result<usize> {
    let probe = ceiling + 40;
    let j = bessel_j_sequence(probe, x);
    // tail[n] = Σ_{k>n} J_k², accumulated from the top so small terms are kept.
    let mut tail = 0.0;
    let mut tails = vec![0.0; probe + 1];
    for n in (0..probe).rev() {
        tail += j[n + 1] * j[n + 1];
        tails[n] = tail;
    }
    (0..=ceiling).find(|&n| 2.0 * tails[n] < tail_tol).ok_or_else(|| {
        Error::NonConvergence(format!(
            "Bessel tail for argument {x} exceeds {tail_tol:e} at order ceiling {ceiling}"
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// J_n(x) = (1/π) ∫_0^π cos(nτ − x sin τ) dτ; the periodic trapezoid rule
    /// converges geometrically.
    fn integral_oracle(n: i64, x: f64) -> f64 {
        let m = 4096;
        let h = 2.0 * PI / m as f64;
        (0..m)
            .map(|k| {
                let tau = k as f64 * h;
                (n as f64 * tau - x * tau.sin()).cos()
            })
            .sum::<f64>()
            / m as f64
    }

    #[test]
    fn matches_integral_representation() {
        for &x in &[0.0, 1e-3, 0.5, 1.0, 1.5, 3.0, 7.3, 20.0, -2.5] {
            for n in -12..=12 {
                let got = bessel_j(n, x);
                let want = integral_oracle(n, x);
                assert!((got - want).abs() < 1e-13, "J_{n}({x}): {got} vs {want}");
            }
        }
    }

    #[test]
    fn known_values() {
        assert!((bessel_j(0, 1.0) - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((bessel_j(1, 1.0) - 0.440_050_585_744_933_5).abs() < 1e-15);
        assert!((bessel_j(0, 2.404_825_557_695_773) ).abs() < 1e-15);
    }

    #[test]
    fn completeness_at_truncation() {
        for &x in &[0.5, 1.0, 1.5, 2.0, 3.0] {
            let n_cut = truncation_order(x, 1e-12, 200).unwrap();
            let t = BesselTable::new(x, n_cut);
            let s: f64 = (-(n_cut as i64)..=n_cut as i64).map(|n| t.get(n).powi(2)).sum();
            assert!((s - 1.0).abs() < 1e-12, "x={x} n_cut={n_cut} sum={s}");
        }
        assert_eq!(truncation_order(0.0, 1e-12, 10).unwrap(), 0);
    }

    #[test]
    fn ceiling_reports_non_convergence() {
        assert!(matches!(truncation_order(50.0, 1e-12, 5), Err(Error::NonConvergence(_))));
    }
}
