//! Levenberg–Marquardt least squares with a central-difference Jacobian.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Convergence when every relative parameter step is below this.
pub const PARAM_STEP_TOL: f64 = 1e-9;
pub const MAX_ITERATIONS: usize = 500;
const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e16;

#[derive(Clone, Debug)]
pub struct LmFit {
    pub params: Vec<f64>,
    /// `s² (JᵀJ)⁻¹` with `s² = SSR/(m − p)`; `None` when JᵀJ is singular.
    pub covariance: Option<DMatrix<f64>>,
    /// Euclidean norm of the residual vector at the optimum.
    pub residual_norm: f64,
    pub iterations: usize,
}

fn jacobian<F>(f: &F, p: &[f64], r0: &DVector<f64>, scales: &[f64]) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<DVector<f64>>,
{
    let m = r0.len();
    let mut jac = DMatrix::zeros(m, p.len());
    let mut q = p.to_vec();
    for i in 0..p.len() {
        let h = 1e-6 * p[i].abs().max(scales[i]);
        q[i] = p[i] + h;
        let up = f(&q)?;
        q[i] = p[i] - h;
        let down = f(&q)?;
        q[i] = p[i];
        jac.set_column(i, &((up - down) / (2.0 * h)));
    }
    Ok(jac)
}

/// Minimizes `‖f(p)‖²` from `p0`. `scales` give the magnitude below which a
/// parameter is treated as zero when sizing finite differences and steps.
pub fn levenberg_marquardt<F>(f: F, p0: &[f64], scales: &[f64]) -> Result<LmFit>
where
    F: Fn(&[f64]) -> Result<DVector<f64>>,
{
    let n = p0.len();
    let mut p = p0.to_vec();
    let mut r = f(&p)?;
    if r.len() < n {
        return Err(Error::DegenerateInput("fewer data points than parameters".into()));
    }
    let mut cost = r.norm_squared();
    if !cost.is_finite() {
        return Err(Error::FitDiverged("residual is not finite at the start point".into()));
    }
    let mut lambda = LAMBDA_INIT;
    let mut jac = jacobian(&f, &p, &r, scales)?;
    for iter in 1..=MAX_ITERATIONS {
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &r;
        let floor = jtj.diagonal().max() * 1e-12;
        let mut accepted = false;
        while lambda < LAMBDA_MAX {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * jtj[(i, i)].max(floor).max(f64::MIN_POSITIVE);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&grad))) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(x, d)| x + d).collect();
            let r_trial = f(&trial)?;
            let c_trial = r_trial.norm_squared();
            if c_trial.is_finite() && c_trial <= cost {
                let small = step
                    .iter()
                    .zip(&p)
                    .zip(scales)
                    .all(|((d, x), s)| d.abs() <= PARAM_STEP_TOL * x.abs().max(*s));
                p = trial;
                r = r_trial;
                cost = c_trial;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if small {
                    return Ok(finish(&f, p, r, scales, iter)?);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No downhill step at any damping: already at the minimum to rounding.
            return finish(&f, p, r, scales, iter);
        }
        jac = jacobian(&f, &p, &r, scales)?;
    }
    Err(Error::FitDiverged(format!("no convergence in {MAX_ITERATIONS} iterations")))
}

fn finish<F>(f: &F, p: Vec<f64>, r: DVector<f64>, scales: &[f64], iterations: usize) -> Result<LmFit>
where
    F: Fn(&[f64]) -> Result<DVector<f64>>,
{
    let jac = jacobian(f, &p, &r, scales)?;
    let dof = (r.len() - p.len()).max(1) as f64;
    let s2 = r.norm_squared() / dof;
    let covariance = (jac.transpose() * &jac).try_inverse().map(|inv| inv * s2);
    Ok(LmFit { params: p, covariance, residual_norm: r.norm(), iterations })
}
