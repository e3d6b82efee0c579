use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Hermiticity tolerance (absolute, entrywise).
pub const HERMITICITY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-8;
/// Most negative eigenvalue still regarded as positive semidefinite.
pub const POSITIVITY_TOL: f64 = 1e-8;

/// Density matrix over `n` qubits in the lexicographic basis: qubit 0 is the
/// most significant bit and `1` marks the excited state.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    matrix: DMatrix<Complex64>,
}

pub(crate) fn bit(n_qubits: usize, j: usize) -> usize {
    1 << (n_qubits - 1 - j)
}

impl DensityMatrix {
    /// All qubits in |0⟩.
    pub fn ground(n_qubits: usize) -> Self {
        let d = 1 << n_qubits;
        let mut matrix = DMatrix::zeros(d, d);
        matrix[(0, 0)] = Complex64::new(1.0, 0.0);
        Self { n_qubits, matrix }
    }

    /// Pure product basis state given by its bit pattern.
    pub fn basis_state(n_qubits: usize, index: usize) -> Self {
        let d = 1 << n_qubits;
        let mut matrix = DMatrix::zeros(d, d);
        matrix[(index, index)] = Complex64::new(1.0, 0.0);
        Self { n_qubits, matrix }
    }

    /// Wraps a matrix after checking every invariant.
    pub fn from_matrix(n_qubits: usize, matrix: DMatrix<Complex64>) -> Result<Self> {
        let d = 1 << n_qubits;
        if matrix.shape() != (d, d) {
            return Err(Error::invalid("rho", format!("expected {d}x{d} matrix")));
        }
        let rho = Self { n_qubits, matrix };
        rho.check()?;
        Ok(rho)
    }

    pub(crate) fn from_raw(n_qubits: usize, matrix: DMatrix<Complex64>) -> Self {
        Self { n_qubits, matrix }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0_f64;
        for a in 0..d {
            for b in a..d {
                worst = worst.max((self.matrix[(a, b)] - self.matrix[(b, a)].conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Hermiticity, unit trace and positivity within the module tolerances.
    pub fn check(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > HERMITICITY_TOL {
            return Err(Error::invalid("rho", format!("not Hermitian (error {herm:e})")));
        }
        let tr = self.trace();
        if (tr - 1.0).norm() > TRACE_TOL {
            return Err(Error::invalid("rho", format!("trace {tr} differs from 1")));
        }
        let min = self.min_eigenvalue();
        if min < -POSITIVITY_TOL {
            return Err(Error::PositivityLost(format!("eigenvalue {min:e}")));
        }
        Ok(())
    }

    /// `Tr(ρ σ_j)`, the coherence ⟨σ_j⟩ of qubit `j` (σ lowers).
    pub fn coherence(&self, j: usize) -> Complex64 {
        let b = bit(self.n_qubits, j);
        (0..self.dim())
            .filter(|a| a & b == 0)
            .map(|a| self.matrix[(a | b, a)])
            .sum()
    }

    /// Excited-state population of qubit `j`.
    pub fn population(&self, j: usize) -> f64 {
        let b = bit(self.n_qubits, j);
        (0..self.dim()).filter(|a| a & b != 0).map(|a| self.matrix[(a, a)].re).sum()
    }

    pub fn distance(&self, other: &DensityMatrix) -> f64 {
        (&self.matrix - &other.matrix).norm()
    }
}

/// Time series of density matrices on a uniform grid.
#[derive(Clone, Debug)]
pub struct DensityTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub dt: f64,
    /// Step-halving estimate of the final-state error, when requested.
    pub error_estimate: Option<f64>,
}

impl DensityTrajectory {
    pub fn last(&self) -> &DensityMatrix {
        self.states.last().expect("trajectory is never empty")
    }

    /// `⟨σ_j⟩(t)` records for every qubit: `out[j][k]` at `times[k]`.
    pub fn coherences(&self) -> Vec<Vec<Complex64>> {
        let n = self.states[0].n_qubits();
        (0..n).map(|j| self.states.iter().map(|r| r.coherence(j)).collect()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ground_state_is_valid() {
        let rho = DensityMatrix::ground(2);
        rho.check().unwrap();
        assert_eq!(rho.population(0), 0.0);
        assert_eq!(rho.coherence(1), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn invariants_are_enforced() {
        let mut m = DMatrix::<Complex64>::zeros(2, 2);
        m[(0, 0)] = Complex64::new(1.2, 0.0);
        m[(1, 1)] = Complex64::new(-0.2, 0.0);
        assert!(matches!(DensityMatrix::from_matrix(1, m.clone()), Err(Error::PositivityLost(_))));
        m[(1, 1)] = Complex64::new(0.0, 0.0);
        assert!(matches!(DensityMatrix::from_matrix(1, m.clone()), Err(Error::InvalidParameter(_))));
        m[(0, 0)] = Complex64::new(0.5, 0.0);
        m[(1, 1)] = Complex64::new(0.5, 0.0);
        m[(0, 1)] = Complex64::new(0.0, 0.3);
        assert!(DensityMatrix::from_matrix(1, m.clone()).is_err());
        m[(1, 0)] = Complex64::new(0.0, -0.3);
        let rho = DensityMatrix::from_matrix(1, m).unwrap();
        // ⟨σ⟩ = ρ_{10} in the (|0⟩, |1⟩) basis.
        assert_eq!(rho.coherence(0), Complex64::new(0.0, -0.3));
    }

    #[test]
    fn qubit_zero_is_most_significant() {
        let rho = DensityMatrix::basis_state(3, 0b100);
        assert_eq!(rho.population(0), 1.0);
        assert_eq!(rho.population(2), 0.0);
    }
}
