use nalgebra::DVector;

use super::matrix::{hermitian_eigenvalues, hermiticity_defect, is_finite, trace, ComplexMatrix, C64};
use crate::error::{Error, Result};

/// Eigenvalues in `[-NEGATIVE_EIGENVALUE_TOLERANCE, 0)` are treated as zero; anything
/// more negative is an error.
pub const NEGATIVE_EIGENVALUE_TOLERANCE: f64 = 1e-6;
/// Eigenvalues below this are dropped from the entropy sum.
pub const ENTROPY_CUTOFF: f64 = 1e-14;

const HERMITICITY_TOLERANCE: f64 = 1e-10;
const TRACE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityDiagnostics {
    pub hermiticity_defect: f64,
    pub trace_defect: f64,
    pub min_eigenvalue: f64,
}

impl DensityDiagnostics {
    pub fn within(&self, hermiticity: f64, trace: f64) -> bool {
        self.hermiticity_defect <= hermiticity
            && self.trace_defect <= trace
            && self.min_eigenvalue >= -NEGATIVE_EIGENVALUE_TOLERANCE
    }
}

pub fn validate_density(m: &ComplexMatrix) -> DensityDiagnostics {
    let ev = hermitian_eigenvalues(m);
    DensityDiagnostics {
        hermiticity_defect: hermiticity_defect(m),
        trace_defect: (trace(m) - C64::new(1.0, 0.0)).norm(),
        min_eigenvalue: ev.first().copied().unwrap_or(0.0),
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "density matrix must be square and nonempty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if !is_finite(&m) {
            return Err(Error::InvalidState("non-finite entry".into()));
        }
        let d = validate_density(&m);
        if d.hermiticity_defect > HERMITICITY_TOLERANCE {
            return Err(Error::InvalidState(format!(
                "not Hermitian (defect {:e})",
                d.hermiticity_defect
            )));
        }
        if d.trace_defect > TRACE_TOLERANCE {
            return Err(Error::InvalidState(format!("trace off by {:e}", d.trace_defect)));
        }
        if d.min_eigenvalue < -NEGATIVE_EIGENVALUE_TOLERANCE {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {:e}",
                d.min_eigenvalue
            )));
        }
        Ok(DensityMatrix(m))
    }

    /// Wraps a matrix the caller has already validated (or repaired).
    pub(crate) fn from_trusted(m: ComplexMatrix) -> Self {
        DensityMatrix(m)
    }

    pub fn pure(psi: &KetState) -> Self {
        let v = psi.vector();
        DensityMatrix(v * v.adjoint())
    }

    pub fn basis(dim: usize, level: usize) -> Result<Self> {
        if level >= dim {
            return Err(Error::LevelIndex { index: level, levels: dim });
        }
        let mut m = ComplexMatrix::zeros(dim, dim);
        m[(level, level)] = C64::new(1.0, 0.0);
        Ok(DensityMatrix(m))
    }

    pub fn diagonal_mixture(probabilities: &[f64]) -> Result<Self> {
        let n = probabilities.len();
        let m = ComplexMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(probabilities[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        DensityMatrix::new(m)
    }

    /// Kronecker product, first factor major.
    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix(self.0.kronecker(&other.0))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn populations(&self) -> Vec<f64> {
        self.0.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn purity(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn diagnostics(&self) -> DensityDiagnostics {
        validate_density(&self.0)
    }
}

/// Normalized state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct KetState(DVector<C64>);

impl KetState {
    /// Normalizes the input; errors on a zero or non-finite vector.
    pub fn new(v: DVector<C64>) -> Result<Self> {
        let norm = v.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::InvalidState(format!("cannot normalize vector of norm {norm}")));
        }
        Ok(KetState(v / C64::new(norm, 0.0)))
    }

    pub fn basis(dim: usize, level: usize) -> Result<Self> {
        if level >= dim {
            return Err(Error::LevelIndex { index: level, levels: dim });
        }
        let mut v = DVector::zeros(dim);
        v[level] = C64::new(1.0, 0.0);
        Ok(KetState(v))
    }

    pub(crate) fn from_trusted(v: DVector<C64>) -> Self {
        KetState(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn vector(&self) -> &DVector<C64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<C64> {
        self.0
    }
}

/// `-Tr(rho ln rho)` in nats.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    entropy_of_matrix(rho.matrix())
}

pub(crate) fn entropy_of_matrix(m: &ComplexMatrix) -> Result<f64> {
    let ev = hermitian_eigenvalues(m);
    let mut s = 0.0;
    for &l in &ev {
        if l < -NEGATIVE_EIGENVALUE_TOLERANCE {
            return Err(Error::Numerical(format!("negative eigenvalue {l:e} in entropy")));
        }
        if l > ENTROPY_CUTOFF {
            s -= l * l.ln();
        }
    }
    // eigenvalues marginally above 1 give a tiny negative sum
    Ok(s.max(0.0))
}
