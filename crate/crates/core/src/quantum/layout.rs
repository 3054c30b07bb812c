use super::matrix::{ComplexMatrix, C64};
use super::state::DensityMatrix;
use crate::error::{Error, Result};

/// Qudit-major tensor layout: basis index `j * n_fock + m` for level `j`, photon number `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HilbertLayout {
    pub levels: usize,
    pub fock: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    Qudit,
    Resonator,
}

impl HilbertLayout {
    pub fn qudit(levels: usize) -> Result<Self> {
        if levels < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 levels, got {levels}")));
        }
        Ok(HilbertLayout { levels, fock: None })
    }

    pub fn combined(levels: usize, fock: usize) -> Result<Self> {
        if levels < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 levels, got {levels}")));
        }
        if fock == 0 {
            return Err(Error::Truncation("n_fock must be at least 1".into()));
        }
        Ok(HilbertLayout { levels, fock: Some(fock) })
    }

    pub fn fock_dim(&self) -> usize {
        self.fock.unwrap_or(1)
    }

    pub fn dim(&self) -> usize {
        self.levels * self.fock_dim()
    }

    pub fn index(&self, level: usize, photons: usize) -> usize {
        level * self.fock_dim() + photons
    }
}

/// Reduced state of one factor of a qudit-resonator state.
pub fn partial_trace(rho: &DensityMatrix, layout: &HilbertLayout, keep: Factor) -> Result<DensityMatrix> {
    if rho.dim() != layout.dim() {
        return Err(Error::Dimension(format!(
            "state has dimension {}, layout expects {}",
            rho.dim(),
            layout.dim()
        )));
    }
    let n = layout.fock_dim();
    let d = layout.levels;
    let m = rho.matrix();
    let out = match keep {
        Factor::Qudit => ComplexMatrix::from_fn(d, d, |j, k| {
            (0..n).map(|p| m[(j * n + p, k * n + p)]).sum::<C64>()
        }),
        Factor::Resonator => {
            if layout.fock.is_none() {
                return Err(Error::InvalidArgument("layout has no resonator factor".into()));
            }
            ComplexMatrix::from_fn(n, n, |p, q| (0..d).map(|j| m[(j * n + p, j * n + q)]).sum::<C64>())
        }
    };
    Ok(DensityMatrix::from_trusted(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_trace_of_product_state_recovers_factors() {
        let q = DensityMatrix::diagonal_mixture(&[0.25, 0.75]).unwrap();
        let r = DensityMatrix::diagonal_mixture(&[0.5, 0.3, 0.2]).unwrap();
        let layout = HilbertLayout::combined(2, 3).unwrap();
        let joint = q.tensor(&r);
        let tq = partial_trace(&joint, &layout, Factor::Qudit).unwrap();
        let tr = partial_trace(&joint, &layout, Factor::Resonator).unwrap();
        assert!((tq.matrix() - q.matrix()).norm() < 1e-14);
        assert!((tr.matrix() - r.matrix()).norm() < 1e-14);
    }

    #[test]
    fn resonator_trace_needs_a_resonator() {
        let layout = HilbertLayout::qudit(2).unwrap();
        let q = DensityMatrix::basis(2, 0).unwrap();
        assert!(partial_trace(&q, &layout, Factor::Resonator).is_err());
    }
}
