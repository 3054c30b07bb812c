use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

pub fn anticommutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b + b * a
}

pub fn trace(m: &ComplexMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// `Tr(op * rho)` without forming the product.
pub fn expectation(op: &ComplexMatrix, rho: &ComplexMatrix) -> C64 {
    let n = op.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += op[(i, j)] * rho[(j, i)];
        }
    }
    acc
}

/// Largest entrywise modulus of `m - m^dagger`.
pub fn hermiticity_defect(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn is_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Vec<f64> {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_of_identities_is_identity() {
        let k = kron(&identity(2), &identity(3));
        assert_eq!(k, identity(6));
    }

    #[test]
    fn expectation_matches_trace_of_product() {
        let a = ComplexMatrix::from_fn(3, 3, |i, j| C64::new(i as f64 + 0.5, j as f64 - 1.0));
        let b = ComplexMatrix::from_fn(3, 3, |i, j| C64::new((i * j) as f64, 0.25 * i as f64));
        let direct = trace(&(&a * &b));
        assert!((expectation(&a, &b) - direct).norm() < 1e-12);
    }

    #[test]
    fn eigenvalues_of_pauli_x() {
        let mut x = ComplexMatrix::zeros(2, 2);
        x[(0, 1)] = C64::new(1.0, 0.0);
        x[(1, 0)] = C64::new(1.0, 0.0);
        let ev = hermitian_eigenvalues(&x);
        assert!((ev[0] + 1.0).abs() < 1e-12 && (ev[1] - 1.0).abs() < 1e-12);
    }
}
