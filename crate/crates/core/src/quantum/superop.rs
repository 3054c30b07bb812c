use super::matrix::{expectation, ComplexMatrix, C64};

/// Collapse operator with its rate; contributes `rate * D[operator]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LindbladTerm {
    pub operator: ComplexMatrix,
    pub rate: f64,
}

/// `D[L] rho = L rho L^dagger - {L^dagger L, rho} / 2`.
pub fn dissipator(l: &ComplexMatrix, rho: &ComplexMatrix) -> ComplexMatrix {
    let ld = l.adjoint();
    let ldl = &ld * l;
    l * rho * &ld - (&ldl * rho + rho * &ldl) * C64::new(0.5, 0.0)
}

/// `M[L] rho = L rho + rho L^dagger - <L + L^dagger> rho`.
pub fn measurement_superop(l: &ComplexMatrix, rho: &ComplexMatrix) -> ComplexMatrix {
    let ld = l.adjoint();
    let mean = expectation(l, rho) + expectation(&ld, rho);
    l * rho + rho * &ld - rho * mean
}

/// `-i[H, rho] + sum_k rate_k D[L_k] rho`.
pub fn lindblad_rhs(h: &ComplexMatrix, terms: &[LindbladTerm], rho: &ComplexMatrix) -> ComplexMatrix {
    let mut out = (h * rho - rho * h) * C64::new(0.0, -1.0);
    for t in terms {
        out += dissipator(&t.operator, rho) * C64::new(t.rate, 0.0);
    }
    out
}
