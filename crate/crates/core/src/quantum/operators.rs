use nalgebra::DVector;

use super::layout::HilbertLayout;
use super::matrix::{identity, kron, ComplexMatrix, C64};
use super::state::KetState;
use crate::error::{Error, Result};

/// Operators that can be embedded into a [`HilbertLayout`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatorKind {
    /// Resonator lowering operator `a`.
    Annihilation,
    /// Resonator photon number `a^dagger a`.
    Number,
    /// Resonator displacement `exp(alpha a^dagger - alpha^* a)`, exponentiated in the truncated space.
    Displacement(C64),
    /// Qudit projector `|j><j|`.
    Projector(usize),
    /// Qudit transition `|to><from|`.
    Transition { to: usize, from: usize },
    /// `|a><a| - |b><b|`.
    SigmaZ { a: usize, b: usize },
}

pub fn annihilation(n: usize) -> ComplexMatrix {
    let mut a = ComplexMatrix::zeros(n, n);
    for m in 1..n {
        a[(m - 1, m)] = C64::new((m as f64).sqrt(), 0.0);
    }
    a
}

/// Smallest truncation for which the photon-number tail of `|alpha>` is below 1e-10.
pub fn required_fock(alpha_abs: f64) -> usize {
    let mean = alpha_abs * alpha_abs;
    let mut p = (-mean).exp();
    let mut cumulative = p;
    let mut n = 1;
    while 1.0 - cumulative > 1e-10 && n < 100_000 {
        p *= mean / n as f64;
        cumulative += p;
        n += 1;
    }
    n
}

/// Coherent state truncated to `n` levels (not renormalized).
pub fn coherent_ket(alpha: C64, n: usize) -> DVector<C64> {
    let mut v = DVector::zeros(n);
    if n == 0 {
        return v;
    }
    v[0] = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for m in 1..n {
        v[m] = v[m - 1] * alpha / (m as f64).sqrt();
    }
    v
}

/// `ln <bra|ket>` for coherent states; stays finite when the overlap underflows.
pub fn ln_coherent_overlap(bra: C64, ket: C64) -> C64 {
    C64::new(-0.5 * bra.norm_sqr() - 0.5 * ket.norm_sqr(), 0.0) + bra.conj() * ket
}

pub fn coherent_overlap(bra: C64, ket: C64) -> C64 {
    ln_coherent_overlap(bra, ket).exp()
}

impl KetState {
    /// Truncated coherent state, renormalized within the truncation.
    pub fn coherent(alpha: C64, n: usize) -> Result<KetState> {
        if n < required_fock(alpha.norm()) {
            return Err(Error::Truncation(format!(
                "n_fock = {n} cannot hold |alpha| = {} (need {})",
                alpha.norm(),
                required_fock(alpha.norm())
            )));
        }
        KetState::new(coherent_ket(alpha, n))
    }
}

fn qudit_op(kind: OperatorKind, levels: usize) -> Result<ComplexMatrix> {
    let check = |j: usize| {
        if j >= levels {
            Err(Error::LevelIndex { index: j, levels })
        } else {
            Ok(())
        }
    };
    let mut m = ComplexMatrix::zeros(levels, levels);
    match kind {
        OperatorKind::Projector(j) => {
            check(j)?;
            m[(j, j)] = C64::new(1.0, 0.0);
        }
        OperatorKind::Transition { to, from } => {
            check(to)?;
            check(from)?;
            m[(to, from)] = C64::new(1.0, 0.0);
        }
        OperatorKind::SigmaZ { a, b } => {
            check(a)?;
            check(b)?;
            if a == b {
                return Err(Error::InvalidArgument("sigma_z needs two distinct levels".into()));
            }
            m[(a, a)] = C64::new(1.0, 0.0);
            m[(b, b)] = C64::new(-1.0, 0.0);
        }
        _ => unreachable!(),
    }
    Ok(m)
}

fn resonator_op(kind: OperatorKind, n: usize) -> Result<ComplexMatrix> {
    let a = annihilation(n);
    Ok(match kind {
        OperatorKind::Annihilation => a,
        OperatorKind::Number => ComplexMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(i as f64, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }),
        OperatorKind::Displacement(alpha) => {
            let need = required_fock(alpha.norm());
            if n < need {
                return Err(Error::Truncation(format!(
                    "n_fock = {n} cannot hold |alpha| = {} (need {need})",
                    alpha.norm()
                )));
            }
            let gen = a.adjoint() * alpha - &a * alpha.conj();
            gen.exp()
        }
        _ => unreachable!(),
    })
}

/// Operator embedded in the full layout (identity on the other factor).
pub fn build_operator(kind: OperatorKind, layout: &HilbertLayout) -> Result<ComplexMatrix> {
    match kind {
        OperatorKind::Annihilation | OperatorKind::Number | OperatorKind::Displacement(_) => {
            let n = layout.fock.ok_or_else(|| {
                Error::InvalidArgument("resonator operator requested on a qudit-only layout".into())
            })?;
            Ok(kron(&identity(layout.levels), &resonator_op(kind, n)?))
        }
        _ => {
            let q = qudit_op(kind, layout.levels)?;
            Ok(match layout.fock {
                Some(n) => kron(&q, &identity(n)),
                None => q,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_is_adagger_a() {
        let layout = HilbertLayout::combined(2, 6).unwrap();
        let a = build_operator(OperatorKind::Annihilation, &layout).unwrap();
        let n = build_operator(OperatorKind::Number, &layout).unwrap();
        assert!((a.adjoint() * &a - n).norm() < 1e-12);
    }

    #[test]
    fn displacement_of_vacuum_is_coherent() {
        let alpha = C64::new(0.7, -0.4);
        let layout = HilbertLayout::combined(2, 30).unwrap();
        let d = build_operator(OperatorKind::Displacement(alpha), &layout).unwrap();
        let vac = DVector::from_fn(60, |i, _| if i == 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
        let out = d * vac;
        let expected = coherent_ket(alpha, 30);
        for m in 0..15 {
            assert!((out[m] - expected[m]).norm() < 1e-10, "m = {m}");
        }
    }

    #[test]
    fn displacement_rejects_small_truncation() {
        let layout = HilbertLayout::combined(2, 5).unwrap();
        assert!(matches!(
            build_operator(OperatorKind::Displacement(C64::new(3.0, 0.0)), &layout),
            Err(Error::Truncation(_))
        ));
    }

    #[test]
    fn level_out_of_range() {
        let layout = HilbertLayout::qudit(3).unwrap();
        assert!(matches!(
            build_operator(OperatorKind::Projector(3), &layout),
            Err(Error::LevelIndex { index: 3, levels: 3 })
        ));
    }

    #[test]
    fn coherent_overlap_matches_vectors() {
        let (a, b) = (C64::new(0.3, 1.1), C64::new(-0.8, 0.2));
        let va = coherent_ket(a, 40);
        let vb = coherent_ket(b, 40);
        let direct = vb.dotc(&va);
        assert!((direct - coherent_overlap(b, a)).norm() < 1e-12);
    }
}
