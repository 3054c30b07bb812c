use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Pairwise dephasing generator `sum_{a<b} D[sqrt(rates[(a, b)] / 2) sigma_z,ab]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseDephasing {
    pub rates: DMatrix<f64>,
    /// False when some pairwise rate is negative, i.e. the target map has no
    /// completely positive pairwise decomposition.
    pub nonnegative: bool,
}

fn pairs(d: usize) -> Vec<(usize, usize)> {
    (0..d).flat_map(|a| (a + 1..d).map(move |b| (a, b))).collect()
}

/// Pairwise rates reproducing the given coherence damping: `rho_jk` decays at `r[(j, k)]`.
///
/// Pair `(a, b)` damps `rho_ab` at `rates_ab` and every coherence sharing exactly one
/// index with it at `rates_ab / 4`.
pub fn pairwise_from_coherence_rates(r: &DMatrix<f64>) -> Result<PairwiseDephasing> {
    let d = r.nrows();
    if r.ncols() != d || d < 2 {
        return Err(Error::Dimension("coherence-rate table must be square with d >= 2".into()));
    }
    let p = pairs(d);
    let m = p.len();
    let a = DMatrix::from_fn(m, m, |row, col| {
        let (j, k) = p[row];
        let (x, y) = p[col];
        let shared = [x, y].iter().filter(|&&i| i == j || i == k).count();
        match shared {
            2 => 1.0,
            1 => 0.25,
            _ => 0.0,
        }
    });
    let b = DVector::from_fn(m, |row, _| r[(p[row].0, p[row].1)]);
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Numerical("pairwise dephasing system is singular".into()))?;
    let scale = b.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut rates = DMatrix::zeros(d, d);
    let mut nonnegative = true;
    for (i, &(j, k)) in p.iter().enumerate() {
        let v = if x[i].abs() < 1e-13 * scale { 0.0 } else { x[i] };
        nonnegative &= v >= 0.0;
        rates[(j, k)] = v;
        rates[(k, j)] = v;
    }
    Ok(PairwiseDephasing { rates, nonnegative })
}

/// Pairwise form of the single-operator dephasing `D[sum_a sqrt(gamma_a) |a><a|]`.
pub fn pairwise_from_diagonal_dephasing(gamma: &[f64]) -> Result<PairwiseDephasing> {
    if gamma.iter().any(|g| !g.is_finite() || *g < 0.0) {
        return Err(Error::InvalidArgument("diagonal dephasing rates must be nonnegative".into()));
    }
    let d = gamma.len();
    let r = DMatrix::from_fn(d, d, |j, k| 0.5 * (gamma[j].sqrt() - gamma[k].sqrt()).powi(2));
    pairwise_from_coherence_rates(&r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{dissipator, ComplexMatrix, C64};

    fn random_rho(d: usize) -> ComplexMatrix {
        let a = ComplexMatrix::from_fn(d, d, |i, j| C64::new((i + 2 * j) as f64 * 0.3 - 0.5, (i * j) as f64 * 0.2 - 0.1));
        let p = &a * a.adjoint();
        let t = p.trace();
        p / t
    }

    fn apply_pairwise(p: &PairwiseDephasing, rho: &ComplexMatrix) -> ComplexMatrix {
        let d = rho.nrows();
        let mut out = ComplexMatrix::zeros(d, d);
        for (a, b) in pairs(d) {
            let mut z = ComplexMatrix::zeros(d, d);
            z[(a, a)] = C64::new(1.0, 0.0);
            z[(b, b)] = C64::new(-1.0, 0.0);
            out += dissipator(&z, rho) * C64::new(p.rates[(a, b)] / 2.0, 0.0);
        }
        out
    }

    #[test]
    fn two_level_pairwise_rate() {
        let p = pairwise_from_diagonal_dephasing(&[4.0, 1.0]).unwrap();
        assert!((p.rates[(0, 1)] - 0.5).abs() < 1e-14);
        assert!(p.nonnegative);
    }

    #[test]
    fn single_level_dephasing_on_qutrit_needs_negative_pair() {
        let g = 0.8;
        let p = pairwise_from_diagonal_dephasing(&[g, 0.0, 0.0]).unwrap();
        assert!((p.rates[(0, 1)] - 4.0 * g / 9.0).abs() < 1e-14);
        assert!((p.rates[(1, 2)] + 2.0 * g / 9.0).abs() < 1e-14);
        assert!(!p.nonnegative);
    }

    #[test]
    fn pairwise_map_equals_diagonal_operator_map() {
        let gamma = [0.3, 1.7, 0.9, 2.2];
        let p = pairwise_from_diagonal_dephasing(&gamma).unwrap();
        let l = ComplexMatrix::from_fn(4, 4, |i, j| if i == j { C64::new(gamma[i].sqrt(), 0.0) } else { C64::new(0.0, 0.0) });
        let rho = random_rho(4);
        let diff = dissipator(&l, &rho) - apply_pairwise(&p, &rho);
        assert!(diff.norm() < 1e-12);
    }
}
