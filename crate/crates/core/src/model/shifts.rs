use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::quantum::C64;

/// Pairwise dispersive shifts `chi_jk = |g_jk|^2 / (omega_j - omega_k - omega_r)`,
/// Lamb shifts `lambda_j = sum_k chi_jk` and resonator pulls `chi_j = sum_k (chi_jk - chi_kj)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftTable {
    pub pairwise: DMatrix<f64>,
    pub lamb: Vec<f64>,
    pub chi: Vec<f64>,
}

/// Coupling-to-detuning ratio above which the dispersive expansion is suspect.
pub const DISPERSIVE_RATIO_LIMIT: f64 = 0.1;

pub fn dispersive_shifts(energies: &[f64], coupling: &DMatrix<C64>, omega_r: f64) -> Result<ShiftTable> {
    let d = energies.len();
    if coupling.nrows() != d || coupling.ncols() != d {
        return Err(Error::Dimension(format!(
            "coupling matrix is {}x{}, expected {d}x{d}",
            coupling.nrows(),
            coupling.ncols()
        )));
    }
    let mut pairwise = DMatrix::zeros(d, d);
    for j in 0..d {
        for k in 0..d {
            let g2 = coupling[(j, k)].norm_sqr();
            if g2 == 0.0 {
                continue;
            }
            let den = energies[j] - energies[k] - omega_r;
            let scale = omega_r.abs().max(energies[j].abs()).max(energies[k].abs()).max(1.0);
            if den.abs() < 1e-9 * scale {
                return Err(Error::Resonance { j, k, denominator: den });
            }
            if g2.sqrt() / den.abs() > DISPERSIVE_RATIO_LIMIT {
                log::warn!(
                    "|g_{j}{k}| / |detuning| = {:.3} exceeds {DISPERSIVE_RATIO_LIMIT}; dispersive approximation may be inaccurate",
                    g2.sqrt() / den.abs()
                );
            }
            pairwise[(j, k)] = g2 / den;
        }
    }
    let lamb = (0..d).map(|j| pairwise.row(j).sum()).collect();
    let chi = (0..d).map(|j| pairwise.row(j).sum() - pairwise.column(j).sum()).collect();
    Ok(ShiftTable { pairwise, lamb, chi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::QuditSpec;
    use std::f64::consts::PI;

    #[test]
    fn transmon_pull_matches_closed_form() {
        let two_pi = 2.0 * PI;
        let (wq, alpha, g, wr) = (two_pi * 4480.0, -two_pi * 280.0, two_pi * 60.0, two_pi * 6783.5);
        let spec = QuditSpec::transmon(3, wq, alpha, g);
        let coupling = spec.coupling_matrix().unwrap();
        let t = dispersive_shifts(&spec.energies, &coupling, wr).unwrap();
        let delta = wq - wr;
        let expected = 2.0 * alpha * g * g / (delta * (delta + alpha));
        let got = t.chi[1] - t.chi[0];
        assert!(((got - expected) / expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn single_coupling_gives_opposite_pulls() {
        let mut g = DMatrix::zeros(2, 2);
        g[(1, 0)] = C64::new(2.0, 0.0);
        let t = dispersive_shifts(&[0.0, 10.0], &g, 6.0).unwrap();
        assert!((t.pairwise[(1, 0)] - 1.0).abs() < 1e-15);
        assert_eq!(t.chi, vec![-1.0, 1.0]);
        assert_eq!(t.lamb, vec![0.0, 1.0]);
    }

    #[test]
    fn resonance_is_an_error() {
        let mut g = DMatrix::zeros(2, 2);
        g[(1, 0)] = C64::new(0.1, 0.0);
        assert!(matches!(
            dispersive_shifts(&[0.0, 6.0], &g, 6.0),
            Err(Error::Resonance { j: 1, k: 0, .. })
        ));
    }
}
