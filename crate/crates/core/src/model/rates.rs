use nalgebra::DMatrix;

use super::params::ReadoutModel;
use crate::quantum::C64;

/// Measurement-induced dephasing `gamma_d[(j, k)] = (chi_k - chi_j) Im(alpha_j alpha_k^*)` and
/// shifted transition frequencies `omega_bar[(k, j)] = (w_k - w_j) + (chi_k - chi_j) Re(alpha_k alpha_j^*)`.
pub fn dephasing_and_shifts(alpha: &[C64], chi: &[f64], energies: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = alpha.len();
    let gamma_d = DMatrix::from_fn(d, d, |j, k| (chi[k] - chi[j]) * (alpha[j] * alpha[k].conj()).im);
    let omega_bar = DMatrix::from_fn(d, d, |k, j| {
        (energies[k] - energies[j]) + (chi[k] - chi[j]) * (alpha[k] * alpha[j].conj()).re
    });
    (gamma_d, omega_bar)
}

/// `Gamma_m[(j, k)] = kappa |alpha_j - alpha_k|^2`.
pub fn measurement_rates(alpha: &[C64], kappa: f64) -> DMatrix<f64> {
    let d = alpha.len();
    DMatrix::from_fn(d, d, |j, k| kappa * (alpha[j] - alpha[k]).norm_sqr())
}

/// `omega_bar_lj - omega_bar_lk - omega_bar_kj` for every `j < k < l`; zero without readout.
pub fn triangle_residuals(omega_bar: &DMatrix<f64>) -> Vec<((usize, usize, usize), f64)> {
    let d = omega_bar.nrows();
    let mut out = Vec::new();
    for j in 0..d {
        for k in j + 1..d {
            for l in k + 1..d {
                let r = omega_bar[(l, j)] - omega_bar[(l, k)] - omega_bar[(k, j)];
                out.push(((j, k, l), r));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub alpha: Vec<C64>,
    pub gamma_d: DMatrix<f64>,
    pub omega_bar: DMatrix<f64>,
    pub gamma_m: DMatrix<f64>,
}

impl RateTable {
    pub fn at(model: &ReadoutModel, alpha: &[C64]) -> RateTable {
        let (gamma_d, omega_bar) = dephasing_and_shifts(alpha, &model.chi, &model.dressed_energies);
        RateTable {
            alpha: alpha.to_vec(),
            gamma_d,
            omega_bar,
            gamma_m: measurement_rates(alpha, model.kappa),
        }
    }

    pub fn steady_state(model: &ReadoutModel) -> RateTable {
        RateTable::at(model, &model.steady_state())
    }

    /// Largest `|Gamma_m - 2 Gamma_d|` relative to `max(Gamma_m, 1e-300)`, over all pairs.
    pub fn steady_state_identity_error(&self) -> f64 {
        let d = self.alpha.len();
        let mut worst = 0.0f64;
        for j in 0..d {
            for k in 0..d {
                let m = self.gamma_m[(j, k)];
                let diff = (m - 2.0 * self.gamma_d[(j, k)]).abs();
                worst = worst.max(if m > 0.0 { diff / m } else { diff });
            }
        }
        worst
    }
}

/// Qutrit transmon steady-state measurement rates in the order (ge, gf, ef), for pulls
/// (0, chi, 2 chi). `printed` carries `chi` to the first power as the widely quoted closed
/// form does; `corrected` carries the squared pull difference and equals `kappa |beta|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormRates {
    pub printed: [f64; 3],
    pub corrected: [f64; 3],
}

pub fn qutrit_closed_form_rates(kappa: f64, epsilon: C64, delta_rd: f64, chi_qr: f64) -> ClosedFormRates {
    let l = |x: f64| x * x + kappa * kappa / 4.0;
    let (g, e, f) = (l(delta_rd), l(delta_rd + chi_qr), l(delta_rd + 2.0 * chi_qr));
    let num = kappa * epsilon.norm_sqr();
    let c2 = chi_qr * chi_qr;
    ClosedFormRates {
        printed: [num * chi_qr / (g * e), num * chi_qr / (g * f), num * chi_qr / (e * f)],
        corrected: [num * c2 / (g * e), num * 4.0 * c2 / (g * f), num * c2 / (e * f)],
    }
}
