use super::integrate::repair;
use crate::error::{Error, Result};
use crate::model::ReadoutModel;
use crate::quantum::{coherent_ket, ln_coherent_overlap, required_fock, ComplexMatrix, DensityMatrix, C64};

/// `int_0^t e^{mu s} ds`.
fn exp_integral(mu: C64, t: f64) -> C64 {
    if mu.norm() * t < 1e-8 {
        C64::new(t, 0.0) + mu * (t * t / 2.0)
    } else {
        ((mu * t).exp() - 1.0) / mu
    }
}

/// Closed-form qudit-resonator state at time `t`, starting from `rho_q0` with the resonator
/// in vacuum. Requires no qudit relaxation and a zero-temperature resonator.
pub fn analytic_combined_state(
    model: &ReadoutModel,
    rho_q0: &DensityMatrix,
    t: f64,
    n_fock: usize,
) -> Result<DensityMatrix> {
    if model.gamma1.iter().any(|&g| g != 0.0) {
        return Err(Error::Unsupported("analytic solution requires no qudit relaxation".into()));
    }
    if model.n_thermal != 0.0 {
        return Err(Error::Unsupported("analytic solution requires a zero-temperature resonator".into()));
    }
    let d = model.levels;
    if rho_q0.dim() != d {
        return Err(Error::Dimension(format!("initial qudit state has dimension {}, expected {d}", rho_q0.dim())));
    }
    if t < 0.0 {
        return Err(Error::InvalidArgument("time must be nonnegative".into()));
    }
    let evo = model.evolution_from_vacuum();
    let alpha = evo.at(t).0;
    let need = alpha.iter().map(|a| required_fock(a.norm())).max().unwrap_or(1);
    if n_fock < need {
        return Err(Error::Truncation(format!("n_fock = {n_fock}, amplitudes need {need}")));
    }
    let (a, b, lam) = (&evo.steady, &evo.offset, &evo.lambda);
    let n = n_fock;
    let dim = d * n;
    // |alpha_j> without the Gaussian prefactor: alpha^m / sqrt(m!)
    let polys: Vec<Vec<C64>> = alpha
        .iter()
        .map(|&al| {
            let v = coherent_ket(al, n);
            let scale = (0.5 * al.norm_sqr()).exp();
            v.iter().map(|z| z * scale).collect()
        })
        .collect();
    let mut rho = ComplexMatrix::zeros(dim, dim);
    for j in 0..d {
        for k in 0..d {
            let c0 = rho_q0.get(j, k);
            if c0 == C64::new(0.0, 0.0) {
                continue;
            }
            // ln of c_jk(t) / <alpha_k|alpha_j> times the Gaussian prefactors
            let ln_coef = if j == k {
                ln_coherent_overlap(alpha[j], alpha[j]) * -1.0 + C64::new(-alpha[j].norm_sqr(), 0.0)
            } else {
                let dchi = model.chi[k] - model.chi[j];
                let integral = a[j] * a[k].conj() * t
                    + a[j] * b[k].conj() * exp_integral(lam[k].conj(), t)
                    + b[j] * a[k].conj() * exp_integral(lam[j], t)
                    + b[j] * b[k].conj() * exp_integral(lam[j] + lam[k].conj(), t);
                let exponent = C64::new(-model.gamma_phi[(j, k)] * t, (model.frame_energies[k] - model.frame_energies[j]) * t)
                    + C64::new(0.0, dchi) * integral;
                exponent - alpha[k].conj() * alpha[j]
            };
            let coef = c0 * ln_coef.exp();
            for p in 0..n {
                let right = polys[k][p].conj();
                for m in 0..n {
                    rho[(j * n + m, k * n + p)] = coef * polys[j][m] * right;
                }
            }
        }
    }
    let (_, drift) = repair(&mut rho);
    if drift > 1e-8 {
        return Err(Error::Truncation(format!("truncated state lost {drift:e} of its trace")));
    }
    Ok(DensityMatrix::from_trusted(rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DecoherenceSpec, QuditFrame, QuditSpec, ResonatorSpec, SystemParams};
    use crate::quantum::{partial_trace, Factor, HilbertLayout};

    #[test]
    fn diagonal_blocks_are_coherent_states() {
        let m = SystemParams {
            qudit: QuditSpec::from_shifts(vec![0.0, 0.0], vec![0.0, 1.0]),
            resonator: ResonatorSpec {
                omega_r: 0.0,
                kappa_in: 1.0,
                kappa_out: 1.0,
                kappa_internal: 0.0,
                input_amplitude: C64::new(1.0, 0.0),
                omega_d: 0.5,
                n_thermal: 0.0,
            },
            decoherence: DecoherenceSpec::none(2),
            efficiency: 0.1,
            phase: 0.0,
            frame: QuditFrame::Interaction,
            include_shifts: true,
        }
        .derive()
        .unwrap();
        let q = DensityMatrix::diagonal_mixture(&[0.4, 0.6]).unwrap();
        let rho = analytic_combined_state(&m, &q, 3.0, 25).unwrap();
        let layout = HilbertLayout::combined(2, 25).unwrap();
        let red = partial_trace(&rho, &layout, Factor::Qudit).unwrap();
        assert!((red.get(1, 1).re - 0.6).abs() < 1e-12);
        let alpha = m.evolution_from_vacuum().at(3.0).0;
        let v = coherent_ket(alpha[1], 25);
        for mm in 0..5 {
            assert!((rho.get(25 + mm, 25) - v[mm] * v[0].conj() * 0.6).norm() < 1e-12);
        }
    }
}
