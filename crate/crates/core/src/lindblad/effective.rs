use std::sync::atomic::{AtomicBool, Ordering};

use nalgebra::DMatrix;

use super::integrate::{integrate_me, Generator, MeOptions, MeSolution};
use crate::error::{Error, Result};
use crate::model::{AmplitudeEvolution, ReadoutModel};
use crate::quantum::{ComplexMatrix, DensityMatrix, C64};

/// Qudit-only master equation with the resonator eliminated.
///
/// Populations follow the relaxation rate equations. Coherence `rho_jk` evolves as
/// `[i (w_k - w_j) + i s_jk(t) - g_jk - Gamma_d,jk(t)] rho_jk`, where `g_jk` collects pure
/// dephasing and half the decay out of both levels, `Gamma_d` is the measurement-induced
/// dephasing of the conditional amplitudes `alpha(t)` and `s_jk` the optional readout shift.
#[derive(Debug)]
pub struct EffectiveGenerator {
    levels: usize,
    energies: Vec<f64>,
    chi: Vec<f64>,
    evolution: AmplitudeEvolution,
    gamma1: DMatrix<f64>,
    decay_out: Vec<f64>,
    base: DMatrix<f64>,
    include_shifts: bool,
    warned_negative: AtomicBool,
}

impl EffectiveGenerator {
    /// Resonator starts empty.
    pub fn new(model: &ReadoutModel) -> Self {
        Self::with_evolution(model, model.evolution_from_vacuum())
    }

    pub fn with_evolution(model: &ReadoutModel, evolution: AmplitudeEvolution) -> Self {
        let d = model.levels;
        EffectiveGenerator {
            levels: d,
            energies: model.frame_energies.clone(),
            chi: model.chi.clone(),
            evolution,
            gamma1: model.gamma1.clone(),
            decay_out: (0..d).map(|j| model.decay_out(j)).collect(),
            base: DMatrix::from_fn(d, d, |j, k| model.base_coherence_rate(j, k)),
            include_shifts: model.include_shifts,
            warned_negative: AtomicBool::new(false),
        }
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn evolution(&self) -> &AmplitudeEvolution {
        &self.evolution
    }

    /// Row-major coherence coefficients for the given amplitudes; diagonal entries are unused.
    pub fn coefficients_into(&self, alpha: &[C64], g: &mut [C64]) {
        let d = self.levels;
        let mut negative = false;
        for j in 0..d {
            for k in 0..d {
                if j == k {
                    g[j * d + k] = C64::new(0.0, 0.0);
                    continue;
                }
                let prod = alpha[j] * alpha[k].conj();
                let dchi = self.chi[k] - self.chi[j];
                let gamma_d = dchi * prod.im;
                negative |= gamma_d + self.base[(j, k)] < 0.0;
                let mut freq = self.energies[k] - self.energies[j];
                if self.include_shifts {
                    freq += dchi * prod.re;
                }
                g[j * d + k] = C64::new(-self.base[(j, k)] - gamma_d, freq);
            }
        }
        if negative && !self.warned_negative.swap(true, Ordering::Relaxed) {
            log::debug!("instantaneous coherence damping is negative during the transient");
        }
    }

    /// `out = L rho` for row-major `rho` given precomputed coefficients.
    pub fn apply_flat(&self, g: &[C64], rho: &[C64], out: &mut [C64]) {
        let d = self.levels;
        for j in 0..d {
            for k in 0..d {
                let idx = j * d + k;
                out[idx] = if j == k {
                    let mut v = rho[idx] * -self.decay_out[j];
                    for l in j + 1..d {
                        v += rho[l * d + l] * self.gamma1[(j, l)];
                    }
                    v
                } else {
                    g[idx] * rho[idx]
                };
            }
        }
    }
}

impl Generator for EffectiveGenerator {
    fn dim(&self) -> usize {
        self.levels
    }

    fn apply(&self, t: f64, rho: &ComplexMatrix, out: &mut ComplexMatrix) {
        let d = self.levels;
        let alpha = self.evolution.at(t).0;
        let mut g = vec![C64::new(0.0, 0.0); d * d];
        self.coefficients_into(&alpha, &mut g);
        let flat: Vec<C64> = (0..d * d).map(|i| rho[(i / d, i % d)]).collect();
        let mut res = vec![C64::new(0.0, 0.0); d * d];
        self.apply_flat(&g, &flat, &mut res);
        for i in 0..d * d {
            out[(i / d, i % d)] = res[i];
        }
    }
}

/// Effective qudit master equation from an empty resonator.
pub fn integrate_effective_me(
    model: &ReadoutModel,
    rho0: &DensityMatrix,
    times: &[f64],
    opts: MeOptions,
) -> Result<MeSolution> {
    if rho0.dim() != model.levels {
        return Err(Error::Dimension(format!(
            "initial state has dimension {}, model has {} levels",
            rho0.dim(),
            model.levels
        )));
    }
    integrate_me(rho0, &EffectiveGenerator::new(model), times, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::Method;
    use crate::model::{DecoherenceSpec, QuditFrame, QuditSpec, ResonatorSpec, SystemParams};

    fn qutrit(eps: f64, gamma1: bool) -> ReadoutModel {
        let mut dec = DecoherenceSpec::none(3);
        if gamma1 {
            dec.gamma1[(0, 1)] = 0.2;
            dec.gamma1[(1, 2)] = 0.3;
            dec.gamma1[(0, 2)] = 0.1;
        }
        dec.gamma_phi[(0, 1)] = 0.05;
        dec.gamma_phi[(1, 0)] = 0.05;
        SystemParams {
            qudit: QuditSpec::from_shifts(vec![0.0; 3], vec![0.0, 2.0, 4.0]),
            resonator: ResonatorSpec {
                omega_r: 0.0,
                kappa_in: 4.0,
                kappa_out: 4.0,
                kappa_internal: 0.0,
                input_amplitude: C64::new(eps, 0.0),
                omega_d: 2.0,
                n_thermal: 0.0,
            },
            decoherence: dec,
            efficiency: 0.2,
            phase: 0.0,
            frame: QuditFrame::Interaction,
            include_shifts: true,
        }
        .derive()
        .unwrap()
    }

    #[test]
    fn without_drive_populations_follow_rate_equations() {
        let m = qutrit(0.0, true);
        let rho0 = DensityMatrix::basis(3, 2).unwrap();
        let sol = integrate_effective_me(&m, &rho0, &[0.0, 1.5], MeOptions { max_dt: 1e-3, method: Method::Rk4 }).unwrap();
        let pf = sol.states[1].get(2, 2).re;
        assert!((pf - (-(0.1f64 + 0.3) * 1.5).exp()).abs() < 1e-12);
    }

    #[test]
    fn steady_drive_coherence_decays_at_steady_rate() {
        let m = qutrit(1.0, false);
        let ss = m.steady_state();
        let evo = m.evolution(&ss).unwrap();
        let gen = EffectiveGenerator::with_evolution(&m, evo);
        let rho0 = DensityMatrix::new(ComplexMatrix::from_element(3, 3, C64::new(1.0 / 3.0, 0.0))).unwrap();
        let sol = integrate_me(&rho0, &gen, &[0.0, 1.0], MeOptions { max_dt: 1e-3, method: Method::Rk4 }).unwrap();
        let gd = (m.chi[1] - m.chi[0]) * (ss[0] * ss[1].conj()).im;
        let expected = (1.0 / 3.0) * (-(0.05 + gd)).exp();
        assert!((sol.states[1].get(0, 1).norm() - expected).abs() < 1e-10);
    }
}
