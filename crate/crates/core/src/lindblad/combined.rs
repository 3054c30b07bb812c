use nalgebra::DMatrix;

use super::integrate::{DenseLindbladian, Generator};
use crate::error::{Error, Result};
use crate::model::{pairwise_from_coherence_rates, ReadoutModel};
use crate::quantum::{build_operator, ComplexMatrix, HilbertLayout, LindbladTerm, OperatorKind, C64};

/// Qudit-resonator master equation in the drive frame, applied blockwise.
///
/// `H = sum_j w_j P_j + Delta_rd a^dag a + sum_j chi_j P_j a^dag a - (eps a^dag + eps^* a)`,
/// with `kappa (n_bar + 1) D[a] + kappa n_bar D[a^dag]`, relaxation `gamma1_jk D[|j><k|]` and
/// pure dephasing applied elementwise to the qudit coherence blocks.
#[derive(Debug, Clone)]
pub struct CombinedGenerator {
    pub layout: HilbertLayout,
    energies: Vec<f64>,
    detuning: Vec<f64>,
    epsilon: C64,
    kappa_down: f64,
    kappa_up: f64,
    gamma1: DMatrix<f64>,
    /// Total damping of block (j, k) from relaxation and pure dephasing.
    block_damping: DMatrix<f64>,
    sqrt_n: Vec<f64>,
}

impl CombinedGenerator {
    pub fn new(model: &ReadoutModel, n_fock: usize) -> Result<Self> {
        let layout = HilbertLayout::combined(model.levels, n_fock)?;
        let d = model.levels;
        let block_damping = DMatrix::from_fn(d, d, |j, k| {
            model.gamma_phi[(j, k)] + 0.5 * (model.decay_out(j) + model.decay_out(k))
        });
        Ok(CombinedGenerator {
            layout,
            energies: model.frame_energies.clone(),
            detuning: model.chi.iter().map(|c| model.delta_rd + c).collect(),
            epsilon: model.epsilon,
            kappa_down: model.kappa * (model.n_thermal + 1.0),
            kappa_up: model.kappa * model.n_thermal,
            gamma1: model.gamma1.clone(),
            block_damping,
            sqrt_n: (0..=n_fock).map(|m| (m as f64).sqrt()).collect(),
        })
    }

    /// The same generator with `rate D[a]` removed (the part carried by a measurement).
    pub fn without_resonator_decay(&self, rate: f64) -> Result<Self> {
        if rate > self.kappa_down * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "measured decay {rate} exceeds the resonator decay {}",
                self.kappa_down
            )));
        }
        let mut g = self.clone();
        g.kappa_down = (self.kappa_down - rate).max(0.0);
        Ok(g)
    }

    pub fn fock(&self) -> usize {
        self.layout.fock_dim()
    }

    /// Crude spectral-radius estimate used to cap explicit step sizes.
    pub fn stiffness(&self) -> f64 {
        let n = self.fock() as f64;
        let det = self.detuning.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let e = self.energies.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        (self.kappa_down + self.kappa_up) * n + 2.0 * det * n + 2.0 * e + 4.0 * self.epsilon.norm() * n.sqrt()
    }
}

const I: C64 = C64 { re: 0.0, im: 1.0 };

impl Generator for CombinedGenerator {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn apply(&self, _t: f64, rho: &ComplexMatrix, out: &mut ComplexMatrix) {
        let n = self.fock();
        let d = self.layout.levels;
        let dim = d * n;
        let x = rho.as_slice();
        let o = out.as_mut_slice();
        let sq = &self.sqrt_n;
        let eps = self.epsilon;
        let ieps = I * eps;
        let ieps_c = I * eps.conj();
        // column-major: element (r, c) lives at c * dim + r
        for k in 0..d {
            for j in 0..d {
                let base = C64::new(-self.block_damping[(j, k)], -(self.energies[j] - self.energies[k]));
                for p in 0..n {
                    let c = k * n + p;
                    let col = c * dim;
                    for m in 0..n {
                        let r = j * n + m;
                        let xv = x[col + r];
                        let mf = m as f64;
                        let pf = p as f64;
                        // truncated a a^dag has a zero in its last diagonal entry
                        let up = if m + 1 < n { mf + 1.0 } else { 0.0 } + if p + 1 < n { pf + 1.0 } else { 0.0 };
                        let mut v = xv
                            * (base
                                + C64::new(
                                    -0.5 * self.kappa_down * (mf + pf) - 0.5 * self.kappa_up * up,
                                    -(self.detuning[j] * mf - self.detuning[k] * pf),
                                ));
                        if m > 0 {
                            v += ieps * sq[m] * x[col + r - 1];
                            if p > 0 {
                                v += x[col - dim + r - 1] * (self.kappa_up * sq[m] * sq[p]);
                            }
                        }
                        if m + 1 < n {
                            v += ieps_c * sq[m + 1] * x[col + r + 1];
                            if p + 1 < n {
                                v += x[col + dim + r + 1] * (self.kappa_down * sq[m + 1] * sq[p + 1]);
                            }
                        }
                        if p + 1 < n {
                            v -= ieps * sq[p + 1] * x[col + dim + r];
                        }
                        if p > 0 {
                            v -= ieps_c * sq[p] * x[col - dim + r];
                        }
                        if j == k {
                            for l in j + 1..d {
                                let g = self.gamma1[(j, l)];
                                if g != 0.0 {
                                    v += x[(l * n + p) * dim + l * n + m] * g;
                                }
                            }
                        }
                        o[col + r] = v;
                    }
                }
            }
        }
    }
}

/// The same master equation as [`CombinedGenerator`] assembled from dense operators.
/// Pure dephasing enters through its pairwise `sigma_z` decomposition.
pub fn build_dense_combined(model: &ReadoutModel, n_fock: usize) -> Result<DenseLindbladian> {
    let layout = HilbertLayout::combined(model.levels, n_fock)?;
    let d = model.levels;
    let a = build_operator(OperatorKind::Annihilation, &layout)?;
    let num = build_operator(OperatorKind::Number, &layout)?;
    let mut h = &num * C64::new(model.delta_rd, 0.0) - a.adjoint() * model.epsilon - &a * model.epsilon.conj();
    for j in 0..d {
        let p = build_operator(OperatorKind::Projector(j), &layout)?;
        h += &p * C64::new(model.frame_energies[j], 0.0) + &p * &num * C64::new(model.chi[j], 0.0);
    }
    let mut terms = vec![LindbladTerm {
        operator: a.clone(),
        rate: model.kappa * (model.n_thermal + 1.0),
    }];
    if model.n_thermal > 0.0 {
        terms.push(LindbladTerm {
            operator: a.adjoint(),
            rate: model.kappa * model.n_thermal,
        });
    }
    for j in 0..d {
        for k in j + 1..d {
            if model.gamma1[(j, k)] > 0.0 {
                terms.push(LindbladTerm {
                    operator: build_operator(OperatorKind::Transition { to: j, from: k }, &layout)?,
                    rate: model.gamma1[(j, k)],
                });
            }
        }
    }
    if model.gamma_phi.iter().any(|&g| g > 0.0) {
        let pw = pairwise_from_coherence_rates(&model.gamma_phi)?;
        for j in 0..d {
            for k in j + 1..d {
                let r = pw.rates[(j, k)];
                if r != 0.0 {
                    terms.push(LindbladTerm {
                        operator: build_operator(OperatorKind::SigmaZ { a: j, b: k }, &layout)?,
                        rate: r / 2.0,
                    });
                }
            }
        }
    }
    if terms.iter().any(|t| !t.rate.is_finite()) {
        return Err(Error::Numerical("non-finite collapse rate".into()));
    }
    Ok(DenseLindbladian { hamiltonian: h, terms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DecoherenceSpec, QuditFrame, QuditSpec, ResonatorSpec, SystemParams};

    fn model(n_thermal: f64, frame: QuditFrame) -> ReadoutModel {
        let mut dec = DecoherenceSpec::none(3);
        dec.gamma1[(0, 1)] = 0.3;
        dec.gamma1[(0, 2)] = 0.05;
        dec.gamma1[(1, 2)] = 0.4;
        for (j, k, g) in [(0, 1, 0.2), (0, 2, 0.5), (1, 2, 0.1)] {
            dec.gamma_phi[(j, k)] = g;
            dec.gamma_phi[(k, j)] = g;
        }
        SystemParams {
            qudit: QuditSpec::from_shifts(vec![0.0, 5.0, 9.5], vec![0.0, 1.2, 2.4]),
            resonator: ResonatorSpec {
                omega_r: 50.0,
                kappa_in: 1.0,
                kappa_out: 1.5,
                kappa_internal: 0.2,
                input_amplitude: C64::new(0.8, 0.3),
                omega_d: 49.0,
                n_thermal,
            },
            decoherence: dec,
            efficiency: 0.2,
            phase: 0.0,
            frame,
            include_shifts: true,
        }
        .derive()
        .unwrap()
    }

    fn random_state(dim: usize) -> ComplexMatrix {
        let a = ComplexMatrix::from_fn(dim, dim, |i, j| {
            C64::new(((i * 7 + j * 3) % 11) as f64 - 5.0, ((i * 5 + j * 2) % 7) as f64 - 3.0)
        });
        let p = &a * a.adjoint();
        let t = p.trace();
        p / t
    }

    #[test]
    fn structured_matches_dense() {
        for (nb, frame) in [(0.0, QuditFrame::Interaction), (0.4, QuditFrame::Lab)] {
            let m = model(nb, frame);
            let fast = CombinedGenerator::new(&m, 5).unwrap();
            let dense = build_dense_combined(&m, 5).unwrap();
            let rho = random_state(15);
            let mut a = ComplexMatrix::zeros(15, 15);
            let mut b = ComplexMatrix::zeros(15, 15);
            fast.apply(0.0, &rho, &mut a);
            dense.apply(0.0, &rho, &mut b);
            assert!((&a - &b).norm() < 1e-11 * b.norm(), "diff {}", (&a - &b).norm());
        }
    }

    #[test]
    fn generator_is_trace_preserving() {
        let m = model(0.2, QuditFrame::Interaction);
        let g = CombinedGenerator::new(&m, 6).unwrap();
        let rho = random_state(18);
        let mut out = ComplexMatrix::zeros(18, 18);
        g.apply(0.0, &rho, &mut out);
        assert!(out.trace().norm() < 1e-12);
    }
}
