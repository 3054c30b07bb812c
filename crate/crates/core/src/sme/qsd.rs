use nalgebra::DVector;

use super::noise::NoiseStream;
use super::record::RecordThinner;
use super::trajectory::{Trajectory, TrajectorySpec};
use crate::error::{Error, Result};
use crate::model::{pairwise_from_coherence_rates, AmplitudeEvolution, ReadoutModel};
use crate::quantum::{ComplexMatrix, KetState, C64};

/// Collapse channel `(L, rate)` driven by its own real Wiener increment.
#[derive(Debug, Clone, PartialEq)]
pub struct QsdChannel {
    pub operator: ComplexMatrix,
    pub rate: f64,
}

const NORM_FLOOR: f64 = 1e-12;

/// Euler-Maruyama step of quantum state diffusion, renormalized afterwards:
/// `d psi = -i H psi dt + sum_i sqrt(g_i) (L_i - <L_i>) psi dW_i
///          - 1/2 sum_i g_i (L_i^dag L_i + |<L_i>|^2 - 2 <L_i>^* L_i) psi dt`.
pub fn qsd_step(psi: &KetState, h: &ComplexMatrix, channels: &[QsdChannel], dt: f64, dw: &[f64]) -> Result<KetState> {
    let v = psi.vector();
    if h.nrows() != v.len() || channels.iter().any(|c| c.operator.nrows() != v.len()) {
        return Err(Error::Dimension("operator and state dimensions differ".into()));
    }
    if dw.len() < channels.len() {
        return Err(Error::Dimension(format!("{} increments for {} channels", dw.len(), channels.len())));
    }
    let mut next = v - (h * v) * C64::new(0.0, dt);
    for (c, &w) in channels.iter().zip(dw) {
        if c.rate == 0.0 {
            continue;
        }
        let lv = &c.operator * v;
        let mean = v.dotc(&lv);
        let ldl = c.operator.adjoint() * &lv;
        next += (&lv - v * mean) * C64::new(c.rate.sqrt() * w, 0.0);
        next -= (ldl + v * C64::new(mean.norm_sqr(), 0.0) - &lv * (mean.conj() * 2.0)) * C64::new(0.5 * c.rate * dt, 0.0);
    }
    let norm = next.norm();
    if !(norm > NORM_FLOOR) {
        return Err(Error::Numerical(format!("state norm collapsed to {norm:e}")));
    }
    Ok(KetState::from_trusted(next / C64::new(norm, 0.0)))
}

fn diag(v: &[f64]) -> ComplexMatrix {
    let d = v.len();
    ComplexMatrix::from_fn(d, d, |i, j| if i == j { C64::new(v[i], 0.0) } else { C64::new(0.0, 0.0) })
}

/// Channel layout of the qudit QSD unravelling: two recorded measurement channels, two
/// unrecorded ones, then relaxation and pairwise dephasing.
#[derive(Debug, Clone)]
pub struct QsdModel {
    levels: usize,
    energies: Vec<f64>,
    chi: Vec<f64>,
    include_shifts: bool,
    kappa: f64,
    eta: f64,
    rotation: C64,
    static_channels: Vec<QsdChannel>,
}

impl QsdModel {
    pub fn new(model: &ReadoutModel) -> Result<Self> {
        let d = model.levels;
        if model.include_shifts && d > 2 {
            return Err(Error::Unsupported(
                "readout frequency shifts cannot be unravelled for more than two levels".into(),
            ));
        }
        if model.n_thermal != 0.0 {
            log::debug!("thermal occupation only affects the resonator and is ignored by the qudit unravelling");
        }
        let mut static_channels = Vec::new();
        for j in 0..d {
            for k in j + 1..d {
                let g = model.gamma1[(j, k)];
                if g > 0.0 {
                    let mut op = ComplexMatrix::zeros(d, d);
                    op[(j, k)] = C64::new(1.0, 0.0);
                    static_channels.push(QsdChannel { operator: op, rate: g });
                }
            }
        }
        if model.gamma_phi.iter().any(|&g| g > 0.0) {
            let pw = pairwise_from_coherence_rates(&model.gamma_phi)?;
            if !pw.nonnegative {
                return Err(Error::Unsupported(
                    "pure dephasing table has no nonnegative pairwise decomposition".into(),
                ));
            }
            for j in 0..d {
                for k in j + 1..d {
                    let r = pw.rates[(j, k)];
                    if r > 0.0 {
                        let mut z = vec![0.0; d];
                        z[j] = 1.0;
                        z[k] = -1.0;
                        static_channels.push(QsdChannel { operator: diag(&z), rate: r / 2.0 });
                    }
                }
            }
        }
        Ok(QsdModel {
            levels: d,
            energies: model.frame_energies.clone(),
            chi: model.chi.clone(),
            include_shifts: model.include_shifts,
            kappa: model.kappa,
            eta: model.efficiency,
            rotation: C64::from_polar(1.0, -model.phase),
            static_channels,
        })
    }

    pub fn channel_count(&self) -> usize {
        4 + self.static_channels.len()
    }

    /// Hamiltonian and full channel list for amplitudes `alpha`.
    pub fn operators(&self, alpha: &[C64]) -> (ComplexMatrix, Vec<QsdChannel>) {
        let d = self.levels;
        let mut h = self.energies.clone();
        if self.include_shifts {
            for j in 1..d {
                h[j] += (self.chi[j] - self.chi[0]) * (alpha[j] * alpha[0].conj()).re;
            }
        }
        let li: Vec<f64> = alpha.iter().map(|a| (a * self.rotation).re).collect();
        let lq: Vec<f64> = alpha.iter().map(|a| (a * self.rotation).im).collect();
        let (li, lq) = (diag(&li), diag(&lq));
        let mut ch = vec![
            QsdChannel { operator: li.clone(), rate: self.eta * self.kappa },
            QsdChannel { operator: lq.clone(), rate: self.eta * self.kappa },
            QsdChannel { operator: li, rate: (1.0 - self.eta) * self.kappa },
            QsdChannel { operator: lq, rate: (1.0 - self.eta) * self.kappa },
        ];
        ch.extend(self.static_channels.iter().cloned());
        (diag(&h), ch)
    }
}

/// One QSD trajectory; the first two increments drive the recorded quadratures.
pub fn run_qsd_trajectory(
    model: &ReadoutModel,
    evolution: &AmplitudeEvolution,
    psi0: &KetState,
    spec: &TrajectorySpec,
    noise: &mut NoiseStream,
) -> Result<Trajectory> {
    spec.validate()?;
    let qm = QsdModel::new(model)?;
    let d = model.levels;
    if psi0.dim() != d {
        return Err(Error::Dimension(format!("initial ket has dimension {}, expected {d}", psi0.dim())));
    }
    if noise.channels() < qm.channel_count() {
        return Err(Error::Dimension(format!(
            "noise stream has {} channels, unravelling needs {}",
            noise.channels(),
            qm.channel_count()
        )));
    }
    let n = spec.steps();
    let h = spec.step_size();
    let s = (model.efficiency * model.kappa).sqrt();
    let mut psi = psi0.clone();
    let mut dw = vec![0.0; noise.channels()];
    let mut out = Trajectory::default();
    let mut thinner = RecordThinner::new(spec.thin);
    let mut alpha = vec![C64::new(0.0, 0.0); d];
    let push = |out: &mut Trajectory, t: f64, v: &DVector<C64>| {
        out.times.push(t);
        out.states.push((0..d * d).map(|i| v[i / d] * v[i % d].conj()).collect());
        out.entropy.push(0.0);
    };
    push(&mut out, 0.0, psi.vector());
    for step in 0..n {
        let t = step as f64 * h;
        evolution.at_into(t, &mut alpha);
        let (ham, ch) = qm.operators(&alpha);
        noise.increments(step as u64, h, &mut dw);
        let v = psi.vector();
        let mi = ch[0].operator.diagonal().iter().zip(v.iter()).map(|(l, a)| l.re * a.norm_sqr()).sum::<f64>();
        let mq = ch[1].operator.diagonal().iter().zip(v.iter()).map(|(l, a)| l.re * a.norm_sqr()).sum::<f64>();
        thinner.push(t, h, [2.0 * s * mi + dw[0] / h, 2.0 * s * mq + dw[1] / h]);
        psi = qsd_step(&psi, &ham, &ch, h, &dw)?;
        if spec.is_sample(step + 1) {
            push(&mut out, (step + 1) as f64 * h, psi.vector());
        }
    }
    out.record = thinner.finish();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_channels_is_schrodinger_euler() {
        let psi = KetState::new(DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)])).unwrap();
        let mut h = ComplexMatrix::zeros(2, 2);
        h[(1, 1)] = C64::new(2.0, 0.0);
        let out = qsd_step(&psi, &h, &[], 0.01, &[]).unwrap();
        let raw = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(1.0, -0.02)]) / C64::new(2f64.sqrt(), 0.0);
        let expected = &raw / C64::new(raw.norm(), 0.0);
        assert!((out.vector() - expected).norm() < 1e-14);
    }

    #[test]
    fn decay_leaves_ground_state_alone() {
        let psi = KetState::basis(2, 0).unwrap();
        let mut l = ComplexMatrix::zeros(2, 2);
        l[(0, 1)] = C64::new(1.0, 0.0);
        let out = qsd_step(&psi, &ComplexMatrix::zeros(2, 2), &[QsdChannel { operator: l, rate: 3.0 }], 0.01, &[0.3]).unwrap();
        assert!((out.vector() - psi.vector()).norm() < 1e-15);
    }
}
