use crate::error::{Error, Result};
use crate::quantum::C64;

/// Resonator coherent amplitude conditioned on each qudit level.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherentAmplitudes(pub Vec<C64>);

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// `d alpha_j / dt = -i (Delta_rd + chi_j - i kappa / 2) alpha_j + i epsilon`.
pub fn amplitude_derivative(alpha: &[C64], chi: &[f64], delta_rd: f64, kappa: f64, epsilon: C64) -> Vec<C64> {
    alpha
        .iter()
        .zip(chi)
        .map(|(&a, &c)| -I * C64::new(delta_rd + c, -kappa / 2.0) * a + I * epsilon)
        .collect()
}

/// `alpha_j(inf) = epsilon / (Delta_rd + chi_j - i kappa / 2)`.
pub fn steady_state_amplitudes(chi: &[f64], delta_rd: f64, kappa: f64, epsilon: C64) -> Vec<C64> {
    chi.iter()
        .map(|&c| epsilon / C64::new(delta_rd + c, -kappa / 2.0))
        .collect()
}

/// Exact solution `alpha_j(t) = a_j + (alpha_j(0) - a_j) e^{lambda_j t}` of the linear amplitude ODE.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeEvolution {
    pub steady: Vec<C64>,
    pub lambda: Vec<C64>,
    pub offset: Vec<C64>,
}

impl AmplitudeEvolution {
    pub fn new(chi: &[f64], delta_rd: f64, kappa: f64, epsilon: C64, initial: &[C64]) -> Result<Self> {
        if initial.len() != chi.len() {
            return Err(Error::Dimension(format!(
                "{} initial amplitudes for {} levels",
                initial.len(),
                chi.len()
            )));
        }
        if kappa <= 0.0 {
            return Err(Error::InvalidArgument("kappa must be positive".into()));
        }
        let steady = steady_state_amplitudes(chi, delta_rd, kappa, epsilon);
        let lambda = chi.iter().map(|&c| C64::new(-kappa / 2.0, -(delta_rd + c))).collect();
        let offset = initial.iter().zip(&steady).map(|(a0, s)| a0 - s).collect();
        Ok(AmplitudeEvolution { steady, lambda, offset })
    }

    pub fn levels(&self) -> usize {
        self.steady.len()
    }

    pub fn at_into(&self, t: f64, out: &mut [C64]) {
        for j in 0..self.steady.len() {
            out[j] = self.steady[j] + self.offset[j] * (self.lambda[j] * t).exp();
        }
    }

    pub fn at(&self, t: f64) -> CoherentAmplitudes {
        let mut out = vec![C64::new(0.0, 0.0); self.levels()];
        self.at_into(t, &mut out);
        CoherentAmplitudes(out)
    }
}
