use nalgebra::DMatrix;

use super::amplitudes::{steady_state_amplitudes, AmplitudeEvolution};
use super::shifts::{dispersive_shifts, ShiftTable};
use crate::error::{Error, Result};
use crate::quantum::C64;

/// How the qudit couples to the resonator.
#[derive(Debug, Clone, PartialEq)]
pub enum Coupling {
    /// Coupling table `g_jk`; only nonzero entries contribute a shift.
    Matrix(DMatrix<C64>),
    /// Resonator pulls `chi_j` given directly; energies are taken as already dressed.
    Shifts(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuditSpec {
    /// Bare level energies (dressed when the coupling is given as shifts).
    pub energies: Vec<f64>,
    pub coupling: Coupling,
}

impl QuditSpec {
    /// Weakly anharmonic ladder: `omega_j = j omega_q + anharmonicity j (j - 1) / 2`,
    /// couplings `g_{k+1,k} = sqrt(k + 1) g`.
    pub fn transmon(levels: usize, omega_q: f64, anharmonicity: f64, g: f64) -> Self {
        let energies = (0..levels)
            .map(|j| j as f64 * omega_q + anharmonicity * (j * j.saturating_sub(1)) as f64 / 2.0)
            .collect();
        let mut m = DMatrix::zeros(levels, levels);
        for k in 0..levels.saturating_sub(1) {
            m[(k + 1, k)] = C64::new(((k + 1) as f64).sqrt() * g, 0.0);
        }
        QuditSpec {
            energies,
            coupling: Coupling::Matrix(m),
        }
    }

    pub fn from_shifts(energies: Vec<f64>, chi: Vec<f64>) -> Self {
        QuditSpec {
            energies,
            coupling: Coupling::Shifts(chi),
        }
    }

    pub fn levels(&self) -> usize {
        self.energies.len()
    }

    pub fn coupling_matrix(&self) -> Option<DMatrix<C64>> {
        match &self.coupling {
            Coupling::Matrix(m) => Some(m.clone()),
            Coupling::Shifts(_) => None,
        }
    }

    pub fn shift_table(&self, omega_r: f64) -> Result<ShiftTable> {
        let d = self.levels();
        match &self.coupling {
            Coupling::Matrix(m) => dispersive_shifts(&self.energies, m, omega_r),
            Coupling::Shifts(chi) => {
                if chi.len() != d {
                    return Err(Error::Dimension(format!("{} shifts for {d} levels", chi.len())));
                }
                Ok(ShiftTable {
                    pairwise: DMatrix::zeros(d, d),
                    lamb: vec![0.0; d],
                    chi: chi.clone(),
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResonatorSpec {
    pub omega_r: f64,
    pub kappa_in: f64,
    pub kappa_out: f64,
    pub kappa_internal: f64,
    /// Mean input field amplitude, sqrt(photons / us).
    pub input_amplitude: C64,
    pub omega_d: f64,
    pub n_thermal: f64,
}

impl ResonatorSpec {
    pub fn kappa(&self) -> f64 {
        self.kappa_in + self.kappa_out + self.kappa_internal
    }

    /// Drive strength `sqrt(kappa_in) a_in`.
    pub fn epsilon(&self) -> C64 {
        self.input_amplitude * self.kappa_in.sqrt()
    }
}

/// Relaxation `gamma1[(j, k)]` (j < k) is the rate of `|k> -> |j>`;
/// `gamma_phi[(j, k)]` is the symmetric pure-dephasing rate of coherence `rho_jk`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoherenceSpec {
    pub gamma1: DMatrix<f64>,
    pub gamma_phi: DMatrix<f64>,
}

impl DecoherenceSpec {
    pub fn none(levels: usize) -> Self {
        DecoherenceSpec {
            gamma1: DMatrix::zeros(levels, levels),
            gamma_phi: DMatrix::zeros(levels, levels),
        }
    }

    fn validate(&self, levels: usize) -> Result<()> {
        for (name, m) in [("gamma1", &self.gamma1), ("gamma_phi", &self.gamma_phi)] {
            if m.nrows() != levels || m.ncols() != levels {
                return Err(Error::Dimension(format!(
                    "{name} is {}x{}, expected {levels}x{levels}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if m.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be finite and nonnegative")));
            }
        }
        for j in 0..levels {
            for k in 0..=j {
                if self.gamma1[(j, k)] != 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "gamma1[({j}, {k})] must be zero: relaxation is stored with j < k"
                    )));
                }
            }
            if self.gamma_phi[(j, j)] != 0.0 {
                return Err(Error::InvalidArgument("gamma_phi diagonal must be zero".into()));
            }
            for k in 0..levels {
                if self.gamma_phi[(j, k)] != self.gamma_phi[(k, j)] {
                    return Err(Error::InvalidArgument("gamma_phi must be symmetric".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuditFrame {
    /// Rotating at the dressed qudit energies.
    Interaction,
    /// Dressed energies kept in the Hamiltonian.
    Lab,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    pub qudit: QuditSpec,
    pub resonator: ResonatorSpec,
    pub decoherence: DecoherenceSpec,
    pub efficiency: f64,
    pub phase: f64,
    pub frame: QuditFrame,
    pub include_shifts: bool,
}

/// Everything the solvers need, derived once from [`SystemParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutModel {
    pub levels: usize,
    /// Dressed energies `omega_j + lambda_j`.
    pub dressed_energies: Vec<f64>,
    /// Energies appearing in the Hamiltonian (zero in the interaction frame).
    pub frame_energies: Vec<f64>,
    pub shifts: ShiftTable,
    pub chi: Vec<f64>,
    pub kappa: f64,
    pub delta_rd: f64,
    pub epsilon: C64,
    pub n_thermal: f64,
    pub gamma1: DMatrix<f64>,
    pub gamma_phi: DMatrix<f64>,
    pub efficiency: f64,
    pub phase: f64,
    pub include_shifts: bool,
    /// Smallest critical photon number over the couplings, if couplings were given.
    pub n_crit: Option<f64>,
}

impl SystemParams {
    pub fn derive(&self) -> Result<ReadoutModel> {
        let d = self.qudit.levels();
        if d < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 levels, got {d}")));
        }
        let r = &self.resonator;
        for (name, v) in [
            ("kappa_in", r.kappa_in),
            ("kappa_out", r.kappa_out),
            ("kappa_internal", r.kappa_internal),
            ("n_thermal", r.n_thermal),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidArgument(format!("{name} must be finite and nonnegative")));
            }
        }
        if r.kappa() <= 0.0 {
            return Err(Error::InvalidArgument("total resonator decay rate must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::InvalidArgument(format!(
                "efficiency {} outside [0, 1]",
                self.efficiency
            )));
        }
        if self.efficiency >= 0.5 {
            log::warn!(
                "efficiency {} >= 1/2 is not reachable with heterodyne detection",
                self.efficiency
            );
        }
        self.decoherence.validate(d)?;
        let shifts = self.qudit.shift_table(r.omega_r)?;
        let dressed: Vec<f64> = (0..d).map(|j| self.qudit.energies[j] + shifts.lamb[j]).collect();
        let frame_energies = match self.frame {
            QuditFrame::Interaction => vec![0.0; d],
            QuditFrame::Lab => dressed.clone(),
        };
        let n_crit = self.qudit.coupling_matrix().and_then(|g| {
            let mut best: Option<f64> = None;
            for j in 0..d {
                for k in 0..d {
                    let gj = g[(j, k)].norm();
                    if gj > 0.0 {
                        let den = self.qudit.energies[j] - self.qudit.energies[k] - r.omega_r;
                        let n = (den / (2.0 * gj)).powi(2);
                        best = Some(best.map_or(n, |b: f64| b.min(n)));
                    }
                }
            }
            best
        });
        let model = ReadoutModel {
            levels: d,
            dressed_energies: dressed,
            frame_energies,
            chi: shifts.chi.clone(),
            shifts,
            kappa: r.kappa(),
            delta_rd: r.omega_r - r.omega_d,
            epsilon: r.epsilon(),
            n_thermal: r.n_thermal,
            gamma1: self.decoherence.gamma1.clone(),
            gamma_phi: self.decoherence.gamma_phi.clone(),
            efficiency: self.efficiency,
            phase: self.phase,
            include_shifts: self.include_shifts,
            n_crit,
        };
        if let Some(nc) = model.n_crit {
            let nmax = model.steady_state().iter().map(|a| a.norm_sqr()).fold(0.0, f64::max);
            if nmax > nc {
                log::warn!("steady-state photon number {nmax:.3} exceeds critical photon number {nc:.3}");
            }
        }
        Ok(model)
    }
}

impl ReadoutModel {
    pub fn steady_state(&self) -> Vec<C64> {
        steady_state_amplitudes(&self.chi, self.delta_rd, self.kappa, self.epsilon)
    }

    pub fn evolution(&self, initial: &[C64]) -> Result<AmplitudeEvolution> {
        AmplitudeEvolution::new(&self.chi, self.delta_rd, self.kappa, self.epsilon, initial)
    }

    /// Amplitudes starting from an empty resonator.
    pub fn evolution_from_vacuum(&self) -> AmplitudeEvolution {
        AmplitudeEvolution::new(&self.chi, self.delta_rd, self.kappa, self.epsilon, &vec![C64::new(0.0, 0.0); self.levels])
            .expect("length matches")
    }

    /// Total relaxation rate out of level `j`.
    pub fn decay_out(&self, j: usize) -> f64 {
        (0..j).map(|i| self.gamma1[(i, j)]).sum()
    }

    /// Readout-independent damping of `rho_jk`: pure dephasing plus half the decay out of both levels.
    pub fn base_coherence_rate(&self, j: usize, k: usize) -> f64 {
        if j == k {
            0.0
        } else {
            self.gamma_phi[(j, k)] + 0.5 * (self.decay_out(j) + self.decay_out(k))
        }
    }

    /// Noise-free IQ-plane position of pointer state `j`: `2 sqrt(eta kappa) alpha_j e^{-i phi}`.
    pub fn pointer_mean(&self, alpha: C64) -> C64 {
        alpha * C64::from_polar(2.0 * (self.efficiency * self.kappa).sqrt(), -self.phase)
    }

    pub fn max_decoherence_rate(&self) -> f64 {
        self.gamma1.iter().chain(self.gamma_phi.iter()).fold(0.0, |a, &b| a.max(b))
    }

    pub fn max_frame_energy(&self) -> f64 {
        self.frame_energies.iter().fold(0.0, |a, &b| a.max(b.abs()))
    }
}
