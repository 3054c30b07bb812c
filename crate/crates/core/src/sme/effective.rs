use super::noise::NoiseStream;
use super::record::RecordThinner;
use super::trajectory::{
    check_repair, flat_from_matrix, matrix_from_flat, positivity_guard, repair_flat, Trajectory, TrajectorySpec,
};
use crate::error::{Error, Result};
use crate::lindblad::EffectiveGenerator;
use crate::model::{AmplitudeEvolution, ReadoutModel};
use crate::quantum::{von_neumann_entropy, ComplexMatrix, DensityMatrix, C64};

/// Diagonal heterodyne operators `L_I = sum_j Re(alpha_j e^{-i phi}) P_j`, `L_Q` likewise with `Im`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementOperators {
    pub l_i: Vec<f64>,
    pub l_q: Vec<f64>,
}

impl MeasurementOperators {
    pub fn new(alpha: &[C64], phase: f64) -> Self {
        let rot = C64::from_polar(1.0, -phase);
        let mut ops = MeasurementOperators {
            l_i: vec![0.0; alpha.len()],
            l_q: vec![0.0; alpha.len()],
        };
        ops.update(alpha, rot);
        ops
    }

    fn update(&mut self, alpha: &[C64], rot: C64) {
        for (j, a) in alpha.iter().enumerate() {
            let z = a * rot;
            self.l_i[j] = z.re;
            self.l_q[j] = z.im;
        }
    }

    pub fn matrices(&self) -> (ComplexMatrix, ComplexMatrix) {
        let d = self.l_i.len();
        let diag = |v: &[f64]| {
            ComplexMatrix::from_fn(d, d, |i, j| if i == j { C64::new(v[i], 0.0) } else { C64::new(0.0, 0.0) })
        };
        (diag(&self.l_i), diag(&self.l_q))
    }

    /// `(<L_I>, <L_Q>)` for a row-major state.
    fn means(&self, rho: &[C64]) -> (f64, f64) {
        let d = self.l_i.len();
        let mut mi = 0.0;
        let mut mq = 0.0;
        for j in 0..d {
            let p = rho[j * d + j].re;
            mi += self.l_i[j] * p;
            mq += self.l_q[j] * p;
        }
        (mi, mq)
    }
}

/// `V = sqrt(eta kappa) <2 L> + dW / dt` for both quadratures.
pub fn synthesize_record(rho: &DensityMatrix, ops: &MeasurementOperators, sqrt_eta_kappa: f64, dt: f64, dw: [f64; 2]) -> [f64; 2] {
    let (mi, mq) = ops.means(&flat_from_matrix(rho.matrix()));
    [sqrt_eta_kappa * 2.0 * mi + dw[0] / dt, sqrt_eta_kappa * 2.0 * mq + dw[1] / dt]
}

/// Shared update. Without increments (or with zero efficiency) this is the deterministic
/// Euler step `rho + dt L rho`. Otherwise the measured part `eta kappa (D[L_I] + D[L_Q])` is
/// split off the generator and applied through the diagonal operator
/// `K = I + s (L_I dY_I + L_Q dY_Q) - (s^2 / 2) (L_I^2 + L_Q^2) dt` built from the record
/// increments `dY = V dt`, followed by renormalization.
#[allow(clippy::too_many_arguments)]
fn kraus_update(
    gen: &EffectiveGenerator,
    g: &mut [C64],
    ops: &MeasurementOperators,
    sqrt_rate: f64,
    dt: f64,
    rho: &mut [C64],
    drift: &mut [C64],
    kdiag: &mut Vec<f64>,
    record: Option<[f64; 2]>,
) {
    let d = gen.levels();
    match record {
        Some(v) if sqrt_rate != 0.0 => {
            let rate = sqrt_rate * sqrt_rate;
            for j in 0..d {
                for k in 0..d {
                    if j != k {
                        let (di, dq) = (ops.l_i[j] - ops.l_i[k], ops.l_q[j] - ops.l_q[k]);
                        g[j * d + k].re += 0.5 * rate * (di * di + dq * dq);
                    }
                }
            }
            gen.apply_flat(g, rho, drift);
            kdiag.clear();
            for j in 0..d {
                let (li, lq) = (ops.l_i[j], ops.l_q[j]);
                kdiag.push(1.0 + sqrt_rate * (li * v[0] + lq * v[1]) * dt - 0.5 * rate * (li * li + lq * lq) * dt);
            }
            let mut tr = 0.0;
            for j in 0..d {
                for k in 0..d {
                    let idx = j * d + k;
                    rho[idx] = (rho[idx] + drift[idx] * dt) * (kdiag[j] * kdiag[k]);
                }
                tr += rho[j * d + j].re;
            }
            for z in rho.iter_mut() {
                *z /= tr;
            }
        }
        _ => {
            gen.apply_flat(g, rho, drift);
            for (r, dr) in rho.iter_mut().zip(drift.iter()) {
                *r += dr * dt;
            }
        }
    }
}

/// One Ito step of the effective SME at time `t` with amplitudes from the generator.
/// Returns the new state and the record sample generated by the same increments.
pub fn sme_step(
    rho: &DensityMatrix,
    gen: &EffectiveGenerator,
    model: &ReadoutModel,
    t: f64,
    dt: f64,
    dw: [f64; 2],
) -> Result<(DensityMatrix, [f64; 2])> {
    let mut stepper = EffectiveSme::new(model, gen.evolution().clone())?;
    let mut flat = flat_from_matrix(rho.matrix());
    let v = stepper.step(t, dt, &mut flat, Some(dw))?;
    Ok((DensityMatrix::from_trusted(matrix_from_flat(&flat, model.levels)), v.unwrap_or([0.0; 2])))
}

/// Reusable effective-SME stepper working on row-major states.
#[derive(Debug)]
pub struct EffectiveSme {
    gen: EffectiveGenerator,
    levels: usize,
    sqrt_rate: f64,
    rotation: C64,
    alpha: Vec<C64>,
    g: Vec<C64>,
    drift: Vec<C64>,
    ops: MeasurementOperators,
    chol: Vec<C64>,
    kdiag: Vec<f64>,
    max_repair: f64,
}

impl EffectiveSme {
    pub fn new(model: &ReadoutModel, evolution: AmplitudeEvolution) -> Result<Self> {
        let d = model.levels;
        if evolution.levels() != d {
            return Err(Error::Dimension("amplitude evolution does not match the model".into()));
        }
        Ok(EffectiveSme {
            gen: EffectiveGenerator::with_evolution(model, evolution),
            levels: d,
            sqrt_rate: (model.efficiency * model.kappa).sqrt(),
            rotation: C64::from_polar(1.0, -model.phase),
            alpha: vec![C64::new(0.0, 0.0); d],
            g: vec![C64::new(0.0, 0.0); d * d],
            drift: vec![C64::new(0.0, 0.0); d * d],
            ops: MeasurementOperators { l_i: vec![0.0; d], l_q: vec![0.0; d] },
            chol: Vec::with_capacity(d * d),
            kdiag: Vec::with_capacity(d),
            max_repair: 0.0,
        })
    }

    /// Largest per-step correction applied so far.
    pub fn max_repair(&self) -> f64 {
        self.max_repair
    }

    /// Advances `rho` by one step from time `t`. With increments, returns the record sample.
    pub fn step(&mut self, t: f64, dt: f64, rho: &mut [C64], dw: Option<[f64; 2]>) -> Result<Option<[f64; 2]>> {
        self.gen.evolution().at_into(t, &mut self.alpha);
        self.gen.coefficients_into(&self.alpha, &mut self.g);
        self.ops.update(&self.alpha, self.rotation);
        let record = dw.map(|w| {
            let (mi, mq) = self.ops.means(rho);
            [self.sqrt_rate * 2.0 * mi + w[0] / dt, self.sqrt_rate * 2.0 * mq + w[1] / dt]
        });
        kraus_update(&self.gen, &mut self.g, &self.ops, self.sqrt_rate, dt, rho, &mut self.drift, &mut self.kdiag, record);
        let fix = repair_flat(rho, self.levels);
        check_repair(fix, t + dt)?;
        let clamp = positivity_guard(rho, self.levels, t + dt, &mut self.chol)?;
        self.max_repair = self.max_repair.max(fix).max(clamp);
        Ok(record)
    }
}

/// Integrates one effective-SME trajectory. Without a noise stream this is the
/// deterministic Euler solution of the effective master equation (empty record).
pub fn run_effective_trajectory(
    model: &ReadoutModel,
    evolution: AmplitudeEvolution,
    rho0: &DensityMatrix,
    spec: &TrajectorySpec,
    mut noise: Option<&mut NoiseStream>,
) -> Result<Trajectory> {
    spec.validate()?;
    if rho0.dim() != model.levels {
        return Err(Error::Dimension(format!(
            "initial state has dimension {}, model has {} levels",
            rho0.dim(),
            model.levels
        )));
    }
    let d = model.levels;
    let n = spec.steps();
    let h = spec.step_size();
    let mut stepper = EffectiveSme::new(model, evolution)?;
    let mut rho = flat_from_matrix(rho0.matrix());
    let mut out = Trajectory::default();
    let mut thinner = RecordThinner::new(spec.thin);
    let mut buf = [0.0; 2];
    let sample = |out: &mut Trajectory, t: f64, rho: &[C64]| -> Result<()> {
        out.times.push(t);
        out.states.push(rho.to_vec());
        out.entropy.push(von_neumann_entropy(&DensityMatrix::from_trusted(matrix_from_flat(rho, d)))?);
        Ok(())
    };
    sample(&mut out, 0.0, &rho)?;
    for s in 0..n {
        let t = s as f64 * h;
        let dw = match noise.as_deref_mut() {
            Some(ns) => {
                ns.increments(s as u64, h, &mut buf);
                Some(buf)
            }
            None => None,
        };
        if let Some(v) = stepper.step(t, h, &mut rho, dw)? {
            thinner.push(t, h, v);
        }
        if spec.is_sample(s + 1) {
            sample(&mut out, (s + 1) as f64 * h, &rho)?;
        }
    }
    out.record = thinner.finish();
    out.max_repair = stepper.max_repair();
    Ok(out)
}
