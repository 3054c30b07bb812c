use super::noise::NoiseStream;
use super::record::RecordThinner;
use super::trajectory::{check_repair, Trajectory, TrajectorySpec};
use crate::error::{Error, Result};
use crate::lindblad::{repair, rk4_step, CombinedGenerator, Rk4Workspace};
use crate::model::ReadoutModel;
use crate::quantum::{
    partial_trace, von_neumann_entropy, ComplexMatrix, DensityMatrix, Factor, C64, NEGATIVE_EIGENVALUE_TOLERANCE,
};

/// `Tr(a e^{-i phi} rho)`.
fn lowered_mean(rho: &ComplexMatrix, levels: usize, n: usize, rot: C64, sqrt_n: &[f64]) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..levels {
        for m in 0..n - 1 {
            acc += rho[(j * n + m + 1, j * n + m)] * sqrt_n[m + 1];
        }
    }
    acc * rot
}

/// `rho <- K rho K^dag` for `K = I + z a - damp a^dag a` acting on every qudit block.
fn apply_kraus(rho: &mut ComplexMatrix, tmp: &mut ComplexMatrix, levels: usize, n: usize, z: C64, damp: f64, sqrt_n: &[f64]) {
    let dim = levels * n;
    {
        let x = rho.as_slice();
        let y = tmp.as_mut_slice();
        for c in 0..dim {
            for j in 0..levels {
                for m in 0..n {
                    let r = j * n + m;
                    let mut v = x[c * dim + r] * (1.0 - damp * m as f64);
                    if m + 1 < n {
                        v += x[c * dim + r + 1] * (z * sqrt_n[m + 1]);
                    }
                    y[c * dim + r] = v;
                }
            }
        }
    }
    let y = tmp.as_slice();
    let o = rho.as_mut_slice();
    let zc = z.conj();
    for k in 0..levels {
        for p in 0..n {
            let c = k * n + p;
            let f = 1.0 - damp * p as f64;
            for r in 0..dim {
                let mut v = y[c * dim + r] * f;
                if p + 1 < n {
                    v += y[(c + 1) * dim + r] * (zc * sqrt_n[p + 1]);
                }
                o[c * dim + r] = v;
            }
        }
    }
}

/// One trajectory of the qudit-resonator SME with heterodyne detection of the resonator
/// output, `sqrt(eta kappa) (M[c] rho dW_I + M[-i c] rho dW_Q)` with `c = a e^{-i phi}`.
/// Each step takes an RK4 step of the combined generator without the measured
/// `2 eta kappa D[a]`, then applies `K = I + sqrt(eta kappa) c dY - eta kappa c^dag c dt`
/// with the complex record increment `dY = (V_I - i V_Q) dt` and renormalizes.
/// Sampled states are the reduced qudit states; `<a>` is kept alongside.
pub fn simulate_full_sme(
    model: &ReadoutModel,
    n_fock: usize,
    rho0: &DensityMatrix,
    spec: &TrajectorySpec,
    mut noise: Option<&mut NoiseStream>,
) -> Result<Trajectory> {
    spec.validate()?;
    let gen = CombinedGenerator::new(model, n_fock)?;
    let layout = gen.layout;
    let dim = layout.dim();
    if rho0.dim() != dim {
        return Err(Error::Dimension(format!("initial state has dimension {}, layout needs {dim}", rho0.dim())));
    }
    let n = spec.steps();
    let h = spec.step_size();
    if h * gen.stiffness() > 2.5 {
        return Err(Error::InvalidArgument(format!(
            "dt = {h} is unstable for n_fock = {n_fock}; use dt <= {}",
            2.5 / gen.stiffness()
        )));
    }
    let s = (model.efficiency * model.kappa).sqrt();
    let rot = C64::from_polar(1.0, -model.phase);
    let sqrt_n: Vec<f64> = (0..=n_fock).map(|m| (m as f64).sqrt()).collect();
    if model.efficiency > 0.5 {
        return Err(Error::InvalidArgument(format!(
            "heterodyne efficiency {} exceeds 1/2, the combined engine cannot represent it",
            model.efficiency
        )));
    }
    let rest = gen.without_resonator_decay(2.0 * model.efficiency * model.kappa)?;
    let mut rho = rho0.matrix().clone();
    let mut tmp = ComplexMatrix::zeros(dim, dim);
    let mut ws = Rk4Workspace::new(dim);
    let mut out = Trajectory { resonator_mean: Some(Vec::new()), ..Default::default() };
    let mut thinner = RecordThinner::new(spec.thin);
    let mut buf = [0.0; 2];
    let sample = |out: &mut Trajectory, t: f64, rho: &ComplexMatrix| -> Result<()> {
        let dm = DensityMatrix::from_trusted(rho.clone());
        let q = partial_trace(&dm, &layout, Factor::Qudit)?;
        let d = layout.levels;
        out.times.push(t);
        out.states.push((0..d * d).map(|i| q.get(i / d, i % d)).collect());
        out.entropy.push(von_neumann_entropy(&q)?);
        out.resonator_mean.as_mut().expect("set above").push(lowered_mean(rho, layout.levels, layout.fock_dim(), C64::new(1.0, 0.0), &sqrt_n));
        Ok(())
    };
    sample(&mut out, 0.0, &rho)?;
    for step in 0..n {
        let t = step as f64 * h;
        let dw = match noise.as_deref_mut() {
            Some(ns) => {
                ns.increments(step as u64, h, &mut buf);
                Some(buf)
            }
            None => None,
        };
        match dw {
            Some(w) => {
                let mean = lowered_mean(&rho, layout.levels, layout.fock_dim(), rot, &sqrt_n);
                let v = [2.0 * s * mean.re + w[0] / h, 2.0 * s * mean.im + w[1] / h];
                thinner.push(t, h, v);
                rk4_step(&rest, t, h, &mut rho, &mut ws);
                if s != 0.0 {
                    let z = rot * C64::new(v[0] * h, -v[1] * h) * s;
                    apply_kraus(&mut rho, &mut tmp, layout.levels, layout.fock_dim(), z, s * s * h, &sqrt_n);
                    let tr = rho.trace().re;
                    if !(tr > 0.0 && tr.is_finite()) {
                        return Err(Error::Numerical(format!("conditional state trace {tr} at t = {}", t + h)));
                    }
                    rho /= C64::new(tr, 0.0);
                }
            }
            None => rk4_step(&rest, t, h, &mut rho, &mut ws),
        }
        let (herm, drift) = repair(&mut rho);
        check_repair(herm.max(drift), t + h)?;
        let shifted = &rho + ComplexMatrix::identity(dim, dim) * C64::new(NEGATIVE_EIGENVALUE_TOLERANCE, 0.0);
        if shifted.cholesky().is_none() {
            let d = crate::quantum::validate_density(&rho);
            if d.min_eigenvalue < -NEGATIVE_EIGENVALUE_TOLERANCE {
                return Err(Error::Numerical(format!(
                    "combined state lost positivity at t = {}: min eigenvalue {:e}",
                    t + h,
                    d.min_eigenvalue
                )));
            }
        }
        if spec.is_sample(step + 1) {
            sample(&mut out, (step + 1) as f64 * h, &rho)?;
        }
    }
    out.record = thinner.finish();
    Ok(out)
}
