use crate::error::{Error, Result};
use crate::model::{ReadoutModel, RateTable};
use crate::quantum::{
    lindblad_rhs, validate_density, ComplexMatrix, DensityMatrix, LindbladTerm, C64,
    NEGATIVE_EIGENVALUE_TOLERANCE,
};

/// Right-hand side `d rho / dt = L(t) rho` of a (possibly time-dependent) master equation.
pub trait Generator: Sync {
    fn dim(&self) -> usize;
    /// Writes `L(t) rho` into `out` (overwriting it).
    fn apply(&self, t: f64, rho: &ComplexMatrix, out: &mut ComplexMatrix);
}

/// Time-independent master equation given by a Hamiltonian and collapse operators.
#[derive(Debug, Clone)]
pub struct DenseLindbladian {
    pub hamiltonian: ComplexMatrix,
    pub terms: Vec<LindbladTerm>,
}

impl Generator for DenseLindbladian {
    fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    fn apply(&self, _t: f64, rho: &ComplexMatrix, out: &mut ComplexMatrix) {
        *out = lindblad_rhs(&self.hamiltonian, &self.terms, rho);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Rk4,
    Euler,
}

#[derive(Debug, Clone, Copy)]
pub struct MeOptions {
    pub max_dt: f64,
    pub method: Method,
}

#[derive(Debug, Clone)]
pub struct MeSolution {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub steps: usize,
    /// Largest trace correction applied in a single step.
    pub max_trace_drift: f64,
}

pub struct Rk4Workspace {
    k: [ComplexMatrix; 4],
    stage: ComplexMatrix,
}

impl Rk4Workspace {
    pub fn new(n: usize) -> Self {
        let z = ComplexMatrix::zeros(n, n);
        Rk4Workspace {
            k: [z.clone(), z.clone(), z.clone(), z.clone()],
            stage: z,
        }
    }
}

fn axpy(y: &mut ComplexMatrix, a: f64, x: &ComplexMatrix) {
    for (yi, xi) in y.as_mut_slice().iter_mut().zip(x.as_slice()) {
        *yi += xi * a;
    }
}

fn offset_into(out: &mut ComplexMatrix, base: &ComplexMatrix, a: f64, x: &ComplexMatrix) {
    for ((o, b), xi) in out.as_mut_slice().iter_mut().zip(base.as_slice()).zip(x.as_slice()) {
        *o = b + xi * a;
    }
}

/// Classical fourth-order Runge-Kutta step, in place.
pub fn rk4_step<G: Generator + ?Sized>(gen: &G, t: f64, h: f64, rho: &mut ComplexMatrix, ws: &mut Rk4Workspace) {
    let Rk4Workspace { k, stage } = ws;
    gen.apply(t, rho, &mut k[0]);
    offset_into(stage, rho, h / 2.0, &k[0]);
    gen.apply(t + h / 2.0, stage, &mut k[1]);
    offset_into(stage, rho, h / 2.0, &k[1]);
    gen.apply(t + h / 2.0, stage, &mut k[2]);
    offset_into(stage, rho, h, &k[2]);
    gen.apply(t + h, stage, &mut k[3]);
    let w = h / 6.0;
    for i in 0..rho.len() {
        let inc = k[0].as_slice()[i] + (k[1].as_slice()[i] + k[2].as_slice()[i]) * 2.0 + k[3].as_slice()[i];
        rho.as_mut_slice()[i] += inc * w;
    }
}

fn euler_step<G: Generator + ?Sized>(gen: &G, t: f64, h: f64, rho: &mut ComplexMatrix, ws: &mut Rk4Workspace) {
    gen.apply(t, rho, &mut ws.k[0]);
    axpy(rho, h, &ws.k[0]);
}

/// Symmetrizes and renormalizes in place; returns (Hermiticity defect, trace defect) before repair.
pub fn repair(rho: &mut ComplexMatrix) -> (f64, f64) {
    let n = rho.nrows();
    let mut herm = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let a = rho[(i, j)];
            let b = rho[(j, i)].conj();
            herm = herm.max((a - b).norm());
            let m = (a + b) * 0.5;
            rho[(i, j)] = m;
            rho[(j, i)] = m.conj();
        }
        herm = herm.max(rho[(i, i)].im.abs());
        rho[(i, i)].im = 0.0;
    }
    let tr: f64 = (0..n).map(|i| rho[(i, i)].re).sum();
    let drift = (tr - 1.0).abs();
    if tr != 0.0 {
        *rho /= C64::new(tr, 0.0);
    }
    (herm, drift)
}

/// Step bound from the resonator and qudit time scales of `model`.
pub fn me_step_bound(model: &ReadoutModel) -> f64 {
    let mut fastest = model.kappa;
    for &c in &model.chi {
        fastest = fastest.max((model.delta_rd + c).abs());
    }
    fastest = fastest.max(model.max_decoherence_rate());
    fastest = fastest.max(model.max_frame_energy());
    let gm = RateTable::steady_state(model).gamma_m;
    fastest = fastest.max(gm.iter().fold(0.0, |a, &b| a.max(b)));
    0.02 / fastest
}

fn check_output(m: &ComplexMatrix, t: f64) -> Result<()> {
    let d = validate_density(m);
    if d.hermiticity_defect > 1e-7 || d.trace_defect > 1e-7 || d.min_eigenvalue < -NEGATIVE_EIGENVALUE_TOLERANCE {
        return Err(Error::Numerical(format!(
            "invalid state at t = {t}: hermiticity defect {:e}, trace defect {:e}, min eigenvalue {:e}",
            d.hermiticity_defect, d.trace_defect, d.min_eigenvalue
        )));
    }
    Ok(())
}

/// Integrates from `times[0]` and returns the state at every entry of `times`
/// (the first entry is the initial state). Each interval is split into equal steps no
/// longer than `opts.max_dt`.
pub fn integrate_me<G: Generator + ?Sized>(
    rho0: &DensityMatrix,
    gen: &G,
    times: &[f64],
    opts: MeOptions,
) -> Result<MeSolution> {
    if rho0.dim() != gen.dim() {
        return Err(Error::Dimension(format!(
            "state dimension {} does not match generator dimension {}",
            rho0.dim(),
            gen.dim()
        )));
    }
    if times.is_empty() || !times.windows(2).all(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("output times must be nonempty and nondecreasing".into()));
    }
    if !(opts.max_dt > 0.0) {
        return Err(Error::InvalidArgument("max_dt must be positive".into()));
    }
    let mut rho = rho0.matrix().clone();
    let mut ws = Rk4Workspace::new(gen.dim());
    let mut states = vec![rho0.clone()];
    let mut steps = 0;
    let mut max_drift = 0.0f64;
    for w in times.windows(2) {
        let span = w[1] - w[0];
        let n = (span / opts.max_dt - 1e-9).ceil().max(0.0) as usize;
        if n > 0 {
            let h = span / n as f64;
            for s in 0..n {
                let t = w[0] + s as f64 * h;
                match opts.method {
                    Method::Rk4 => rk4_step(gen, t, h, &mut rho, &mut ws),
                    Method::Euler => euler_step(gen, t, h, &mut rho, &mut ws),
                }
                let (_, drift) = repair(&mut rho);
                max_drift = max_drift.max(drift);
                if !rho.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                    return Err(Error::Numerical(format!("non-finite state at t = {}", t + h)));
                }
            }
            steps += n;
        }
        check_output(&rho, w[1])?;
        states.push(DensityMatrix::from_trusted(rho.clone()));
    }
    if max_drift > 1e-9 {
        log::debug!("largest per-step trace correction {max_drift:e}");
    }
    Ok(MeSolution {
        times: times.to_vec(),
        states,
        steps,
        max_trace_drift: max_drift,
    })
}
