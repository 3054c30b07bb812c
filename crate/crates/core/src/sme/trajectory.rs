use super::record::MeasurementRecord;
use crate::error::{Error, Result};
use crate::quantum::{ComplexMatrix, C64, NEGATIVE_EIGENVALUE_TOLERANCE};

/// Largest Hermiticity or trace correction tolerated in one step.
pub const REPAIR_LIMIT: f64 = 1e-6;

/// Time grid of a single trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySpec {
    pub t_final: f64,
    /// Requested step; the actual step divides `t_final` evenly and is never larger.
    pub dt: f64,
    /// States are sampled and records block-averaged every `thin` steps.
    pub thin: usize,
}

impl TrajectorySpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(Error::InvalidArgument("t_final must be positive".into()));
        }
        if !(self.dt > 0.0) || self.dt > self.t_final {
            return Err(Error::InvalidArgument("dt must be positive and at most t_final".into()));
        }
        if self.thin == 0 {
            return Err(Error::InvalidArgument("thin must be at least 1".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        ((self.t_final / self.dt) - 1e-9).ceil().max(1.0) as usize
    }

    pub fn step_size(&self) -> f64 {
        self.t_final / self.steps() as f64
    }

    pub fn is_sample(&self, step: usize) -> bool {
        step % self.thin == 0 || step == self.steps()
    }

    pub fn sample_times(&self) -> Vec<f64> {
        let h = self.step_size();
        (0..=self.steps()).filter(|&s| self.is_sample(s)).map(|s| s as f64 * h).collect()
    }
}

/// Sampled output of one trajectory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Row-major qudit density matrices (reduced, for combined-state engines).
    pub states: Vec<Vec<C64>>,
    pub entropy: Vec<f64>,
    pub record: MeasurementRecord,
    /// `<a>` at the sample times, for engines that keep the resonator.
    pub resonator_mean: Option<Vec<C64>>,
    /// Largest per-step repair applied.
    pub max_repair: f64,
}

impl Trajectory {
    pub fn levels(&self) -> usize {
        self.states.first().map(|s| (s.len() as f64).sqrt().round() as usize).unwrap_or(0)
    }

    pub fn populations(&self, sample: usize) -> Vec<f64> {
        let d = self.levels();
        (0..d).map(|j| self.states[sample][j * d + j].re).collect()
    }
}

pub(crate) fn flat_from_matrix(m: &ComplexMatrix) -> Vec<C64> {
    let d = m.nrows();
    (0..d * d).map(|i| m[(i / d, i % d)]).collect()
}

pub(crate) fn matrix_from_flat(v: &[C64], d: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(d, d, |i, j| v[i * d + j])
}

/// Symmetrize and renormalize a row-major matrix; returns the larger of the two corrections.
pub(crate) fn repair_flat(rho: &mut [C64], d: usize) -> f64 {
    let mut herm = 0.0f64;
    let mut tr = 0.0;
    for i in 0..d {
        for j in i + 1..d {
            let a = rho[i * d + j];
            let b = rho[j * d + i].conj();
            herm = herm.max((a - b).norm());
            let m = (a + b) * 0.5;
            rho[i * d + j] = m;
            rho[j * d + i] = m.conj();
        }
        herm = herm.max(rho[i * d + i].im.abs());
        rho[i * d + i].im = 0.0;
        tr += rho[i * d + i].re;
    }
    let inv = 1.0 / tr;
    for z in rho.iter_mut() {
        *z *= inv;
    }
    herm.max((tr - 1.0).abs())
}

/// Cholesky test of `rho + shift I` for a Hermitian row-major matrix.
pub(crate) fn shifted_cholesky_ok(rho: &[C64], d: usize, shift: f64, l: &mut Vec<C64>) -> bool {
    l.clear();
    l.resize(d * d, C64::new(0.0, 0.0));
    for j in 0..d {
        let mut s = rho[j * d + j].re + shift;
        for k in 0..j {
            s -= l[j * d + k].norm_sqr();
        }
        if !(s > 0.0) {
            return false;
        }
        let ljj = s.sqrt();
        l[j * d + j] = C64::new(ljj, 0.0);
        for i in j + 1..d {
            let mut v = rho[i * d + j];
            for k in 0..j {
                v -= l[i * d + k] * l[j * d + k].conj();
            }
            l[i * d + j] = v / ljj;
        }
    }
    true
}

/// Accepts `rho` when `rho + 1e-6 I` has a Cholesky factor. Otherwise eigenvalues in
/// `[-1e-6, 0)` are clamped to zero (the state is rebuilt and renormalized, returning the
/// size of the correction) and anything more negative aborts.
pub(crate) fn positivity_guard(rho: &mut [C64], d: usize, t: f64, buf: &mut Vec<C64>) -> Result<f64> {
    if shifted_cholesky_ok(rho, d, NEGATIVE_EIGENVALUE_TOLERANCE, buf) {
        let mut min_diag = f64::INFINITY;
        for j in 0..d {
            min_diag = min_diag.min(rho[j * d + j].re);
        }
        if min_diag >= 0.0 && shifted_cholesky_ok(rho, d, 0.0, buf) {
            return Ok(0.0);
        }
    }
    let m = matrix_from_flat(rho, d);
    let eig = m.symmetric_eigen();
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if min < -NEGATIVE_EIGENVALUE_TOLERANCE {
        return Err(Error::Numerical(format!("state lost positivity at t = {t}: min eigenvalue {min:e}")));
    }
    if min >= 0.0 {
        return Ok(0.0);
    }
    let clamped: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    let v = &eig.eigenvectors;
    for i in 0..d {
        for j in 0..d {
            let mut acc = C64::new(0.0, 0.0);
            for (k, &l) in clamped.iter().enumerate() {
                if l > 0.0 {
                    acc += v[(i, k)] * v[(j, k)].conj() * l;
                }
            }
            rho[i * d + j] = acc / total;
        }
    }
    Ok(-min)
}

pub(crate) fn check_repair(correction: f64, t: f64) -> Result<()> {
    if !(correction <= REPAIR_LIMIT) {
        return Err(Error::Numerical(format!(
            "step repair {correction:e} exceeds {REPAIR_LIMIT:e} at t = {t}; reduce dt"
        )));
    }
    Ok(())
}
