use super::cluster::{cluster_report, ClusterReport};
use super::ensemble::{run_ensemble_with, EnsembleConfig};
use super::iq::{iq_point, IQPoint, Weighting};
use crate::error::{Error, Result};
use crate::model::{RateTable, ReadoutModel};
use crate::quantum::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Drive frequency `omega_d`, rad/us.
    ReadoutFrequency,
    /// Measurement time, us.
    MeasurementTime,
    /// Magnitude of the input field amplitude, sqrt(photons / us).
    DriveAmplitude,
}

/// Where IQ averaging starts; the end is always the measurement time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindowStart {
    /// `5 / kappa`, skipping the resonator ring-up.
    AfterTransient,
    At(f64),
}

impl WindowStart {
    pub fn resolve(self, model: &ReadoutModel) -> f64 {
        match self {
            WindowStart::AfterTransient => 5.0 / model.kappa,
            WindowStart::At(t) => t,
        }
    }
}

/// IQ points of every completed trajectory, averaged over `[start, t_final]`.
pub fn ensemble_iq(cfg: &EnsembleConfig, start: WindowStart, weighting: &Weighting) -> Result<(Vec<IQPoint>, usize)> {
    let model = cfg.params.derive()?;
    let t0 = start.resolve(&model);
    let t1 = cfg.spec.t_final;
    if !(t0 >= 0.0 && t0 < t1) {
        return Err(Error::InvalidArgument(format!("IQ window start {t0} not inside [0, {t1})")));
    }
    let run = run_ensemble_with(cfg, |id, tr| iq_point(&tr.record, id, (t0, t1), weighting, cfg.prepared_level(id)))?;
    let mut points = Vec::with_capacity(run.outputs.len());
    for (_, p) in run.outputs {
        points.push(p?);
    }
    Ok((points, run.stats.aborted.len()))
}

/// Reference cluster centers `2 sqrt(eta kappa) alpha_j(inf) e^{-i phi}`.
pub fn reference_means(model: &ReadoutModel) -> Vec<C64> {
    model.steady_state().into_iter().map(|a| model.pointer_mean(a)).collect()
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: f64,
    pub report: ClusterReport,
    pub rates: RateTable,
    pub points: Vec<IQPoint>,
    pub aborted: usize,
}

/// Copy of `cfg` moved to `value` along `axis`.
pub fn at_grid_point(cfg: &EnsembleConfig, axis: SweepAxis, value: f64) -> Result<EnsembleConfig> {
    if !value.is_finite() {
        return Err(Error::InvalidArgument(format!("non-finite sweep value {value}")));
    }
    let mut c = cfg.clone();
    match axis {
        SweepAxis::ReadoutFrequency => c.params.resonator.omega_d = value,
        SweepAxis::MeasurementTime => c.spec.t_final = value,
        SweepAxis::DriveAmplitude => {
            let a = c.params.resonator.input_amplitude;
            c.params.resonator.input_amplitude = if a.norm() > 0.0 { a / a.norm() * value } else { C64::new(value, 0.0) };
        }
    }
    Ok(c)
}

/// Runs the ensemble at every grid value and classifies the IQ points against the
/// steady-state pointer positions of that grid point.
pub fn sweep(cfg: &EnsembleConfig, axis: SweepAxis, grid: &[f64], start: WindowStart, weighting: &Weighting) -> Result<Vec<SweepPoint>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("sweep grid is empty".into()));
    }
    grid.iter()
        .map(|&value| {
            let c = at_grid_point(cfg, axis, value)?;
            let model = c.params.derive()?;
            let (points, aborted) = ensemble_iq(&c, start, weighting)?;
            let report = cluster_report(&points, &reference_means(&model))?;
            Ok(SweepPoint {
                value,
                report,
                rates: RateTable::steady_state(&model),
                points,
                aborted,
            })
        })
        .collect()
}
