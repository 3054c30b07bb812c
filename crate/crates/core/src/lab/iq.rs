use crate::error::{Error, Result};
use crate::quantum::C64;
use crate::sme::MeasurementRecord;

/// Time-averaged heterodyne output of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IQPoint {
    pub v_bar: C64,
    pub trajectory_id: u64,
    pub window: (f64, f64),
    /// Basis level the trajectory was prepared in, when known.
    pub label: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Weighting {
    #[default]
    Flat,
    /// One weight per record sample.
    Custom(Vec<f64>),
}

/// Weighted mean of `V_I + i V_Q` over `window`. Each record sample contributes in
/// proportion to its overlap with the window.
pub fn integrate_iq(record: &MeasurementRecord, window: (f64, f64), weighting: &Weighting) -> Result<C64> {
    let (t0, t1) = window;
    if !(t1 > t0) {
        return Err(Error::InvalidArgument(format!("empty window [{t0}, {t1}]")));
    }
    if record.is_empty() {
        return Err(Error::InvalidArgument("empty record".into()));
    }
    let span = (record.times[0], record.end_time());
    let slack = 1e-9 * (span.1 - span.0).abs().max(1.0);
    if t0 < span.0 - slack || t1 > span.1 + slack {
        return Err(Error::InvalidArgument(format!(
            "window [{t0}, {t1}] outside record span [{}, {}]",
            span.0, span.1
        )));
    }
    if let Weighting::Custom(w) = weighting {
        if w.len() != record.len() {
            return Err(Error::Dimension(format!("{} weights for {} record samples", w.len(), record.len())));
        }
    }
    let mut acc = C64::new(0.0, 0.0);
    let mut norm = 0.0;
    for i in 0..record.len() {
        let a = record.times[i];
        let b = a + record.durations[i];
        let overlap = b.min(t1) - a.max(t0);
        if overlap <= 0.0 {
            continue;
        }
        let w = match weighting {
            Weighting::Flat => overlap,
            Weighting::Custom(w) => w[i] * overlap,
        };
        acc += C64::new(record.v_i[i], record.v_q[i]) * w;
        norm += w;
    }
    if norm == 0.0 {
        return Err(Error::InvalidArgument("window carries zero total weight".into()));
    }
    Ok(acc / norm)
}

pub fn iq_point(
    record: &MeasurementRecord,
    trajectory_id: u64,
    window: (f64, f64),
    weighting: &Weighting,
    label: Option<usize>,
) -> Result<IQPoint> {
    Ok(IQPoint {
        v_bar: integrate_iq(record, window, weighting)?,
        trajectory_id,
        window,
        label,
    })
}
