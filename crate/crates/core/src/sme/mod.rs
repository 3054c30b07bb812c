//! Stochastic master equations for continuous heterodyne readout: the effective qudit SME,
//! its quantum-state-diffusion unravelling and the qudit-resonator SME.

mod effective;
mod full;
mod noise;
mod qsd;
mod record;
mod trajectory;

pub use effective::{run_effective_trajectory, sme_step, synthesize_record, EffectiveSme, MeasurementOperators};
pub use full::simulate_full_sme;
pub use noise::NoiseStream;
pub use qsd::{qsd_step, run_qsd_trajectory, QsdChannel, QsdModel};
pub use record::{MeasurementRecord, RecordThinner};
pub use trajectory::{Trajectory, TrajectorySpec, REPAIR_LIMIT};
