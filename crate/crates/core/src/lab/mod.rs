//! Monte-Carlo ensembles and their analysis: IQ integration, cluster statistics, jump
//! detection and parameter sweeps.

mod cluster;
mod ensemble;
mod iq;
mod jumps;
mod sweep;

pub use cluster::{cluster_report, em_fit, ClusterReport, MixtureFit, MIN_POINTS, STREAM_SIGMAS};
pub use ensemble::{
    run_ensemble, run_ensemble_with, Engine, EnsembleConfig, EnsembleRun, EnsembleStats, InitialState, ResonatorStart,
    DEFAULT_BUDGET, MAX_ABORT_FRACTION,
};
pub use iq::{integrate_iq, iq_point, IQPoint, Weighting};
pub use jumps::{detect_jumps, JumpEvent};
pub use sweep::{at_grid_point, ensemble_iq, reference_means, sweep, SweepAxis, SweepPoint, WindowStart};
