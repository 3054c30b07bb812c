//! Dispersive qudit-resonator parameters and the closed-form quantities derived from them.
//!
//! Units: angular frequencies and rates in rad/us, times in us.

mod amplitudes;
mod dephasing;
mod params;
mod rates;
mod shifts;

pub use amplitudes::{amplitude_derivative, steady_state_amplitudes, AmplitudeEvolution, CoherentAmplitudes};
pub use dephasing::{pairwise_from_coherence_rates, pairwise_from_diagonal_dephasing, PairwiseDephasing};
pub use params::{
    Coupling, DecoherenceSpec, QuditFrame, QuditSpec, ReadoutModel, ResonatorSpec, SystemParams,
};
pub use rates::{
    dephasing_and_shifts, measurement_rates, qutrit_closed_form_rates, triangle_residuals,
    ClosedFormRates, RateTable,
};
pub use shifts::{dispersive_shifts, ShiftTable};
