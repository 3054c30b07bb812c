#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::DMatrix;
use qudit_readout::io::{parse_config, RunConfig};
use qudit_readout::model::SystemParams;
use qudit_readout::quantum::{ComplexMatrix, DensityMatrix, C64};
pub use rand_chacha::rand_core::RngCore;
pub use rand_chacha::ChaCha8Rng;

pub fn preset_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../presets").join(format!("{name}.json"))
}

pub fn preset(name: &str) -> RunConfig {
    parse_config(&preset_path(name)).unwrap_or_else(|e| panic!("preset {name}: {e}"))
}

/// Shipped experimental parameters (kappa/2pi = 2.7 MHz, chi/2pi = 0.6 MHz, drive at omega_r + chi).
pub fn fig5_params() -> SystemParams {
    preset("fig5").system_params().expect("fig5 params")
}

pub fn without_relaxation(mut p: SystemParams) -> SystemParams {
    let d = p.qudit.levels();
    p.decoherence.gamma1 = DMatrix::zeros(d, d);
    p
}

pub fn with_efficiency(mut p: SystemParams, eta: f64) -> SystemParams {
    p.efficiency = eta;
    p
}

/// The mixed qutrit state used throughout the trajectory examples.
pub fn example_state() -> DensityMatrix {
    let v = [[0.5, 0.3, 0.36], [0.3, 0.2, 0.24], [0.36, 0.24, 0.3]];
    DensityMatrix::new(ComplexMatrix::from_fn(3, 3, |j, k| C64::new(v[j][k], 0.0))).expect("valid state")
}

/// `alpha_j = i eps / (kappa/2 + i (delta + chi_j))`, written out independently of the model code.
pub fn steady_alpha(kappa: f64, delta: f64, chi: f64, eps: C64) -> C64 {
    C64::i() * eps / C64::new(kappa / 2.0, delta + chi)
}

/// Uniform draw in `[lo, hi)` from a seeded ChaCha stream.
pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}
