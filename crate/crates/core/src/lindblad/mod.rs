//! Deterministic master-equation solvers: the qudit-resonator master equation, its analytic
//! solution and the effective qudit-only equation with measurement-induced dephasing.

mod analytic;
mod combined;
mod effective;
mod integrate;
mod thermal;

pub use analytic::analytic_combined_state;
pub use combined::{build_dense_combined, CombinedGenerator};
pub use effective::{integrate_effective_me, EffectiveGenerator};
pub use integrate::{
    integrate_me, me_step_bound, repair, rk4_step, DenseLindbladian, Generator, Method, MeOptions,
    MeSolution, Rk4Workspace,
};
pub use thermal::{thermal_variance, thermal_variance_derivative};
