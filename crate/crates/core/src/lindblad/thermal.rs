/// Photon-number variance offset `N(t)` of a thermally driven resonator:
/// `dN/dt = -kappa (N - n_bar)`.
pub fn thermal_variance_derivative(kappa: f64, n_bar: f64, n: f64) -> f64 {
    -kappa * (n - n_bar)
}

pub fn thermal_variance(kappa: f64, n_bar: f64, n0: f64, t: f64) -> f64 {
    n_bar + (n0 - n_bar) * (-kappa * t).exp()
}
