mod common;

use std::f64::consts::TAU;

use common::*;
use nalgebra::DMatrix;
use qudit_readout::lindblad::{integrate_effective_me, integrate_me, CombinedGenerator, MeOptions, Method};
use qudit_readout::model::{RateTable, SystemParams};
use qudit_readout::quantum::{build_operator, trace, DensityMatrix, OperatorKind, C64};

const RK4: MeOptions = MeOptions { max_dt: 1e-3, method: Method::Rk4 };

#[test]
fn shipped_parameters_are_read_in_angular_units() {
    let m = fig5_params().derive().unwrap();
    assert!((m.kappa - TAU * 2.7).abs() < 1e-12);
    assert!((m.chi[1] - m.chi[0] - TAU * 0.6).abs() < 1e-12);
    assert!((m.chi[2] - m.chi[0] - TAU * 1.2).abs() < 1e-12);
    assert!((m.delta_rd - TAU * (6783.5 - 6784.1)).abs() < 1e-9);
    assert!((m.epsilon - C64::new((TAU * 1.35).sqrt() * 4.0, 0.0)).norm() < 1e-12);
}

#[test]
fn steady_state_matches_independent_formula() {
    let m = fig5_params().derive().unwrap();
    let eps = C64::new((TAU * 1.35).sqrt() * 4.0, 0.0);
    let expected: Vec<C64> =
        [0.0, 0.6, 1.2].iter().map(|c| steady_alpha(TAU * 2.7, TAU * (6783.5 - 6784.1), TAU * c, eps)).collect();
    let rates = RateTable::steady_state(&m);
    for (a, b) in rates.alpha.iter().zip(&expected) {
        assert!((a - b).norm() < 1e-12, "{a} vs {b}");
    }
    // Drive on the e response: alpha_e is purely imaginary and g, f are mirror images.
    assert!((expected[1] - C64::new(0.0, 1.3734)).norm() < 1e-4);
    assert!((expected[0] - C64::new(-0.5097, 1.1469)).norm() < 1e-4);
    assert!((expected[2] - C64::new(0.5097, 1.1469)).norm() < 1e-4);
    for (j, k) in [(0, 1), (0, 2), (1, 2)] {
        let gm = TAU * 2.7 * (expected[j] - expected[k]).norm_sqr();
        assert!((rates.gamma_m[(j, k)] - gm).abs() < 1e-10 * gm);
    }
    assert!((rates.gamma_m[(0, 1)] - 5.278).abs() < 2e-3);
    assert!((rates.gamma_m[(0, 2)] - 17.63).abs() < 1e-2);
}

#[test]
fn undriven_populations_follow_rate_equations() {
    let mut p = fig5_params();
    p.resonator.input_amplitude = C64::new(0.0, 0.0);
    p.decoherence.gamma1[(0, 1)] = 0.4;
    p.decoherence.gamma1[(1, 2)] = 0.7;
    p.decoherence.gamma1[(0, 2)] = 0.1;
    let m = p.derive().unwrap();
    let g = &p.decoherence.gamma1;
    // dp_j/dt = sum_{l>j} g_jl p_l - p_j sum_{l<j} g_lj
    let mut rate = DMatrix::<f64>::zeros(3, 3);
    for j in 0..3 {
        for l in j + 1..3 {
            rate[(j, l)] += g[(j, l)];
            rate[(l, l)] -= g[(j, l)];
        }
    }
    let rho0 = example_state();
    let p0 = nalgebra::DVector::from_vec(vec![0.5, 0.2, 0.3]);
    let times: Vec<f64> = (0..=8).map(|i| 0.5 * i as f64).collect();
    let sol = integrate_effective_me(&m, &rho0, &times, RK4).unwrap();
    for (t, rho) in times.iter().zip(&sol.states) {
        let expected = (&rate * *t).exp() * &p0;
        for j in 0..3 {
            assert!((rho.get(j, j).re - expected[j]).abs() < 1e-10, "t={t} level {j}");
        }
    }
}

#[test]
fn undriven_resonator_thermalises() {
    let mut p = without_relaxation(fig5_params());
    p.resonator.input_amplitude = C64::new(0.0, 0.0);
    p.resonator.n_thermal = 0.3;
    p.decoherence.gamma_phi.fill(0.0);
    let m = p.derive().unwrap();
    let n_fock = 14;
    let gen = CombinedGenerator::new(&m, n_fock).unwrap();
    let rho0 = DensityMatrix::basis(3, 1).unwrap().tensor(&DensityMatrix::basis(n_fock, 0).unwrap());
    let number = build_operator(OperatorKind::Number, &gen.layout).unwrap();
    let times: Vec<f64> = (0..=6).map(|i| 0.05 * i as f64).collect();
    let opts = MeOptions { max_dt: (2.5 / gen.stiffness()).min(1e-3), method: Method::Rk4 };
    let sol = integrate_me(&rho0, &gen, &times, opts).unwrap();
    for (t, rho) in times.iter().zip(&sol.states) {
        let n = trace(&(&number * rho.matrix())).re;
        let expected = 0.3 * (1.0 - (-m.kappa * t).exp());
        assert!((n - expected).abs() < 1e-6, "t={t}: {n} vs {expected}");
    }
}

#[test]
fn ge_rate_peaks_between_the_two_responses() {
    let p = fig5_params();
    let m0 = p.derive().unwrap();
    let chi = m0.chi[1] - m0.chi[0];
    let centre = p.resonator.omega_r + m0.chi[0] + chi / 2.0;
    let step = TAU * 0.02;
    let grid: Vec<f64> = (-40..=40).map(|i| centre + step * i as f64).collect();
    let rates: Vec<f64> = grid
        .iter()
        .map(|&w| {
            let mut q = p.clone();
            q.resonator.omega_d = w;
            RateTable::steady_state(&q.derive().unwrap()).gamma_m[(0, 1)]
        })
        .collect();
    let peak = (0..rates.len()).max_by(|&a, &b| rates[a].total_cmp(&rates[b])).unwrap();
    assert_eq!(peak, 40, "peak at {}", grid[peak]);
    for i in 0..peak {
        assert!(rates[i] < rates[i + 1]);
    }
    for i in peak..rates.len() - 1 {
        assert!(rates[i] > rates[i + 1]);
    }
}

#[test]
fn undriven_resonator_gives_no_measurement() {
    let mut p: SystemParams = fig5_params();
    p.resonator.input_amplitude = C64::new(0.0, 0.0);
    let rates = RateTable::steady_state(&p.derive().unwrap());
    assert!(rates.alpha.iter().all(|a| a.norm() == 0.0));
    assert!(rates.gamma_m.iter().all(|&g| g == 0.0));
    assert!(rates.gamma_d.iter().all(|&g| g == 0.0));
}
