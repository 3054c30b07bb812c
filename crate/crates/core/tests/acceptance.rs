//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the libtest harness so the
//! lines are always printed; a name fragment on the command line selects criteria.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::*;
use nalgebra::DMatrix;
use qudit_readout::lab::{
    ensemble_iq, run_ensemble, run_ensemble_with, sweep, detect_jumps, cluster_report, reference_means, EnsembleConfig,
    InitialState, SweepAxis, Weighting, WindowStart,
};
use qudit_readout::lindblad::{
    analytic_combined_state, integrate_effective_me, integrate_me, CombinedGenerator, MeOptions, Method,
};
use qudit_readout::model::{DecoherenceSpec, QuditFrame, QuditSpec, RateTable, ResonatorSpec, SystemParams};
use qudit_readout::quantum::{hermitian_eigenvalues, hermiticity_defect, partial_trace, DensityMatrix, Factor, C64};
use qudit_readout::sme::{run_effective_trajectory, NoiseStream, TrajectorySpec};
use rand_chacha::rand_core::SeedableRng;

type Check = (bool, String);

fn max_entry_diff(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    (a.matrix() - b.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn states_of(flat: &[C64], d: usize) -> Vec<Vec<C64>> {
    (0..d).map(|j| flat[j * d..(j + 1) * d].to_vec()).collect()
}

// Steady-state identity over random draws.
fn steady_state_identity() -> Check {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(63);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let kappa = uniform(&mut rng, 0.1, 10.0);
        let d = 2 + (rng.next_u64() % 3) as usize;
        let mut chi = vec![0.0];
        for _ in 1..d {
            let last = *chi.last().unwrap();
            chi.push(last + uniform(&mut rng, 0.05, 5.0));
        }
        let delta = uniform(&mut rng, -10.0, 10.0);
        let eps = C64::from_polar(uniform(&mut rng, 0.0, 3.0), uniform(&mut rng, 0.0, std::f64::consts::TAU));
        let params = SystemParams {
            qudit: QuditSpec::from_shifts(vec![0.0; d], chi),
            resonator: ResonatorSpec {
                omega_r: 0.0,
                kappa_in: kappa,
                kappa_out: 0.0,
                kappa_internal: 0.0,
                input_amplitude: eps / kappa.sqrt(),
                omega_d: -delta,
                n_thermal: 0.0,
            },
            decoherence: DecoherenceSpec::none(d),
            efficiency: 0.04,
            phase: 0.0,
            frame: QuditFrame::Interaction,
            include_shifts: false,
        };
        let model = params.derive().expect("model");
        let rates = RateTable::steady_state(&model);
        for j in 0..d {
            for k in 0..d {
                let (m, g) = (rates.gamma_m[(j, k)], rates.gamma_d[(j, k)]);
                let err = if m > 0.0 { (m - 2.0 * g).abs() / m } else { (2.0 * g).abs() };
                worst = worst.max(err);
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    (worst <= 1e-10 && secs < 1.0, format!("max relative |Gamma_m - 2 Gamma_d| / Gamma_m = {worst:.2e} over 100 draws, {secs:.3} s (limits 1e-10, 1 s)"))
}

fn long_t1_model() -> qudit_readout::model::ReadoutModel {
    without_relaxation(fig5_params()).derive().expect("model")
}

// Closed-form combined state against RK4 integration of the qudit-resonator master equation.
fn analytic_vs_full_me() -> Check {
    let t0 = Instant::now();
    let model = long_t1_model();
    let n_fock = 40;
    let gen = CombinedGenerator::new(&model, n_fock).expect("generator");
    let rho_q = example_state();
    let rho0 = rho_q.tensor(&DensityMatrix::basis(n_fock, 0).unwrap());
    let t_end = 5.0 / model.kappa;
    let times: Vec<f64> = (0..=20).map(|i| t_end * i as f64 / 20.0).collect();
    let sol = integrate_me(&rho0, &gen, &times, MeOptions { max_dt: 2e-4, method: Method::Rk4 }).expect("integrate");
    let mut worst = 0.0f64;
    for (t, rho) in times.iter().zip(&sol.states) {
        let exact = analytic_combined_state(&model, &rho_q, *t, n_fock).expect("analytic");
        worst = worst.max(max_entry_diff(&exact, rho));
    }
    let secs = t0.elapsed().as_secs_f64();
    (
        worst < 1e-6 && secs < 30.0,
        format!("max entrywise difference {worst:.2e} over t in [0, 5/kappa] at n_fock = {n_fock}, {secs:.1} s (limits 1e-6, 30 s)"),
    )
}

// Partial trace of the full master equation against the effective qudit master equation.
fn effective_me_validity() -> Check {
    let t0 = Instant::now();
    let model = fig5_params().derive().expect("model");
    let n_fock = 30;
    let gen = CombinedGenerator::new(&model, n_fock).expect("generator");
    let rho_q = example_state();
    let rho0 = rho_q.tensor(&DensityMatrix::basis(n_fock, 0).unwrap());
    let t_end = 20.0 / model.kappa;
    let times: Vec<f64> = (0..=200).map(|i| t_end * i as f64 / 200.0).collect();
    let opts = MeOptions { max_dt: 2e-4, method: Method::Rk4 };
    let full = integrate_me(&rho0, &gen, &times, opts).expect("full");
    let eff = integrate_effective_me(&model, &rho_q, &times, opts).expect("effective");
    let (mut pop_err, mut coh_err) = (0.0f64, 0.0f64);
    for (i, t) in times.iter().enumerate() {
        let reduced = partial_trace(&full.states[i], &gen.layout, Factor::Qudit).expect("trace");
        for j in 0..3 {
            pop_err = pop_err.max((reduced.get(j, j).re - eff.states[i].get(j, j).re).abs());
            if *t >= 10.0 / model.kappa {
                for k in j + 1..3 {
                    let (a, b) = (reduced.get(j, k).norm(), eff.states[i].get(j, k).norm());
                    coh_err = coh_err.max((a - b).abs() / b);
                }
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    (
        pop_err < 1e-6 && coh_err < 0.02 && secs < 60.0,
        format!(
            "population difference {pop_err:.2e} (limit 1e-6), relative |coherence| difference after 10/kappa {:.2e}% (limit 2%), {secs:.1} s",
            100.0 * coh_err
        ),
    )
}

// Zero efficiency: the stochastic trajectory is the deterministic one bit for bit.
fn zero_efficiency_reduction() -> Check {
    let t0 = Instant::now();
    let model = with_efficiency(fig5_params(), 0.0).derive().expect("model");
    let spec = TrajectorySpec { t_final: 0.5, dt: 1e-3, thin: 1 };
    let det = run_effective_trajectory(&model, model.evolution_from_vacuum(), &example_state(), &spec, None).expect("deterministic");
    let mut identical = true;
    for seed in [0u64, 1, 42, u64::MAX] {
        let mut noise = NoiseStream::new(seed, seed ^ 7, 2);
        let sto = run_effective_trajectory(&model, model.evolution_from_vacuum(), &example_state(), &spec, Some(&mut noise)).expect("stochastic");
        identical &= sto.states.len() == det.states.len()
            && sto.states.iter().flatten().zip(det.states.iter().flatten()).all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits());
    }
    let secs = t0.elapsed().as_secs_f64();
    (identical && secs < 1.0, format!("4 seeds, {} steps: bit-identical = {identical}, {secs:.3} s (limit 1 s)", spec.steps()))
}

// Ensemble mean of 1000 trajectories against the effective master equation.
fn ensemble_convergence() -> Check {
    let t0 = Instant::now();
    let params = without_relaxation(fig5_params());
    let model = params.derive().expect("model");
    let spec = TrajectorySpec { t_final: 4.0, dt: 1e-3, thin: 20 };
    let n = 1000;
    let cfg = EnsembleConfig::new(params, InitialState::Density(example_state()), n, spec, 77);
    let run = run_ensemble_with(&cfg, |_, _| ()).expect("ensemble");
    let stats = &run.stats;
    let me = integrate_effective_me(&model, &example_state(), &stats.times, MeOptions { max_dt: 1e-3, method: Method::Rk4 }).expect("me");
    let bound = 3.0 / (n as f64).sqrt();
    let (mut worst, mut flat) = (0.0f64, 0.0f64);
    let rho0 = example_state();
    for (i, mean) in stats.mean.iter().enumerate() {
        let m = states_of(mean, 3);
        for j in 0..3 {
            for k in 0..3 {
                worst = worst.max((m[j][k] - me.states[i].get(j, k)).norm());
            }
            flat = flat.max((m[j][j].re - rho0.get(j, j).re).abs());
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    (
        worst <= bound && flat <= bound && secs < 300.0 && stats.aborted.is_empty(),
        format!(
            "{} trajectories: max |mean - ME| = {worst:.4}, max population drift = {flat:.4} (bound {bound:.4}), aborted {}, {secs:.1} s",
            stats.completed,
            stats.aborted.len()
        ),
    )
}

/// Chi-square statistic of observed counts against expected probabilities.
fn chi_square(counts: &[usize], probs: &[f64]) -> f64 {
    let n: usize = counts.iter().sum();
    counts.iter().zip(probs).map(|(&c, &p)| (c as f64 - n as f64 * p).powi(2) / (n as f64 * p)).sum()
}

// Collapse onto pointer states and their selection statistics.
fn pointer_statistics() -> Check {
    let params = with_efficiency(without_relaxation(fig5_params()), 0.45);
    let model = params.derive().expect("model");
    let rates = RateTable::steady_state(&model);
    let min_gm = (0..3).flat_map(|j| (j + 1..3).map(move |k| (j, k))).map(|(j, k)| rates.gamma_m[(j, k)]).fold(f64::INFINITY, f64::min);
    let t_end = 20.0 / min_gm;
    let spec = TrajectorySpec { t_final: t_end, dt: 1e-3, thin: 50 };
    let cfg = EnsembleConfig::new(params, InitialState::Density(example_state()), 1000, spec, 2024);
    let run = run_ensemble_with(&cfg, |_, tr| tr.populations(tr.times.len() - 1)).expect("ensemble");
    let mut counts = [0usize; 3];
    let mut collapsed = 0;
    for (_, pops) in &run.outputs {
        let (arg, max) = pops.iter().copied().enumerate().fold((0, 0.0), |a, (j, p)| if p > a.1 { (j, p) } else { a });
        if max > 0.99 {
            collapsed += 1;
            counts[arg] += 1;
        }
    }
    let n = run.outputs.len();
    let frac = collapsed as f64 / n as f64;
    let stat = chi_square(&counts, &[0.5, 0.2, 0.3]);
    // 99th percentile of chi-square with 2 degrees of freedom
    let critical = -2.0 * 0.01f64.ln();
    (
        frac >= 0.95 && stat < critical,
        format!(
            "eta = 0.45, t = 20/Gamma_m,min = {t_end:.2} us: collapsed fraction {frac:.3} (limit 0.95), absorbed counts {counts:?} vs (0.5, 0.2, 0.3): chi2 = {stat:.2} (1% critical {critical:.2})"
        ),
    )
}

/// Expected number of decay events in `[0, tau]` for a three-level decay chain from `start`,
/// by fine RK4 integration of the level probabilities.
fn expected_decays(rates: &DMatrix<f64>, start: usize, tau: f64) -> f64 {
    let d = rates.nrows();
    let out: Vec<f64> = (0..d).map(|k| (0..k).map(|j| rates[(j, k)]).sum()).collect();
    let f = |p: &[f64]| -> Vec<f64> {
        let mut dp = vec![0.0; d + 1];
        for k in 0..d {
            dp[k] -= out[k] * p[k];
            for j in 0..k {
                dp[j] += rates[(j, k)] * p[k];
            }
            dp[d] += out[k] * p[k];
        }
        dp
    };
    let mut p = vec![0.0; d + 1];
    p[start] = 1.0;
    let steps = 20_000;
    let h = tau / steps as f64;
    for _ in 0..steps {
        let k1 = f(&p);
        let s2: Vec<f64> = p.iter().zip(&k1).map(|(a, b)| a + 0.5 * h * b).collect();
        let k2 = f(&s2);
        let s3: Vec<f64> = p.iter().zip(&k2).map(|(a, b)| a + 0.5 * h * b).collect();
        let k3 = f(&s3);
        let s4: Vec<f64> = p.iter().zip(&k3).map(|(a, b)| a + h * b).collect();
        let k4 = f(&s4);
        for i in 0..=d {
            p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    p[d]
}

// Decay-event statistics over a 40 us measurement and stream points in the IQ plane.
fn jump_physics() -> Check {
    let base = preset("fig4");
    let params = base.system_params().expect("params");
    let t_end = 40.0;
    let hold = 1.0;
    let spec = TrajectorySpec { t_final: t_end, dt: 1e-3, thin: 20 };
    let n = 1000;

    let fast = EnsembleConfig::new(with_efficiency(params.clone(), 0.45), InitialState::Prepared(vec![0, 1, 2]), n, spec, 4040);
    let run = run_ensemble_with(&fast, |_, tr| {
        let pops: Vec<Vec<f64>> = (0..tr.times.len()).map(|s| tr.populations(s)).collect();
        detect_jumps(&tr.times, &pops, 0.5, hold).expect("jumps")
    })
    .expect("ensemble");
    let decays: Vec<f64> = run.outputs.iter().map(|(_, ev)| ev.iter().filter(|e| e.to < e.from).count() as f64).collect();
    let upward: usize = run.outputs.iter().map(|(_, ev)| ev.iter().filter(|e| e.to > e.from).count()).sum();
    let m = decays.len() as f64;
    let mean = decays.iter().sum::<f64>() / m;
    let var = decays.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let g1 = &params.decoherence.gamma1;
    let expected = (0..3).map(|s| expected_decays(g1, s, t_end - hold)).sum::<f64>() / 3.0;
    let z = (mean - expected) / (var / m).sqrt();

    // e-prepared trajectories that have left |e> by the end against 1 - exp(-T/T1)
    let t1 = 1.0 / g1[(0, 1)];
    let e_runs: Vec<&Vec<_>> = run.outputs.iter().filter(|(id, _)| fast.prepared_level(*id) == Some(1)).map(|(_, ev)| ev).collect();
    let left = e_runs.iter().filter(|ev| ev.iter().any(|e| e.from == 1 && e.to == 0)).count() as f64;
    let ne = e_runs.len() as f64;
    let p_decay = 1.0 - (-(t_end - hold) / t1).exp();
    let z_e = (left / ne - p_decay) / (p_decay * (1.0 - p_decay) / ne).sqrt();

    let slow = EnsembleConfig::new(params, InitialState::Prepared(vec![0, 1, 2]), n, spec, 4041);
    let model = slow.params.derive().expect("model");
    let (points, _) = ensemble_iq(&slow, WindowStart::AfterTransient, &Weighting::Flat).expect("iq");
    let report = cluster_report(&points, &reference_means(&model)).expect("clusters");
    let streams = report.stream_count();

    (
        z.abs() <= 3.0 && z_e.abs() <= 3.0 && streams > 0,
        format!(
            "decay events per trajectory {mean:.4} vs chain oracle {expected:.4} (z = {z:.2}); e-prepared decay fraction {:.3} vs 1 - exp(-T/T1) = {p_decay:.3} (z = {z_e:.2}); upward events {upward}; IQ stream points at eta = 0.04: {streams}",
            left / ne
        ),
    )
}

/// Per-prepared-level sample means and RMS per-quadrature standard deviations.
fn labelled_clusters(points: &[qudit_readout::lab::IQPoint], d: usize) -> (Vec<C64>, Vec<f64>, Vec<usize>) {
    let mut means = vec![C64::new(0.0, 0.0); d];
    let mut counts = vec![0usize; d];
    for p in points {
        let l = p.label.expect("labelled");
        means[l] += p.v_bar;
        counts[l] += 1;
    }
    for l in 0..d {
        means[l] /= counts[l] as f64;
    }
    let mut var = vec![0.0; d];
    for p in points {
        let l = p.label.unwrap();
        var[l] += (p.v_bar - means[l]).norm_sqr() / 2.0;
    }
    let sigma = (0..d).map(|l| (var[l] / (counts[l] as f64 - 1.0)).sqrt()).collect();
    (means, sigma, counts)
}

// Cluster width against measurement time.
fn shot_noise_scaling() -> Check {
    let cfg0 = preset("fig6a");
    let params = cfg0.system_params().expect("params");
    let spec = TrajectorySpec { t_final: 3.0, dt: 1e-3, thin: 100 };
    let cfg = EnsembleConfig::new(params, InitialState::Prepared(vec![0, 1, 2]), 1000, spec, 606);
    let grid = [0.5, 1.0, 2.0, 3.0];
    let pts = sweep(&cfg, SweepAxis::MeasurementTime, &grid, WindowStart::At(0.0), &Weighting::Flat).expect("sweep");
    let sig: Vec<f64> = pts
        .iter()
        .map(|p| {
            let (_, s, _) = labelled_clusters(&p.points, 3);
            (s.iter().map(|x| x * x).sum::<f64>() / 3.0).sqrt()
        })
        .collect();
    let xs: Vec<f64> = grid.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = sig.iter().map(|s| s.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 4.0, ys.iter().sum::<f64>() / 4.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    (
        (slope + 0.5).abs() <= 0.1,
        format!("sigma(T) for T = {grid:?} us: [{}], fitted exponent {slope:.3} (target -0.5 +- 0.1)", sig.iter().map(|s| format!("{s:.4}")).collect::<Vec<_>>().join(", ")),
    )
}

// Cluster centres on the circle through the origin, and equal spacing at the centre drive.
fn cluster_geometry() -> Check {
    let cfg0 = preset("fig6b");
    let params = cfg0.system_params().expect("params");
    let model = params.derive().expect("model");
    let spec = TrajectorySpec { t_final: 2.0, dt: 1e-3, thin: 100 };
    let cfg = EnsembleConfig::new(params.clone(), InitialState::Prepared(vec![0, 1, 2]), 1000, spec, 6062);
    let omega_r = params.resonator.omega_r;
    let chi = model.chi[1] - model.chi[0];
    let grid: Vec<f64> = (0..=6).map(|i| omega_r + chi * i as f64 / 3.0).collect();
    let pts = sweep(&cfg, SweepAxis::ReadoutFrequency, &grid, WindowStart::AfterTransient, &Weighting::Flat).expect("sweep");
    let eps = model.epsilon;
    let scale = 2.0 * (model.efficiency * model.kappa).sqrt() * C64::from_polar(1.0, -model.phase);
    let centre = scale * C64::i() * eps / model.kappa;
    let radius = scale.norm() * eps.norm() / model.kappa;
    let mut worst_z = 0.0f64;
    let mut spacing_z = f64::NAN;
    for (p, &w) in pts.iter().zip(&grid) {
        let (means, sigma, counts) = labelled_clusters(&p.points, 3);
        for l in 0..3 {
            let se = sigma[l] / (counts[l] as f64).sqrt();
            worst_z = worst_z.max(((means[l] - centre).norm() - radius).abs() / se);
        }
        if (w - (omega_r + chi)).abs() < 1e-9 {
            let se2 = |a: usize, b: usize| sigma[a].powi(2) / counts[a] as f64 + sigma[b].powi(2) / counts[b] as f64;
            let diff = (means[0] - means[1]).norm() - (means[1] - means[2]).norm();
            spacing_z = diff / (se2(0, 1) + se2(1, 2)).sqrt();
        }
    }
    (
        worst_z <= 3.0 && spacing_z.abs() <= 3.0,
        format!(
            "{} drive frequencies from omega_r to omega_r + 2 chi: worst |distance to circle - radius| = {worst_z:.2} sigma; at omega_r + chi |mu_g - mu_e| - |mu_e - mu_f| = {spacing_z:.2} sigma (limit 3)",
            grid.len()
        ),
    )
}

// RK4 order on the master equation, weak consistency under dt halving, and state invariants.
fn numerics() -> Check {
    let model = fig5_params().derive().expect("model");
    let n_fock = 15;
    let gen = CombinedGenerator::new(&model, n_fock).expect("generator");
    let rho0 = example_state().tensor(&DensityMatrix::basis(n_fock, 0).unwrap());
    let times = [0.0, 0.2];
    let solve = |h: f64| integrate_me(&rho0, &gen, &times, MeOptions { max_dt: h, method: Method::Rk4 }).expect("me").states[1].clone();
    let reference = solve(0.001 / 32.0);
    let errs: Vec<f64> = [0.004, 0.002, 0.001].iter().map(|&h| max_entry_diff(&solve(h), &reference)).collect();
    let order = (errs[0] / errs[1]).log2().min((errs[1] / errs[2]).log2());

    // weak consistency: ensembles at dt and dt/2 agree within their statistical error
    let params = fig5_params();
    let n = 1000;
    let mk = |dt: f64, seed: u64| {
        let spec = TrajectorySpec { t_final: 2.0, dt, thin: (0.1 / dt).round() as usize };
        run_ensemble(&EnsembleConfig::new(params.clone(), InitialState::Density(example_state()), n, spec, seed)).expect("ensemble")
    };
    let coarse = mk(2e-3, 11);
    let fine = mk(1e-3, 12);
    let mut worst_z = 0.0f64;
    for (i, t) in coarse.stats.times.iter().enumerate() {
        let j = fine.stats.times.iter().position(|u| (u - t).abs() < 1e-9).expect("common sample time");
        for e in 0..9 {
            let diff = (coarse.stats.mean[i][e] - fine.stats.mean[j][e]).norm();
            let se = ((coarse.stats.variance[i][e] + fine.stats.variance[j][e]) / n as f64).sqrt();
            if se > 0.0 {
                worst_z = worst_z.max(diff / se);
            }
        }
    }
    // 9 complex entries at 21 sample times: family-wise 4.5 sigma
    let weak_ok = worst_z <= 4.5;

    let (mut trace_err, mut herm_err, mut min_eig) = (0.0f64, 0.0f64, f64::INFINITY);
    for (_, tr) in fine.outputs.iter().chain(coarse.outputs.iter()) {
        for s in &tr.states {
            let m = qudit_readout::quantum::ComplexMatrix::from_row_slice(3, 3, s);
            trace_err = trace_err.max((m.trace() - C64::new(1.0, 0.0)).norm());
            herm_err = herm_err.max(hermiticity_defect(&m));
            min_eig = min_eig.min(hermitian_eigenvalues(&m).into_iter().fold(f64::INFINITY, f64::min));
        }
    }
    let inv_ok = trace_err < 1e-9 && herm_err < 1e-12 && min_eig >= -1e-6;
    (
        order >= 3.5 && weak_ok && inv_ok,
        format!(
            "RK4 errors {:.2e}, {:.2e}, {:.2e} -> observed order {order:.2} (limit 3.5); dt halving: worst deviation {worst_z:.2} sigma (limit 4.5); sampled states: trace error {trace_err:.1e}, Hermiticity defect {herm_err:.1e}, min eigenvalue {min_eig:.1e}",
            errs[0], errs[1], errs[2]
        ),
    )
}

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, fn() -> Check); 10] = [
        ("steady-state identity", steady_state_identity),
        ("analytic vs full ME", analytic_vs_full_me),
        ("effective-ME validity", effective_me_validity),
        ("eta = 0 reduction", zero_efficiency_reduction),
        ("ensemble convergence", ensemble_convergence),
        ("pointer-state statistics", pointer_statistics),
        ("jump physics", jump_physics),
        ("shot-noise scaling", shot_noise_scaling),
        ("cluster geometry", cluster_geometry),
        ("numerics", numerics),
    ];
    let mut failed = 0;
    let mut ran = 0;
    for (name, f) in criteria {
        if !filters.is_empty() && !filters.iter().any(|x| name.contains(x.as_str())) {
            continue;
        }
        ran += 1;
        let t0 = Instant::now();
        let (ok, detail) = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(r) => r,
            Err(e) => {
                let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
                (false, format!("panicked: {}", msg.unwrap_or_default()))
            }
        };
        if !ok {
            failed += 1;
        }
        println!("{} {name} [{:.1} s]: {detail}", if ok { "PASS" } else { "FAIL" }, t0.elapsed().as_secs_f64());
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
