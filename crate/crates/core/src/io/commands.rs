use std::path::Path;

use serde_json::{json, Value};

use super::config::{
    axis_value, engine, initial_density, AxisConfig, ExperimentConfig, InitialStateConfig, MethodConfig, RunConfig, SimulateConfig,
};
use super::output::{complex_json, fmt_f64, rho_cells, rho_columns, CsvTable, OutputDir, CSV_FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::lab::{
    cluster_report, detect_jumps, iq_point, reference_means, run_ensemble_with, sweep, ClusterReport, EnsembleConfig, EnsembleStats,
    IQPoint, JumpEvent, SweepAxis, Weighting, WindowStart,
};
use crate::lindblad::{integrate_effective_me, integrate_me, me_step_bound, CombinedGenerator, MeOptions, MeSolution, Method};
use crate::model::{qutrit_closed_form_rates, triangle_residuals, RateTable, ReadoutModel};
use crate::quantum::{
    build_operator, expectation, partial_trace, von_neumann_entropy, DensityMatrix, Factor, HilbertLayout, OperatorKind, C64,
};
use crate::sme::{Trajectory, TrajectorySpec};

/// Relative tolerance of the steady-state check `Gamma_m = 2 Gamma_d` made before writing rates.
pub const IDENTITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Rates,
    SolveMe,
    SolveEffectiveMe,
    Simulate,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Rates => "rates",
            Command::SolveMe => "solve-me",
            Command::SolveEffectiveMe => "solve-effective-me",
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trajectories: Option<usize>,
    pub thin: Option<usize>,
}

fn matrix_json(m: &nalgebra::DMatrix<f64>) -> Value {
    Value::Array((0..m.nrows()).map(|j| json!((0..m.ncols()).map(|k| m[(j, k)]).collect::<Vec<_>>())).collect())
}

/// Steady-state amplitudes, rates, separations and circle locus of `model`.
/// Fails when `Gamma_m = 2 Gamma_d` does not hold to `IDENTITY_TOLERANCE`.
pub fn rates_report(model: &ReadoutModel) -> Result<Value> {
    let table = RateTable::steady_state(model);
    let d = model.levels;
    let mut pairs = Vec::new();
    for j in 0..d {
        for k in j + 1..d {
            let gm = table.gamma_m[(j, k)];
            let gd = table.gamma_d[(j, k)];
            if (gm - 2.0 * gd).abs() > IDENTITY_TOLERANCE * gm.abs().max(f64::MIN_POSITIVE) && (gm - 2.0 * gd).abs() > 1e-300 {
                return Err(Error::Numerical(format!(
                    "steady-state identity violated for ({j}, {k}): Gamma_m = {gm:e}, 2 Gamma_d = {:e}",
                    2.0 * gd
                )));
            }
            let sep = (table.alpha[j] - table.alpha[k]).norm();
            pairs.push(json!({
                "pair": [j, k],
                "gamma_m": gm,
                "gamma_d": gd,
                "omega_bar": table.omega_bar[(k, j)],
                "separation": sep,
                "iq_separation": (model.pointer_mean(table.alpha[j]) - model.pointer_mean(table.alpha[k])).norm(),
            }));
        }
    }
    let center = C64::new(0.0, 1.0) * model.epsilon / model.kappa;
    let radius = model.epsilon.norm() / model.kappa;
    let scale = 2.0 * (model.efficiency * model.kappa).sqrt();
    let chi_qr = model.chi[1] - model.chi[0];
    let transmon_like = d == 3
        && chi_qr != 0.0
        && ((model.chi[2] - model.chi[0]) - 2.0 * chi_qr).abs() <= 1e-12 * chi_qr.abs();
    let closed_form = if transmon_like {
        // pulls measured from the ground level: shift the detuning accordingly
        let cf = qutrit_closed_form_rates(model.kappa, model.epsilon, model.delta_rd + model.chi[0], chi_qr);
        json!({
            "order": ["ge", "gf", "ef"],
            "printed": cf.printed,
            "corrected": cf.corrected,
            "ratio_printed_over_corrected": cf.printed.iter().zip(&cf.corrected).map(|(p, c)| if *c != 0.0 { p / c } else { 0.0 }).collect::<Vec<_>>(),
        })
    } else {
        Value::Null
    };
    Ok(json!({
        "format_version": 1,
        "units": {"frequency": "rad/us", "rate": "1/us", "amplitude": "sqrt(photons)", "record": "1/sqrt(us)"},
        "levels": d,
        "kappa": model.kappa,
        "delta_rd": model.delta_rd,
        "epsilon": complex_json(model.epsilon),
        "efficiency": model.efficiency,
        "phase_rad": model.phase,
        "chi": model.chi,
        "dressed_energies": model.dressed_energies,
        "alpha_steady": table.alpha.iter().map(|&a| complex_json(a)).collect::<Vec<_>>(),
        "photons_steady": table.alpha.iter().map(|a| a.norm_sqr()).collect::<Vec<_>>(),
        "pointer_means": table.alpha.iter().map(|&a| complex_json(model.pointer_mean(a))).collect::<Vec<_>>(),
        "gamma_m": matrix_json(&table.gamma_m),
        "gamma_d": matrix_json(&table.gamma_d),
        "pairs": pairs,
        "identity_max_relative_error": table.steady_state_identity_error(),
        "circle": {
            "center": complex_json(center),
            "radius": radius,
            "iq_center": complex_json(model.pointer_mean(center)),
            "iq_radius": scale * radius,
        },
        "triangle_residuals": triangle_residuals(&table.omega_bar)
            .into_iter()
            .map(|((j, k, l), r)| json!({"levels": [j, k, l], "residual": r}))
            .collect::<Vec<_>>(),
        "closed_form": closed_form,
        "n_crit": model.n_crit,
    }))
}

fn cluster_json(r: &ClusterReport) -> Value {
    json!({
        "reference_means": r.reference_means.iter().map(|&z| complex_json(z)).collect::<Vec<_>>(),
        "means": r.means.iter().map(|&z| complex_json(z)).collect::<Vec<_>>(),
        "covariances": r.covariances,
        "robust_sigma": r.robust_sigma,
        "mean_sigma": r.mean_sigma(),
        "separations": r.separations.iter().map(|((a, b), s)| json!({"pair": [a, b], "distance": s})).collect::<Vec<_>>(),
        "counts": r.counts,
        "stream_count": r.stream_count(),
        "stream_ids": r.stream_ids,
        "confusion": r.confusion,
    })
}

fn stats_json(s: &EnsembleStats) -> Value {
    json!({
        "levels": s.levels,
        "times": s.times,
        "mean": s.mean.iter().map(|m| m.iter().map(|&z| complex_json(z)).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "variance": s.variance,
        "entropy_mean": s.entropy_mean,
        "entropy_variance": s.entropy_variance,
        "record_times": s.record_times,
        "record_mean": s.record_mean,
        "record_variance": s.record_variance,
        "completed": s.completed,
        "aborted": s.aborted.iter().map(|(id, m)| json!({"trajectory_id": id, "reason": m})).collect::<Vec<_>>(),
    })
}

fn state_header(levels: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend(rho_columns(levels));
    h.push("S".into());
    h
}

fn model_of(cfg: &RunConfig) -> Result<ReadoutModel> {
    cfg.system_params()?.derive()
}

fn times_grid(t_final: f64, samples: usize) -> Vec<f64> {
    (0..=samples).map(|i| t_final * i as f64 / samples as f64).collect()
}

fn qudit_state(cfg: &RunConfig, st: &InitialStateConfig) -> Result<DensityMatrix> {
    initial_density(&cfg.initial_state(st)?, cfg.levels())
}

/// Effective master equation on the qudit from an empty resonator.
pub fn solve_effective(cfg: &RunConfig) -> Result<MeSolution> {
    let ExperimentConfig::SolveEffectiveMe { t_final_us, samples, initial_state, method } = &cfg.experiment else {
        return Err(Error::config("experiment.kind", "expected solve-effective-me"));
    };
    let model = model_of(cfg)?;
    let rho0 = qudit_state(cfg, initial_state)?;
    let max_dt = match method {
        MethodConfig::Rk4 => cfg.numerics.dt_us.min(me_step_bound(&model)),
        MethodConfig::Euler => cfg.numerics.dt_us,
    };
    integrate_effective_me(&model, &rho0, &times_grid(*t_final_us, *samples), MeOptions { max_dt, method: Method::from(*method) })
}

/// Qudit-resonator master equation; returns the solution and its layout.
pub fn solve_full(cfg: &RunConfig) -> Result<(MeSolution, HilbertLayout)> {
    let ExperimentConfig::SolveMe { t_final_us, samples, initial_state } = &cfg.experiment else {
        return Err(Error::config("experiment.kind", "expected solve-me"));
    };
    let model = model_of(cfg)?;
    let n_fock = cfg.numerics.n_fock.ok_or_else(|| Error::config("numerics.n_fock", "required by solve-me"))?;
    let gen = CombinedGenerator::new(&model, n_fock)?;
    let rho0 = qudit_state(cfg, initial_state)?.tensor(&DensityMatrix::basis(n_fock, 0)?);
    let max_dt = cfg.numerics.dt_us.min(me_step_bound(&model)).min(2.5 / gen.stiffness());
    let sol = integrate_me(&rho0, &gen, &times_grid(*t_final_us, *samples), MeOptions { max_dt, method: Method::Rk4 })?;
    Ok((sol, gen.layout))
}

fn flat(rho: &DensityMatrix) -> Vec<C64> {
    let d = rho.dim();
    (0..d * d).map(|i| rho.get(i / d, i % d)).collect()
}

pub fn cmd_rates(cfg: &RunConfig, out: &mut OutputDir) -> Result<Value> {
    let report = rates_report(&model_of(cfg)?)?;
    out.write_json("rates.json", &report)?;
    Ok(json!({"levels": cfg.levels()}))
}

pub fn cmd_solve_effective_me(cfg: &RunConfig, out: &mut OutputDir) -> Result<Value> {
    let sol = solve_effective(cfg)?;
    let d = cfg.levels();
    let mut csv = CsvTable::new(&state_header(d));
    for (t, rho) in sol.times.iter().zip(&sol.states) {
        let mut row = vec![fmt_f64(*t)];
        row.extend(rho_cells(&flat(rho)));
        row.push(fmt_f64(von_neumann_entropy(rho)?));
        csv.row(&row);
    }
    out.write("effective_me.csv", &csv.into_bytes())?;
    Ok(json!({"steps": sol.steps, "max_trace_drift": sol.max_trace_drift}))
}

pub fn cmd_solve_me(cfg: &RunConfig, out: &mut OutputDir) -> Result<Value> {
    let (sol, layout) = solve_full(cfg)?;
    let d = cfg.levels();
    let a = build_operator(OperatorKind::Annihilation, &layout)?;
    let n = build_operator(OperatorKind::Number, &layout)?;
    let mut header = state_header(d);
    header.extend(["a_re", "a_im", "photons"].map(String::from));
    let mut csv = CsvTable::new(&header);
    for (t, rho) in sol.times.iter().zip(&sol.states) {
        let q = partial_trace(rho, &layout, Factor::Qudit)?;
        let mut row = vec![fmt_f64(*t)];
        row.extend(rho_cells(&flat(&q)));
        row.push(fmt_f64(von_neumann_entropy(&q)?));
        let am = expectation(&a, rho.matrix());
        row.extend([fmt_f64(am.re), fmt_f64(am.im), fmt_f64(expectation(&n, rho.matrix()).re)]);
        csv.row(&row);
    }
    out.write("me.csv", &csv.into_bytes())?;
    Ok(json!({"steps": sol.steps, "max_trace_drift": sol.max_trace_drift, "n_fock": layout.fock_dim()}))
}

/// The ensemble described by a simulation block, with command-line overrides applied.
pub fn ensemble_config(cfg: &RunConfig, sim: &SimulateConfig, ov: &Overrides) -> Result<EnsembleConfig> {
    let params = cfg.system_params()?;
    let thin = ov.thin.unwrap_or(cfg.output.thin);
    if thin == 0 {
        return Err(Error::config("--thin", "must be at least 1"));
    }
    let spec = TrajectorySpec { t_final: sim.t_final_us, dt: cfg.numerics.dt_us, thin };
    let mut e = EnsembleConfig::new(
        params,
        cfg.initial_state(&sim.initial_state)?,
        ov.trajectories.unwrap_or(sim.trajectories),
        spec,
        ov.seed.unwrap_or(sim.seed),
    );
    if e.n_trajectories == 0 {
        return Err(Error::config("--trajectories", "must be at least 1"));
    }
    e.engine = engine(sim.engine, cfg.numerics.n_fock)?;
    e.resonator_start = sim.resonator_start.into();
    e.budget = cfg.numerics.budget;
    let model = e.params.derive()?;
    let rates = RateTable::steady_state(&model);
    let fastest = rates.gamma_m.iter().chain(model.gamma1.iter()).chain(model.gamma_phi.iter()).fold(model.kappa, |a, &b| a.max(b));
    if cfg.numerics.dt_us > 1.0 / (50.0 * fastest) {
        log::warn!(
            "dt = {} us is coarse for the fastest rate {fastest:.3}/us; the step rule asks for dt <= {:e}",
            cfg.numerics.dt_us,
            1.0 / (50.0 * fastest)
        );
    }
    Ok(e)
}

/// IQ averaging window start for a simulation block: `5 / kappa` unless set, falling back to 0 for short runs.
pub fn window_start(sim: &SimulateConfig, model: &ReadoutModel) -> Result<WindowStart> {
    match sim.iq_window_start_us {
        Some(t) if t >= sim.t_final_us => Err(Error::config("iq_window_start_us", format!("{t} is not before t_final_us"))),
        Some(t) => Ok(WindowStart::At(t)),
        None if 5.0 / model.kappa >= sim.t_final_us => {
            log::warn!("measurement shorter than 5/kappa; IQ averaging starts at 0");
            Ok(WindowStart::At(0.0))
        }
        None => Ok(WindowStart::AfterTransient),
    }
}

pub fn weighting(sim: &SimulateConfig) -> Weighting {
    sim.iq_weights.clone().map(Weighting::Custom).unwrap_or_default()
}

struct TrajectoryOutput {
    trajectory: Option<Trajectory>,
    iq: Result<IQPoint>,
    jumps: Result<Vec<JumpEvent>>,
}

fn trajectory_rows(csv: &mut CsvTable, id: u64, tr: &Trajectory) {
    for (s, t) in tr.times.iter().enumerate() {
        let mut row = vec![id.to_string(), fmt_f64(*t)];
        row.extend(rho_cells(&tr.states[s]));
        row.push(fmt_f64(tr.entropy[s]));
        if s >= 1 && s - 1 < tr.record.len() {
            row.push(fmt_f64(tr.record.v_i[s - 1]));
            row.push(fmt_f64(tr.record.v_q[s - 1]));
        } else {
            row.push(String::new());
            row.push(String::new());
        }
        csv.row(&row);
    }
}

fn iq_table(points: &[IQPoint], assignments: Option<&[usize]>) -> CsvTable {
    let header = ["trajectory_id", "label", "v_i", "v_q", "window_start", "window_end", "assigned"].map(String::from);
    let mut csv = CsvTable::new(&header);
    for (i, p) in points.iter().enumerate() {
        csv.row(&[
            p.trajectory_id.to_string(),
            p.label.map(|l| l.to_string()).unwrap_or_default(),
            fmt_f64(p.v_bar.re),
            fmt_f64(p.v_bar.im),
            fmt_f64(p.window.0),
            fmt_f64(p.window.1),
            assignments.map(|a| a[i].to_string()).unwrap_or_default(),
        ]);
    }
    csv
}

pub fn cmd_simulate(cfg: &RunConfig, ov: &Overrides, out: &mut OutputDir) -> Result<Value> {
    let ExperimentConfig::Simulate(sim) = &cfg.experiment else {
        return Err(Error::config("experiment.kind", "expected simulate"));
    };
    let ens = ensemble_config(cfg, sim, ov)?;
    ens.validate()?;
    let model = ens.params.derive()?;
    let t0 = window_start(sim, &model)?.resolve(&model);
    let window = (t0, sim.t_final_us);
    let w = weighting(sim);
    let keep = cfg.output.csv();
    let run = run_ensemble_with(&ens, |id, tr| {
        let pops: Vec<Vec<f64>> = (0..tr.times.len()).map(|s| tr.populations(s)).collect();
        TrajectoryOutput {
            trajectory: keep.then(|| tr.clone()),
            iq: iq_point(&tr.record, id, window, &w, ens.prepared_level(id)),
            jumps: detect_jumps(&tr.times, &pops, sim.jump_threshold, sim.jump_hold_us),
        }
    })?;
    let d = model.levels;
    let mut points = Vec::new();
    let mut jumps = Vec::new();
    let mut traj_csv = keep.then(|| {
        let mut h = vec!["trajectory_id".to_string(), "t".to_string()];
        h.extend(rho_columns(d));
        h.extend(["S", "V_I", "V_Q"].map(String::from));
        CsvTable::new(&h)
    });
    for (id, o) in run.outputs {
        if let (Some(csv), Some(tr)) = (traj_csv.as_mut(), o.trajectory.as_ref()) {
            trajectory_rows(csv, id, tr);
        }
        points.push(o.iq?);
        jumps.extend(o.jumps?.into_iter().map(|j| (id, j)));
    }
    let cluster = match cluster_report(&points, &reference_means(&model)) {
        Ok(r) => Ok(r),
        Err(Error::InvalidArgument(m)) => Err(m),
        Err(e) => return Err(e),
    };
    if let Some(csv) = traj_csv {
        out.write("trajectories.csv", &csv.into_bytes())?;
        out.write("iq.csv", &iq_table(&points, cluster.as_ref().ok().map(|r| r.assignments.as_slice())).into_bytes())?;
        let mut jc = CsvTable::new(&["trajectory_id", "t", "from", "to"].map(String::from));
        for (id, j) in &jumps {
            jc.row(&[id.to_string(), fmt_f64(j.time), j.from.to_string(), j.to.to_string()]);
        }
        out.write("jumps.csv", &jc.into_bytes())?;
    }
    let n_done = run.stats.completed.max(1) as f64;
    let summary = json!({
        "format_version": CSV_FORMAT_VERSION,
        "engine": format!("{:?}", ens.engine),
        "master_seed": ens.master_seed,
        "n_trajectories": ens.n_trajectories,
        "dt": ens.spec.step_size(),
        "thin": ens.spec.thin,
        "iq_window": [window.0, window.1],
        "stats": stats_json(&run.stats),
        "cluster": match &cluster { Ok(r) => cluster_json(r), Err(_) => Value::Null },
        "cluster_error": cluster.as_ref().err(),
        "jumps": {"threshold": sim.jump_threshold, "hold_us": sim.jump_hold_us, "total": jumps.len(), "mean_per_trajectory": jumps.len() as f64 / n_done},
        "rates": rates_report(&model)?,
    });
    out.write_json("ensemble.json", &summary)?;
    Ok(json!({"completed": run.stats.completed, "aborted": run.stats.aborted.len(), "master_seed": ens.master_seed}))
}

pub fn cmd_sweep(cfg: &RunConfig, ov: &Overrides, out: &mut OutputDir) -> Result<Value> {
    let ExperimentConfig::Sweep { simulation, axis, grid } = &cfg.experiment else {
        return Err(Error::config("experiment.kind", "expected sweep"));
    };
    let ens = ensemble_config(cfg, simulation, ov)?;
    let model = ens.params.derive()?;
    let internal: Vec<f64> = grid.iter().map(|&v| axis_value(*axis, v)).collect();
    let sw_axis: SweepAxis = (*axis).into();
    let start = match (simulation.iq_window_start_us, sw_axis) {
        (Some(t), _) => WindowStart::At(t),
        (None, _) => WindowStart::AfterTransient,
    };
    if let WindowStart::At(t) = start {
        let shortest = if sw_axis == SweepAxis::MeasurementTime { internal.iter().copied().fold(f64::INFINITY, f64::min) } else { simulation.t_final_us };
        if t >= shortest {
            return Err(Error::config("experiment.simulation.iq_window_start_us", format!("{t} is not before the shortest measurement time")));
        }
    } else if sw_axis == SweepAxis::MeasurementTime && internal.iter().any(|&t| t <= 5.0 / model.kappa) {
        return Err(Error::config("experiment.grid", "measurement times must exceed 5/kappa unless iq_window_start_us is set"));
    }
    for &v in &internal {
        crate::lab::at_grid_point(&ens, sw_axis, v)?.validate()?;
    }
    let points = sweep(&ens, sw_axis, &internal, start, &weighting(simulation))?;
    let mut entries = Vec::new();
    for (i, (p, file_value)) in points.iter().zip(grid).enumerate() {
        if cfg.output.csv() {
            out.write(&format!("sweep_iq_{i:03}.csv"), &iq_table(&p.points, Some(&p.report.assignments)).into_bytes())?;
        }
        let m = crate::lab::at_grid_point(&ens, sw_axis, p.value)?.params.derive()?;
        entries.push(json!({
            "index": i,
            "value": file_value,
            "internal_value": p.value,
            "aborted": p.aborted,
            "cluster": cluster_json(&p.report),
            "rates": rates_report(&m)?,
        }));
    }
    let unit = match axis {
        AxisConfig::ReadoutFrequency => "MHz",
        AxisConfig::MeasurementTime => "us",
        AxisConfig::DriveAmplitude => "sqrt(photons/us)",
    };
    out.write_json(
        "sweep.json",
        &json!({
            "format_version": CSV_FORMAT_VERSION,
            "axis": axis,
            "unit": unit,
            "master_seed": ens.master_seed,
            "n_trajectories": ens.n_trajectories,
            "points": entries,
        }),
    )?;
    Ok(json!({"grid_points": grid.len(), "master_seed": ens.master_seed}))
}

/// Runs `command` on a parsed config, writing into `out_dir`; the manifest is written last.
pub fn run_command(command: Command, cfg: &RunConfig, config_bytes: &[u8], ov: &Overrides, out_dir: &Path) -> Result<()> {
    let kind = cfg.experiment.kind();
    if command != Command::Rates && command.name() != kind {
        return Err(Error::config("experiment.kind", format!("config describes `{kind}`, command is `{}`", command.name())));
    }
    let mut out = OutputDir::create(out_dir)?;
    let seed = match &cfg.experiment {
        ExperimentConfig::Simulate(s) => Some(ov.seed.unwrap_or(s.seed)),
        ExperimentConfig::Sweep { simulation, .. } => Some(ov.seed.unwrap_or(simulation.seed)),
        _ => None,
    };
    let info = match command {
        Command::Rates => cmd_rates(cfg, &mut out)?,
        Command::SolveMe => cmd_solve_me(cfg, &mut out)?,
        Command::SolveEffectiveMe => cmd_solve_effective_me(cfg, &mut out)?,
        Command::Simulate => cmd_simulate(cfg, ov, &mut out)?,
        Command::Sweep => cmd_sweep(cfg, ov, &mut out)?,
    };
    out.write("config.json", config_bytes)?;
    out.finish(command.name(), config_bytes, seed.filter(|_| matches!(command, Command::Simulate | Command::Sweep)), info)?;
    Ok(())
}
