use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lab::{Engine, InitialState, ResonatorStart, SweepAxis, DEFAULT_BUDGET};
use crate::lindblad::Method;
use crate::model::{Coupling, DecoherenceSpec, QuditFrame, QuditSpec, ResonatorSpec, SystemParams};
use crate::quantum::{ComplexMatrix, DensityMatrix, KetState, C64};

/// Root keys every config must carry.
pub const REQUIRED_ROOT_KEYS: [&str; 3] = ["system", "experiment", "numerics"];

/// Complex numbers are written as `[re, im]`.
pub type ComplexPair = [f64; 2];

fn c(p: ComplexPair) -> C64 {
    C64::new(p[0], p[1])
}

fn mhz(f: f64) -> f64 {
    TAU * f
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub experiment: ExperimentConfig,
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub qudit: QuditConfig,
    pub resonator: ResonatorConfig,
    pub decoherence: DecoherenceConfig,
    pub efficiency: f64,
    #[serde(default)]
    pub phase_rad: f64,
    #[serde(default)]
    pub frame: FrameConfig,
    #[serde(default)]
    pub include_shifts: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum QuditConfig {
    /// Dressed energies with the resonator pulls given directly.
    Shifts(ShiftsConfig),
    /// Transmon ladder with couplings `sqrt(k + 1) g` between neighbours.
    Transmon(TransmonConfig),
    /// Bare energies with an explicit coupling table.
    Couplings(CouplingsConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftsConfig {
    pub energies_mhz: Vec<f64>,
    pub chi_mhz: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmonConfig {
    pub levels: usize,
    pub omega_q_mhz: f64,
    pub anharmonicity_mhz: f64,
    pub g_mhz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingsConfig {
    pub energies_mhz: Vec<f64>,
    pub g_mhz: Vec<Vec<ComplexPair>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonatorConfig {
    pub omega_r_mhz: f64,
    pub kappa_in_mhz: f64,
    pub kappa_out_mhz: f64,
    pub kappa_internal_mhz: f64,
    /// Mean input field, sqrt(photons / us).
    pub input_amplitude: ComplexPair,
    pub omega_d_mhz: f64,
    pub n_thermal: f64,
}

/// Rates in 1/us keyed by level pair (`"ge"`, `"ef"`, ... or `"0-3"`); unlisted pairs are zero.
/// Relaxation always runs from the upper to the lower level of the pair.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoherenceConfig {
    #[serde(default)]
    pub gamma1_per_us: BTreeMap<String, f64>,
    #[serde(default)]
    pub gamma_phi_per_us: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameConfig {
    #[default]
    Interaction,
    Lab,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialStateConfig {
    Density(Vec<Vec<ComplexPair>>),
    Ket(Vec<ComplexPair>),
    Basis(usize),
    Populations(Vec<f64>),
    /// Stratified preparation: trajectory `id` starts in `levels[id % len]`.
    Prepared(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodConfig {
    #[default]
    Rk4,
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EngineConfig {
    EffectiveSme,
    Qsd,
    FullSme,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResonatorStartConfig {
    #[default]
    Vacuum,
    SteadyState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AxisConfig {
    /// Grid values are drive frequencies in MHz.
    ReadoutFrequency,
    /// Grid values are measurement times in us.
    MeasurementTime,
    /// Grid values are input amplitudes in sqrt(photons / us).
    DriveAmplitude,
}

fn default_threshold() -> f64 {
    0.5
}

fn default_hold() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub t_final_us: f64,
    pub trajectories: usize,
    pub seed: u64,
    pub engine: EngineConfig,
    pub initial_state: InitialStateConfig,
    #[serde(default)]
    pub resonator_start: ResonatorStartConfig,
    /// Start of the IQ averaging window; `5 / kappa` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iq_window_start_us: Option<f64>,
    /// Optional per-record-sample weights for IQ averaging (flat when absent).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iq_weights: Option<Vec<f64>>,
    #[serde(default = "default_threshold")]
    pub jump_threshold: f64,
    #[serde(default = "default_hold")]
    pub jump_hold_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExperimentConfig {
    Rates,
    SolveMe {
        t_final_us: f64,
        samples: usize,
        initial_state: InitialStateConfig,
    },
    SolveEffectiveMe {
        t_final_us: f64,
        samples: usize,
        initial_state: InitialStateConfig,
        #[serde(default)]
        method: MethodConfig,
    },
    Simulate(SimulateConfig),
    Sweep {
        simulation: SimulateConfig,
        axis: AxisConfig,
        grid: Vec<f64>,
    },
}

impl ExperimentConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentConfig::Rates => "rates",
            ExperimentConfig::SolveMe { .. } => "solve-me",
            ExperimentConfig::SolveEffectiveMe { .. } => "solve-effective-me",
            ExperimentConfig::Simulate(_) => "simulate",
            ExperimentConfig::Sweep { .. } => "sweep",
        }
    }
}

fn default_budget() -> f64 {
    DEFAULT_BUDGET
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    pub dt_us: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_fock: Option<usize>,
    #[serde(default = "default_budget")]
    pub budget: f64,
}

fn default_thin() -> usize {
    1
}

fn default_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Csv, OutputFormat::Json]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    #[serde(default = "default_thin")]
    pub thin: usize,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: None,
            thin: 1,
            formats: default_formats(),
        }
    }
}

impl OutputConfig {
    pub fn csv(&self) -> bool {
        self.formats.contains(&OutputFormat::Csv)
    }
}

/// Reads and validates a JSON config file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::config(path.display().to_string(), format!("cannot read config: {e}")))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let missing = |present: &[&str]| -> Vec<&'static str> {
        REQUIRED_ROOT_KEYS.iter().copied().filter(|k| !present.contains(k)).collect()
    };
    if text.trim().is_empty() {
        return Err(Error::config("<root>", format!("empty config; missing root keys: {}", missing(&[]).join(", "))));
    }
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::config("<root>", format!("malformed JSON: {e}")))?;
    let Some(obj) = value.as_object() else {
        return Err(Error::config("<root>", "config must be a JSON object"));
    };
    let keys: Vec<&str> = obj.keys().map(String::as_str).collect();
    let absent = missing(&keys);
    if !absent.is_empty() {
        return Err(Error::config("<root>", format!("missing root keys: {}", absent.join(", "))));
    }
    let cfg: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        Error::config(if path == "." { "<root>".to_string() } else { path }, e.into_inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn to_json_string(cfg: &RunConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("config serializes")
}

fn check_finite(path: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(path, format!("value {v} is not finite")))
    }
}

fn check_rate(path: &str, v: f64) -> Result<()> {
    check_finite(path, v)?;
    if v < 0.0 {
        return Err(Error::config(path, format!("negative rate {v}")));
    }
    Ok(())
}

fn check_positive(path: &str, v: f64) -> Result<()> {
    check_finite(path, v)?;
    if v <= 0.0 {
        return Err(Error::config(path, format!("must be positive, got {v}")));
    }
    Ok(())
}

/// Level pair from `"ge"`-style letters (g, e, f, h for levels 0..3) or `"j-k"`.
pub fn parse_pair(key: &str) -> Option<(usize, usize)> {
    let letter = |ch: char| "gefh".find(ch);
    let (a, b) = if let Some((x, y)) = key.split_once('-') {
        (x.trim().parse().ok()?, y.trim().parse().ok()?)
    } else {
        let mut it = key.chars();
        let (x, y) = (it.next()?, it.next()?);
        if it.next().is_some() {
            return None;
        }
        (letter(x)?, letter(y)?)
    };
    (a != b).then(|| (a.min(b), a.max(b)))
}

impl QuditConfig {
    pub fn levels(&self) -> usize {
        match self {
            QuditConfig::Shifts(s) => s.energies_mhz.len(),
            QuditConfig::Transmon(t) => t.levels,
            QuditConfig::Couplings(c) => c.energies_mhz.len(),
        }
    }
}

impl RunConfig {
    pub fn levels(&self) -> usize {
        self.system.qudit.levels()
    }

    /// Strict checks on values serde cannot express; every message carries the key path.
    pub fn validate(&self) -> Result<()> {
        let s = &self.system;
        let d = self.levels();
        if d < 2 {
            return Err(Error::config("system.qudit", format!("need at least 2 levels, got {d}")));
        }
        match &s.qudit {
            QuditConfig::Shifts(q) => {
                if q.chi_mhz.len() != d {
                    return Err(Error::config("system.qudit.shifts.chi_mhz", format!("{} shifts for {d} levels", q.chi_mhz.len())));
                }
                for (i, v) in q.energies_mhz.iter().chain(&q.chi_mhz).enumerate() {
                    check_finite(&format!("system.qudit.shifts[{i}]"), *v)?;
                }
            }
            QuditConfig::Transmon(t) => {
                for (k, v) in [("omega_q_mhz", t.omega_q_mhz), ("anharmonicity_mhz", t.anharmonicity_mhz), ("g_mhz", t.g_mhz)] {
                    check_finite(&format!("system.qudit.transmon.{k}"), v)?;
                }
            }
            QuditConfig::Couplings(q) => {
                if q.g_mhz.len() != d || q.g_mhz.iter().any(|r| r.len() != d) {
                    return Err(Error::config("system.qudit.couplings.g_mhz", format!("coupling table must be {d}x{d}")));
                }
            }
        }
        let r = &s.resonator;
        for (k, v) in [
            ("kappa_in_mhz", r.kappa_in_mhz),
            ("kappa_out_mhz", r.kappa_out_mhz),
            ("kappa_internal_mhz", r.kappa_internal_mhz),
            ("n_thermal", r.n_thermal),
        ] {
            check_rate(&format!("system.resonator.{k}"), v)?;
        }
        if r.kappa_in_mhz + r.kappa_out_mhz + r.kappa_internal_mhz <= 0.0 {
            return Err(Error::config("system.resonator", "total decay rate kappa must be positive"));
        }
        for (k, v) in [("omega_r_mhz", r.omega_r_mhz), ("omega_d_mhz", r.omega_d_mhz), ("input_amplitude.re", r.input_amplitude[0]), ("input_amplitude.im", r.input_amplitude[1])] {
            check_finite(&format!("system.resonator.{k}"), v)?;
        }
        for (name, map) in [("gamma1_per_us", &s.decoherence.gamma1_per_us), ("gamma_phi_per_us", &s.decoherence.gamma_phi_per_us)] {
            for (key, &v) in map {
                let path = format!("system.decoherence.{name}.{key}");
                let (_, b) = parse_pair(key).ok_or_else(|| Error::config(&path, "unknown level pair; use letters from \"gefh\" or \"j-k\""))?;
                if b >= d {
                    return Err(Error::config(&path, format!("level {b} outside a {d}-level qudit")));
                }
                check_rate(&path, v)?;
            }
        }
        if !(0.0..=1.0).contains(&s.efficiency) {
            return Err(Error::config("system.efficiency", format!("{} outside [0, 1]", s.efficiency)));
        }
        check_finite("system.phase_rad", s.phase_rad)?;
        check_positive("numerics.dt_us", self.numerics.dt_us)?;
        check_positive("numerics.budget", self.numerics.budget)?;
        if self.numerics.n_fock == Some(0) {
            return Err(Error::config("numerics.n_fock", "must be at least 1"));
        }
        if self.output.thin == 0 {
            return Err(Error::config("output.thin", "must be at least 1"));
        }
        let check_state = |path: &str, st: &InitialStateConfig| -> Result<()> {
            self.initial_state(st).map(|_| ()).map_err(|e| match e {
                Error::Config { .. } => e,
                other => Error::config(path, other.to_string()),
            })
        };
        match &self.experiment {
            ExperimentConfig::Rates => {}
            ExperimentConfig::SolveMe { t_final_us, samples, initial_state } => {
                check_positive("experiment.t_final_us", *t_final_us)?;
                if *samples == 0 {
                    return Err(Error::config("experiment.samples", "must be at least 1"));
                }
                if self.numerics.n_fock.is_none() {
                    return Err(Error::config("numerics.n_fock", "required by solve-me"));
                }
                check_state("experiment.initial_state", initial_state)?;
            }
            ExperimentConfig::SolveEffectiveMe { t_final_us, samples, initial_state, .. } => {
                check_positive("experiment.t_final_us", *t_final_us)?;
                if *samples == 0 {
                    return Err(Error::config("experiment.samples", "must be at least 1"));
                }
                check_state("experiment.initial_state", initial_state)?;
            }
            ExperimentConfig::Simulate(sim) => self.validate_simulation("experiment", sim)?,
            ExperimentConfig::Sweep { simulation, grid, .. } => {
                self.validate_simulation("experiment.simulation", simulation)?;
                if grid.is_empty() {
                    return Err(Error::config("experiment.grid", "sweep grid is empty"));
                }
                for (i, v) in grid.iter().enumerate() {
                    check_finite(&format!("experiment.grid[{i}]"), *v)?;
                }
            }
        }
        Ok(())
    }

    fn validate_simulation(&self, base: &str, sim: &SimulateConfig) -> Result<()> {
        check_positive(&format!("{base}.t_final_us"), sim.t_final_us)?;
        if sim.trajectories == 0 {
            return Err(Error::config(format!("{base}.trajectories"), "must be at least 1"));
        }
        if sim.engine == EngineConfig::FullSme && self.numerics.n_fock.is_none() {
            return Err(Error::config("numerics.n_fock", "required by the full-sme engine"));
        }
        if let Some(t) = sim.iq_window_start_us {
            check_finite(&format!("{base}.iq_window_start_us"), t)?;
            if t < 0.0 {
                return Err(Error::config(format!("{base}.iq_window_start_us"), "must be nonnegative"));
            }
        }
        check_finite(&format!("{base}.jump_threshold"), sim.jump_threshold)?;
        check_rate(&format!("{base}.jump_hold_us"), sim.jump_hold_us)?;
        self.initial_state(&sim.initial_state).map_err(|e| match e {
            Error::Config { .. } => e,
            other => Error::config(format!("{base}.initial_state"), other.to_string()),
        })?;
        Ok(())
    }

    /// Physical parameters in internal units (rad/us, us).
    pub fn system_params(&self) -> Result<SystemParams> {
        let s = &self.system;
        let d = self.levels();
        let qudit = match &s.qudit {
            QuditConfig::Shifts(q) => QuditSpec::from_shifts(q.energies_mhz.iter().map(|&f| mhz(f)).collect(), q.chi_mhz.iter().map(|&f| mhz(f)).collect()),
            QuditConfig::Transmon(t) => QuditSpec::transmon(t.levels, mhz(t.omega_q_mhz), mhz(t.anharmonicity_mhz), mhz(t.g_mhz)),
            QuditConfig::Couplings(q) => QuditSpec {
                energies: q.energies_mhz.iter().map(|&f| mhz(f)).collect(),
                coupling: Coupling::Matrix(DMatrix::from_fn(d, d, |j, k| c(q.g_mhz[j][k]) * TAU)),
            },
        };
        let r = &s.resonator;
        let resonator = ResonatorSpec {
            omega_r: mhz(r.omega_r_mhz),
            kappa_in: mhz(r.kappa_in_mhz),
            kappa_out: mhz(r.kappa_out_mhz),
            kappa_internal: mhz(r.kappa_internal_mhz),
            input_amplitude: c(r.input_amplitude),
            omega_d: mhz(r.omega_d_mhz),
            n_thermal: r.n_thermal,
        };
        let mut deco = DecoherenceSpec::none(d);
        for (key, &v) in &s.decoherence.gamma1_per_us {
            let (a, b) = parse_pair(key).expect("validated");
            deco.gamma1[(a, b)] = v;
        }
        for (key, &v) in &s.decoherence.gamma_phi_per_us {
            let (a, b) = parse_pair(key).expect("validated");
            deco.gamma_phi[(a, b)] = v;
            deco.gamma_phi[(b, a)] = v;
        }
        let p = SystemParams {
            qudit,
            resonator,
            decoherence: deco,
            efficiency: s.efficiency,
            phase: s.phase_rad,
            frame: match s.frame {
                FrameConfig::Interaction => QuditFrame::Interaction,
                FrameConfig::Lab => QuditFrame::Lab,
            },
            include_shifts: s.include_shifts,
        };
        p.derive().map_err(|e| match e {
            Error::Config { .. } => e,
            other => Error::config("system", other.to_string()),
        })?;
        Ok(p)
    }

    pub fn initial_state(&self, st: &InitialStateConfig) -> Result<InitialState> {
        let d = self.levels();
        Ok(match st {
            InitialStateConfig::Density(rows) => {
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return Err(Error::Dimension(format!("density matrix must be {d}x{d}")));
                }
                InitialState::Density(DensityMatrix::new(ComplexMatrix::from_fn(d, d, |i, j| c(rows[i][j])))?)
            }
            InitialStateConfig::Ket(v) => {
                if v.len() != d {
                    return Err(Error::Dimension(format!("ket must have {d} entries")));
                }
                InitialState::Ket(KetState::new(nalgebra::DVector::from_iterator(d, v.iter().map(|&p| c(p))))?)
            }
            InitialStateConfig::Basis(l) => InitialState::Density(DensityMatrix::basis(d, *l)?),
            InitialStateConfig::Populations(p) => {
                if p.len() != d {
                    return Err(Error::Dimension(format!("{} populations for {d} levels", p.len())));
                }
                InitialState::Density(DensityMatrix::diagonal_mixture(p)?)
            }
            InitialStateConfig::Prepared(levels) => {
                if levels.is_empty() {
                    return Err(Error::InvalidArgument("prepared level list is empty".into()));
                }
                if let Some(&l) = levels.iter().find(|&&l| l >= d) {
                    return Err(Error::LevelIndex { index: l, levels: d });
                }
                InitialState::Prepared(levels.clone())
            }
        })
    }
}

/// A density matrix for deterministic solvers; stratified preparations become the
/// corresponding diagonal mixture.
pub fn initial_density(st: &InitialState, levels: usize) -> Result<DensityMatrix> {
    match st {
        InitialState::Density(r) => Ok(r.clone()),
        InitialState::Ket(k) => Ok(DensityMatrix::pure(k)),
        InitialState::Prepared(l) => {
            let mut p = vec![0.0; levels];
            for &j in l {
                p[j] += 1.0 / l.len() as f64;
            }
            DensityMatrix::diagonal_mixture(&p)
        }
    }
}

impl From<MethodConfig> for Method {
    fn from(m: MethodConfig) -> Method {
        match m {
            MethodConfig::Rk4 => Method::Rk4,
            MethodConfig::Euler => Method::Euler,
        }
    }
}

impl From<ResonatorStartConfig> for ResonatorStart {
    fn from(r: ResonatorStartConfig) -> ResonatorStart {
        match r {
            ResonatorStartConfig::Vacuum => ResonatorStart::Vacuum,
            ResonatorStartConfig::SteadyState => ResonatorStart::SteadyState,
        }
    }
}

impl From<AxisConfig> for SweepAxis {
    fn from(a: AxisConfig) -> SweepAxis {
        match a {
            AxisConfig::ReadoutFrequency => SweepAxis::ReadoutFrequency,
            AxisConfig::MeasurementTime => SweepAxis::MeasurementTime,
            AxisConfig::DriveAmplitude => SweepAxis::DriveAmplitude,
        }
    }
}

/// Grid value in internal units.
pub fn axis_value(axis: AxisConfig, v: f64) -> f64 {
    match axis {
        AxisConfig::ReadoutFrequency => mhz(v),
        _ => v,
    }
}

pub fn engine(e: EngineConfig, n_fock: Option<usize>) -> Result<Engine> {
    Ok(match e {
        EngineConfig::EffectiveSme => Engine::EffectiveSme,
        EngineConfig::Qsd => Engine::Qsd,
        EngineConfig::FullSme => Engine::FullSme {
            n_fock: n_fock.ok_or_else(|| Error::config("numerics.n_fock", "required by the full-sme engine"))?,
        },
    })
}
