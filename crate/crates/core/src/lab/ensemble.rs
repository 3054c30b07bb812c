use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{AmplitudeEvolution, ReadoutModel, SystemParams};
use crate::quantum::{hermitian_eigenvalues, DensityMatrix, KetState, C64};
use crate::sme::{
    run_effective_trajectory, run_qsd_trajectory, simulate_full_sme, NoiseStream, QsdModel, Trajectory, TrajectorySpec,
};

/// Default cap on `n_trajectories * steps * dim^2`.
pub const DEFAULT_BUDGET: f64 = 1e9;

/// Largest fraction of aborted trajectories a run tolerates.
pub const MAX_ABORT_FRACTION: f64 = 0.01;

const BATCH: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    EffectiveSme,
    Qsd,
    FullSme { n_fock: usize },
}

/// Resonator state when the measurement starts (qudit-only engines).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResonatorStart {
    #[default]
    Vacuum,
    /// Each branch starts at its steady-state amplitude; not available for the full engine.
    SteadyState,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Density(DensityMatrix),
    Ket(KetState),
    /// Trajectory `id` starts in the basis state `levels[id % levels.len()]`.
    Prepared(Vec<usize>),
}

#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub params: SystemParams,
    pub initial_state: InitialState,
    pub engine: Engine,
    pub resonator_start: ResonatorStart,
    pub n_trajectories: usize,
    pub spec: TrajectorySpec,
    pub master_seed: u64,
    pub budget: f64,
}

impl EnsembleConfig {
    pub fn new(params: SystemParams, initial_state: InitialState, n_trajectories: usize, spec: TrajectorySpec, master_seed: u64) -> Self {
        EnsembleConfig {
            params,
            initial_state,
            engine: Engine::EffectiveSme,
            resonator_start: ResonatorStart::Vacuum,
            n_trajectories,
            spec,
            master_seed,
            budget: DEFAULT_BUDGET,
        }
    }

    /// `n_trajectories * steps * dim^2`, the quantity compared with the budget.
    pub fn estimated_cost(&self) -> f64 {
        let d = self.params.qudit.levels();
        let dim = match self.engine {
            Engine::FullSme { n_fock } => d * n_fock,
            _ => d,
        };
        self.n_trajectories as f64 * self.spec.steps() as f64 * (dim * dim) as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trajectories == 0 {
            return Err(Error::InvalidArgument("n_trajectories must be at least 1".into()));
        }
        self.spec.validate()?;
        let cost = self.estimated_cost();
        if cost > self.budget {
            return Err(Error::Budget { estimated: cost, budget: self.budget });
        }
        let d = self.params.qudit.levels();
        match &self.initial_state {
            InitialState::Density(r) if r.dim() != d => {
                return Err(Error::Dimension(format!("initial state has dimension {}, expected {d}", r.dim())))
            }
            InitialState::Ket(k) if k.dim() != d => {
                return Err(Error::Dimension(format!("initial ket has dimension {}, expected {d}", k.dim())))
            }
            InitialState::Prepared(levels) => {
                if levels.is_empty() {
                    return Err(Error::InvalidArgument("prepared level list is empty".into()));
                }
                if let Some(&l) = levels.iter().find(|&&l| l >= d) {
                    return Err(Error::LevelIndex { index: l, levels: d });
                }
            }
            _ => {}
        }
        if matches!(self.engine, Engine::FullSme { .. }) && self.resonator_start == ResonatorStart::SteadyState {
            return Err(Error::Unsupported("the combined engine starts from the resonator vacuum".into()));
        }
        Ok(())
    }

    /// The basis level trajectory `id` is prepared in, for stratified preparations.
    pub fn prepared_level(&self, id: u64) -> Option<usize> {
        match &self.initial_state {
            InitialState::Prepared(levels) => Some(levels[(id % levels.len() as u64) as usize]),
            _ => None,
        }
    }
}

/// Per-sample ensemble moments. Variances of complex entries are `E|x - E x|^2`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnsembleStats {
    pub levels: usize,
    pub times: Vec<f64>,
    /// Row-major mean density matrices.
    pub mean: Vec<Vec<C64>>,
    pub variance: Vec<Vec<f64>>,
    pub entropy_mean: Vec<f64>,
    pub entropy_variance: Vec<f64>,
    pub record_times: Vec<f64>,
    pub record_mean: Vec<[f64; 2]>,
    pub record_variance: Vec<[f64; 2]>,
    pub completed: usize,
    /// `(trajectory id, reason)` for every dropped trajectory.
    pub aborted: Vec<(u64, String)>,
}

/// Running moments, accumulated in trajectory-id order so results do not depend on scheduling.
#[derive(Debug, Default)]
struct Accumulator {
    n: usize,
    stats: EnsembleStats,
    m2_record: Vec<[f64; 2]>,
}

impl Accumulator {
    fn push(&mut self, tr: &Trajectory) {
        let st = &mut self.stats;
        if self.n == 0 {
            st.levels = tr.levels();
            st.times = tr.times.clone();
            st.mean = tr.states.iter().map(|s| vec![C64::new(0.0, 0.0); s.len()]).collect();
            st.variance = tr.states.iter().map(|s| vec![0.0; s.len()]).collect();
            st.entropy_mean = vec![0.0; tr.times.len()];
            st.entropy_variance = vec![0.0; tr.times.len()];
            st.record_times = tr.record.times.clone();
            st.record_mean = vec![[0.0; 2]; tr.record.len()];
            self.m2_record = vec![[0.0; 2]; tr.record.len()];
        }
        self.n += 1;
        let n = self.n as f64;
        for (i, s) in tr.states.iter().enumerate() {
            for (k, &x) in s.iter().enumerate() {
                let d = x - st.mean[i][k];
                st.mean[i][k] += d / n;
                st.variance[i][k] += (d.conj() * (x - st.mean[i][k])).re;
            }
            let x = tr.entropy[i];
            let d = x - st.entropy_mean[i];
            st.entropy_mean[i] += d / n;
            st.entropy_variance[i] += d * (x - st.entropy_mean[i]);
        }
        for i in 0..tr.record.len() {
            for (c, x) in [tr.record.v_i[i], tr.record.v_q[i]].into_iter().enumerate() {
                let d = x - st.record_mean[i][c];
                st.record_mean[i][c] += d / n;
                self.m2_record[i][c] += d * (x - st.record_mean[i][c]);
            }
        }
    }

    fn finish(mut self) -> EnsembleStats {
        let n = self.n.max(1) as f64;
        let st = &mut self.stats;
        for v in st.variance.iter_mut().flatten() {
            *v /= n;
        }
        for v in st.entropy_variance.iter_mut() {
            *v /= n;
        }
        st.record_variance = self.m2_record.iter().map(|m| [m[0] / n, m[1] / n]).collect();
        st.completed = self.n;
        self.stats
    }
}

/// Results of an ensemble: statistics plus one mapped value per completed trajectory.
#[derive(Debug, Clone)]
pub struct EnsembleRun<T> {
    pub stats: EnsembleStats,
    pub outputs: Vec<(u64, T)>,
}

fn evolution(model: &ReadoutModel, start: ResonatorStart) -> Result<AmplitudeEvolution> {
    match start {
        ResonatorStart::Vacuum => Ok(model.evolution_from_vacuum()),
        ResonatorStart::SteadyState => model.evolution(&model.steady_state()),
    }
}

/// Picks a pure state for a QSD trajectory: the density matrix is sampled in its eigenbasis.
fn sample_ket(rho: &DensityMatrix, u: f64) -> Result<KetState> {
    let eig = rho.matrix().clone().symmetric_eigen();
    let mut acc = 0.0;
    let mut pick = 0;
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if l > 0.0 {
            pick = k;
            acc += l;
            if u <= acc {
                break;
            }
        }
    }
    KetState::new(eig.eigenvectors.column(pick).into_owned())
}

struct Prepared {
    model: ReadoutModel,
    evolution: AmplitudeEvolution,
    channels: usize,
}

fn run_one(cfg: &EnsembleConfig, p: &Prepared, id: u64) -> Result<Trajectory> {
    let d = p.model.levels;
    let mut noise = NoiseStream::new(cfg.master_seed, id, p.channels);
    let density = || -> Result<DensityMatrix> {
        match &cfg.initial_state {
            InitialState::Density(r) => Ok(r.clone()),
            InitialState::Ket(k) => Ok(DensityMatrix::pure(k)),
            InitialState::Prepared(_) => DensityMatrix::basis(d, cfg.prepared_level(id).expect("prepared")),
        }
    };
    match cfg.engine {
        Engine::EffectiveSme => run_effective_trajectory(&p.model, p.evolution.clone(), &density()?, &cfg.spec, Some(&mut noise)),
        Engine::Qsd => {
            let ket = match &cfg.initial_state {
                InitialState::Ket(k) => k.clone(),
                InitialState::Prepared(_) => KetState::basis(d, cfg.prepared_level(id).expect("prepared"))?,
                InitialState::Density(r) => sample_ket(r, noise.preparation_uniform())?,
            };
            run_qsd_trajectory(&p.model, &p.evolution, &ket, &cfg.spec, &mut noise)
        }
        Engine::FullSme { n_fock } => {
            let rho = density()?.tensor(&DensityMatrix::basis(n_fock, 0)?);
            simulate_full_sme(&p.model, n_fock, &rho, &cfg.spec, Some(&mut noise))
        }
    }
}

/// Runs the ensemble and maps every completed trajectory through `map`.
///
/// Trajectory `id` always uses noise stream `id` of `master_seed`; moments are accumulated
/// in id order, so the result is identical for any number of threads. Trajectories that
/// fail numerically are dropped and counted; more than 1% dropped fails the run.
pub fn run_ensemble_with<T, F>(cfg: &EnsembleConfig, map: F) -> Result<EnsembleRun<T>>
where
    T: Send,
    F: Fn(u64, &Trajectory) -> T + Sync,
{
    cfg.validate()?;
    let model = cfg.params.derive()?;
    let channels = match cfg.engine {
        Engine::Qsd => QsdModel::new(&model)?.channel_count(),
        _ => 2,
    };
    let prepared = Prepared {
        evolution: evolution(&model, cfg.resonator_start)?,
        model,
        channels,
    };
    if let InitialState::Density(r) = &cfg.initial_state {
        if cfg.engine == Engine::Qsd && hermitian_eigenvalues(r.matrix()).iter().any(|&l| l < -1e-12) {
            return Err(Error::InvalidState("initial state has negative eigenvalues".into()));
        }
    }
    let mut acc = Accumulator::default();
    let mut outputs = Vec::with_capacity(cfg.n_trajectories);
    let mut aborted = Vec::new();
    let n = cfg.n_trajectories as u64;
    let mut start = 0u64;
    while start < n {
        let end = (start + BATCH as u64).min(n);
        let batch: Vec<(u64, Result<(Trajectory, T)>)> = (start..end)
            .into_par_iter()
            .map(|id| {
                let r = run_one(cfg, &prepared, id).map(|tr| {
                    let v = map(id, &tr);
                    (tr, v)
                });
                (id, r)
            })
            .collect();
        for (id, r) in batch {
            match r {
                Ok((tr, v)) => {
                    acc.push(&tr);
                    outputs.push((id, v));
                }
                Err(Error::Numerical(msg)) => {
                    log::warn!("trajectory {id} aborted: {msg}");
                    aborted.push((id, msg));
                }
                Err(e) => return Err(e),
            }
        }
        start = end;
    }
    if aborted.len() as f64 > MAX_ABORT_FRACTION * cfg.n_trajectories as f64 {
        return Err(Error::Numerical(format!(
            "{} of {} trajectories aborted (limit {}%); first: {}",
            aborted.len(),
            cfg.n_trajectories,
            MAX_ABORT_FRACTION * 100.0,
            aborted[0].1
        )));
    }
    let mut stats = acc.finish();
    stats.aborted = aborted;
    Ok(EnsembleRun { stats, outputs })
}

/// Runs the ensemble keeping every trajectory.
pub fn run_ensemble(cfg: &EnsembleConfig) -> Result<EnsembleRun<Trajectory>> {
    run_ensemble_with(cfg, |_, tr| tr.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DecoherenceSpec, QuditFrame, QuditSpec, ResonatorSpec};

    fn qutrit() -> SystemParams {
        SystemParams {
            qudit: QuditSpec::from_shifts(vec![0.0; 3], vec![0.0, 1.0, 2.0]),
            resonator: ResonatorSpec {
                omega_r: 0.0,
                kappa_in: 2.0,
                kappa_out: 2.0,
                kappa_internal: 0.0,
                input_amplitude: C64::new(1.0, 0.0),
                omega_d: 1.0,
                n_thermal: 0.0,
            },
            decoherence: DecoherenceSpec::none(3),
            efficiency: 0.5,
            phase: 0.0,
            frame: QuditFrame::Interaction,
            include_shifts: false,
        }
    }

    fn config(n: usize) -> EnsembleConfig {
        let spec = TrajectorySpec { t_final: 0.1, dt: 1e-3, thin: 10 };
        EnsembleConfig::new(qutrit(), InitialState::Prepared(vec![2, 0]), n, spec, 1)
    }

    #[test]
    fn cost_counts_full_dimension() {
        let mut c = config(10);
        assert_eq!(c.estimated_cost(), 10.0 * 100.0 * 9.0);
        c.engine = Engine::FullSme { n_fock: 4 };
        assert_eq!(c.estimated_cost(), 10.0 * 100.0 * 144.0);
        c.budget = 1e5;
        assert!(matches!(c.validate(), Err(Error::Budget { .. })));
    }

    #[test]
    fn validation_rejects_bad_preparations() {
        let mut c = config(4);
        assert_eq!(c.prepared_level(0), Some(2));
        assert_eq!(c.prepared_level(3), Some(0));
        c.initial_state = InitialState::Prepared(vec![0, 3]);
        assert!(matches!(c.validate(), Err(Error::LevelIndex { index: 3, levels: 3 })));
        c.initial_state = InitialState::Prepared(vec![]);
        assert!(c.validate().is_err());
        c.initial_state = InitialState::Density(DensityMatrix::basis(2, 0).unwrap());
        assert!(matches!(c.validate(), Err(Error::Dimension(_))));
        let mut c = config(0);
        assert!(c.validate().is_err());
        c.n_trajectories = 1;
        c.engine = Engine::FullSme { n_fock: 4 };
        c.resonator_start = ResonatorStart::SteadyState;
        assert!(matches!(c.validate(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn prepared_runs_start_in_their_level() {
        let run = run_ensemble(&config(5)).unwrap();
        for (id, tr) in &run.outputs {
            let p = tr.populations(0);
            let l = if id % 2 == 0 { 2 } else { 0 };
            assert_eq!(p[l], 1.0);
        }
        assert_eq!(run.stats.completed, 5);
        assert!(run.stats.aborted.is_empty());
        assert_eq!(run.stats.mean[0][8].re, 0.6);
    }

    #[test]
    fn sampled_ket_comes_from_the_support() {
        let rho = DensityMatrix::basis(3, 1).unwrap();
        for u in [0.0, 0.5, 1.0] {
            let k = sample_ket(&rho, u).unwrap();
            assert!((k.vector()[1].norm() - 1.0).abs() < 1e-12);
        }
    }
}
