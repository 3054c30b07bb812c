//! C interface to `qudit_readout`.
//!
//! Every function returns a [`QrStatus`]. On failure the message is kept per thread and can
//! be copied out with [`qr_last_error_message`]. Handles are opaque and owned by the caller
//! once returned; release them with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use qudit_readout::io::output::to_json_bytes;
use qudit_readout::io::{ensemble_config, parse_config_str, rates_report, run_command, weighting, window_start, Command, Overrides, RunConfig};
use qudit_readout::io::config::ExperimentConfig;
use qudit_readout::lab::{ensemble_iq, IQPoint};
use qudit_readout::model::{RateTable, ReadoutModel};
use qudit_readout::Error;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Numerical = 4,
    Budget = 5,
    Io = 6,
    Unsupported = 7,
    Panic = 8,
}

/// Parsed and validated run configuration.
pub struct QrConfig(RunConfig);

/// Derived readout model with its steady-state rate table.
pub struct QrModel {
    model: ReadoutModel,
    rates: RateTable,
}

/// IQ points of a simulated ensemble.
pub struct QrEnsemble {
    points: Vec<IQPoint>,
    aborted: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> QrStatus {
    match e {
        Error::Config { .. } => QrStatus::Config,
        Error::Numerical(_) => QrStatus::Numerical,
        Error::Budget { .. } => QrStatus::Budget,
        Error::Io(_) => QrStatus::Io,
        Error::Unsupported(_) => QrStatus::Unsupported,
        _ => QrStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), QrStatus>) -> QrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QrStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            QrStatus::Panic
        }
    }
}

fn fail(e: Error) -> QrStatus {
    set_error(&e.to_string());
    status_of(&e)
}

fn null(what: &str) -> QrStatus {
    set_error(&format!("{what} is null"));
    QrStatus::NullPointer
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, QrStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(&format!("{what} is not UTF-8"));
        QrStatus::InvalidArgument
    })
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, QrStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Copies the last error message of the calling thread into `buf` (NUL-terminated, truncated
/// to `len`). Returns the full message length without the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn qr_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let bytes = e.borrow();
        let bytes = bytes.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Parses a JSON run configuration.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qr_config_parse(json: *const c_char, out: *mut *mut QrConfig) -> QrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(json, "json")?;
        let cfg = parse_config_str(text).map_err(fail)?;
        *out = Box::into_raw(Box::new(QrConfig(cfg)));
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or a handle from [`qr_config_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qr_config_free(cfg: *mut QrConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Builds the readout model of a configuration.
///
/// # Safety
/// `cfg` must be a live config handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qr_model_new(cfg: *const QrConfig, out: *mut *mut QrModel) -> QrStatus {
    guard(|| {
        let cfg = handle(cfg, "cfg")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let model = cfg.0.system_params().and_then(|p| p.derive()).map_err(fail)?;
        let rates = RateTable::steady_state(&model);
        *out = Box::into_raw(Box::new(QrModel { model, rates }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from [`qr_model_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qr_model_free(model: *mut QrModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of qudit levels, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn qr_model_levels(model: *const QrModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.levels)
}

/// Steady-state resonator amplitudes; `re` and `im` must hold `len >= levels` values.
///
/// # Safety
/// `re` and `im` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn qr_model_steady_state(model: *const QrModel, re: *mut f64, im: *mut f64, len: usize) -> QrStatus {
    guard(|| {
        let m = handle(model, "model")?;
        if re.is_null() || im.is_null() {
            return Err(null("output buffer"));
        }
        if len < m.model.levels {
            set_error(&format!("buffer holds {len} values, need {}", m.model.levels));
            return Err(QrStatus::InvalidArgument);
        }
        for (i, a) in m.rates.alpha.iter().enumerate() {
            *re.add(i) = a.re;
            *im.add(i) = a.im;
        }
        Ok(())
    })
}

/// Steady-state measurement rate `Gamma_m` and dephasing rate `Gamma_d` of levels `j`, `k` (1/us).
///
/// # Safety
/// `gamma_m` and `gamma_d` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn qr_model_pair_rates(
    model: *const QrModel,
    j: usize,
    k: usize,
    gamma_m: *mut f64,
    gamma_d: *mut f64,
) -> QrStatus {
    guard(|| {
        let m = handle(model, "model")?;
        if gamma_m.is_null() || gamma_d.is_null() {
            return Err(null("output pointer"));
        }
        let d = m.model.levels;
        if j >= d || k >= d {
            return Err(fail(Error::LevelIndex { index: j.max(k), levels: d }));
        }
        *gamma_m = m.rates.gamma_m[(j, k)];
        *gamma_d = m.rates.gamma_d[(j, k)];
        Ok(())
    })
}

/// Rates report as a JSON string; release it with [`qr_string_free`].
///
/// # Safety
/// `model` must be a live model handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qr_model_rates_json(model: *const QrModel, out: *mut *mut c_char) -> QrStatus {
    guard(|| {
        let m = handle(model, "model")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let report = rates_report(&m.model).map_err(fail)?;
        let text = CString::new(to_json_bytes(&report)).map_err(|_| QrStatus::InvalidArgument)?;
        *out = text.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Runs a CLI command (`"rates"`, `"solve-me"`, `"solve-effective-me"`, `"simulate"`, `"sweep"`)
/// writing its files and manifest into `out_dir`. `seed` replaces the configured master seed
/// when `use_seed` is true; `trajectories` replaces the configured count when nonzero.
///
/// # Safety
/// Pointers must be live handles or NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn qr_run(
    cfg: *const QrConfig,
    command: *const c_char,
    out_dir: *const c_char,
    use_seed: bool,
    seed: u64,
    trajectories: usize,
) -> QrStatus {
    guard(|| {
        let cfg = handle(cfg, "cfg")?;
        let command = match str_arg(command, "command")? {
            "rates" => Command::Rates,
            "solve-me" => Command::SolveMe,
            "solve-effective-me" => Command::SolveEffectiveMe,
            "simulate" => Command::Simulate,
            "sweep" => Command::Sweep,
            other => {
                set_error(&format!("unknown command `{other}`"));
                return Err(QrStatus::InvalidArgument);
            }
        };
        let dir = str_arg(out_dir, "out_dir")?;
        let ov = Overrides {
            seed: use_seed.then_some(seed),
            trajectories: (trajectories > 0).then_some(trajectories),
            thin: None,
        };
        let bytes = qudit_readout::io::config::to_json_string(&cfg.0).into_bytes();
        run_command(command, &cfg.0, &bytes, &ov, Path::new(dir)).map_err(fail)
    })
}

/// Simulates the ensemble of a `simulate` config and keeps its IQ points.
///
/// # Safety
/// `cfg` must be a live config handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qr_ensemble_run(
    cfg: *const QrConfig,
    use_seed: bool,
    seed: u64,
    trajectories: usize,
    out: *mut *mut QrEnsemble,
) -> QrStatus {
    guard(|| {
        let cfg = handle(cfg, "cfg")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let ExperimentConfig::Simulate(sim) = &cfg.0.experiment else {
            return Err(fail(Error::config("experiment.kind", "expected simulate")));
        };
        let ov = Overrides {
            seed: use_seed.then_some(seed),
            trajectories: (trajectories > 0).then_some(trajectories),
            thin: None,
        };
        let ens = ensemble_config(&cfg.0, sim, &ov).map_err(fail)?;
        ens.validate().map_err(fail)?;
        let model = ens.params.derive().map_err(fail)?;
        let start = window_start(sim, &model).map_err(fail)?;
        let (points, aborted) = ensemble_iq(&ens, start, &weighting(sim)).map_err(fail)?;
        *out = Box::into_raw(Box::new(QrEnsemble { points, aborted }));
        Ok(())
    })
}

/// # Safety
/// `ens` must be null or a handle from [`qr_ensemble_run`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qr_ensemble_free(ens: *mut QrEnsemble) {
    if !ens.is_null() {
        drop(Box::from_raw(ens));
    }
}

/// Number of completed trajectories (one IQ point each), or 0 for a null handle.
///
/// # Safety
/// `ens` must be null or a live ensemble handle.
#[no_mangle]
pub unsafe extern "C" fn qr_ensemble_len(ens: *const QrEnsemble) -> usize {
    ens.as_ref().map_or(0, |e| e.points.len())
}

/// Number of trajectories dropped by numerical aborts.
///
/// # Safety
/// `ens` must be null or a live ensemble handle.
#[no_mangle]
pub unsafe extern "C" fn qr_ensemble_aborted(ens: *const QrEnsemble) -> usize {
    ens.as_ref().map_or(0, |e| e.aborted)
}

/// IQ point `index`: trajectory id and time-averaged record `(I, Q)`.
///
/// # Safety
/// Output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn qr_ensemble_point(
    ens: *const QrEnsemble,
    index: usize,
    trajectory_id: *mut u64,
    i: *mut f64,
    q: *mut f64,
) -> QrStatus {
    guard(|| {
        let e = handle(ens, "ens")?;
        if trajectory_id.is_null() || i.is_null() || q.is_null() {
            return Err(null("output pointer"));
        }
        let Some(p) = e.points.get(index) else {
            set_error(&format!("index {index} out of range for {} points", e.points.len()));
            return Err(QrStatus::InvalidArgument);
        };
        *trajectory_id = p.trajectory_id;
        *i = p.v_bar.re;
        *q = p.v_bar.im;
        Ok(())
    })
}
