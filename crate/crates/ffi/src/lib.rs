//! C ABI for the `csaloha` engine.
//!
//! Configurations and sweep results are opaque handles owned by the caller
//! and released with the matching `*_free` function. Every fallible entry
//! point returns a [`CsaStatus`]; on failure, [`csa_last_error`] gives a
//! message for the calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use csaloha::optimizer::{self, AlphaGrid, AlphaOptimum, OptimizationReport};
use csaloha::{cli, simulator, AccessMatrix, Error, EvolveOptions, SlotClass, SystemConfig, UserClass};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidConfig = 2,
    Parse = 3,
    InvalidArgument = 4,
    Infeasible = 5,
    BufferTooSmall = 6,
    Io = 7,
    Panic = 8,
}

/// Opaque system configuration.
pub struct CsaConfig {
    inner: SystemConfig,
}

/// Opaque result of an epsilon sweep.
pub struct CsaSweep {
    report: OptimizationReport,
}

/// Outcome of the and-or tree recursion.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CsaEvolveSummary {
    pub resolution: f64,
    pub throughput: f64,
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
}

/// Aggregate Monte Carlo statistics.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CsaTrialSummary {
    pub trials: usize,
    pub mean_resolved_fraction: f64,
    pub stderr_resolved_fraction: f64,
    pub mean_throughput: f64,
    pub stderr_throughput: f64,
}

/// One optimized operating point. The access matrix is copied separately.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CsaOptimum {
    pub epsilon: f64,
    pub m_over_n: f64,
    pub throughput: f64,
    pub resolution: f64,
    pub converged: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

fn status_of(err: &Error) -> CsaStatus {
    match err {
        Error::Parse { .. } | Error::UnknownPreset(_) => CsaStatus::Parse,
        Error::Infeasible { .. } => CsaStatus::Infeasible,
        Error::Io(_) => CsaStatus::Io,
        Error::InvalidArgument(_) | Error::Population(_) | Error::InvalidPolynomial(_) => {
            CsaStatus::InvalidArgument
        }
        _ => CsaStatus::InvalidConfig,
    }
}

fn fail(status: CsaStatus, message: impl Into<String>) -> CsaStatus {
    set_last_error(message.into());
    status
}

/// Runs `body`, mapping errors and panics to status codes.
fn guard(body: impl FnOnce() -> Result<(), CsaStatus>) -> CsaStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => CsaStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(CsaStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, CsaStatus>;
}

impl<T> OrStatus<T> for csaloha::Result<T> {
    fn or_status(self) -> Result<T, CsaStatus> {
        self.map_err(|e| fail(status_of(&e), e.to_string()))
    }
}

unsafe fn non_null<'a, T>(p: *const T, what: &str) -> Result<&'a T, CsaStatus> {
    p.as_ref()
        .ok_or_else(|| fail(CsaStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, CsaStatus> {
    p.as_mut()
        .ok_or_else(|| fail(CsaStatus::NullPointer, format!("{what} is null")))
}

unsafe fn input_slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], CsaStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(CsaStatus::NullPointer, format!("{what} is null")));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, CsaStatus> {
    if p.is_null() {
        return Err(fail(CsaStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(CsaStatus::Parse, format!("{what} is not valid UTF-8")))
}

/// Copies `values` into a caller buffer of `len` doubles. A null buffer is
/// allowed and skips the copy.
unsafe fn copy_out(values: &[f64], out: *mut f64, len: usize) -> Result<(), CsaStatus> {
    if out.is_null() {
        return Ok(());
    }
    if len < values.len() {
        return Err(fail(
            CsaStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", values.len()),
        ));
    }
    slice::from_raw_parts_mut(out, values.len()).copy_from_slice(values);
    Ok(())
}

fn boxed_config(config: SystemConfig) -> *mut CsaConfig {
    Box::into_raw(Box::new(CsaConfig { inner: config }))
}

fn grid(alpha_max: f64, alpha_step: f64) -> AlphaGrid {
    AlphaGrid::new(alpha_max, alpha_step)
}

fn optimum_record(o: &AlphaOptimum) -> CsaOptimum {
    CsaOptimum {
        epsilon: o.epsilon,
        m_over_n: 1.0 + o.epsilon,
        throughput: o.throughput,
        resolution: o.resolution,
        converged: o.converged,
    }
}

/// Message for the last failure on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn csa_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Builds a configuration from class arrays. `alpha` is row-major with
/// `num_users * num_slots` entries.
///
/// # Safety
/// Array pointers must reference at least the stated number of doubles.
#[no_mangle]
pub unsafe extern "C" fn csa_config_new(
    num_users: usize,
    user_fractions: *const f64,
    loss_probs: *const f64,
    num_slots: usize,
    slot_fractions: *const f64,
    alpha: *const f64,
    epsilon: f64,
    out: *mut *mut CsaConfig,
) -> CsaStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let a = input_slice(user_fractions, num_users, "user_fractions")?;
        let e = input_slice(loss_probs, num_users, "loss_probs")?;
        let b = input_slice(slot_fractions, num_slots, "slot_fractions")?;
        let alpha = input_slice(alpha, num_users * num_slots, "alpha")?;
        let users = a.iter().zip(e).map(|(&a, &e)| UserClass::new(a, e)).collect();
        let slots = b.iter().map(|&b| SlotClass::new(b)).collect();
        let access = AccessMatrix::from_flat(num_users, num_slots, alpha.to_vec()).or_status()?;
        let config = SystemConfig::new(users, slots, access, epsilon).or_status()?;
        *out = boxed_config(config);
        Ok(())
    })
}

/// Parses configuration text in the CLI file format.
///
/// # Safety
/// `text` must be a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn csa_config_parse(text: *const c_char, out: *mut *mut CsaConfig) -> CsaStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let config = cli::parse_config(c_str(text, "text")?).or_status()?;
        *out = boxed_config(config);
        Ok(())
    })
}

/// Loads a built-in scenario by name.
///
/// # Safety
/// `name` must be a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn csa_config_preset(name: *const c_char, out: *mut *mut CsaConfig) -> CsaStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let config = cli::preset(c_str(name, "name")?).or_status()?;
        *out = boxed_config(config);
        Ok(())
    })
}

/// Releases a configuration. Null is ignored.
///
/// # Safety
/// `config` must come from a `csa_config_*` constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn csa_config_free(config: *mut CsaConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Number of user classes, or 0 for a null handle.
///
/// # Safety
/// `config` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn csa_config_num_user_classes(config: *const CsaConfig) -> usize {
    config.as_ref().map_or(0, |c| c.inner.num_user_classes())
}

/// Number of slot classes, or 0 for a null handle.
///
/// # Safety
/// `config` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn csa_config_num_slot_classes(config: *const CsaConfig) -> usize {
    config.as_ref().map_or(0, |c| c.inner.num_slot_classes())
}

/// Replaces epsilon in place.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn csa_config_set_epsilon(config: *mut CsaConfig, epsilon: f64) -> CsaStatus {
    guard(|| {
        let config = out_ref(config, "config")?;
        let updated = config.inner.with_epsilon(epsilon);
        updated.validate().or_status()?;
        config.inner = updated;
        Ok(())
    })
}

/// Replaces the row-major access matrix in place.
///
/// # Safety
/// `config` must be a live handle; `alpha` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn csa_config_set_access(
    config: *mut CsaConfig,
    alpha: *const f64,
    len: usize,
) -> CsaStatus {
    guard(|| {
        let config = out_ref(config, "config")?;
        let (rows, cols) = (config.inner.num_user_classes(), config.inner.num_slot_classes());
        let values = input_slice(alpha, len, "alpha")?;
        if len != rows * cols {
            return Err(fail(
                CsaStatus::InvalidArgument,
                format!("access matrix needs {} values, got {len}", rows * cols),
            ));
        }
        let access = AccessMatrix::from_flat(rows, cols, values.to_vec()).or_status()?;
        let updated = config.inner.with_access(access);
        updated.validate().or_status()?;
        config.inner = updated;
        Ok(())
    })
}

/// Serializes the configuration in the file format. Release the string
/// with [`csa_string_free`].
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn csa_config_dump(config: *const CsaConfig, out: *mut *mut c_char) -> CsaStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let config = non_null(config, "config")?;
        let text = CString::new(cli::dump_config(&config.inner))
            .map_err(|_| fail(CsaStatus::InvalidConfig, "dump contains a nul byte"))?;
        *out = text.into_raw();
        Ok(())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn csa_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Runs the recursion. Per-class resolution probabilities go to
/// `per_class` (may be null) which must hold one value per user class.
/// `max_iter == 0` or `tol <= 0` selects the defaults.
///
/// # Safety
/// `config` must be a live handle; `per_class` must hold `per_class_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn csa_evolve(
    config: *const CsaConfig,
    max_iter: usize,
    tol: f64,
    out: *mut CsaEvolveSummary,
    per_class: *mut f64,
    per_class_len: usize,
) -> CsaStatus {
    guard(|| {
        let config = non_null(config, "config")?;
        let out = out_ref(out, "out")?;
        let defaults = EvolveOptions::default();
        let options = EvolveOptions::new(
            if max_iter == 0 { defaults.max_iter } else { max_iter },
            if tol > 0.0 { tol } else { defaults.tol },
        )
        .without_trajectories();
        let result = csaloha::evolve(&config.inner, &options).or_status()?;
        copy_out(&result.resolution_probs, per_class, per_class_len)?;
        *out = CsaEvolveSummary {
            resolution: result.aggregate_resolution,
            throughput: result.throughput,
            iterations: result.iterations_used,
            converged: result.converged,
            residual: result.residual,
        };
        Ok(())
    })
}

/// Monte Carlo SIC simulation with `num_users` users. Per-class mean
/// resolved fractions go to `per_class` (may be null).
///
/// # Safety
/// `config` must be a live handle; `per_class` must hold `per_class_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn csa_simulate(
    config: *const CsaConfig,
    num_users: usize,
    trials: usize,
    seed: u64,
    out: *mut CsaTrialSummary,
    per_class: *mut f64,
    per_class_len: usize,
) -> CsaStatus {
    guard(|| {
        let config = non_null(config, "config")?;
        let out = out_ref(out, "out")?;
        let stats = simulator::run_trials(&config.inner, num_users, trials, seed).or_status()?;
        copy_out(&stats.mean_per_class_resolved_fraction, per_class, per_class_len)?;
        *out = CsaTrialSummary {
            trials: stats.trials.len(),
            mean_resolved_fraction: stats.mean_resolved_fraction,
            stderr_resolved_fraction: stats.stderr_resolved_fraction,
            mean_throughput: stats.mean_throughput,
            stderr_throughput: stats.stderr_throughput,
        };
        Ok(())
    })
}

/// Maximizes throughput over the access matrix at the given epsilon. A
/// `target_pr` that is NaN means unconstrained; otherwise only points with
/// resolution probability at least `target_pr` qualify. The optimal
/// row-major access matrix goes to `alpha_out` (may be null).
///
/// # Safety
/// `config` must be a live handle; `alpha_out` must hold `alpha_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn csa_optimize(
    config: *const CsaConfig,
    epsilon: f64,
    alpha_max: f64,
    alpha_step: f64,
    target_pr: f64,
    out: *mut CsaOptimum,
    alpha_out: *mut f64,
    alpha_len: usize,
) -> CsaStatus {
    guard(|| {
        let config = non_null(config, "config")?;
        let out = out_ref(out, "out")?;
        let grid = grid(alpha_max, alpha_step);
        let options = EvolveOptions::default();
        let best = if target_pr.is_nan() {
            optimizer::optimize_alpha_at_eps(&config.inner, epsilon, &grid, &options)
        } else {
            optimizer::optimize_with_resolution_floor(&config.inner, epsilon, target_pr, &grid, &options)
        }
        .or_status()?;
        copy_out(best.access.as_slice(), alpha_out, alpha_len)?;
        *out = optimum_record(&best);
        Ok(())
    })
}

/// Optimizes the access matrix at `eps_steps` evenly spaced epsilons in
/// `[eps_min, eps_max]`. Release the result with [`csa_sweep_free`].
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn csa_sweep(
    config: *const CsaConfig,
    eps_min: f64,
    eps_max: f64,
    eps_steps: usize,
    alpha_max: f64,
    alpha_step: f64,
    out: *mut *mut CsaSweep,
) -> CsaStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let config = non_null(config, "config")?;
        let report = optimizer::sweep_eps(
            &config.inner,
            eps_min,
            eps_max,
            eps_steps,
            &grid(alpha_max, alpha_step),
            &EvolveOptions::default(),
        )
        .or_status()?;
        *out = Box::into_raw(Box::new(CsaSweep { report }));
        Ok(())
    })
}

/// Number of samples in a sweep, or 0 for a null handle.
///
/// # Safety
/// `sweep` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn csa_sweep_len(sweep: *const CsaSweep) -> usize {
    sweep.as_ref().map_or(0, |s| s.report.sweep_samples.len())
}

/// Sample `index` of a sweep, in increasing epsilon order.
///
/// # Safety
/// `sweep` must be a live handle; `alpha_out` must hold `alpha_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn csa_sweep_sample(
    sweep: *const CsaSweep,
    index: usize,
    out: *mut CsaOptimum,
    alpha_out: *mut f64,
    alpha_len: usize,
) -> CsaStatus {
    guard(|| {
        let sweep = non_null(sweep, "sweep")?;
        let out = out_ref(out, "out")?;
        let samples = &sweep.report.sweep_samples;
        let sample = samples.get(index).ok_or_else(|| {
            fail(
                CsaStatus::InvalidArgument,
                format!("sample index {index} out of range for {} samples", samples.len()),
            )
        })?;
        copy_out(sample.access.as_slice(), alpha_out, alpha_len)?;
        *out = optimum_record(sample);
        Ok(())
    })
}

/// Throughput-maximizing point of a sweep.
///
/// # Safety
/// `sweep` must be a live handle; `alpha_out` must hold `alpha_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn csa_sweep_best(
    sweep: *const CsaSweep,
    out: *mut CsaOptimum,
    alpha_out: *mut f64,
    alpha_len: usize,
) -> CsaStatus {
    guard(|| {
        let sweep = non_null(sweep, "sweep")?;
        let out = out_ref(out, "out")?;
        let r = &sweep.report;
        copy_out(r.best_alpha.as_slice(), alpha_out, alpha_len)?;
        *out = CsaOptimum {
            epsilon: r.best_epsilon,
            m_over_n: r.best_m_over_n(),
            throughput: r.best_throughput,
            resolution: r.best_resolution,
            converged: r
                .sweep_samples
                .iter()
                .find(|s| s.epsilon == r.best_epsilon)
                .is_none_or(|s| s.converged),
        };
        Ok(())
    })
}

/// Releases a sweep. Null is ignored.
///
/// # Safety
/// `sweep` must come from [`csa_sweep`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn csa_sweep_free(sweep: *mut CsaSweep) {
    if !sweep.is_null() {
        drop(Box::from_raw(sweep));
    }
}
