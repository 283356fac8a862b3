//! C ABI for `mimqnd`.
//!
//! Parameter sets and simulated trajectories are opaque handles owned by the
//! caller and released with the matching `*_free` function. Every fallible
//! call returns a [`MimqndStatus`]; on failure a description is available
//! from [`mimqnd_last_error_message`] on the same thread. Panics never cross
//! the boundary: they are reported as [`MimqndStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mimqnd::jumpsim::{self, JumpTrajectory};
use mimqnd::params::{load_config, ConfigError};
use mimqnd::{cavity, qnd, Error, ExperimentParams, ParamName};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MimqndStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullPointer = 1,
    /// A string was not valid UTF-8, a key was unknown, or a value was out
    /// of range for the call.
    InvalidArgument = 2,
    /// Configuration text or file could not be parsed or failed validation.
    Config = 3,
    /// A formula diverged or a fit or estimate failed.
    Numerical = 4,
    Io = 5,
    /// Internal error; the library state is unchanged.
    Panic = 6,
}

/// Opaque experiment parameter set.
pub struct MimqndParams(ExperimentParams);

/// Opaque simulated phonon-number trajectory.
pub struct MimqndTrajectory(JumpTrajectory);

/// Validity conditions of a QND budget, one byte each (0 or 1).
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MimqndFlags {
    pub qnd_time_ok: u8,
    pub gap_ok: u8,
    pub classical_bath_ok: u8,
    pub good_cavity: u8,
}

/// Plain-data copy of the QND budget. SI units throughout.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MimqndBudget {
    pub delta_omega: f64,
    pub kappa: f64,
    pub n_bar_photons: f64,
    pub n_bar_phonons: f64,
    pub s_omega: f64,
    pub tau_thermal: f64,
    pub tau_rwa: f64,
    /// Positive infinity when there is no linear coupling (`x0 = 0`).
    pub tau_lin: f64,
    pub tau_total: f64,
    pub snr: f64,
    pub gap: f64,
    pub flags: MimqndFlags,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> MimqndStatus {
    match err {
        Error::Config(ConfigError::Io { .. }) | Error::Io(_) => MimqndStatus::Io,
        Error::Config(_) => MimqndStatus::Config,
        Error::Domain(_) | Error::Unsupported(_) => MimqndStatus::InvalidArgument,
        _ => MimqndStatus::Numerical,
    }
}

struct Failure(MimqndStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Error::from(e).into()
    }
}

fn null(what: &str) -> Failure {
    Failure(MimqndStatus::NullPointer, format!("{what} is NULL"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(MimqndStatus::InvalidArgument, msg.into())
}

/// Runs `body`, recording any failure or panic as the thread's last error.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> MimqndStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_last_error("");
            MimqndStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            MimqndStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn params_arg<'a>(p: *const MimqndParams) -> Result<&'a ExperimentParams, Failure> {
    p.as_ref().map(|p| &p.0).ok_or_else(|| null("params"))
}

fn key_arg(key: &str) -> Result<ParamName, Failure> {
    ParamName::from_key(key).ok_or_else(|| invalid(format!("unknown parameter key '{key}'")))
}

fn boxed_params(p: ExperimentParams) -> *mut MimqndParams {
    Box::into_raw(Box::new(MimqndParams(p)))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mimqnd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message describing the most recent failure on this thread, or an empty
/// string after a successful call. The pointer stays valid until the next
/// call into the library on this thread.
#[no_mangle]
pub extern "C" fn mimqnd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// One of the two built-in reference parameter sets (`row` = 1 or 2).
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn mimqnd_params_reference(row: u32, out: *mut *mut MimqndParams) -> MimqndStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let p = match row {
            1 => ExperimentParams::reference_set_1(),
            2 => ExperimentParams::reference_set_2(),
            _ => return Err(invalid(format!("reference row must be 1 or 2, got {row}"))),
        };
        *out = boxed_params(p);
        Ok(())
    })
}

/// Parses and validates `key = value` configuration text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mimqnd_params_parse(
    text: *const c_char,
    out: *mut *mut MimqndParams,
) -> MimqndStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        let out = out_arg(out, "out")?;
        *out = boxed_params(ExperimentParams::from_config_str(text)?);
        Ok(())
    })
}

/// Loads and validates a configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mimqnd_params_load(
    path: *const c_char,
    out: *mut *mut MimqndParams,
) -> MimqndStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        *out = boxed_params(load_config(path)?);
        Ok(())
    })
}

/// Reads a parameter by its configuration key (`"L"`, `"lambda"`, `"F"`,
/// `"P_in"`, `"T"`, `"m"`, `"omega_m"`, `"Q"`, `"r_c"`, `"x0"`).
///
/// # Safety
/// `params` must be a live handle, `key` a NUL-terminated string and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn mimqnd_params_get(
    params: *const MimqndParams,
    key: *const c_char,
    out: *mut f64,
) -> MimqndStatus {
    guard(|| {
        let p = params_arg(params)?;
        let name = key_arg(str_arg(key, "key")?)?;
        *out_arg(out, "out")? = p.get(name);
        Ok(())
    })
}

/// Sets a parameter. No validation happens here; calls that consume the
/// parameters validate them.
///
/// # Safety
/// `params` must be a live handle and `key` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mimqnd_params_set(
    params: *mut MimqndParams,
    key: *const c_char,
    value: f64,
) -> MimqndStatus {
    guard(|| {
        let p = params.as_mut().ok_or_else(|| null("params"))?;
        let name = key_arg(str_arg(key, "key")?)?;
        p.0.set(name, value);
        Ok(())
    })
}

/// Checks every parameter invariant; the first violation is reported.
///
/// # Safety
/// `params` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mimqnd_params_validate(params: *const MimqndParams) -> MimqndStatus {
    guard(|| {
        let p = params_arg(params)?;
        match p.validate().first() {
            None => Ok(()),
            Some(v) => Err(Failure(
                MimqndStatus::Config,
                format!("{}: {}", v.param.key(), v.message),
            )),
        }
    })
}

/// Releases a parameter handle. NULL is ignored.
///
/// # Safety
/// `params` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mimqnd_params_free(params: *mut MimqndParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// Full QND phonon-jump budget.
///
/// # Safety
/// `params` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mimqnd_jump_budget(
    params: *const MimqndParams,
    out: *mut MimqndBudget,
) -> MimqndStatus {
    guard(|| {
        let p = params_arg(params)?;
        let out = out_arg(out, "out")?;
        let b = qnd::jump_budget(p)?;
        *out = MimqndBudget {
            delta_omega: b.delta_omega,
            kappa: b.kappa,
            n_bar_photons: b.n_bar_photons,
            n_bar_phonons: b.n_bar_phonons,
            s_omega: b.s_omega,
            tau_thermal: b.tau_thermal,
            tau_rwa: b.tau_rwa,
            tau_lin: b.tau_lin.unwrap_or(f64::INFINITY),
            tau_total: b.tau_total,
            snr: b.snr,
            gap: b.gap,
            flags: MimqndFlags {
                qnd_time_ok: b.flags.qnd_time_ok.into(),
                gap_ok: b.flags.gap_ok.into(),
                classical_bath_ok: b.flags.classical_bath_ok.into(),
                good_cavity: b.flags.good_cavity.into(),
            },
        };
        Ok(())
    })
}

/// Cavity resonance `(c/L)·acos(r_c·cos(4πx/λ))`, rad/s.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mimqnd_dispersive_detuning(
    x: f64,
    r_c: f64,
    length: f64,
    wavelength: f64,
    out: *mut f64,
) -> MimqndStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = cavity::dispersive_detuning(x, r_c, length, wavelength)?;
        Ok(())
    })
}

/// Energy ringdown time `LF/(πc)` of a cavity with finesse `finesse`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mimqnd_ringdown_time(finesse: f64, length: f64, out: *mut f64) -> MimqndStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = cavity::finesse_ringdown(finesse, cavity::Conversion::FinesseToTau, length)?;
        Ok(())
    })
}

/// Simulates a ground-state-prepared trajectory of length `duration`
/// seconds, stopping early after `max_events` events (0 = no cap).
///
/// # Safety
/// `params` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mimqnd_trajectory_simulate(
    params: *const MimqndParams,
    duration: f64,
    seed: u64,
    measurement_channels: bool,
    max_events: u64,
    out: *mut *mut MimqndTrajectory,
) -> MimqndStatus {
    guard(|| {
        let p = params_arg(params)?;
        let out = out_arg(out, "out")?;
        let cap = if max_events == 0 {
            usize::MAX
        } else {
            usize::try_from(max_events).unwrap_or(usize::MAX)
        };
        let traj = jumpsim::simulate_trajectory_capped(p, duration, seed, measurement_channels, cap)?;
        *out = Box::into_raw(Box::new(MimqndTrajectory(traj)));
        Ok(())
    })
}

/// Number of jump events; 0 for a NULL handle.
///
/// # Safety
/// `traj` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mimqnd_trajectory_event_count(traj: *const MimqndTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.events.len())
}

/// Simulated time span, s (shorter than requested when truncated).
///
/// # Safety
/// `traj` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mimqnd_trajectory_duration(traj: *const MimqndTrajectory) -> f64 {
    traj.as_ref().map_or(0.0, |t| t.0.duration)
}

/// True when the event cap ended the simulation early.
///
/// # Safety
/// `traj` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mimqnd_trajectory_truncated(traj: *const MimqndTrajectory) -> bool {
    traj.as_ref().is_some_and(|t| t.0.truncated)
}

/// Copies the event times (s) and post-jump phonon numbers into caller
/// buffers of `capacity` elements. Fails without writing if `capacity` is
/// smaller than the event count.
///
/// # Safety
/// `traj` must be a live handle; `times` and `n_after` must each point to
/// `capacity` writable elements.
#[no_mangle]
pub unsafe extern "C" fn mimqnd_trajectory_events(
    traj: *const MimqndTrajectory,
    times: *mut f64,
    n_after: *mut u64,
    capacity: usize,
) -> MimqndStatus {
    guard(|| {
        let t = traj.as_ref().ok_or_else(|| null("trajectory"))?;
        if times.is_null() || n_after.is_null() {
            return Err(null("output buffer"));
        }
        let events = &t.0.events;
        if capacity < events.len() {
            return Err(invalid(format!(
                "buffers hold {capacity} events, need {}",
                events.len()
            )));
        }
        for (i, e) in events.iter().enumerate() {
            ptr::write(times.add(i), e.time);
            ptr::write(n_after.add(i), e.n_after);
        }
        Ok(())
    })
}

/// Releases a trajectory handle. NULL is ignored.
///
/// # Safety
/// `traj` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mimqnd_trajectory_free(traj: *mut MimqndTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}
