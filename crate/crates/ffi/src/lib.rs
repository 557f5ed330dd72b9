//! C interface to the simulator.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `_free` function. Every fallible call returns a `V2xStatus`; on
//! failure the message is kept per thread and read with
//! `v2x_last_error_message`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use v2x_edge::config::Settings;
use v2x_edge::sim::Simulation;
use v2x_edge::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum V2xStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidString = 2,
    Config = 3,
    Solver = 4,
    Io = 5,
    Finished = 6,
    Panic = 7,
}

/// Opaque configuration handle.
pub struct V2xConfig(Settings);

/// Opaque simulation handle.
pub struct V2xSimulation(Simulation);

/// Quantities derived from a configuration.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct V2xDerived {
    /// Receiver noise power, W.
    pub noise_power: f64,
    /// Interference temperature, W.
    pub interference_temperature: f64,
    pub xi1: f64,
    pub upsilon: f64,
    /// Vehicle transmit power cap, W.
    pub power_cap: f64,
}

/// One simulated slot.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct V2xSlot {
    pub t: u64,
    pub queue_tasks: u64,
    pub arrivals: u64,
    pub output_bits: u64,
    pub queue_after: u64,
    pub c_in_tasks: u64,
    pub budget: f64,
    pub p_v: f64,
    pub p_r: f64,
    pub computing_time: f64,
    pub energy_low: f64,
}

/// Run summary.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct V2xMetrics {
    pub slots: u64,
    pub avg_queue_tasks: f64,
    pub avg_energy_low: f64,
    pub avg_computing_time: f64,
    pub avg_offloaded_tasks: f64,
    pub third_quartile_queue: f64,
    pub last_quartile_queue: f64,
    pub final_queue: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: V2xStatus, message: String) -> V2xStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
    status
}

fn from_error(e: Error) -> V2xStatus {
    let status = if e.is_solver_failure() {
        V2xStatus::Solver
    } else {
        match e {
            Error::Io(_) | Error::Csv(_) => V2xStatus::Io,
            _ => V2xStatus::Config,
        }
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> V2xStatus) -> V2xStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(V2xStatus::Panic, "internal panic".into()),
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, V2xStatus> {
    if p.is_null() {
        return Err(fail(V2xStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(V2xStatus::InvalidString, format!("{what} is not UTF-8")))
}

fn null(what: &str) -> V2xStatus {
    fail(V2xStatus::NullPointer, format!("{what} is null"))
}

/// Copies the last error message of this thread into `buf` as a
/// NUL-terminated string, truncating to `len - 1` bytes. Returns the full
/// message length, excluding the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn v2x_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Creates a configuration holding the built-in defaults.
///
/// # Safety
/// `out` must be null or valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn v2x_config_default(out: *mut *mut V2xConfig) -> V2xStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        *out = Box::into_raw(Box::new(V2xConfig(Settings::default())));
        V2xStatus::Ok
    })
}

/// Loads defaults overlaid with a TOML file.
///
/// # Safety
/// `path` must be null or a NUL-terminated string; `out` must be null or
/// valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn v2x_config_from_file(path: *const c_char, out: *mut *mut V2xConfig) -> V2xStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        let path = match text(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match Settings::from_file(Path::new(path)) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(V2xConfig(s)));
                V2xStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Sets one parameter. `value` is read as a TOML value, e.g. `"1e14"` or
/// `"[0.1, 0.1]"`.
///
/// # Safety
/// `config` must be null or a live handle; `key` and `value` must be null or
/// NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn v2x_config_set(config: *mut V2xConfig, key: *const c_char, value: *const c_char) -> V2xStatus {
    guard(|| {
        let Some(config) = config.as_mut() else {
            return null("config");
        };
        let (key, value) = match (text(key, "key"), text(value, "value")) {
            (Ok(k), Ok(v)) => (k, v),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        match config.0.apply_override(&format!("{key}={value}")) {
            Ok(()) => V2xStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}

/// Validates the configuration and reports its derived quantities.
///
/// # Safety
/// `config` must be null or a live handle; `out` must be null or valid for a
/// write.
#[no_mangle]
pub unsafe extern "C" fn v2x_config_derived(config: *const V2xConfig, out: *mut V2xDerived) -> V2xStatus {
    guard(|| {
        let Some(config) = config.as_ref() else {
            return null("config");
        };
        if out.is_null() {
            return null("out");
        }
        let scenario = match config.0.run_config().and_then(|c| c.scenario()) {
            Ok(s) => s,
            Err(e) => return from_error(e),
        };
        *out = V2xDerived {
            noise_power: scenario.radio.noise_power,
            interference_temperature: scenario.radio.interference_temperature,
            xi1: scenario.xi1,
            upsilon: scenario.upsilon,
            power_cap: scenario.power_cap,
        };
        V2xStatus::Ok
    })
}

/// # Safety
/// `config` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn v2x_config_free(config: *mut V2xConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Starts a simulation from a snapshot of `config`; later changes to the
/// configuration do not affect it.
///
/// # Safety
/// `config` must be null or a live handle; `out` must be null or valid for a
/// pointer write.
#[no_mangle]
pub unsafe extern "C" fn v2x_simulation_new(config: *const V2xConfig, out: *mut *mut V2xSimulation) -> V2xStatus {
    guard(|| {
        let Some(config) = config.as_ref() else {
            return null("config");
        };
        if out.is_null() {
            return null("out");
        }
        match config.0.run_config().and_then(Simulation::new) {
            Ok(sim) => {
                *out = Box::into_raw(Box::new(V2xSimulation(sim)));
                V2xStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Advances one slot. Returns `V2X_STATUS_FINISHED` once the horizon is
/// reached. `out` may be null.
///
/// # Safety
/// `sim` must be null or a live handle; `out` must be null or valid for a
/// write.
#[no_mangle]
pub unsafe extern "C" fn v2x_simulation_step(sim: *mut V2xSimulation, out: *mut V2xSlot) -> V2xStatus {
    guard(|| {
        let Some(sim) = sim.as_mut() else {
            return null("sim");
        };
        if sim.0.is_finished() {
            return fail(V2xStatus::Finished, "simulation already finished".into());
        }
        match sim.0.step() {
            Ok(r) => {
                if let Some(out) = out.as_mut() {
                    let d = &r.decision;
                    *out = V2xSlot {
                        t: r.t,
                        queue_tasks: r.queue_tasks,
                        arrivals: r.arrivals,
                        output_bits: r.output_bits,
                        queue_after: r.queue_after,
                        c_in_tasks: d.c_in_tasks,
                        budget: r.budget,
                        p_v: d.p_v,
                        p_r: d.p_r,
                        computing_time: d.latency.total(),
                        energy_low: d.energy_low,
                    };
                }
                V2xStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Runs the remaining slots and writes the summary of the whole run.
///
/// # Safety
/// `sim` must be null or a live handle; `out` must be null or valid for a
/// write.
#[no_mangle]
pub unsafe extern "C" fn v2x_simulation_run(sim: *mut V2xSimulation, out: *mut V2xMetrics) -> V2xStatus {
    guard(|| {
        let Some(sim) = sim.as_mut() else {
            return null("sim");
        };
        if out.is_null() {
            return null("out");
        }
        while !sim.0.is_finished() {
            if let Err(e) = sim.0.step() {
                return from_error(e);
            }
        }
        let m = sim.0.metrics();
        *out = V2xMetrics {
            slots: m.slots,
            avg_queue_tasks: m.avg_queue_tasks,
            avg_energy_low: m.avg_energy_low,
            avg_computing_time: m.avg_computing_time,
            avg_offloaded_tasks: m.avg_offloaded_tasks,
            third_quartile_queue: m.third_quartile_queue,
            last_quartile_queue: m.last_quartile_queue,
            final_queue: m.final_queue,
        };
        V2xStatus::Ok
    })
}

/// # Safety
/// `sim` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn v2x_simulation_free(sim: *mut V2xSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}
