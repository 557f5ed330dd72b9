use std::ffi::{c_char, CString};
use std::ptr;

use v2x_edge::sim::{self, RunConfig};
use v2x_edge_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0u8; 256];
    let n = unsafe { v2x_last_error_message(buf.as_mut_ptr().cast::<c_char>(), buf.len()) };
    buf.truncate(n.min(255));
    String::from_utf8(buf).unwrap()
}

fn default_config() -> *mut V2xConfig {
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { v2x_config_default(&mut cfg) }, V2xStatus::Ok);
    cfg
}

fn set(cfg: *mut V2xConfig, key: &str, value: &str) -> V2xStatus {
    let (k, v) = (CString::new(key).unwrap(), CString::new(value).unwrap());
    unsafe { v2x_config_set(cfg, k.as_ptr(), v.as_ptr()) }
}

#[test]
fn derived_values_of_the_defaults() {
    let cfg = default_config();
    let mut d = V2xDerived::default();
    assert_eq!(unsafe { v2x_config_derived(cfg, &mut d) }, V2xStatus::Ok);
    let rel = |a: f64, b: f64| (a - b).abs() / b;
    assert!(rel(d.xi1, 0.7184849306281562) < 1e-12);
    assert!(rel(d.upsilon, 2.3984207059531853e-9) < 1e-9);
    assert!(rel(d.power_cap, 0.23157249085259343) < 1e-9);
    assert!(rel(d.interference_temperature, 100.0 * d.noise_power) < 1e-12);
    unsafe { v2x_config_free(cfg) };
}

#[test]
fn set_changes_the_configuration() {
    let cfg = default_config();
    assert_eq!(set(cfg, "radio.interference_temperature_db", "30"), V2xStatus::Ok);
    let mut d = V2xDerived::default();
    unsafe { v2x_config_derived(cfg, &mut d) };
    assert!((d.interference_temperature / d.noise_power - 1000.0).abs() < 1e-9);
    unsafe { v2x_config_free(cfg) };
}

#[test]
fn errors_carry_a_status_and_message() {
    let cfg = default_config();
    assert_eq!(set(cfg, "radio.no_such_key", "1"), V2xStatus::Config);
    assert!(last_error().contains("no_such_key"), "{}", last_error());
    // values are range-checked when the configuration is used
    assert_eq!(set(cfg, "compute.arrival_rate", "-3"), V2xStatus::Ok);
    let mut d = V2xDerived::default();
    assert_eq!(unsafe { v2x_config_derived(cfg, &mut d) }, V2xStatus::Config);
    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { v2x_simulation_new(cfg, &mut sim) }, V2xStatus::Config);
    assert!(sim.is_null());

    let key = CString::new("control.eta").unwrap();
    assert_eq!(unsafe { v2x_config_set(cfg, key.as_ptr(), ptr::null()) }, V2xStatus::NullPointer);
    assert_eq!(unsafe { v2x_config_default(ptr::null_mut()) }, V2xStatus::NullPointer);
    let bad = [0xffu8, 0];
    assert_eq!(
        unsafe { v2x_config_set(cfg, bad.as_ptr().cast(), key.as_ptr()) },
        V2xStatus::InvalidString
    );

    let missing = CString::new("/nonexistent/v2x.toml").unwrap();
    let mut other = ptr::null_mut();
    assert_ne!(unsafe { v2x_config_from_file(missing.as_ptr(), &mut other) }, V2xStatus::Ok);
    assert!(other.is_null());
    unsafe { v2x_config_free(cfg) };
}

#[test]
fn truncated_error_message_is_terminated() {
    let cfg = default_config();
    set(cfg, "nope", "1");
    let mut buf = [1u8; 4];
    let full = unsafe { v2x_last_error_message(buf.as_mut_ptr().cast(), buf.len()) };
    assert!(full > 3);
    assert_eq!(buf[3], 0);
    unsafe { v2x_config_free(cfg) };
}

#[test]
fn config_from_file() {
    let dir = std::env::temp_dir().join(format!("v2x-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let file = dir.join("c.toml");
    std::fs::write(&file, "[run]\nt_end = 40\n").unwrap();
    let path = CString::new(file.to_str().unwrap()).unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { v2x_config_from_file(path.as_ptr(), &mut cfg) }, V2xStatus::Ok);
    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { v2x_simulation_new(cfg, &mut sim) }, V2xStatus::Ok);
    let mut m = V2xMetrics::default();
    assert_eq!(unsafe { v2x_simulation_run(sim, &mut m) }, V2xStatus::Ok);
    assert_eq!(m.slots, 40);
    unsafe {
        v2x_simulation_free(sim);
        v2x_config_free(cfg);
    }
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn stepping_matches_the_library_run() {
    let cfg = default_config();
    assert_eq!(set(cfg, "run.t_end", "400"), V2xStatus::Ok);
    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { v2x_simulation_new(cfg, &mut sim) }, V2xStatus::Ok);
    // later edits leave the running simulation alone
    assert_eq!(set(cfg, "run.t_end", "5"), V2xStatus::Ok);

    let mut slot = V2xSlot::default();
    let mut offloaded = 0;
    for t in 0..100 {
        assert_eq!(unsafe { v2x_simulation_step(sim, &mut slot) }, V2xStatus::Ok);
        assert_eq!(slot.t, t);
        assert!(slot.computing_time <= slot.budget * (1.0 + 1e-12));
        assert_eq!(slot.queue_after, slot.queue_tasks - slot.c_in_tasks + slot.arrivals);
        offloaded += slot.c_in_tasks;
    }
    assert!(offloaded > 0);
    let mut m = V2xMetrics::default();
    assert_eq!(unsafe { v2x_simulation_run(sim, &mut m) }, V2xStatus::Ok);
    assert_eq!(unsafe { v2x_simulation_step(sim, ptr::null_mut()) }, V2xStatus::Finished);

    let mut reference = RunConfig::reference();
    reference.t_end = 400;
    let expected = sim::run(&reference).unwrap();
    assert_eq!(m.slots, 400);
    assert_eq!(m.avg_queue_tasks, expected.avg_queue_tasks);
    assert_eq!(m.avg_energy_low, expected.avg_energy_low);
    assert_eq!(m.final_queue, expected.final_queue);
    unsafe {
        v2x_simulation_free(sim);
        v2x_config_free(cfg);
    }
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/v2x_edge.h");
    for name in [
        "v2x_last_error_message",
        "v2x_config_default",
        "v2x_config_from_file",
        "v2x_config_set",
        "v2x_config_derived",
        "v2x_config_free",
        "v2x_simulation_new",
        "v2x_simulation_step",
        "v2x_simulation_run",
        "v2x_simulation_free",
        "typedef struct V2xConfig V2xConfig;",
        "V2X_STATUS_FINISHED = 6",
    ] {
        assert!(header.contains(name), "{name}");
    }
}
