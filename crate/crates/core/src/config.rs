//! TOML configuration. Values are kept in the units a person writes them in
//! (dB, dBm, km/h, degrees) and converted once when a [`RunConfig`] is built.
//!
//! Every key has a dotted name such as `radio.interference_temperature_db`.
//! Overrides may use the full name or any leaf name that is unique.

use std::fmt::Write as _;
use std::path::Path;

use toml::{Table, Value};

use crate::control::ControlConfig;
use crate::error::{Error, Result};
use crate::geometry::{AntennaPattern, BeamwidthConvention, NetworkGeometry};
use crate::link::{ComputeConfig, RadioConfig};
use crate::sim::{RunConfig, DEFAULT_ROAD_HALF_LENGTH};
use crate::units;

/// The shipped defaults, i.e. the reference scenario.
pub const DEFAULTS_TOML: &str = include_str!("../config/defaults.toml");

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntennaSettings {
    pub main_lobe_db: f64,
    pub side_lobe_db: f64,
    pub beamwidth_deg: f64,
}

/// Every tunable parameter in configuration units.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub rsu_spacing_m: f64,
    pub lane1_offset_m: f64,
    pub lane2_offset_m: f64,
    pub antenna_height_diff_m: f64,
    pub vehicle_speed_kmh: f64,
    pub pathloss_exponent: f64,
    pub carrier_frequency_hz: f64,
    pub lane_densities: [f64; 2],
    pub beamwidth_convention: BeamwidthConvention,
    pub vehicle_antenna: AntennaSettings,
    pub rsu_antenna: AntennaSettings,

    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    pub p_v_max_dbm: f64,
    pub p_r_max_dbm: f64,
    /// Interference temperature relative to the noise floor.
    pub interference_temperature_db: f64,
    pub epsilon: f64,

    pub task_size_bits: f64,
    pub cycles_per_bit: f64,
    pub rsu_clock_hz: f64,
    pub switched_capacitance: f64,
    pub arrival_rate: f64,
    pub arrival_cap: u64,
    pub output_bits_min: u64,
    pub output_bits_max: u64,

    pub control: ControlConfig,

    pub t_end: u64,
    pub seed: u64,
    pub slot_len_s: f64,
    pub road_half_length_m: f64,
    pub realized_energy: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            rsu_spacing_m: 50.0,
            lane1_offset_m: 7.0,
            lane2_offset_m: 10.0,
            antenna_height_diff_m: 6.0,
            vehicle_speed_kmh: 50.0,
            pathloss_exponent: 2.0,
            carrier_frequency_hz: 60e9,
            lane_densities: [0.1, 0.1],
            beamwidth_convention: BeamwidthConvention::Total,
            vehicle_antenna: AntennaSettings {
                main_lobe_db: 3.0,
                side_lobe_db: -3.0,
                beamwidth_deg: 90.0,
            },
            rsu_antenna: AntennaSettings {
                main_lobe_db: 15.0,
                side_lobe_db: -15.0,
                beamwidth_deg: 9.0,
            },
            bandwidth_hz: 2e9,
            noise_figure_db: 7.0,
            p_v_max_dbm: 25.0,
            p_r_max_dbm: 35.0,
            interference_temperature_db: 20.0,
            epsilon: 0.1,
            task_size_bits: 10e6,
            cycles_per_bit: 300.0,
            rsu_clock_hz: 10e9,
            switched_capacitance: 1e-28,
            arrival_rate: 8.0,
            arrival_cap: 50,
            output_bits_min: 1,
            output_bits_max: 1_000_000,
            control: ControlConfig::default(),
            t_end: 3000,
            seed: 1,
            slot_len_s: 1.0,
            road_half_length_m: DEFAULT_ROAD_HALF_LENGTH,
            realized_energy: false,
        }
    }
}

/// All keys, in the order `show-config` prints them.
pub const KEYS: &[&str] = &[
    "geometry.rsu_spacing_m",
    "geometry.lane1_offset_m",
    "geometry.lane2_offset_m",
    "geometry.antenna_height_diff_m",
    "geometry.vehicle_speed_kmh",
    "geometry.pathloss_exponent",
    "geometry.carrier_frequency_hz",
    "geometry.lane_densities",
    "geometry.beamwidth_convention",
    "geometry.vehicle_antenna.main_lobe_db",
    "geometry.vehicle_antenna.side_lobe_db",
    "geometry.vehicle_antenna.beamwidth_deg",
    "geometry.rsu_antenna.main_lobe_db",
    "geometry.rsu_antenna.side_lobe_db",
    "geometry.rsu_antenna.beamwidth_deg",
    "radio.bandwidth_hz",
    "radio.noise_figure_db",
    "radio.p_v_max_dbm",
    "radio.p_r_max_dbm",
    "radio.interference_temperature_db",
    "radio.epsilon",
    "compute.task_size_bits",
    "compute.cycles_per_bit",
    "compute.rsu_clock_hz",
    "compute.switched_capacitance",
    "compute.arrival_rate",
    "compute.arrival_cap",
    "compute.output_bits_min",
    "compute.output_bits_max",
    "control.eta",
    "control.sca_tolerance",
    "control.sca_step_tolerance",
    "control.step_decay",
    "control.initial_step",
    "control.prox_weight",
    "control.max_sca_iters",
    "control.max_alt_iters",
    "control.alt_tolerance",
    "run.t_end",
    "run.seed",
    "run.slot_len_s",
    "run.road_half_length_m",
    "run.realized_energy",
];

/// Extra names accepted for overrides.
const ALIASES: &[(&str, &str)] = &[
    ("interference_temperature", "radio.interference_temperature_db"),
    ("densities", "geometry.lane_densities"),
];

fn float(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        Value::String(s) => s
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("`{key}` expects a number, got `{s}`"))),
        other => Err(Error::Config(format!("`{key}` expects a number, got {other}"))),
    }
}

fn integer(key: &str, v: &Value) -> Result<u64> {
    let f = match v {
        Value::Integer(i) if *i >= 0 => return Ok(*i as u64),
        other => float(key, other)?,
    };
    if f >= 0.0 && f.fract() == 0.0 && f < u64::MAX as f64 {
        Ok(f as u64)
    } else {
        Err(Error::Config(format!(
            "`{key}` expects a nonnegative integer, got {f}"
        )))
    }
}

fn boolean(key: &str, v: &Value) -> Result<bool> {
    match v {
        Value::Boolean(b) => Ok(*b),
        Value::String(s) if s == "true" || s == "false" => Ok(s == "true"),
        other => Err(Error::Config(format!("`{key}` expects true or false, got {other}"))),
    }
}

fn densities(key: &str, v: &Value) -> Result<[f64; 2]> {
    match v {
        Value::Array(a) if a.len() == 2 => Ok([float(key, &a[0])?, float(key, &a[1])?]),
        Value::Array(a) => Err(Error::Config(format!(
            "`{key}` expects two lane densities, got {}",
            a.len()
        ))),
        other => {
            let d = float(key, other)?;
            Ok([d, d])
        }
    }
}

impl Settings {
    /// Resolves a full key, a unique leaf name or an alias.
    pub fn resolve_key(name: &str) -> Result<&'static str> {
        if let Some(k) = KEYS.iter().find(|k| **k == name) {
            return Ok(k);
        }
        if let Some((_, k)) = ALIASES.iter().find(|(a, _)| *a == name) {
            return Ok(k);
        }
        let matches: Vec<&'static str> = KEYS
            .iter()
            .copied()
            .filter(|k| k.rsplit('.').next() == Some(name) || k.ends_with(&format!(".{name}")))
            .collect();
        match matches.as_slice() {
            [one] => Ok(one),
            [] => Err(Error::Config(format!("unknown configuration key `{name}`"))),
            many => Err(Error::Config(format!(
                "ambiguous key `{name}`; use one of {}",
                many.join(", ")
            ))),
        }
    }

    pub fn set(&mut self, name: &str, v: &Value) -> Result<()> {
        let key = Self::resolve_key(name)?;
        fn antenna(s: &mut Settings, vehicle: bool) -> &mut AntennaSettings {
            if vehicle {
                &mut s.vehicle_antenna
            } else {
                &mut s.rsu_antenna
            }
        }
        match key {
            "geometry.rsu_spacing_m" => self.rsu_spacing_m = float(key, v)?,
            "geometry.lane1_offset_m" => self.lane1_offset_m = float(key, v)?,
            "geometry.lane2_offset_m" => self.lane2_offset_m = float(key, v)?,
            "geometry.antenna_height_diff_m" => self.antenna_height_diff_m = float(key, v)?,
            "geometry.vehicle_speed_kmh" => self.vehicle_speed_kmh = float(key, v)?,
            "geometry.pathloss_exponent" => self.pathloss_exponent = float(key, v)?,
            "geometry.carrier_frequency_hz" => self.carrier_frequency_hz = float(key, v)?,
            "geometry.lane_densities" => self.lane_densities = densities(key, v)?,
            "geometry.beamwidth_convention" => {
                self.beamwidth_convention = match v.as_str() {
                    Some("total") => BeamwidthConvention::Total,
                    Some("half") => BeamwidthConvention::Half,
                    _ => {
                        return Err(Error::Config(format!(
                            "`{key}` expects \"total\" or \"half\", got {v}"
                        )))
                    }
                }
            }
            "geometry.vehicle_antenna.main_lobe_db" | "geometry.rsu_antenna.main_lobe_db" => {
                antenna(self, key.contains("vehicle")).main_lobe_db = float(key, v)?
            }
            "geometry.vehicle_antenna.side_lobe_db" | "geometry.rsu_antenna.side_lobe_db" => {
                antenna(self, key.contains("vehicle")).side_lobe_db = float(key, v)?
            }
            "geometry.vehicle_antenna.beamwidth_deg" | "geometry.rsu_antenna.beamwidth_deg" => {
                antenna(self, key.contains("vehicle")).beamwidth_deg = float(key, v)?
            }
            "radio.bandwidth_hz" => self.bandwidth_hz = float(key, v)?,
            "radio.noise_figure_db" => self.noise_figure_db = float(key, v)?,
            "radio.p_v_max_dbm" => self.p_v_max_dbm = float(key, v)?,
            "radio.p_r_max_dbm" => self.p_r_max_dbm = float(key, v)?,
            "radio.interference_temperature_db" => {
                self.interference_temperature_db = float(key, v)?
            }
            "radio.epsilon" => self.epsilon = float(key, v)?,
            "compute.task_size_bits" => self.task_size_bits = float(key, v)?,
            "compute.cycles_per_bit" => self.cycles_per_bit = float(key, v)?,
            "compute.rsu_clock_hz" => self.rsu_clock_hz = float(key, v)?,
            "compute.switched_capacitance" => self.switched_capacitance = float(key, v)?,
            "compute.arrival_rate" => self.arrival_rate = float(key, v)?,
            "compute.arrival_cap" => self.arrival_cap = integer(key, v)?,
            "compute.output_bits_min" => self.output_bits_min = integer(key, v)?,
            "compute.output_bits_max" => self.output_bits_max = integer(key, v)?,
            "control.eta" => self.control.eta = float(key, v)?,
            "control.sca_tolerance" => self.control.sca_tolerance = float(key, v)?,
            "control.sca_step_tolerance" => self.control.sca_step_tolerance = float(key, v)?,
            "control.step_decay" => self.control.step_decay = float(key, v)?,
            "control.initial_step" => self.control.initial_step = float(key, v)?,
            "control.prox_weight" => self.control.prox_weight = float(key, v)?,
            "control.max_sca_iters" => self.control.max_sca_iters = integer(key, v)? as usize,
            "control.max_alt_iters" => self.control.max_alt_iters = integer(key, v)? as usize,
            "control.alt_tolerance" => self.control.alt_tolerance = float(key, v)?,
            "run.t_end" => self.t_end = integer(key, v)?,
            "run.seed" => self.seed = integer(key, v)?,
            "run.slot_len_s" => self.slot_len_s = float(key, v)?,
            "run.road_half_length_m" => self.road_half_length_m = float(key, v)?,
            "run.realized_energy" => self.realized_energy = boolean(key, v)?,
            _ => unreachable!("every key in KEYS is handled"),
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<Value> {
        let key = Self::resolve_key(name)?;
        let f = Value::Float;
        let i = |x: u64| Value::Integer(x as i64);
        Ok(match key {
            "geometry.rsu_spacing_m" => f(self.rsu_spacing_m),
            "geometry.lane1_offset_m" => f(self.lane1_offset_m),
            "geometry.lane2_offset_m" => f(self.lane2_offset_m),
            "geometry.antenna_height_diff_m" => f(self.antenna_height_diff_m),
            "geometry.vehicle_speed_kmh" => f(self.vehicle_speed_kmh),
            "geometry.pathloss_exponent" => f(self.pathloss_exponent),
            "geometry.carrier_frequency_hz" => f(self.carrier_frequency_hz),
            "geometry.lane_densities" => Value::Array(self.lane_densities.map(f).to_vec()),
            "geometry.beamwidth_convention" => Value::String(
                match self.beamwidth_convention {
                    BeamwidthConvention::Total => "total",
                    BeamwidthConvention::Half => "half",
                }
                .into(),
            ),
            "geometry.vehicle_antenna.main_lobe_db" => f(self.vehicle_antenna.main_lobe_db),
            "geometry.vehicle_antenna.side_lobe_db" => f(self.vehicle_antenna.side_lobe_db),
            "geometry.vehicle_antenna.beamwidth_deg" => f(self.vehicle_antenna.beamwidth_deg),
            "geometry.rsu_antenna.main_lobe_db" => f(self.rsu_antenna.main_lobe_db),
            "geometry.rsu_antenna.side_lobe_db" => f(self.rsu_antenna.side_lobe_db),
            "geometry.rsu_antenna.beamwidth_deg" => f(self.rsu_antenna.beamwidth_deg),
            "radio.bandwidth_hz" => f(self.bandwidth_hz),
            "radio.noise_figure_db" => f(self.noise_figure_db),
            "radio.p_v_max_dbm" => f(self.p_v_max_dbm),
            "radio.p_r_max_dbm" => f(self.p_r_max_dbm),
            "radio.interference_temperature_db" => f(self.interference_temperature_db),
            "radio.epsilon" => f(self.epsilon),
            "compute.task_size_bits" => f(self.task_size_bits),
            "compute.cycles_per_bit" => f(self.cycles_per_bit),
            "compute.rsu_clock_hz" => f(self.rsu_clock_hz),
            "compute.switched_capacitance" => f(self.switched_capacitance),
            "compute.arrival_rate" => f(self.arrival_rate),
            "compute.arrival_cap" => i(self.arrival_cap),
            "compute.output_bits_min" => i(self.output_bits_min),
            "compute.output_bits_max" => i(self.output_bits_max),
            "control.eta" => f(self.control.eta),
            "control.sca_tolerance" => f(self.control.sca_tolerance),
            "control.sca_step_tolerance" => f(self.control.sca_step_tolerance),
            "control.step_decay" => f(self.control.step_decay),
            "control.initial_step" => f(self.control.initial_step),
            "control.prox_weight" => f(self.control.prox_weight),
            "control.max_sca_iters" => i(self.control.max_sca_iters as u64),
            "control.max_alt_iters" => i(self.control.max_alt_iters as u64),
            "control.alt_tolerance" => f(self.control.alt_tolerance),
            "run.t_end" => i(self.t_end),
            "run.seed" => i(self.seed),
            "run.slot_len_s" => f(self.slot_len_s),
            "run.road_half_length_m" => f(self.road_half_length_m),
            "run.realized_energy" => Value::Boolean(self.realized_energy),
            _ => unreachable!("every key in KEYS is handled"),
        })
    }

    /// Applies every key of a TOML document on top of `self`. Only full
    /// dotted names are accepted in files.
    pub fn merge_toml(&mut self, text: &str) -> Result<()> {
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut flat = Vec::new();
        flatten("", &table, &mut flat);
        for (key, value) in flat {
            if !KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!("unknown configuration key `{key}`")));
            }
            self.set(&key, &value)?;
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let mut s = Settings::default();
        s.merge_toml(text)?;
        Ok(s)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Applies a `key=value` override. The value is read as a TOML value,
    /// falling back to a bare string.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (key, raw) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{spec}` is not key=value")))?;
        let raw = raw.trim();
        let value = format!("v = {raw}")
            .parse::<Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(raw.to_string()));
        self.set(key.trim(), &value)
    }

    /// The whole configuration as TOML, one section per parameter group.
    pub fn to_toml(&self) -> String {
        let mut out = String::new();
        let mut section = "";
        for key in KEYS {
            let (head, rest) = key.split_once('.').expect("keys are dotted");
            if head != section {
                if !section.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "[{head}]");
                section = head;
            }
            let value = self.get(key).expect("known key");
            let _ = writeln!(out, "{rest} = {value}");
        }
        out
    }

    pub fn noise_power(&self) -> f64 {
        units::thermal_noise_watts(self.bandwidth_hz, self.noise_figure_db)
    }

    fn pattern(&self, a: &AntennaSettings, name: &str) -> Result<AntennaPattern> {
        AntennaPattern::from_db(a.main_lobe_db, a.side_lobe_db, a.beamwidth_deg)
            .map(|p| p.with_convention(self.beamwidth_convention))
            .map_err(|e| Error::Config(format!("{name}: {e}")))
    }

    pub fn run_config(&self) -> Result<RunConfig> {
        let noise = self.noise_power();
        let config = RunConfig {
            geometry: NetworkGeometry {
                rsu_spacing: self.rsu_spacing_m,
                lane1_offset: self.lane1_offset_m,
                lane2_offset: self.lane2_offset_m,
                antenna_height_diff: self.antenna_height_diff_m,
                vehicle_speed: units::kmh_to_ms(self.vehicle_speed_kmh),
                pathloss_exponent: self.pathloss_exponent,
                freq_constant: units::free_space_constant(self.carrier_frequency_hz),
                lane_densities: self.lane_densities,
                vehicle_pattern: self.pattern(&self.vehicle_antenna, "vehicle antenna")?,
                rsu_pattern: self.pattern(&self.rsu_antenna, "RSU antenna")?,
            },
            radio: RadioConfig {
                bandwidth: self.bandwidth_hz,
                noise_power: noise,
                p_v_max: units::dbm_to_watts(self.p_v_max_dbm),
                p_r_max: units::dbm_to_watts(self.p_r_max_dbm),
                interference_temperature: noise * units::db_to_linear(self.interference_temperature_db),
                epsilon: self.epsilon,
            },
            compute: ComputeConfig {
                task_size_bits: self.task_size_bits,
                cycles_per_bit: self.cycles_per_bit,
                rsu_clock: self.rsu_clock_hz,
                switched_capacitance: self.switched_capacitance,
                arrival_rate: self.arrival_rate,
                arrival_cap: self.arrival_cap,
                output_bits_range: (self.output_bits_min, self.output_bits_max),
            },
            control: self.control,
            slot_len: self.slot_len_s,
            t_end: self.t_end,
            seed: self.seed,
            road_half_length: self.road_half_length_m,
            realized_energy: self.realized_energy,
            record_trace: false,
        };
        config.scenario()?;
        Ok(config)
    }

    /// [`Self::to_toml`] followed by the derived quantities as comments.
    pub fn describe(&self) -> Result<String> {
        let scenario = self.run_config()?.scenario()?;
        let mut out = self.to_toml();
        let _ = writeln!(out, "\n# derived");
        let _ = writeln!(out, "# noise_power_W = {:e}", scenario.radio.noise_power);
        let _ = writeln!(
            out,
            "# interference_temperature_W = {:e}",
            scenario.radio.interference_temperature
        );
        let _ = writeln!(out, "# freq_constant = {:e}", scenario.geometry.freq_constant);
        let _ = writeln!(out, "# xi1 = {}", scenario.xi1);
        let _ = writeln!(out, "# upsilon = {:e}", scenario.upsilon);
        let _ = writeln!(
            out,
            "# power_cap_W = {} ({:.4} dBm)",
            scenario.power_cap,
            units::watts_to_dbm(scenario.power_cap)
        );
        Ok(out)
    }
}

fn flatten(prefix: &str, table: &Table, out: &mut Vec<(String, Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, other.clone())),
        }
    }
}
