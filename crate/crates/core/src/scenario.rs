//! A validated parameter set plus the quantities derived from it once.

use crate::error::Result;
use crate::geometry::{AntennaPattern, NetworkGeometry};
use crate::link::{ComputeConfig, LinkRate, RadioConfig};
use crate::queue::SlotState;
use crate::units;

/// Reference highway geometry at 60 GHz with two lanes of 0.1 vehicles/m.
pub fn reference_geometry() -> NetworkGeometry {
    NetworkGeometry {
        rsu_spacing: 50.0,
        lane1_offset: 7.0,
        lane2_offset: 10.0,
        antenna_height_diff: 6.0,
        vehicle_speed: units::kmh_to_ms(50.0),
        pathloss_exponent: 2.0,
        freq_constant: units::free_space_constant(60e9),
        lane_densities: [0.1, 0.1],
        vehicle_pattern: AntennaPattern::from_db(3.0, -3.0, 90.0).expect("valid pattern"),
        rsu_pattern: AntennaPattern::from_db(15.0, -15.0, 9.0).expect("valid pattern"),
    }
}

/// Reference radio with the interference budget 20 dB above the noise floor.
pub fn reference_radio() -> RadioConfig {
    let noise = units::thermal_noise_watts(2e9, 7.0);
    RadioConfig {
        bandwidth: 2e9,
        noise_power: noise,
        p_v_max: units::dbm_to_watts(25.0),
        p_r_max: units::dbm_to_watts(35.0),
        interference_temperature: noise * units::db_to_linear(20.0),
        epsilon: 0.1,
    }
}

pub fn reference_compute() -> ComputeConfig {
    ComputeConfig {
        task_size_bits: 10e6,
        cycles_per_bit: 300.0,
        rsu_clock: 10e9,
        switched_capacitance: 1e-28,
        arrival_rate: 8.0,
        arrival_cap: 50,
        output_bits_range: (1, 1_000_000),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub geometry: NetworkGeometry,
    pub radio: RadioConfig,
    pub compute: ComputeConfig,
    /// Seconds per slot.
    pub slot_len: f64,
    /// Expected interferer-to-RSU gain product.
    pub xi1: f64,
    pub upsilon: f64,
    /// Interference-driven cap on the vehicle transmit power, already clamped to `p_v_max`.
    pub power_cap: f64,
}

impl Scenario {
    pub fn new(
        geometry: NetworkGeometry,
        radio: RadioConfig,
        compute: ComputeConfig,
        slot_len: f64,
    ) -> Result<Self> {
        geometry.validate()?;
        radio.validate()?;
        compute.validate()?;
        if !(slot_len > 0.0 && slot_len.is_finite()) {
            return Err(crate::Error::invalid(
                "slot_len",
                format!("must be positive, got {slot_len}"),
            ));
        }
        let xi1 = geometry.expected_gain_product();
        let upsilon = geometry.upsilon()?;
        let power_cap = crate::control::power_cap(&radio, xi1, upsilon)?;
        Ok(Scenario {
            geometry,
            radio,
            compute,
            slot_len,
            xi1,
            upsilon,
            power_cap,
        })
    }

    pub fn reference() -> Self {
        Self::new(
            reference_geometry(),
            reference_radio(),
            reference_compute(),
            1.0,
        )
        .expect("reference parameters are valid")
    }

    /// Mean aggregate interference when every interferer transmits at `power`.
    pub fn mean_interference(&self, power: f64) -> f64 {
        power * self.xi1 * self.upsilon
    }

    /// Everything the per-slot controller needs for `state`.
    pub fn slot_context(&self, state: &SlotState) -> SlotContext {
        let gain = self.geometry.serving_gain(state.t, self.slot_len);
        SlotContext {
            budget: self.geometry.time_budget(state.t, self.slot_len),
            channel_gain: gain,
            uplink: LinkRate::uplink_lower_bound(gain, &self.radio, &self.geometry),
            downlink: LinkRate::downlink(gain, &self.radio, &self.geometry),
            p_v_limit: self.power_cap,
            p_r_limit: self.radio.p_r_max,
            compute: self.compute,
            queue_bits: state.queue_tasks as f64 * self.compute.task_size_bits,
            queue_tasks: state.queue_tasks,
            arrivals: state.arrivals,
            output_bits: state.output_bits as f64,
        }
    }
}

/// Per-slot view used by the controller. All task quantities are in bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotContext {
    /// Remaining dwell time in the cell, seconds.
    pub budget: f64,
    pub channel_gain: f64,
    /// Uplink at the worst admissible interference.
    pub uplink: LinkRate,
    pub downlink: LinkRate,
    /// Upper bound on the vehicle power: `min(cap, p_v_max)`.
    pub p_v_limit: f64,
    pub p_r_limit: f64,
    pub compute: ComputeConfig,
    pub queue_tasks: u64,
    pub queue_bits: f64,
    pub arrivals: u64,
    pub output_bits: f64,
}

impl SlotContext {
    pub fn task_bits(&self) -> f64 {
        self.compute.task_size_bits
    }

    /// Download time charged to the slot; nothing is returned when nothing is offloaded.
    pub fn download_time(&self, c_in_bits: f64, p_r: f64) -> f64 {
        if c_in_bits > 0.0 {
            self.downlink.transfer_time(self.output_bits, p_r)
        } else {
            0.0
        }
    }

    pub fn latency(&self, c_in_bits: f64, p_v: f64, p_r: f64) -> crate::link::Latency {
        crate::link::Latency {
            upload: self.uplink.transfer_time(c_in_bits, p_v),
            compute: self.compute.seconds_per_bit() * c_in_bits,
            download: self.download_time(c_in_bits, p_r),
        }
    }

    /// Whether `c_in_bits` fits the dwell time at the given powers.
    pub fn fits(&self, c_in_bits: f64, p_v: f64, p_r: f64) -> bool {
        self.latency(c_in_bits, p_v, p_r).total() <= self.budget
    }
}
