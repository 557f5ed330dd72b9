//! Link rates, latency decomposition and energy accounting for the
//! vehicle-RSU pair.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::geometry::NetworkGeometry;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioConfig {
    /// Hz.
    pub bandwidth: f64,
    /// Watts.
    pub noise_power: f64,
    pub p_v_max: f64,
    pub p_r_max: f64,
    /// Uplink interference budget at the serving RSU, watts.
    pub interference_temperature: f64,
    /// Tolerated probability of exceeding the interference budget.
    pub epsilon: f64,
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("radio.bandwidth", self.bandwidth),
            ("radio.noise_power", self.noise_power),
            ("radio.p_v_max", self.p_v_max),
            ("radio.p_r_max", self.p_r_max),
            ("radio.interference_temperature", self.interference_temperature),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::invalid(
                "radio.epsilon",
                format!("must lie in (0, 1], got {}", self.epsilon),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComputeConfig {
    /// Bits per task.
    pub task_size_bits: f64,
    pub cycles_per_bit: f64,
    /// RSU CPU clock, cycles/s.
    pub rsu_clock: f64,
    pub switched_capacitance: f64,
    /// Mean task arrivals per slot.
    pub arrival_rate: f64,
    /// Largest number of arrivals in one slot.
    pub arrival_cap: u64,
    /// Inclusive range of the per-slot output size, bits.
    pub output_bits_range: (u64, u64),
}

impl ComputeConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("compute.task_size_bits", self.task_size_bits),
            ("compute.cycles_per_bit", self.cycles_per_bit),
            ("compute.rsu_clock", self.rsu_clock),
            ("compute.switched_capacitance", self.switched_capacitance),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.arrival_rate >= 0.0 && self.arrival_rate.is_finite()) {
            return Err(Error::invalid(
                "compute.arrival_rate",
                format!("must be nonnegative, got {}", self.arrival_rate),
            ));
        }
        if self.arrival_cap < 1 {
            return Err(Error::invalid("compute.arrival_cap", "must be at least 1"));
        }
        let (lo, hi) = self.output_bits_range;
        if lo > hi {
            return Err(Error::invalid(
                "compute.output_bits",
                format!("empty range [{lo}, {hi}]"),
            ));
        }
        Ok(())
    }

    /// RSU execution time per input bit, seconds.
    pub fn seconds_per_bit(&self) -> f64 {
        self.cycles_per_bit / self.rsu_clock
    }

    /// Computation energy per input bit, joules.
    pub fn joules_per_bit(&self) -> f64 {
        self.switched_capacitance * self.cycles_per_bit * self.rsu_clock * self.rsu_clock
    }
}

/// Shannon rate `W log2(1 + p * snr_per_watt)` of one directed link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkRate {
    pub bandwidth: f64,
    /// Received SINR per watt of transmit power.
    pub snr_per_watt: f64,
}

impl LinkRate {
    pub fn new(
        channel_gain: f64,
        gain_product: f64,
        interference_plus_noise: f64,
        bandwidth: f64,
    ) -> Self {
        LinkRate {
            bandwidth,
            snr_per_watt: channel_gain * gain_product / interference_plus_noise,
        }
    }

    /// Uplink against the worst admissible interference, i.e. the rate the controller budgets with.
    pub fn uplink_lower_bound(channel_gain: f64, radio: &RadioConfig, geom: &NetworkGeometry) -> Self {
        Self::uplink(channel_gain, radio.interference_temperature, radio, geom)
    }

    pub fn uplink(
        channel_gain: f64,
        interference: f64,
        radio: &RadioConfig,
        geom: &NetworkGeometry,
    ) -> Self {
        Self::new(
            channel_gain,
            geom.serving_gain_product(),
            interference + radio.noise_power,
            radio.bandwidth,
        )
    }

    pub fn downlink(channel_gain: f64, radio: &RadioConfig, geom: &NetworkGeometry) -> Self {
        Self::new(
            channel_gain,
            geom.serving_gain_product(),
            radio.noise_power,
            radio.bandwidth,
        )
    }

    /// bits/s.
    pub fn rate(&self, power: f64) -> f64 {
        self.bandwidth * (power * self.snr_per_watt).ln_1p() / LN_2
    }

    /// d rate / d power.
    pub fn rate_derivative(&self, power: f64) -> f64 {
        self.bandwidth * self.snr_per_watt / ((1.0 + power * self.snr_per_watt) * LN_2)
    }

    /// Time to move `bits` at `power`; infinite when the rate is zero and bits are pending.
    pub fn transfer_time(&self, bits: f64, power: f64) -> f64 {
        if bits == 0.0 {
            return 0.0;
        }
        let r = self.rate(power);
        if r > 0.0 {
            bits / r
        } else {
            f64::INFINITY
        }
    }

    /// Transmit energy per bit `power / rate(power)`, continuous at zero power.
    pub fn joules_per_bit(&self, power: f64) -> f64 {
        let u = power * self.snr_per_watt;
        if u < 1e-8 {
            // u / ln(1+u) = 1 + u/2 - u^2/12 + ...
            LN_2 / (self.bandwidth * self.snr_per_watt) * (1.0 + 0.5 * u - u * u / 12.0)
        } else {
            power / self.rate(power)
        }
    }

    /// Smallest power that moves `bits` within `seconds`.
    pub fn power_for(&self, bits: f64, seconds: f64) -> f64 {
        if bits == 0.0 {
            return 0.0;
        }
        (bits * LN_2 / (self.bandwidth * seconds)).exp_m1() / self.snr_per_watt
    }
}

/// Uplink rate with the given aggregate interference. With
/// `interference == radio.interference_temperature` this is the lower-bound
/// rate used by the controller.
pub fn uplink_rate(
    p_v: f64,
    channel_gain: f64,
    interference: f64,
    radio: &RadioConfig,
    geom: &NetworkGeometry,
) -> f64 {
    LinkRate::uplink(channel_gain, interference, radio, geom).rate(p_v)
}

/// Interference-free downlink rate.
pub fn downlink_rate(p_r: f64, channel_gain: f64, radio: &RadioConfig, geom: &NetworkGeometry) -> f64 {
    LinkRate::downlink(channel_gain, radio, geom).rate(p_r)
}

/// Upload, execution and download times of one slot, seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Latency {
    pub upload: f64,
    pub compute: f64,
    pub download: f64,
}

impl Latency {
    pub fn total(&self) -> f64 {
        self.upload + self.compute + self.download
    }
}

/// A phase with pending bits and zero rate reports an infinite time.
pub fn latency_components(
    c_in_bits: f64,
    c_out_bits: f64,
    up_rate: f64,
    down_rate: f64,
    compute: &ComputeConfig,
) -> Latency {
    let div = |bits: f64, rate: f64| {
        if bits == 0.0 {
            0.0
        } else if rate > 0.0 {
            bits / rate
        } else {
            f64::INFINITY
        }
    };
    Latency {
        upload: div(c_in_bits, up_rate),
        compute: compute.cycles_per_bit * c_in_bits / compute.rsu_clock,
        download: div(c_out_bits, down_rate),
    }
}

/// RSU computation energy for `c_in_bits`, joules.
pub fn compute_energy(c_in_bits: f64, compute: &ComputeConfig) -> f64 {
    compute.switched_capacitance * c_in_bits * compute.cycles_per_bit * compute.rsu_clock * compute.rsu_clock
}

/// Computation plus transmission energy of one slot, joules.
pub fn slot_energy(compute_j: f64, p_v: f64, upload_s: f64, p_r: f64, download_s: f64) -> f64 {
    compute_j + p_v * upload_s + p_r * download_s
}
