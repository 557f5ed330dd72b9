//! Road and RSU layout, mobility-driven channel gains, sectored antennas and
//! the Poisson interferer field seen by the serving RSU.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};

/// How the configured beamwidth maps onto the main lobe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BeamwidthConvention {
    /// Beamwidth is the full main-lobe width: main lobe iff `|angle| < beamwidth / 2`.
    #[default]
    Total,
    /// Beamwidth is the half-width: main lobe iff `|angle| < beamwidth`.
    Half,
}

/// Two-level sectored antenna pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntennaPattern {
    pub main_lobe_gain: f64,
    pub side_lobe_gain: f64,
    /// Radians.
    pub beamwidth: f64,
    pub convention: BeamwidthConvention,
}

impl AntennaPattern {
    pub fn new(main_lobe_gain: f64, side_lobe_gain: f64, beamwidth: f64) -> Result<Self> {
        let p = AntennaPattern {
            main_lobe_gain,
            side_lobe_gain,
            beamwidth,
            convention: BeamwidthConvention::Total,
        };
        p.validate()?;
        Ok(p)
    }

    /// Pattern from gains in dB and a beamwidth in degrees.
    pub fn from_db(main_db: f64, side_db: f64, beamwidth_deg: f64) -> Result<Self> {
        Self::new(
            crate::units::db_to_linear(main_db),
            crate::units::db_to_linear(side_db),
            beamwidth_deg.to_radians(),
        )
    }

    /// Same gain in every direction. Only useful as a degenerate reference.
    pub fn isotropic(gain: f64) -> Self {
        AntennaPattern {
            main_lobe_gain: gain,
            side_lobe_gain: gain,
            beamwidth: PI,
            convention: BeamwidthConvention::Total,
        }
    }

    pub fn with_convention(mut self, convention: BeamwidthConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let degenerate = self.main_lobe_gain == self.side_lobe_gain;
        if !(self.side_lobe_gain > 0.0) || !(self.main_lobe_gain > self.side_lobe_gain || degenerate) {
            return Err(Error::invalid(
                "antenna",
                format!(
                    "need main lobe > side lobe > 0, got {} / {}",
                    self.main_lobe_gain, self.side_lobe_gain
                ),
            ));
        }
        if !(self.beamwidth > 0.0 && self.beamwidth < TAU) {
            return Err(Error::invalid(
                "antenna.beamwidth",
                format!("must lie in (0, 2pi), got {}", self.beamwidth),
            ));
        }
        Ok(())
    }

    /// Angular half-width of the main lobe.
    pub fn half_width(&self) -> f64 {
        match self.convention {
            BeamwidthConvention::Total => 0.5 * self.beamwidth,
            BeamwidthConvention::Half => self.beamwidth,
        }
    }

    /// Probability that a uniformly random steering angle falls in the main lobe.
    pub fn main_lobe_probability(&self) -> f64 {
        (self.half_width() / PI).min(1.0)
    }

    /// Gain averaged over a uniform steering angle.
    pub fn mean_gain(&self) -> f64 {
        let p = self.main_lobe_probability();
        p * self.main_lobe_gain + (1.0 - p) * self.side_lobe_gain
    }

    pub fn gain(&self, steering_angle: f64) -> f64 {
        antenna_gain(self, steering_angle)
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(angle: f64) -> f64 {
    let a = (angle + PI).rem_euclid(TAU) - PI;
    if a <= -PI {
        a + TAU
    } else {
        a
    }
}

/// Main-lobe gain strictly inside the half-width, side-lobe gain otherwise.
pub fn antenna_gain(pattern: &AntennaPattern, steering_angle: f64) -> f64 {
    if normalize_angle(steering_angle).abs() < pattern.half_width() {
        pattern.main_lobe_gain
    } else {
        pattern.side_lobe_gain
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Lane {
    /// The typical vehicle's lane.
    First,
    Second,
}

/// Straight two-lane highway with evenly spaced RSUs.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGeometry {
    /// Distance between neighbouring RSUs, meters.
    pub rsu_spacing: f64,
    /// Perpendicular lane-1 to RSU distance, meters.
    pub lane1_offset: f64,
    /// Perpendicular lane-2 to RSU distance, meters.
    pub lane2_offset: f64,
    /// Antenna elevation difference between vehicle and RSU, meters.
    pub antenna_height_diff: f64,
    /// m/s.
    pub vehicle_speed: f64,
    pub pathloss_exponent: f64,
    pub freq_constant: f64,
    /// Vehicles per meter in lane 1 and lane 2.
    pub lane_densities: [f64; 2],
    pub vehicle_pattern: AntennaPattern,
    pub rsu_pattern: AntennaPattern,
}

impl NetworkGeometry {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("geometry.rsu_spacing", self.rsu_spacing),
            ("geometry.lane1_offset", self.lane1_offset),
            ("geometry.lane2_offset", self.lane2_offset),
            ("geometry.antenna_height_diff", self.antenna_height_diff),
            ("geometry.vehicle_speed", self.vehicle_speed),
            ("geometry.freq_constant", self.freq_constant),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.pathloss_exponent >= 2.0) {
            return Err(Error::Divergent(self.pathloss_exponent));
        }
        for d in self.lane_densities {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::invalid(
                    "geometry.lane_densities",
                    format!("must be nonnegative, got {d}"),
                ));
            }
        }
        self.vehicle_pattern.validate()?;
        self.rsu_pattern.validate()
    }

    pub fn lane_offset(&self, lane: Lane) -> f64 {
        match lane {
            Lane::First => self.lane1_offset,
            Lane::Second => self.lane2_offset,
        }
    }

    pub fn lane_density(&self, lane: Lane) -> f64 {
        match lane {
            Lane::First => self.lane_densities[0],
            Lane::Second => self.lane_densities[1],
        }
    }

    /// Distance travelled by the typical vehicle at the start of slot `t`.
    pub fn traveled(&self, t: u64, slot_len: f64) -> f64 {
        self.vehicle_speed * t as f64 * slot_len
    }

    /// Horizontal vehicle-to-serving-RSU distance at slot `t`: a triangle wave
    /// of period `rsu_spacing` that starts at the cell edge.
    pub fn horizontal_distance(&self, t: u64, slot_len: f64) -> f64 {
        self.horizontal_distance_at(self.traveled(t, slot_len))
    }

    pub fn horizontal_distance_at(&self, traveled: f64) -> f64 {
        let half = 0.5 * self.rsu_spacing;
        let m = traveled.rem_euclid(half);
        let k = (traveled / half).floor() as i64;
        if k.rem_euclid(2) == 0 {
            half - m
        } else {
            m
        }
    }

    /// LoS gain `beta * (l^2 + r^2 + h^2)^(-alpha/2)` for a lane offset `r`.
    pub fn channel_gain(&self, t: u64, lane_offset: f64, slot_len: f64) -> f64 {
        let l = self.horizontal_distance(t, slot_len);
        self.pathloss(l, lane_offset)
    }

    /// Gain of the typical (lane 1) vehicle to its serving RSU.
    pub fn serving_gain(&self, t: u64, slot_len: f64) -> f64 {
        self.channel_gain(t, self.lane1_offset, slot_len)
    }

    pub fn pathloss(&self, horizontal: f64, lane_offset: f64) -> f64 {
        let d2 = horizontal * horizontal
            + lane_offset * lane_offset
            + self.antenna_height_diff * self.antenna_height_diff;
        self.freq_constant * d2.powf(-0.5 * self.pathloss_exponent)
    }

    /// Remaining dwell time in the current cell at the start of slot `t`, seconds.
    pub fn time_budget(&self, t: u64, slot_len: f64) -> f64 {
        self.time_budget_at(self.traveled(t, slot_len))
    }

    pub fn time_budget_at(&self, traveled: f64) -> f64 {
        (self.rsu_spacing - traveled.rem_euclid(self.rsu_spacing)) / self.vehicle_speed
    }

    /// Density-weighted pathloss integral over interferers beyond half a cell.
    pub fn upsilon(&self) -> Result<f64> {
        if !(self.pathloss_exponent >= 2.0) {
            return Err(Error::Divergent(self.pathloss_exponent));
        }
        if self.pathloss_exponent == 2.0 {
            Ok(self.upsilon_with(lane_integral_alpha2))
        } else {
            Ok(self.upsilon_with(lane_integral_quadrature))
        }
    }

    /// Same integral by numerical quadrature regardless of the exponent.
    pub fn upsilon_quadrature(&self) -> Result<f64> {
        if !(self.pathloss_exponent >= 2.0) {
            return Err(Error::Divergent(self.pathloss_exponent));
        }
        Ok(self.upsilon_with(lane_integral_quadrature))
    }

    fn upsilon_with(&self, integral: fn(f64, f64, f64) -> f64) -> f64 {
        let start = 0.5 * self.rsu_spacing;
        [Lane::First, Lane::Second]
            .into_iter()
            .map(|lane| {
                let density = self.lane_density(lane);
                if density == 0.0 {
                    return 0.0;
                }
                let r = self.lane_offset(lane);
                let c2 = r * r + self.antenna_height_diff * self.antenna_height_diff;
                2.0 * density * self.freq_constant * integral(start, c2, self.pathloss_exponent)
            })
            .sum()
    }

    /// `E[G_vehicle * G_rsu]` for an interferer under independent uniform beam alignment.
    pub fn expected_gain_product(&self) -> f64 {
        self.vehicle_pattern.mean_gain() * self.rsu_pattern.mean_gain()
    }

    /// Product of the two main-lobe gains on the serving link.
    pub fn serving_gain_product(&self) -> f64 {
        self.vehicle_pattern.main_lobe_gain * self.rsu_pattern.main_lobe_gain
    }
}

/// `int_start^inf (x^2 + c2)^-1 dx`.
fn lane_integral_alpha2(start: f64, c2: f64, _alpha: f64) -> f64 {
    let c = c2.sqrt();
    (FRAC_PI_2 - (start / c).atan()) / c
}

/// `int_start^inf (x^2 + c2)^(-alpha/2) dx`, mapped onto (0, 1] by `x = start / u`.
fn lane_integral_quadrature(start: f64, c2: f64, alpha: f64) -> f64 {
    let f = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let x = start / u;
        (x * x + c2).powf(-0.5 * alpha) * start / (u * u)
    };
    // Scale the absolute target from a coarse pass so the result is relative to 1e-12.
    let coarse = quadrature::integrate(f, 0.0, 1.0, 1e-6 * start.powf(1.0 - alpha)).integral;
    let tol = (coarse.abs() * 1e-12).max(f64::MIN_POSITIVE);
    quadrature::integrate(f, 0.0, 1.0, tol).integral
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interferer {
    /// Signed horizontal offset from the serving RSU, meters.
    pub offset: f64,
    pub lane: Lane,
    /// Transmit power, watts.
    pub power: f64,
    /// Product of the interferer's transmit gain and the RSU's receive gain.
    pub gain: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct InterfererField {
    pub interferers: Vec<Interferer>,
}

impl InterfererField {
    pub fn len(&self) -> usize {
        self.interferers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interferers.is_empty()
    }

    pub fn count(&self, lane: Lane) -> usize {
        self.interferers.iter().filter(|i| i.lane == lane).count()
    }
}

/// Draws one realization of the interfering vehicles on both lanes of a road
/// spanning `[-road_half_length, road_half_length]`, excluding the serving
/// cell (`|x| < rsu_spacing / 2`). Every interferer transmits at `power`.
pub fn sample_interferers<R: Rng + ?Sized>(
    geom: &NetworkGeometry,
    road_half_length: f64,
    power: f64,
    rng: &mut R,
) -> Result<InterfererField> {
    let start = 0.5 * geom.rsu_spacing;
    if !(road_half_length >= 10.0 * geom.rsu_spacing) {
        return Err(Error::invalid(
            "road_half_length",
            format!(
                "must be at least 10 RSU spacings ({} m), got {road_half_length}",
                10.0 * geom.rsu_spacing
            ),
        ));
    }
    let span = road_half_length - start;
    let mut field = InterfererField::default();
    for lane in [Lane::First, Lane::Second] {
        let mean = geom.lane_density(lane) * 2.0 * span;
        if mean <= 0.0 {
            continue;
        }
        let count = Poisson::new(mean)
            .map_err(|e| Error::invalid("geometry.lane_densities", e.to_string()))?
            .sample(rng) as usize;
        field.interferers.reserve(count);
        for _ in 0..count {
            let magnitude = start + span * rng.gen::<f64>();
            let offset = if rng.gen::<bool>() { magnitude } else { -magnitude };
            let tx = geom.vehicle_pattern.gain(rng.gen_range(-PI..PI));
            let rx = geom.rsu_pattern.gain(rng.gen_range(-PI..PI));
            field.interferers.push(Interferer {
                offset,
                lane,
                power,
                gain: tx * rx,
            });
        }
    }
    Ok(field)
}

pub fn sample_interferers_seeded(
    geom: &NetworkGeometry,
    road_half_length: f64,
    power: f64,
    seed: u64,
) -> Result<InterfererField> {
    sample_interferers(geom, road_half_length, power, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Aggregate uplink interference at the serving RSU, watts.
pub fn realized_interference(field: &InterfererField, geom: &NetworkGeometry) -> f64 {
    field
        .interferers
        .iter()
        .map(|i| i.power * i.gain * geom.pathloss(i.offset, geom.lane_offset(i.lane)))
        .sum()
}
