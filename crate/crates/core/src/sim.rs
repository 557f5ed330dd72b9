//! Multi-slot simulation, parameter sweeps and the Monte Carlo check of the
//! interference-cap rule.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::control::{self, ControlConfig, ControlDecision, DiagnosticSlot};
use crate::error::{Error, Result};
use crate::geometry::{realized_interference, sample_interferers, NetworkGeometry};
use crate::link::{ComputeConfig, LinkRate, RadioConfig};
use crate::queue::{advance_queue, sample_arrivals, sample_output_bits, SlotState};
use crate::scenario::{self, Scenario};
use crate::units;

/// Default half-length of the sampled road. At 500 m the tail beyond the
/// road still carries about 5% of the mean interference for a pathloss
/// exponent of 2; at 5 km it is about 0.5%.
pub const DEFAULT_ROAD_HALF_LENGTH: f64 = 5000.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub geometry: NetworkGeometry,
    pub radio: RadioConfig,
    pub compute: ComputeConfig,
    pub control: ControlConfig,
    /// Seconds per slot.
    pub slot_len: f64,
    pub t_end: u64,
    pub seed: u64,
    /// Half-length of the road carrying sampled interferers, meters.
    pub road_half_length: f64,
    /// Sample an interferer field every active slot to price the upload at
    /// the realized rate as well.
    pub realized_energy: bool,
    pub record_trace: bool,
}

impl RunConfig {
    /// Reference parameters with the default controller settings.
    pub fn reference() -> Self {
        RunConfig {
            geometry: scenario::reference_geometry(),
            radio: scenario::reference_radio(),
            compute: scenario::reference_compute(),
            control: ControlConfig::default(),
            slot_len: 1.0,
            t_end: 3000,
            seed: 1,
            road_half_length: DEFAULT_ROAD_HALF_LENGTH,
            realized_energy: false,
            record_trace: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_end == 0 {
            return Err(Error::invalid("t_end", "must be at least 1"));
        }
        if !(self.road_half_length >= 10.0 * self.geometry.rsu_spacing) {
            return Err(Error::invalid(
                "road_half_length",
                format!(
                    "must be at least 10 RSU spacings ({} m), got {}",
                    10.0 * self.geometry.rsu_spacing,
                    self.road_half_length
                ),
            ));
        }
        self.control.validate()
    }

    pub fn scenario(&self) -> Result<Scenario> {
        self.validate()?;
        Scenario::new(
            self.geometry.clone(),
            self.radio,
            self.compute,
            self.slot_len,
        )
    }
}

/// One simulated slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub t: u64,
    /// Backlog at the start of the slot, tasks.
    pub queue_tasks: u64,
    pub arrivals: u64,
    pub output_bits: u64,
    pub budget: f64,
    pub queue_after: u64,
    /// Realized-interference slot energy, when sampled.
    pub energy_realized: Option<f64>,
    pub decision: ControlDecision,
}

impl SlotRecord {
    pub fn diagnostic(&self) -> DiagnosticSlot {
        DiagnosticSlot {
            queue_tasks: self.queue_tasks,
            arrivals: self.arrivals,
            c_in_tasks: self.decision.c_in_tasks,
            energy_low: self.decision.energy_low,
        }
    }
}

pub const TRACE_HEADER: [&str; 12] = [
    "t", "Q", "D", "C_in_tasks", "P_v_W", "P_R_W", "tau1", "tau2", "tau3", "E_c", "E_low", "budget",
];

pub fn write_trace<W: Write>(out: W, trace: &[SlotRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in trace {
        let d = &r.decision;
        w.write_record([
            r.t.to_string(),
            r.queue_tasks.to_string(),
            r.arrivals.to_string(),
            d.c_in_tasks.to_string(),
            d.p_v.to_string(),
            d.p_r.to_string(),
            d.latency.upload.to_string(),
            d.latency.compute.to_string(),
            d.latency.download.to_string(),
            d.compute_energy.to_string(),
            d.energy_low.to_string(),
            r.budget.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub slots: u64,
    /// Mean end-of-slot backlog, tasks.
    pub avg_queue_tasks: f64,
    /// Mean slot energy at the worst admissible interference, joules.
    pub avg_energy_low: f64,
    /// Mean slot energy at sampled interference, when enabled.
    pub avg_energy_realized: Option<f64>,
    /// Mean of upload + execution + download time, seconds.
    pub avg_computing_time: f64,
    pub avg_offloaded_tasks: f64,
    /// Mean backlog over the third quarter of the run.
    pub third_quartile_queue: f64,
    /// Mean backlog over the last quarter of the run.
    pub last_quartile_queue: f64,
    pub final_queue: u64,
    pub trace: Option<Vec<SlotRecord>>,
}

impl RunMetrics {
    /// Relative gap between the last-quarter and third-quarter mean backlog.
    pub fn quartile_growth(&self) -> f64 {
        let (q3, q4) = (self.third_quartile_queue, self.last_quartile_queue);
        if q3 == 0.0 {
            if q4 == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (q4 - q3).abs() / q3
        }
    }

    pub fn is_stable(&self) -> bool {
        self.quartile_growth() < 0.2
    }
}

/// A run in progress, advanced one slot at a time.
pub struct Simulation {
    config: RunConfig,
    scenario: Scenario,
    traffic: ChaCha8Rng,
    field: ChaCha8Rng,
    queue: u64,
    t: u64,
    sums: Sums,
    trace: Option<Vec<SlotRecord>>,
}

#[derive(Default)]
struct Sums {
    queue: f64,
    energy_low: f64,
    energy_realized: f64,
    computing_time: f64,
    offloaded: f64,
    q3: f64,
    q4: f64,
}

impl Simulation {
    pub fn new(config: RunConfig) -> Result<Self> {
        let scenario = config.scenario()?;
        let traffic = ChaCha8Rng::seed_from_u64(config.seed);
        let mut field = ChaCha8Rng::seed_from_u64(config.seed);
        field.set_stream(1);
        let trace = config.record_trace.then(Vec::new);
        Ok(Simulation {
            config,
            scenario,
            traffic,
            field,
            queue: 0,
            t: 0,
            sums: Sums::default(),
            trace,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn slot(&self) -> u64 {
        self.t
    }

    pub fn queue_tasks(&self) -> u64 {
        self.queue
    }

    pub fn is_finished(&self) -> bool {
        self.t >= self.config.t_end
    }

    /// Simulates the next slot. Slots are indexed from 0; the vehicle's
    /// position is taken at the start of the slot.
    pub fn step(&mut self) -> Result<SlotRecord> {
        let t = self.t;
        let compute = &self.config.compute;
        let arrivals = sample_arrivals(compute, &mut self.traffic);
        let output_bits = sample_output_bits(compute, &mut self.traffic);
        let state = SlotState {
            t,
            queue_tasks: self.queue,
            arrivals,
            output_bits,
        };
        let ctx = self.scenario.slot_context(&state);
        let decision = control::solve_slot(&ctx, &self.config.control).map_err(|e| Error::Slot {
            slot: t,
            source: Box::new(e),
        })?;
        let queue_after = advance_queue(&state, decision.c_in_tasks);

        let energy_realized = if self.config.realized_energy {
            Some(self.realized_energy(&decision, ctx.channel_gain)?)
        } else {
            None
        };

        let n = self.config.t_end;
        let s = &mut self.sums;
        s.queue += queue_after as f64;
        s.energy_low += decision.energy_low;
        s.energy_realized += energy_realized.unwrap_or(0.0);
        s.computing_time += decision.latency.total();
        s.offloaded += decision.c_in_tasks as f64;
        if 4 * t >= 3 * n {
            s.q4 += queue_after as f64;
        } else if 2 * t >= n {
            s.q3 += queue_after as f64;
        }

        let record = SlotRecord {
            t,
            queue_tasks: self.queue,
            arrivals,
            output_bits,
            budget: ctx.budget,
            queue_after,
            energy_realized,
            decision,
        };
        if let Some(trace) = self.trace.as_mut() {
            trace.push(record.clone());
        }
        self.queue = queue_after;
        self.t += 1;
        Ok(record)
    }

    fn realized_energy(&mut self, decision: &ControlDecision, gain: f64) -> Result<f64> {
        if decision.c_in_tasks == 0 {
            return Ok(decision.energy_low);
        }
        let geom = &self.scenario.geometry;
        let field = sample_interferers(geom, self.config.road_half_length, decision.p_v, &mut self.field)?;
        let interference = realized_interference(&field, geom);
        let uplink = LinkRate::uplink(gain, interference, &self.scenario.radio, geom);
        Ok(decision.energy_with(&uplink))
    }

    /// Metrics over the slots simulated so far, averaged over `t_end`.
    pub fn metrics(&self) -> RunMetrics {
        let n = self.config.t_end as f64;
        let end = self.config.t_end;
        let q3_len = (3 * end).div_ceil(4) - end.div_ceil(2);
        let q4_len = end - (3 * end).div_ceil(4);
        let mean = |sum: f64, len: u64| if len == 0 { 0.0 } else { sum / len as f64 };
        RunMetrics {
            slots: self.t,
            avg_queue_tasks: self.sums.queue / n,
            avg_energy_low: self.sums.energy_low / n,
            avg_energy_realized: self
                .config
                .realized_energy
                .then(|| self.sums.energy_realized / n),
            avg_computing_time: self.sums.computing_time / n,
            avg_offloaded_tasks: self.sums.offloaded / n,
            third_quartile_queue: mean(self.sums.q3, q3_len),
            last_quartile_queue: mean(self.sums.q4, q4_len),
            final_queue: self.queue,
            trace: self.trace.clone(),
        }
    }

    pub fn into_metrics(mut self) -> RunMetrics {
        let trace = self.trace.take();
        RunMetrics {
            trace,
            ..self.metrics()
        }
    }
}

/// Runs `config.t_end` slots.
pub fn run(config: &RunConfig) -> Result<RunMetrics> {
    let mut sim = Simulation::new(config.clone())?;
    while !sim.is_finished() {
        sim.step()?;
    }
    Ok(sim.into_metrics())
}

/// Parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Interference temperature in dB over the noise floor.
    InterferenceTemperatureDb,
    /// Density of both interferer lanes, vehicles/m.
    LaneDensities,
    /// Mean task arrivals per slot.
    ArrivalRate,
    Eta,
}

impl SweepAxis {
    pub const NAMES: [&'static str; 5] = [
        "interference_temperature_db",
        "interference_temperature",
        "lane_densities",
        "arrival_rate",
        "eta",
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::InterferenceTemperatureDb => "interference_temperature_db",
            SweepAxis::LaneDensities => "lane_densities",
            SweepAxis::ArrivalRate => "arrival_rate",
            SweepAxis::Eta => "eta",
        }
    }

    /// Applies `value` to a copy of `base`.
    pub fn apply(self, base: &RunConfig, value: f64) -> RunConfig {
        let mut c = base.clone();
        match self {
            SweepAxis::InterferenceTemperatureDb => {
                c.radio.interference_temperature = c.radio.noise_power * units::db_to_linear(value)
            }
            SweepAxis::LaneDensities => c.geometry.lane_densities = [value, value],
            SweepAxis::ArrivalRate => c.compute.arrival_rate = value,
            SweepAxis::Eta => c.control.eta = value,
        }
        c
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interference_temperature_db" | "interference_temperature" => {
                Ok(SweepAxis::InterferenceTemperatureDb)
            }
            "lane_densities" => Ok(SweepAxis::LaneDensities),
            "arrival_rate" => Ok(SweepAxis::ArrivalRate),
            "eta" => Ok(SweepAxis::Eta),
            other => Err(Error::Config(format!(
                "unknown sweep axis `{other}`; expected one of {}",
                SweepAxis::NAMES.join(", ")
            ))),
        }
    }
}

/// How sweep points draw their randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeedMode {
    /// Each point gets its own seed derived from the base seed and its axis value.
    PerPoint,
    /// Every point reuses the base seed, so all points see the same arrivals
    /// and output sizes and differences between points are not sampling noise.
    #[default]
    Common,
}

/// Seed of a sweep point, from the base seed and the bit pattern of the axis value.
pub fn point_seed(base: u64, value: f64) -> u64 {
    splitmix64(base ^ splitmix64(value.to_bits()))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug)]
pub struct SweepPoint {
    pub axis_value: f64,
    pub seed: u64,
    pub result: Result<RunMetrics>,
}

pub const SWEEP_HEADER: [&str; 6] = [
    "axis_value",
    "avg_queue_tasks",
    "avg_energy_low_J",
    "avg_computing_time_s",
    "slots",
    "seed",
];

/// Independent runs over `values`, in parallel. A failed point keeps its
/// error and the remaining points still run.
pub fn sweep(base: &RunConfig, axis: SweepAxis, values: &[f64], seeds: SeedMode) -> Vec<SweepPoint> {
    values
        .par_iter()
        .map(|&v| {
            let mut config = axis.apply(base, v);
            config.seed = match seeds {
                SeedMode::PerPoint => point_seed(base.seed, v),
                SeedMode::Common => base.seed,
            };
            SweepPoint {
                axis_value: v,
                seed: config.seed,
                result: run(&config),
            }
        })
        .collect()
}

/// One CSV row per point; failed points report NaN metrics and 0 slots.
pub fn write_sweep<W: Write>(out: W, points: &[SweepPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for p in points {
        let (q, e, c, slots) = match &p.result {
            Ok(m) => (m.avg_queue_tasks, m.avg_energy_low, m.avg_computing_time, m.slots),
            Err(_) => (f64::NAN, f64::NAN, f64::NAN, 0),
        };
        w.write_record([
            p.axis_value.to_string(),
            q.to_string(),
            e.to_string(),
            c.to_string(),
            slots.to_string(),
            p.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Violations of "energy does not rise as delay rises" along a set of
/// `(delay, energy)` points. Points are ordered by delay; points with equal
/// delay are ordered by decreasing energy, and each consecutive pair whose
/// delay and energy both strictly increase counts once.
pub fn frontier_inversions(points: &[(f64, f64)]) -> usize {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    sorted
        .windows(2)
        .filter(|w| w[1].0 > w[0].0 && w[1].1 > w[0].1)
        .count()
}

/// Outcome of the Monte Carlo check of the interference-cap rule.
#[derive(Debug, Clone, PartialEq)]
pub struct CapCheckReport {
    pub draws: usize,
    /// Transmit power of every interferer: the cap.
    pub power: f64,
    pub interference_temperature: f64,
    pub epsilon: f64,
    pub exceed_probability: f64,
    /// Binomial standard error of the exceedance frequency at probability `epsilon`.
    pub probability_std_error: f64,
    pub mean_interference: f64,
    pub mean_std_error: f64,
    /// `power * xi1 * upsilon`.
    pub analytic_mean: f64,
}

impl CapCheckReport {
    pub fn probability_bound_holds(&self) -> bool {
        self.exceed_probability <= self.epsilon + 3.0 * self.probability_std_error
    }

    pub fn mean_relative_error(&self) -> f64 {
        if self.analytic_mean == 0.0 {
            if self.mean_interference == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean_interference - self.analytic_mean).abs() / self.analytic_mean
        }
    }

    pub fn passed(&self) -> bool {
        self.probability_bound_holds()
    }
}

/// Samples `draws` interferer fields with everyone transmitting at the cap.
pub fn check_interference_cap(
    scenario: &Scenario,
    draws: usize,
    road_half_length: f64,
    seed: u64,
) -> Result<CapCheckReport> {
    if draws < 1000 {
        return Err(Error::invalid("draws", format!("need at least 1000, got {draws}")));
    }
    let power = scenario.power_cap;
    let threshold = scenario.radio.interference_temperature;
    let geom = &scenario.geometry;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut exceed = 0usize;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..draws {
        let field = sample_interferers(geom, road_half_length, power, &mut rng)?;
        let i = realized_interference(&field, geom);
        if i >= threshold {
            exceed += 1;
        }
        sum += i;
        sum_sq += i * i;
    }
    let n = draws as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    let eps = scenario.radio.epsilon;
    Ok(CapCheckReport {
        draws,
        power,
        interference_temperature: threshold,
        epsilon: eps,
        exceed_probability: exceed as f64 / n,
        probability_std_error: (eps * (1.0 - eps) / n).sqrt(),
        mean_interference: mean,
        mean_std_error: (var / n).sqrt(),
        analytic_mean: scenario.mean_interference(power),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(t_end: u64) -> RunConfig {
        RunConfig {
            t_end,
            ..RunConfig::reference()
        }
    }

    #[test]
    fn empty_system() {
        let mut c = short(1);
        c.compute.arrival_rate = 0.0;
        let m = run(&c).unwrap();
        assert_eq!(m.slots, 1);
        assert_eq!((m.avg_queue_tasks, m.avg_energy_low, m.avg_computing_time), (0.0, 0.0, 0.0));
    }

    #[test]
    fn runs_are_deterministic() {
        let mut c = short(200);
        c.record_trace = true;
        let a = run(&c).unwrap();
        let b = run(&c).unwrap();
        assert_eq!(a, b);
        c.seed = 2;
        assert_ne!(a.trace, run(&c).unwrap().trace);
    }

    #[test]
    fn quartiles_cover_the_second_half() {
        let mut c = short(8);
        c.compute.arrival_rate = 0.0;
        let mut sim = Simulation::new(c).unwrap();
        while !sim.is_finished() {
            sim.step().unwrap();
        }
        let m = sim.metrics();
        assert_eq!((m.third_quartile_queue, m.last_quartile_queue), (0.0, 0.0));
        assert!(m.is_stable());
    }

    #[test]
    fn single_point_sweep_equals_run() {
        let c = short(100);
        let pts = sweep(&c, SweepAxis::Eta, &[c.control.eta], SeedMode::Common);
        assert_eq!(pts.len(), 1);
        let m = pts[0].result.as_ref().unwrap();
        assert_eq!(*m, run(&c).unwrap());
    }

    #[test]
    fn point_seeds_differ_by_value() {
        assert_ne!(point_seed(1, 0.0), point_seed(1, 5.0));
        assert_eq!(point_seed(1, 5.0), point_seed(1, 5.0));
    }

    #[test]
    fn sweep_csv_has_one_row_per_point() {
        let c = short(20);
        let pts = sweep(&c, SweepAxis::Eta, &[0.0, 1e13, 1e14, 1e15], SeedMode::PerPoint);
        let mut buf = Vec::new();
        write_sweep(&mut buf, &pts).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], SWEEP_HEADER.join(","));
        assert_eq!(lines.len(), 5);
    }

    #[test]
    fn failed_points_do_not_stop_the_sweep() {
        let c = short(5);
        let pts = sweep(&c, SweepAxis::ArrivalRate, &[-1.0, 2.0], SeedMode::PerPoint);
        assert!(pts[0].result.is_err());
        assert!(pts[1].result.is_ok());
        let mut buf = Vec::new();
        write_sweep(&mut buf, &pts).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("NaN"));
    }

    #[test]
    fn inversions_count_rising_pairs() {
        assert_eq!(frontier_inversions(&[(1.0, 5.0), (2.0, 4.0), (3.0, 3.0)]), 0);
        assert_eq!(frontier_inversions(&[(3.0, 3.0), (1.0, 5.0), (2.0, 6.0)]), 1);
        // equal delays never count against each other
        assert_eq!(frontier_inversions(&[(1.0, 5.0), (1.0, 6.0), (2.0, 4.5)]), 0);
        assert_eq!(frontier_inversions(&[(1.0, 5.0), (1.0, 6.0), (2.0, 6.5)]), 1);
    }

    #[test]
    fn unknown_axis() {
        assert!("speed".parse::<SweepAxis>().is_err());
        assert_eq!("interference_temperature".parse::<SweepAxis>().unwrap(), SweepAxis::InterferenceTemperatureDb);
    }

    #[test]
    fn cap_check_without_interferers() {
        let mut c = RunConfig::reference();
        c.geometry.lane_densities = [0.0, 0.0];
        let r = check_interference_cap(&c.scenario().unwrap(), 1000, 500.0, 3).unwrap();
        assert_eq!(r.exceed_probability, 0.0);
        assert_eq!(r.mean_interference, 0.0);
        assert!(r.passed());
    }

    #[test]
    fn trace_csv_header() {
        let mut c = short(3);
        c.record_trace = true;
        let m = run(&c).unwrap();
        let mut buf = Vec::new();
        write_trace(&mut buf, m.trace.as_ref().unwrap()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,Q,D,C_in_tasks,P_v_W,P_R_W,tau1,tau2,tau3,E_c,E_low,budget\n"));
        assert_eq!(text.lines().count(), 4);
    }
}
