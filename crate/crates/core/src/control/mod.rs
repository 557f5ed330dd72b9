//! Per-slot drift-plus-penalty control.
//!
//! Each slot minimizes `-Q * c_in + eta * E` over the offload amount and the
//! two transmit powers. The powers come from the SCA solver in [`sca`] for a
//! fixed offload amount; the offload amount is a linear program in closed form
//! for fixed powers. The two are alternated and the result rounded to whole
//! tasks.

mod diagnostic;
pub(crate) mod dual;
pub mod sca;

pub use diagnostic::{drift_plus_penalty_diagnostic, DiagnosticSlot, DriftReport};
pub use sca::{sca_power_allocation, ScaOutcome, ScaProblem};

use crate::error::{Error, Result};
use crate::link::Latency;
use crate::scenario::SlotContext;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlConfig {
    /// Price of energy; 0 ignores energy entirely.
    pub eta: f64,
    /// Exit threshold on the squared projected-gradient residual.
    pub sca_tolerance: f64,
    /// Exit threshold on the largest relative power change of the next step.
    pub sca_step_tolerance: f64,
    /// Step decay `alpha` in `delta <- delta * (1 - alpha * delta)`.
    pub step_decay: f64,
    pub initial_step: f64,
    /// Proximal weight in normalized power coordinates.
    pub prox_weight: f64,
    pub max_sca_iters: usize,
    pub max_alt_iters: usize,
    /// Relative objective change that ends the alternation.
    pub alt_tolerance: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            eta: 1e14,
            sca_tolerance: 1e-5,
            sca_step_tolerance: 1e-10,
            step_decay: 1e-5,
            initial_step: 1.0,
            prox_weight: 1e-3,
            max_sca_iters: 100_000,
            max_alt_iters: 50,
            alt_tolerance: 1e-6,
        }
    }
}

impl ControlConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be positive, got {v}")))
            }
        };
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::invalid("eta", format!("must be nonnegative, got {}", self.eta)));
        }
        positive("sca_tolerance", self.sca_tolerance)?;
        positive("sca_step_tolerance", self.sca_step_tolerance)?;
        positive("step_decay", self.step_decay)?;
        positive("prox_weight", self.prox_weight)?;
        positive("alt_tolerance", self.alt_tolerance)?;
        if !(self.initial_step > 0.0 && self.initial_step <= 1.0) {
            return Err(Error::invalid(
                "initial_step",
                format!("must lie in (0, 1], got {}", self.initial_step),
            ));
        }
        if self.max_sca_iters == 0 || self.max_alt_iters == 0 {
            return Err(Error::invalid("max_iters", "iteration limits must be at least 1"));
        }
        Ok(())
    }
}

/// Which branch of the offload rule produced the decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OffloadCase {
    /// `eta = 0`: offload as much as fits.
    EnergyIgnored,
    /// Queue pressure outweighs the energy price: offload as much as fits.
    MaxOffload,
    /// Energy price outweighs queue pressure: keep everything local.
    Idle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlDecision {
    pub c_in_tasks: u64,
    pub c_in_bits: f64,
    /// Offload amount before rounding to whole tasks.
    pub relaxed_c_in_bits: f64,
    pub p_v: f64,
    pub p_r: f64,
    pub latency: Latency,
    /// RSU computation energy, joules.
    pub compute_energy: f64,
    /// Slot energy with the upload priced at the worst admissible interference.
    pub energy_low: f64,
    pub objective: f64,
    pub case: OffloadCase,
    pub alternations: usize,
    /// Relaxed objective after every power and offload update.
    pub objective_trace: Vec<f64>,
}

impl ControlDecision {
    fn idle(case: OffloadCase, relaxed: f64, alternations: usize, trace: Vec<f64>) -> Self {
        ControlDecision {
            c_in_tasks: 0,
            c_in_bits: 0.0,
            relaxed_c_in_bits: relaxed,
            p_v: 0.0,
            p_r: 0.0,
            latency: Latency::default(),
            compute_energy: 0.0,
            energy_low: 0.0,
            objective: 0.0,
            case,
            alternations,
            objective_trace: trace,
        }
    }

    /// Slot energy when the upload actually ran at `realized_uplink` rather
    /// than at the budgeted worst-case rate.
    pub fn energy_with(&self, realized_uplink: &crate::link::LinkRate) -> f64 {
        let upload = realized_uplink.transfer_time(self.c_in_bits, self.p_v);
        crate::link::slot_energy(
            self.compute_energy,
            self.p_v,
            upload,
            self.p_r,
            self.latency.download,
        )
    }
}

/// Interference-driven cap on the vehicle transmit power, clamped to `p_v_max`.
pub fn power_cap(radio: &crate::link::RadioConfig, xi1: f64, upsilon: f64) -> Result<f64> {
    let load = xi1 * upsilon;
    if !(load >= 0.0) || !load.is_finite() {
        return Err(Error::invalid(
            "upsilon",
            format!("interference load must be finite and nonnegative, got {load}"),
        ));
    }
    if load == 0.0 {
        return Ok(radio.p_v_max);
    }
    Ok((radio.epsilon * radio.interference_temperature / load).min(radio.p_v_max))
}

/// Energy price above which the slot keeps all tasks local, for uplink power `p_v`.
pub fn case_threshold(p_v: f64, ctx: &SlotContext) -> f64 {
    ctx.queue_bits / (ctx.compute.joules_per_bit() + ctx.uplink.joules_per_bit(p_v))
}

/// `-Q * c_in + eta * (E_c + p_v * c_in / rate_up + p_r * c_out / rate_down)`,
/// every task quantity in bits. The download term is charged only when
/// something is offloaded.
pub fn slot_objective(c_in_bits: f64, p_v: f64, p_r: f64, ctx: &SlotContext, eta: f64) -> f64 {
    let mut energy = 0.0;
    if c_in_bits > 0.0 {
        energy = c_in_bits * (ctx.compute.joules_per_bit() + ctx.uplink.joules_per_bit(p_v));
        if ctx.output_bits > 0.0 {
            energy += ctx.output_bits * ctx.downlink.joules_per_bit(p_r);
        }
    }
    -ctx.queue_bits * c_in_bits + eta * energy
}

/// Largest offload that fits the dwell time at the given powers, ignoring the queue.
pub fn max_offload_bits(p_v: f64, p_r: f64, ctx: &SlotContext) -> f64 {
    let download = ctx.downlink.transfer_time(ctx.output_bits, p_r);
    let per_bit = 1.0 / ctx.uplink.rate(p_v) + ctx.compute.seconds_per_bit();
    ((ctx.budget - download) / per_bit).max(0.0)
}

/// Offload amount minimizing the slot objective for fixed powers.
pub fn optimal_c_in(p_v: f64, p_r: f64, ctx: &SlotContext, eta: f64) -> (f64, OffloadCase) {
    let case = if eta == 0.0 {
        OffloadCase::EnergyIgnored
    } else if eta >= case_threshold(p_v, ctx) {
        OffloadCase::Idle
    } else {
        OffloadCase::MaxOffload
    };
    match case {
        OffloadCase::Idle => (0.0, case),
        _ => (max_offload_bits(p_v, p_r, ctx).min(ctx.queue_bits), case),
    }
}

/// Largest whole number of tasks, nearest to `relaxed_bits`, that fits the
/// queue and the dwell time at the given powers.
pub fn round_tasks(relaxed_bits: f64, p_v: f64, p_r: f64, ctx: &SlotContext) -> u64 {
    let s = ctx.task_bits();
    let ratio = relaxed_bits / s;
    let mut n = (ratio.round() as u64).min(ctx.queue_tasks);
    if n as f64 > ratio && !ctx.fits(n as f64 * s, p_v, p_r) {
        n = (ratio.floor() as u64).min(ctx.queue_tasks);
    }
    while n > 0 && !ctx.fits(n as f64 * s, p_v, p_r) {
        n -= 1;
    }
    n
}

/// Solves one slot: alternates power allocation and offload selection, then
/// rounds to whole tasks.
pub fn solve_slot(ctx: &SlotContext, cfg: &ControlConfig) -> Result<ControlDecision> {
    let (corner_v, corner_r) = (ctx.p_v_limit, ctx.p_r_limit);
    let (c0, case0) = optimal_c_in(corner_v, corner_r, ctx, 0.0);
    if c0 < ctx.task_bits() {
        return Ok(ControlDecision::idle(case0, c0, 0, Vec::new()));
    }
    if cfg.eta == 0.0 {
        let trace = vec![slot_objective(c0, corner_v, corner_r, ctx, 0.0)];
        return Ok(finish(ctx, cfg, c0, corner_v, corner_r, case0, 0, trace));
    }

    let mut c = c0;
    let mut case = OffloadCase::MaxOffload;
    let mut powers = (corner_v, corner_r);
    let mut trace = vec![slot_objective(c, corner_v, corner_r, ctx, cfg.eta)];
    let mut alternations = 0;
    while alternations < cfg.max_alt_iters {
        alternations += 1;
        let out = sca_power_allocation(c, ctx, cfg)?;
        powers = (out.p_v, out.p_r);
        trace.push(slot_objective(c, powers.0, powers.1, ctx, cfg.eta));
        let (next, next_case) = optimal_c_in(powers.0, powers.1, ctx, cfg.eta);
        case = next_case;
        let before = *trace.last().expect("trace is nonempty");
        let after = slot_objective(next, powers.0, powers.1, ctx, cfg.eta);
        trace.push(after);
        c = next;
        if c == 0.0 || (after - before).abs() <= cfg.alt_tolerance * before.abs() {
            break;
        }
    }
    if c < ctx.task_bits() {
        return Ok(ControlDecision::idle(case, c, alternations, trace));
    }
    Ok(finish(ctx, cfg, c, powers.0, powers.1, case, alternations, trace))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    ctx: &SlotContext,
    cfg: &ControlConfig,
    relaxed: f64,
    p_v: f64,
    p_r: f64,
    case: OffloadCase,
    alternations: usize,
    trace: Vec<f64>,
) -> ControlDecision {
    let n = round_tasks(relaxed, p_v, p_r, ctx);
    if n == 0 {
        return ControlDecision::idle(case, relaxed, alternations, trace);
    }
    let bits = n as f64 * ctx.task_bits();
    let latency = ctx.latency(bits, p_v, p_r);
    let compute_energy = crate::link::compute_energy(bits, &ctx.compute);
    let energy_low =
        crate::link::slot_energy(compute_energy, p_v, latency.upload, p_r, latency.download);
    ControlDecision {
        c_in_tasks: n,
        c_in_bits: bits,
        relaxed_c_in_bits: relaxed,
        p_v,
        p_r,
        latency,
        compute_energy,
        energy_low,
        objective: slot_objective(bits, p_v, p_r, ctx, cfg.eta),
        case,
        alternations,
        objective_trace: trace,
    }
}
