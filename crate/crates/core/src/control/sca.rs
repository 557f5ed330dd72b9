//! Successive convex approximation for the transmit-power subproblem: for a
//! fixed offload amount, minimize the radio energy
//! `U1 = p_v * c_in / rate_up(p_v) + p_r * c_out / rate_down(p_r)`
//! subject to the dwell-time budget and the power boxes.
//!
//! Each iteration minimizes the partially linearized surrogate
//! `x_v * c_in / rate_up(p_v) + p_v * c_in / rate_up(x_v) + (same for the downlink)
//!  + prox * |y - x|^2` around the current iterate `x`. The surrogate is
//! convex, majorizes `U1` and touches it at `x`, so every damped step
//! `y <- y + delta * (y_hat - y)` is a descent step.
//!
//! Coordinates are normalized by their power limits and the objective by its
//! value at the full-power corner, which keeps the stopping residual
//! dimensionless. In the low-SNR regime the iteration contracts slowly and a
//! small residual still allows a visible relative error in the powers, so
//! the exit also requires the relative step to have died out.

use crate::error::{Error, Result};
use crate::link::LinkRate;
use crate::scenario::SlotContext;

use super::dual::{solve_coupled, Coordinate, Term};
use super::ControlConfig;

/// Transmit-power subproblem for a fixed offload amount.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaProblem {
    pub upload_bits: f64,
    pub download_bits: f64,
    /// Budget left for the two transfers once RSU execution is paid for, seconds.
    pub time_left: f64,
    pub uplink: LinkRate,
    pub downlink: LinkRate,
    pub p_v_limit: f64,
    pub p_r_limit: f64,
}

/// Relative slack below which a transfer-time budget still counts as met.
const TIGHT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ScaOutcome {
    pub p_v: f64,
    pub p_r: f64,
    pub iterations: usize,
    /// `||M(y)||^2` at the returned point.
    pub residual_sq: f64,
    /// `U1` at every iterate, starting point first.
    pub objective_trace: Vec<f64>,
}

impl ScaProblem {
    pub fn from_slot(c_in_bits: f64, ctx: &SlotContext) -> Self {
        ScaProblem {
            upload_bits: c_in_bits,
            download_bits: if c_in_bits > 0.0 { ctx.output_bits } else { 0.0 },
            time_left: ctx.budget - ctx.compute.seconds_per_bit() * c_in_bits,
            uplink: ctx.uplink,
            downlink: ctx.downlink,
            p_v_limit: ctx.p_v_limit,
            p_r_limit: ctx.p_r_limit,
        }
    }

    /// Radio energy `U1`, joules.
    pub fn objective(&self, p_v: f64, p_r: f64) -> f64 {
        let up = if self.upload_bits > 0.0 {
            self.upload_bits * self.uplink.joules_per_bit(p_v)
        } else {
            0.0
        };
        let down = if self.download_bits > 0.0 {
            self.download_bits * self.downlink.joules_per_bit(p_r)
        } else {
            0.0
        };
        up + down
    }

    pub fn transfer_time(&self, p_v: f64, p_r: f64) -> f64 {
        self.uplink.transfer_time(self.upload_bits, p_v)
            + self.downlink.transfer_time(self.download_bits, p_r)
    }

    pub fn is_feasible(&self, p_v: f64, p_r: f64) -> bool {
        (0.0..=self.p_v_limit).contains(&p_v)
            && (0.0..=self.p_r_limit).contains(&p_r)
            && self.transfer_time(p_v, p_r) <= self.time_left
    }

    pub fn corner(&self) -> (f64, f64) {
        (
            if self.upload_bits > 0.0 { self.p_v_limit } else { 0.0 },
            if self.download_bits > 0.0 { self.p_r_limit } else { 0.0 },
        )
    }

    fn coordinates(&self) -> Vec<(usize, Coordinate)> {
        let mut out = Vec::with_capacity(2);
        if self.upload_bits > 0.0 {
            out.push((
                0,
                Coordinate {
                    link: self.uplink,
                    limit: self.p_v_limit,
                    bits: self.upload_bits,
                },
            ));
        }
        if self.download_bits > 0.0 {
            out.push((
                1,
                Coordinate {
                    link: self.downlink,
                    limit: self.p_r_limit,
                    bits: self.download_bits,
                },
            ));
        }
        out
    }

    /// Solves from the full-power corner.
    pub fn solve(&self, cfg: &ControlConfig) -> Result<ScaOutcome> {
        self.solve_from(self.corner(), cfg)
    }

    /// Runs the damped SCA iteration from a feasible starting point.
    pub fn solve_from(&self, start: (f64, f64), cfg: &ControlConfig) -> Result<ScaOutcome> {
        let (corner_v, corner_r) = self.corner();
        let corner_time = self.transfer_time(corner_v, corner_r);
        if !(corner_time <= self.time_left * (1.0 + TIGHT)) || self.time_left < 0.0 {
            return Err(Error::InfeasibleSlot {
                c_in_bits: self.upload_bits,
                required_s: corner_time,
                budget_s: self.time_left,
            });
        }
        let coords = self.coordinates();
        if coords.is_empty() {
            return Ok(ScaOutcome {
                p_v: 0.0,
                p_r: 0.0,
                iterations: 0,
                residual_sq: 0.0,
                objective_trace: vec![0.0],
            });
        }
        // A budget met only at the corner leaves nothing to optimize.
        if corner_time >= self.time_left * (1.0 - TIGHT) {
            return Ok(ScaOutcome {
                p_v: corner_v,
                p_r: corner_r,
                iterations: 0,
                residual_sq: 0.0,
                objective_trace: vec![self.objective(corner_v, corner_r)],
            });
        }
        if !self.is_feasible(start.0, start.1) {
            return Err(Error::invalid(
                "sca.start",
                format!("starting point ({}, {}) is not feasible", start.0, start.1),
            ));
        }

        let scale = self.objective(corner_v, corner_r);
        let solver = Normalized {
            problem: self,
            coords: &coords,
            scale,
        };
        let mut z: Vec<f64> = coords
            .iter()
            .map(|(i, c)| [start.0, start.1][*i] / c.limit)
            .collect();
        let mut trace = vec![solver.objective(&z)];
        let mut step = cfg.initial_step;

        for iteration in 0..=cfg.max_sca_iters {
            let target = solver.surrogate_minimizer(&z, cfg.prox_weight);
            let relative_step = z
                .iter()
                .zip(&target)
                .map(|(&z, &t)| step * (t - z).abs() / z)
                .fold(0.0, f64::max);
            // the projection is only worth computing once the iterates settle
            let residual_sq = if relative_step <= cfg.sca_step_tolerance || iteration == cfg.max_sca_iters {
                solver.residual_sq(&z)
            } else {
                f64::INFINITY
            };
            if residual_sq <= cfg.sca_tolerance && relative_step <= cfg.sca_step_tolerance {
                let (p_v, p_r) = solver.powers(&z);
                return Ok(ScaOutcome {
                    p_v,
                    p_r,
                    iterations: iteration,
                    residual_sq,
                    objective_trace: trace,
                });
            }
            if iteration == cfg.max_sca_iters {
                return Err(Error::NonConvergence {
                    iterations: iteration,
                    residual_sq,
                });
            }
            let moved: Vec<f64> = z
                .iter()
                .zip(&target)
                .map(|(&z, &t)| z + step * (t - z))
                .collect();
            z = solver.restore_feasibility(moved);
            trace.push(solver.objective(&z));
            step *= 1.0 - cfg.step_decay * step;
        }
        unreachable!("loop returns on its last iteration")
    }
}

struct Normalized<'a> {
    problem: &'a ScaProblem,
    coords: &'a [(usize, Coordinate)],
    scale: f64,
}

impl Normalized<'_> {
    fn powers(&self, z: &[f64]) -> (f64, f64) {
        let mut p = [0.0, 0.0];
        for ((i, c), &z) in self.coords.iter().zip(z) {
            p[*i] = c.power(z);
        }
        (p[0], p[1])
    }

    fn objective(&self, z: &[f64]) -> f64 {
        let (p_v, p_r) = self.powers(z);
        self.problem.objective(p_v, p_r)
    }

    fn time(&self, z: &[f64]) -> f64 {
        self.coords.iter().zip(z).map(|((_, c), &z)| c.time(z)).sum()
    }

    fn plain(&self) -> Vec<Coordinate> {
        self.coords.iter().map(|(_, c)| *c).collect()
    }

    /// Gradient of the normalized objective.
    fn gradient(&self, z: &[f64]) -> Vec<f64> {
        self.coords
            .iter()
            .zip(z)
            .map(|((_, c), &z)| {
                let p = c.power(z);
                let r = c.link.rate(p);
                let dr = c.link.rate_derivative(p);
                // d/dp [p / r(p)] = 1/r - p r' / r^2
                c.limit * c.bits * (1.0 / r - p * dr / (r * r)) / self.scale
            })
            .collect()
    }

    /// Euclidean projection onto the normalized feasible set.
    fn project(&self, v: &[f64]) -> Vec<f64> {
        let limit = self.problem.time_left;
        solve_coupled(&self.plain(), limit, |nu| {
            v.iter()
                .map(|&center| Term {
                    weight: nu,
                    linear: 0.0,
                    prox: 1.0,
                    center,
                })
                .collect()
        })
        .expect("feasible set is nonempty")
    }

    /// `||z - proj(z - grad(z))||^2`.
    fn residual_sq(&self, z: &[f64]) -> f64 {
        let g = self.gradient(z);
        let shifted: Vec<f64> = z.iter().zip(&g).map(|(z, g)| z - g).collect();
        let proj = self.project(&shifted);
        z.iter().zip(&proj).map(|(a, b)| (a - b).powi(2)).sum()
    }

    fn surrogate_minimizer(&self, z: &[f64], prox: f64) -> Vec<f64> {
        let limit = self.problem.time_left;
        let anchors: Vec<(f64, f64)> = self
            .coords
            .iter()
            .zip(z)
            .map(|((_, c), &z)| {
                let x = c.power(z);
                // x * bits / rate(p) has weight x / scale on time(p);
                // p * bits / rate(x) is linear in z.
                (x / self.scale, c.limit * c.bits / (c.link.rate(x) * self.scale))
            })
            .collect();
        solve_coupled(&self.plain(), limit, |mu| {
            anchors
                .iter()
                .zip(z)
                .map(|(&(weight, linear), &center)| Term {
                    weight: weight + mu,
                    linear,
                    prox,
                    center,
                })
                .collect()
        })
        .expect("feasible set is nonempty")
    }

    /// Convex combinations of feasible points are feasible in exact
    /// arithmetic; nudge toward the corner if rounding says otherwise.
    fn restore_feasibility(&self, mut z: Vec<f64>) -> Vec<f64> {
        let limit = self.problem.time_left;
        let mut t = 1e-15;
        while self.time(&z) > limit {
            for zi in z.iter_mut() {
                *zi = (*zi + t * (1.0 - *zi)).min(1.0);
            }
            t *= 10.0;
        }
        z
    }
}

/// Power allocation for `c_in_bits` offloaded in the slot described by `ctx`,
/// started from the full-power corner.
pub fn sca_power_allocation(
    c_in_bits: f64,
    ctx: &SlotContext,
    cfg: &ControlConfig,
) -> Result<ScaOutcome> {
    ScaProblem::from_slot(c_in_bits, ctx).solve(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(upload_bits: f64, download_bits: f64, time_left: f64) -> ScaProblem {
        ScaProblem {
            upload_bits,
            download_bits,
            time_left,
            uplink: LinkRate { bandwidth: 2e9, snr_per_watt: 29.0 * 8.0 },
            downlink: LinkRate { bandwidth: 2e9, snr_per_watt: 2900.0 },
            p_v_limit: 0.2316,
            p_r_limit: 3.1623,
        }
    }

    /// Energy-optimal split of the transfer budget: for a fixed multiplier
    /// each link's power solves `((1+u) ln(1+u) - u) / a = mu`; bisect `mu`
    /// until the transfers exactly fill the budget.
    fn time_split_oracle(p: &ScaProblem) -> (f64, f64) {
        let power_at = |link: &LinkRate, limit: f64, mu: f64| {
            let a = link.snr_per_watt;
            let lhs = |u: f64| ((1.0 + u) * u.ln_1p() - u) / a;
            let (mut lo, mut hi) = (0.0, a * limit);
            if lhs(hi) <= mu {
                return limit;
            }
            for _ in 0..300 {
                let mid = 0.5 * (lo + hi);
                if lhs(mid) < mu {
                    lo = mid
                } else {
                    hi = mid
                }
            }
            0.5 * (lo + hi) / a
        };
        let at = |mu: f64| {
            let pv = if p.upload_bits > 0.0 { power_at(&p.uplink, p.p_v_limit, mu) } else { 0.0 };
            let pr = if p.download_bits > 0.0 { power_at(&p.downlink, p.p_r_limit, mu) } else { 0.0 };
            (pv, pr)
        };
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while { let (a, b) = at(hi); p.transfer_time(a, b) > p.time_left } {
            hi *= 2.0;
        }
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            let (a, b) = at(mid);
            if p.transfer_time(a, b) > p.time_left {
                lo = mid
            } else {
                hi = mid
            }
        }
        at(hi)
    }

    fn cfg() -> ControlConfig {
        ControlConfig::default()
    }

    #[test]
    fn matches_the_time_split_oracle() {
        for (up, down, left) in [(5e7, 5e5, 0.3), (1e7, 1e6, 0.05), (2e7, 3e5, 1.0), (8e7, 9e5, 0.02)] {
            let p = problem(up, down, left);
            let out = p.solve(&cfg()).unwrap();
            let (ov, or) = time_split_oracle(&p);
            assert!((out.p_v - ov).abs() <= 1e-6 * ov, "p_v {} vs {ov}", out.p_v);
            assert!((out.p_r - or).abs() <= 1e-6 * or, "p_r {} vs {or}", out.p_r);
            assert!(p.is_feasible(out.p_v, out.p_r));
        }
    }

    #[test]
    fn objective_never_increases() {
        let p = problem(5e7, 5e5, 0.3);
        let out = p.solve(&cfg()).unwrap();
        assert!(out.iterations > 0);
        for w in out.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs());
        }
        assert!(out.residual_sq <= cfg().sca_tolerance);
    }

    #[test]
    fn uplink_only_matches_golden_section() {
        let p = problem(5e7, 0.0, 0.3);
        let out = p.solve(&cfg()).unwrap();
        assert_eq!(out.p_r, 0.0);
        // energy is increasing in power, so the optimum is the slowest feasible upload
        let f = |pv: f64| if p.is_feasible(pv, 0.0) { p.objective(pv, 0.0) } else { f64::INFINITY };
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut lo, mut hi) = (0.0, p.p_v_limit);
        for _ in 0..300 {
            let x1 = hi - g * (hi - lo);
            let x2 = lo + g * (hi - lo);
            if f(x1) < f(x2) { hi = x2 } else { lo = x1 }
        }
        let oracle = 0.5 * (lo + hi);
        assert!((out.p_v - oracle).abs() <= 1e-8 * oracle.max(1e-12) + 1e-12, "{} vs {oracle}", out.p_v);
    }

    #[test]
    fn tight_corner_returns_full_power() {
        let mut p = problem(5e7, 5e5, 1.0);
        p.time_left = p.transfer_time(p.p_v_limit, p.p_r_limit);
        let out = p.solve(&cfg()).unwrap();
        assert_eq!((out.p_v, out.p_r), (p.p_v_limit, p.p_r_limit));
    }

    #[test]
    fn infeasible_budget_is_reported() {
        let p = problem(5e9, 5e5, 0.01);
        assert!(matches!(p.solve(&cfg()), Err(Error::InfeasibleSlot { .. })));
    }

    #[test]
    fn nothing_to_send() {
        let p = problem(0.0, 0.0, 1.0);
        let out = p.solve(&cfg()).unwrap();
        assert_eq!((out.p_v, out.p_r), (0.0, 0.0));
    }
}
