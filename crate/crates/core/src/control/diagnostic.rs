//! Slot-wise drift-plus-penalty check on a finished trace.
//!
//! With `L = Q^2 / 2` in bits, the one-slot drift obeys
//! `Q'^2 - Q^2 <= C^2 + D^2 - 2 Q (C - D)` for `Q' = max(Q - C, 0) + D`,
//! so `drift + eta * E <= A - Q (C - D) + eta * E` with
//! `A = (max C^2 + D_max^2) S^2 / 2`. The energy term appears on both sides;
//! the check itself is exact integer arithmetic in task units.

/// The part of one slot the diagnostic needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticSlot {
    pub queue_tasks: u64,
    pub arrivals: u64,
    pub c_in_tasks: u64,
    pub energy_low: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport {
    /// `drift + eta * E_low` per slot, bits squared.
    pub drift_plus_penalty: Vec<f64>,
    /// Right-hand side of the bound per slot, bits squared.
    pub bound: Vec<f64>,
    /// `A` in bits squared.
    pub constant_a: f64,
    /// Slots where the bound fails.
    pub violations: Vec<usize>,
}

pub fn drift_plus_penalty_diagnostic(
    trace: &[DiagnosticSlot],
    task_bits: f64,
    arrival_cap: u64,
    eta: f64,
) -> DriftReport {
    let max_c = trace.iter().map(|s| s.c_in_tasks).max().unwrap_or(0) as i128;
    let d_max = arrival_cap as i128;
    // 2A in squared tasks
    let two_a = max_c * max_c + d_max * d_max;
    let s2 = task_bits * task_bits;

    let mut report = DriftReport {
        drift_plus_penalty: Vec::with_capacity(trace.len()),
        bound: Vec::with_capacity(trace.len()),
        constant_a: two_a as f64 * s2 / 2.0,
        violations: Vec::new(),
    };
    for (i, slot) in trace.iter().enumerate() {
        let q = slot.queue_tasks as i128;
        let c = slot.c_in_tasks as i128;
        let d = slot.arrivals as i128;
        let next = (q - c).max(0) + d;
        let two_drift = next * next - q * q;
        let two_rhs = two_a - 2 * q * (c - d);
        let penalty = eta * slot.energy_low;
        report
            .drift_plus_penalty
            .push(two_drift as f64 * s2 / 2.0 + penalty);
        report.bound.push(two_rhs as f64 * s2 / 2.0 + penalty);
        if two_drift > two_rhs {
            report.violations.push(i);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_zero_trace() {
        let trace = vec![
            DiagnosticSlot { queue_tasks: 0, arrivals: 0, c_in_tasks: 0, energy_low: 0.0 };
            5
        ];
        let r = drift_plus_penalty_diagnostic(&trace, 1e7, 50, 1e14);
        assert!(r.drift_plus_penalty.iter().all(|&v| v == 0.0));
        assert!(r.violations.is_empty());
    }

    #[test]
    fn single_arrival_slot() {
        let trace = [DiagnosticSlot { queue_tasks: 0, arrivals: 2, c_in_tasks: 0, energy_low: 0.0 }];
        let r = drift_plus_penalty_diagnostic(&trace, 1e7, 50, 0.0);
        assert_eq!(r.drift_plus_penalty[0], 0.5 * (2e7f64).powi(2));
        assert!(r.violations.is_empty());
    }

    #[test]
    fn a_cap_below_the_arrivals_is_caught() {
        // an arrival cap smaller than the realized arrivals breaks the bound
        let trace = [DiagnosticSlot { queue_tasks: 0, arrivals: 9, c_in_tasks: 0, energy_low: 0.0 }];
        let r = drift_plus_penalty_diagnostic(&trace, 1e7, 2, 0.0);
        assert_eq!(r.violations, vec![0]);
    }
}
