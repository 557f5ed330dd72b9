//! Task arrivals and the typical vehicle's backlog.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::link::ComputeConfig;

/// What the controller observes at the start of a slot.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SlotState {
    pub t: u64,
    /// Backlog in tasks.
    pub queue_tasks: u64,
    /// Tasks arriving during this slot; they join the queue after service.
    pub arrivals: u64,
    /// Output size of this slot's computation, bits.
    pub output_bits: u64,
}

/// Poisson arrivals truncated at `arrival_cap`.
pub fn sample_arrivals<R: Rng + ?Sized>(compute: &ComputeConfig, rng: &mut R) -> u64 {
    if compute.arrival_rate <= 0.0 {
        return 0;
    }
    let draw = Poisson::new(compute.arrival_rate)
        .expect("arrival rate validated positive")
        .sample(rng);
    (draw as u64).min(compute.arrival_cap)
}

/// Uniform integer output size on the configured inclusive range.
pub fn sample_output_bits<R: Rng + ?Sized>(compute: &ComputeConfig, rng: &mut R) -> u64 {
    let (lo, hi) = compute.output_bits_range;
    rng.gen_range(lo..=hi)
}

/// `max(Q - C_in, 0) + D`.
pub fn advance_queue(state: &SlotState, c_in_tasks: u64) -> u64 {
    state.queue_tasks.saturating_sub(c_in_tasks) + state.arrivals
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::reference_compute;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn state(q: u64, d: u64) -> SlotState {
        SlotState {
            t: 0,
            queue_tasks: q,
            arrivals: d,
            output_bits: 1,
        }
    }

    #[test]
    fn queue_update_examples() {
        assert_eq!(advance_queue(&state(5, 2), 3), 4);
        assert_eq!(advance_queue(&state(2, 1), 5), 1);
        assert_eq!(advance_queue(&state(0, 0), 0), 0);
    }

    #[test]
    fn poisson_mean_at_rate_eight() {
        let c = reference_compute();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mean = (0..n).map(|_| sample_arrivals(&c, &mut rng)).sum::<u64>() as f64 / n as f64;
        assert!((mean - 8.0).abs() < 0.1, "{mean}");
    }

    #[test]
    fn arrivals_respect_cap_and_zero_rate() {
        let mut c = reference_compute();
        c.arrival_cap = 5;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..10_000).all(|_| sample_arrivals(&c, &mut rng) <= 5));
        c.arrival_rate = 0.0;
        assert!((0..100).all(|_| sample_arrivals(&c, &mut rng) == 0));
        c.arrival_rate = 1e-12;
        assert!((0..1000).all(|_| sample_arrivals(&c, &mut rng) == 0));
    }

    #[test]
    fn output_bits_in_range() {
        let c = reference_compute();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!((0..10_000)
            .map(|_| sample_output_bits(&c, &mut rng))
            .all(|b| (1..=1_000_000).contains(&b)));
    }

    proptest! {
        #[test]
        fn service_never_creates_backlog(q in 0u64..1000, d in 0u64..50, c in 0u64..1000) {
            let c = c.min(q);
            prop_assert!(advance_queue(&state(q, d), c) - d <= q);
        }

        #[test]
        fn idle_queue_accumulates_arrivals(arrivals in proptest::collection::vec(0u64..50, 1..200)) {
            let mut q = 0;
            for &d in &arrivals {
                q = advance_queue(&state(q, d), 0);
            }
            prop_assert_eq!(q, arrivals.iter().sum::<u64>());
        }
    }
}
