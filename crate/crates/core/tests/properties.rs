use proptest::prelude::*;

use v2x_edge::control::{self, ControlConfig, OffloadCase};
use v2x_edge::queue::{advance_queue, SlotState};
use v2x_edge::scenario::{Scenario, SlotContext};

fn context(t: u64, queue_tasks: u64, output_bits: u64) -> SlotContext {
    Scenario::reference().slot_context(&SlotState {
        t,
        queue_tasks,
        arrivals: 0,
        output_bits,
    })
}

proptest! {
    #[test]
    fn queue_update_is_clamped_and_conserves_tasks(q in 0u64..10_000, c in 0u64..10_000, d in 0u64..=50) {
        let s = SlotState { t: 0, queue_tasks: q, arrivals: d, output_bits: 1 };
        let next = advance_queue(&s, c);
        prop_assert!(next >= d);
        prop_assert_eq!(next, q - c.min(q) + d);
        prop_assert!(next <= q + d);
    }

    #[test]
    fn jointly_scaling_price_and_backlog_keeps_the_case(
        t in 0u64..20_000,
        q in 1u64..200,
        k in 2u64..50,
        out in 1u64..=1_000_000,
        log_eta in 8.0f64..16.0,
        frac in 0.0f64..=1.0,
    ) {
        let eta = 10f64.powf(log_eta);
        let base = context(t, q, out);
        let scaled = context(t, q * k, out);
        let p_v = frac * base.p_v_limit;
        if p_v > 0.0 {
            let (_, a) = control::optimal_c_in(p_v, base.p_r_limit, &base, eta);
            let (_, b) = control::optimal_c_in(p_v, base.p_r_limit, &scaled, eta * k as f64);
            prop_assert_eq!(a, b);
        }
        let bits = frac * base.queue_bits;
        let u = control::slot_objective(bits, base.p_v_limit, base.p_r_limit, &base, eta);
        let v = control::slot_objective(bits, base.p_v_limit, base.p_r_limit, &scaled, eta * k as f64);
        prop_assert!((v - k as f64 * u).abs() <= 1e-9 * v.abs().max(1.0));
    }

    #[test]
    fn longer_backlog_never_offloads_less(
        t in 0u64..20_000,
        q in 0u64..100,
        extra in 1u64..100,
        out in 1u64..=1_000_000,
        log_eta in 10.0f64..16.0,
    ) {
        let eta = 10f64.powf(log_eta);
        let short = context(t, q, out);
        let long = context(t, q + extra, out);
        let (a, _) = control::optimal_c_in(short.p_v_limit, short.p_r_limit, &short, eta);
        let (b, _) = control::optimal_c_in(long.p_v_limit, long.p_r_limit, &long, eta);
        prop_assert!(b >= a);
    }

    #[test]
    fn rounding_respects_queue_and_budget(
        t in 0u64..20_000,
        q in 0u64..100,
        out in 1u64..=1_000_000,
        frac in 0.0f64..=1.5,
    ) {
        let ctx = context(t, q, out);
        let most = control::max_offload_bits(ctx.p_v_limit, ctx.p_r_limit, &ctx);
        let n = control::round_tasks(frac * most, ctx.p_v_limit, ctx.p_r_limit, &ctx);
        prop_assert!(n <= q);
        prop_assert!(n == 0 || ctx.fits(n as f64 * ctx.task_bits(), ctx.p_v_limit, ctx.p_r_limit));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn alternation_never_raises_the_objective(
        t in 0u64..20_000,
        q in 1u64..5_000,
        out in 1u64..=1_000_000,
        log_eta in 12.0f64..15.0,
    ) {
        let ctx = context(t, q, out);
        let cfg = ControlConfig { eta: 10f64.powf(log_eta), ..ControlConfig::default() };
        let d = control::solve_slot(&ctx, &cfg).unwrap();
        for w in d.objective_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs(), "{:?}", d.objective_trace);
        }
        prop_assert!(d.c_in_tasks <= q);
        if d.case == OffloadCase::Idle {
            prop_assert_eq!(d.c_in_tasks, 0);
        }
    }
}
