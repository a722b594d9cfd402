//! Property tests over the deterministic building blocks: schedules, the
//! power-law fitter, seed derivation, and compensated summation.

use proptest::prelude::*;

use rpavg_core::fit::fit_rate;
use rpavg_core::kahan;
use rpavg_core::rng::{replication_key, replication_rng};
use rpavg_core::schedule::StepSchedule;

use rand::RngCore;

proptest! {
    /// γ n^{−β} is positive, strictly decreasing, and halves with the exact
    /// exponent: step(2n)/step(n) = 2^{−β}.
    #[test]
    fn schedule_decays_at_its_exponent(
        gamma in 1e-3f64..1e3,
        beta in 0.05f64..0.95,
        n in 1u64..1_000_000,
    ) {
        let sched = StepSchedule::new(gamma, beta).unwrap();
        let (a, b) = (sched.step(n), sched.step(2 * n));
        prop_assert!(a > 0.0 && b > 0.0);
        prop_assert!(b < a);
        let measured_beta = -(b / a).log2();
        prop_assert!((measured_beta - beta).abs() < 1e-9);
    }

    /// The log-log fitter recovers an exact power law `y = c n^s` to
    /// near machine precision, with a residual at the noise floor.
    #[test]
    fn fit_recovers_exact_power_laws(
        slope in -3.0f64..3.0,
        log_c in -5.0f64..5.0,
        n0 in 1u64..1000,
    ) {
        let c = log_c.exp();
        let points: Vec<(f64, f64)> = (0..12)
            .map(|k| {
                let x = (n0 + k * n0.max(3)) as f64;
                (x, c * x.powf(slope))
            })
            .collect();
        let fit = fit_rate(&points).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-8, "slope {} vs {slope}", fit.slope);
        prop_assert!((fit.intercept - log_c).abs() < 1e-7);
        prop_assert!(fit.residual < 1e-8);
    }

    /// Replication streams are a pure function of (master seed, index):
    /// the same pair replays bit-identically.
    #[test]
    fn replication_streams_replay(master in any::<u64>(), index in 0u64..1_000_000) {
        prop_assert_eq!(replication_key(master, index), replication_key(master, index));
        let mut a = replication_rng(master, index);
        let mut b = replication_rng(master, index);
        for _ in 0..8 {
            prop_assert_eq!(a.next_u64(), b.next_u64());
        }
        // Neighbouring indices must not share a key (stream separation).
        prop_assert_ne!(replication_key(master, index), replication_key(master, index + 1));
    }

    /// Compensated summation is insensitive to input order even with
    /// wildly mixed magnitudes, where naive summation is not.
    #[test]
    fn kahan_sum_is_order_insensitive(
        values in prop::collection::vec((-30i32..30, -1.0f64..1.0), 2..64),
    ) {
        let forward: Vec<f64> = values
            .iter()
            .map(|&(e, m)| m * 2f64.powi(e))
            .collect();
        let mut reversed = forward.clone();
        reversed.reverse();
        let (a, b) = (kahan::sum(&forward), kahan::sum(&reversed));
        let scale = forward.iter().map(|v| v.abs()).fold(0.0, f64::max);
        prop_assert!((a - b).abs() <= 1e-15 * scale.max(1.0), "{a} vs {b}");
    }
}
