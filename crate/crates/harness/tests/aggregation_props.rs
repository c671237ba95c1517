//! Property tests for aggregation and comparison arithmetic.

use proptest::prelude::*;
use rampmerge::compare::pct_delta;
use rampmerge::metrics::{read_episodes_csv, write_episodes_csv, RunLabel};
use rampmerge::{EpisodeMetrics, RunSummary};

fn episode() -> impl Strategy<Value = EpisodeMetrics> {
    (
        0u8..4,
        any::<bool>(),
        any::<bool>(),
        -0.05f64..0.05,
        -0.05f64..0.05,
        0.0f64..40.0,
        1u64..600,
        -5.0f64..2.0,
    )
        .prop_map(|(outcome, saturated, merged_behind, fuel, elec, jerk, steps, ret)| EpisodeMetrics {
            episode_id: 0,
            saturated,
            collided: outcome == 0,
            stopped: outcome == 1,
            succeeded: outcome == 2,
            truncated: outcome == 3,
            fuel_cost: fuel.abs(),
            electricity_cost: elec,
            combined_cost: fuel.abs() + elec,
            mean_abs_jerk: jerk,
            merged_behind,
            episode_steps: steps,
            undiscounted_return: ret,
        })
}

fn label() -> RunLabel {
    RunLabel {
        approach: "coop".into(),
        policy: "p".into(),
        seed: 1,
        config_hash: "c".into(),
        scenario_hash: "s".into(),
        deterministic: true,
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + b.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Summary computed from the CSV equals a single-pass recount.
    #[test]
    fn summary_reproducible_from_episode_csv(mut eps in prop::collection::vec(episode(), 1..80)) {
        for (i, e) in eps.iter_mut().enumerate() {
            e.episode_id = i as u64;
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("episodes.csv");
        write_episodes_csv(&path, &eps).unwrap();
        let back = read_episodes_csv(&path).unwrap();
        prop_assert_eq!(&back, &eps);
        let s = RunSummary::from_episodes(label(), &back);

        let mut counts = [0usize; 6];
        let mut sums = [0.0f64; 6];
        for e in &eps {
            counts[0] += e.saturated as usize;
            counts[1] += e.collided as usize;
            counts[2] += e.stopped as usize;
            counts[3] += e.succeeded as usize;
            counts[4] += e.truncated as usize;
            counts[5] += e.merged_behind as usize;
            sums[0] += e.fuel_cost;
            sums[1] += e.electricity_cost;
            sums[2] += e.combined_cost;
            sums[3] += e.mean_abs_jerk;
            sums[4] += e.undiscounted_return;
            sums[5] += e.episode_steps as f64;
        }
        let n = eps.len() as f64;
        let rates = [s.saturation_rate, s.collision_rate, s.stop_rate, s.success_rate, s.truncation_rate, s.merge_behind_rate];
        for (r, c) in rates.iter().zip(counts) {
            prop_assert!(close(*r, c as f64 / n));
        }
        let means = [s.avg_fuel_cost, s.avg_electricity_cost, s.avg_combined_cost, s.avg_jerk, s.avg_return, s.avg_episode_steps];
        for (m, t) in means.iter().zip(sums) {
            prop_assert!(close(*m, t / n));
        }
        let outcome_total = s.collision_rate + s.stop_rate + s.success_rate + s.truncation_rate;
        prop_assert!(close(outcome_total, 1.0));
        prop_assert!(close(s.avg_combined_cost, s.avg_fuel_cost + s.avg_electricity_cost));
    }

    #[test]
    fn pct_delta_inverts(base in -10.0f64..10.0, x in -10.0f64..10.0) {
        prop_assume!(base.abs() > 1e-6);
        let d = pct_delta(x, base).unwrap();
        prop_assert!((base + d / 100.0 * base.abs() - x).abs() <= 1e-9);
        prop_assert_eq!(pct_delta(base, base), Some(0.0));
    }
}

#[test]
fn pct_delta_zero_base() {
    assert_eq!(pct_delta(0.0, 0.0), Some(0.0));
    assert_eq!(pct_delta(1.0, 0.0), None);
}
