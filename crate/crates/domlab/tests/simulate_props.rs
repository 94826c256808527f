//! End-to-end simulation properties: trace files as faithful images of a
//! run, noise plumbing, checkpoint schedules, and the handwritten gradient
//! dynamics on the ladder game.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use domlab::simulate::{
    poe, read_trace_csv, run_selfplay, write_trace_csv, CheckpointSchedule, FeedbackMode,
    RunConfig,
};
use domlab::{iesds, Game};

fn ladder(k: usize, c: f64) -> (Game, domlab::EliminationPath) {
    let game = Game::dir(k, c).unwrap();
    let path = iesds(&game).unwrap();
    (game, path)
}

/// The additive observation noise is a centered gaussian in normalized
/// payoff units: over a hundred-thousand-draw window the empirical mean
/// stays within four standard errors of zero.
#[test]
fn noise_model_window_mean_vanishes()
{
    let sigma = 0.1;
    let n = 100_000;
    let normal = Normal::new(0.0, sigma).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mean: f64 = (0..n).map(|_| normal.sample(&mut rng)).sum::<f64>() / n as f64;
    assert!(mean.abs() < 4.0 * sigma / (n as f64).sqrt(), "mean {mean}");
}

/// Turning the noise on changes bandit trajectories; turning it off again
/// restores them exactly.
#[test]
fn noise_plumbing_reaches_the_learners() {
    let (game, path) = ladder(3, 9.0);
    let mut config = RunConfig {
        algo: "exp3dh:b=0.2,beta=2".parse().unwrap(),
        horizon: 300,
        seed: 5,
        noise_std: 0.0,
        feedback: FeedbackMode::Bandit,
        checkpoints: CheckpointSchedule::Every(100),
        record_distributions: true,
    };
    let quiet = run_selfplay(&game, &path, &config).unwrap();
    let quiet_again = run_selfplay(&game, &path, &config).unwrap();
    config.noise_std = 0.5;
    let noisy = run_selfplay(&game, &path, &config).unwrap();

    let last = |t: &domlab::simulate::Trace| t.final_checkpoint().distributions.clone();
    assert_eq!(last(&quiet), last(&quiet_again));
    assert_ne!(last(&quiet), last(&noisy));
}

/// The metric rows in a trace file equal the metric recomputed offline from
/// the distribution rows of the same file.
#[test]
fn trace_metrics_recompute_from_stored_distributions() {
    let (game, path) = ladder(4, 11.0);
    let config = RunConfig {
        algo: "exp3".parse().unwrap(),
        horizon: 500,
        seed: 9,
        noise_std: 0.1,
        feedback: FeedbackMode::Bandit,
        checkpoints: CheckpointSchedule::LogSpaced,
        record_distributions: true,
    };
    let trace = run_selfplay(&game, &path, &config).unwrap();
    let mut bytes = Vec::new();
    write_trace_csv(&trace, true, &mut bytes).unwrap();
    let rows = read_trace_csv(bytes.as_slice()).unwrap();

    let rounds: Vec<u64> = trace.checkpoints.iter().map(|c| c.round).collect();
    for round in rounds {
        let mut dists = vec![vec![0.0; 4]; 2];
        let mut stored_poe = None;
        for row in rows.iter().filter(|r| r.round == round) {
            if row.agent >= 0 {
                let action: usize = row
                    .metric
                    .strip_prefix("p_")
                    .expect("distribution row")
                    .parse()
                    .unwrap();
                dists[row.agent as usize][action - 1] = row.value;
            } else if row.metric == "poe" {
                stored_poe = Some(row.value);
            }
        }
        let recomputed = poe(&path, &dists).unwrap();
        let stored = stored_poe.expect("poe row present");
        // 17-significant-digit formatting makes the file an exact image.
        assert_eq!(stored, recomputed, "round {round}");
    }
}

/// Identical configurations produce byte-identical trace files, including
/// the stationary-composition learner.
#[test]
fn repeated_runs_serialize_to_identical_bytes() {
    let (game, path) = ladder(3, 9.0);
    let config = RunConfig {
        algo: "exp3pswap:T=400".parse().unwrap(),
        horizon: 400,
        seed: 21,
        noise_std: 0.05,
        feedback: FeedbackMode::Bandit,
        checkpoints: CheckpointSchedule::LogSpaced,
        record_distributions: true,
    };
    let mut first = Vec::new();
    let mut second = Vec::new();
    write_trace_csv(&run_selfplay(&game, &path, &config).unwrap(), true, &mut first).unwrap();
    write_trace_csv(
        &run_selfplay(&game, &path, &config).unwrap(),
        true,
        &mut second,
    )
    .unwrap();
    assert!(!first.is_empty());
    assert_eq!(first, second);
}

/// Under the exact gradient, the bottom ladder action is beaten by the next
/// rung against every opponent play, so its score falls further behind every
/// round and its odds against that rung must shrink monotonically. The raw
/// weight itself is allowed a brief rise while the third action (which fares
/// even worse early on) sheds mass onto both survivors of the comparison; by
/// the end of the window it has to have collapsed well below uniform.
#[test]
fn dominated_action_loses_ground_under_exact_gradient() {
    let (game, path) = ladder(3, 9.0);
    let config = RunConfig {
        algo: "ew:eta0=1,b=0.5".parse().unwrap(),
        horizon: 100,
        seed: 0,
        noise_std: 0.0,
        feedback: FeedbackMode::ExactGradient,
        checkpoints: CheckpointSchedule::Every(1),
        record_distributions: true,
    };
    let trace = run_selfplay(&game, &path, &config).unwrap();
    assert_eq!(trace.checkpoints.len(), 101);
    for pair in trace.checkpoints.windows(2) {
        let odds = |cp: &domlab::simulate::Checkpoint| {
            cp.distributions[0][0] / cp.distributions[0][1]
        };
        assert!(
            odds(&pair[1]) < odds(&pair[0]),
            "round {}: odds {} !< {}",
            pair[1].round,
            odds(&pair[1]),
            odds(&pair[0])
        );
    }
    // The column player's bottom action is only dominated once the row
    // player's is gone, so within this window it still holds most of B's
    // mass; only the statically dominated row action has to collapse.
    let last = trace.checkpoints.last().unwrap();
    assert!(last.distributions[0][0] < 0.15);
}

proptest! {
    #[test]
    fn checkpoint_times_are_canonical(
        horizon in 1u64..5000,
        step in 1u64..400,
        explicit in prop::collection::vec(0u64..6000, 0..12),
    ) {
        for schedule in [
            CheckpointSchedule::LogSpaced,
            CheckpointSchedule::Every(step),
            CheckpointSchedule::Explicit(explicit.clone()),
        ] {
            let times = schedule.times(horizon);
            prop_assert!(times.first() == Some(&0));
            prop_assert!(times.last() == Some(&horizon));
            prop_assert!(times.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(times.iter().all(|&t| t <= horizon));
        }
        // Every explicit in-range request is honored.
        let times = CheckpointSchedule::Explicit(explicit.clone()).times(horizon);
        for t in explicit {
            if t <= horizon {
                prop_assert!(times.contains(&t));
            }
        }
    }
}
