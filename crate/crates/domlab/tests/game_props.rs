//! Cross-checks of the game layer: payoff oracles, exact expectations
//! against brute force, and serialization stability.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use domlab::{Game, MixedStrategy};

#[test]
fn dir_ladder_payoffs_and_scale() {
    // K = 4, c = 8: scale is max{K, c} = 8.
    let game = Game::dir(4, 8.0).unwrap();
    assert_eq!(game.payoff_bound(), 1.0);
    // Demanding one above the opponent is rewarded, two above is punished.
    assert_eq!(game.deterministic_payoff(&[1, 0], 0).unwrap(), 2.0 / 8.0);
    assert_eq!(game.deterministic_payoff(&[2, 0], 0).unwrap(), -1.0);
    // The second mover may only match, not exceed.
    assert_eq!(game.deterministic_payoff(&[1, 1], 1).unwrap(), 2.0 / 8.0);
    assert_eq!(game.deterministic_payoff(&[1, 2], 1).unwrap(), -1.0);
    // Mutual top demand pays both.
    assert_eq!(game.deterministic_payoff(&[3, 3], 0).unwrap(), 4.0 / 8.0);
    assert_eq!(game.deterministic_payoff(&[3, 3], 1).unwrap(), 4.0 / 8.0);
}

#[test]
fn bimatrix_layout_matches_row_column_convention() {
    let game = Game::bimatrix(
        vec![vec![3.0, 0.0], vec![1.0, 1.0], vec![0.0, 3.0]],
        vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]],
    )
    .unwrap();
    assert_eq!(game.num_actions(0), 3);
    assert_eq!(game.num_actions(1), 2);
    assert_eq!(game.deterministic_payoff(&[2, 0], 0).unwrap(), 0.0);
    assert_eq!(game.deterministic_payoff(&[2, 1], 0).unwrap(), 3.0);
    assert_eq!(game.deterministic_payoff(&[1, 1], 1).unwrap(), 4.0);
}

fn small_game_strategy() -> impl Strategy<Value = Game> {
    (2usize..4, 2usize..4)
        .prop_flat_map(|(ka, kb)| {
            let cells = ka * kb * 2;
            (
                Just((ka, kb)),
                prop::collection::vec(-1.0f64..1.0, cells..=cells),
            )
        })
        .prop_map(|((ka, kb), payoffs)| Game::tensor(vec![ka, kb], payoffs).unwrap())
}

fn strategy_for(k: usize) -> impl Strategy<Value = MixedStrategy> {
    prop::collection::vec(1e-4f64..1.0, k..=k).prop_map(|raw| {
        let total: f64 = raw.iter().sum();
        MixedStrategy::new(raw.into_iter().map(|w| w / total).collect()).unwrap()
    })
}

proptest! {
    #[test]
    fn expected_payoff_is_profile_average(game in small_game_strategy(), seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let strategies: Vec<MixedStrategy> = (0..2)
            .map(|n| {
                let k = game.num_actions(n);
                let raw: Vec<f64> = (0..k).map(|_| rand::Rng::random::<f64>(&mut rng) + 1e-6).collect();
                let total: f64 = raw.iter().sum();
                MixedStrategy::new(raw.into_iter().map(|w| w / total).collect()).unwrap()
            })
            .collect();
        for player in 0..2 {
            let expected = game.expected_payoff(player, &strategies).unwrap();
            let mut brute = 0.0;
            for a in 0..game.num_actions(0) {
                for b in 0..game.num_actions(1) {
                    brute += strategies[0].probs()[a]
                        * strategies[1].probs()[b]
                        * game.deterministic_payoff(&[a, b], player).unwrap();
                }
            }
            prop_assert!((expected - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn action_payoff_vector_matches_conditional_expectations(
        game in small_game_strategy(),
        sa in strategy_for(3),
        sb in strategy_for(3),
    ) {
        // Clip the sampled strategies to the game's action counts.
        let fit = |s: &MixedStrategy, k: usize| {
            let raw: Vec<f64> = s.probs().iter().take(k).copied().collect();
            let total: f64 = raw.iter().sum();
            MixedStrategy::new(raw.into_iter().map(|w| w / total).collect()).unwrap()
        };
        let strategies = vec![fit(&sa, game.num_actions(0)), fit(&sb, game.num_actions(1))];
        for player in 0..2 {
            let vector = game.action_payoff_vector(player, &strategies).unwrap();
            prop_assert_eq!(vector.len(), game.num_actions(player));
            // Pinning a pure action must agree with the vector entry.
            for (action, &value) in vector.iter().enumerate() {
                let mut pinned = strategies.clone();
                pinned[player] =
                    MixedStrategy::point_mass(game.num_actions(player), action).unwrap();
                let direct = game.expected_payoff(player, &pinned).unwrap();
                prop_assert!((value - direct).abs() < 1e-12);
            }
            // And the full expectation is the mix of the vector.
            let mixed: f64 = vector
                .iter()
                .zip(strategies[player].probs())
                .map(|(v, p)| v * p)
                .sum();
            let direct = game.expected_payoff(player, &strategies).unwrap();
            prop_assert!((mixed - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn mixed_strategy_sampling_respects_support(seed in 0u64..500) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = MixedStrategy::new(vec![0.0, 0.7, 0.0, 0.3]).unwrap();
        for _ in 0..50 {
            let a = dist.sample(&mut rng);
            prop_assert!(a == 1 || a == 3);
        }
    }
}

#[test]
fn serialization_survives_round_trip_for_all_kinds() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let games = vec![
        Game::dir(5, 11.0).unwrap(),
        Game::lemons(domlab::LemonsParams {
            num_sellers: 4,
            qualities: vec![3.0, 4.0, 5.0, 6.0],
            price_set: vec![3.0, 4.0, 5.0, 6.0],
            listing_cost: 1.5,
            buyer_multiplier: 1.2,
            quality_noise_std: 0.0,
        })
        .unwrap(),
        Game::random(&[3, 2], &mut rng).unwrap(),
    ];
    for game in games {
        let text = serde_json::to_string(&game).unwrap();
        let back: Game = serde_json::from_str(&text).unwrap();
        assert_eq!(game, back);
        // A second trip produces identical bytes: the format is stable.
        assert_eq!(text, serde_json::to_string(&back).unwrap());
    }
}

#[test]
fn deterministic_games_ignore_sampling_randomness() {
    let game = Game::dir(3, 9.0).unwrap();
    let mut r1 = ChaCha8Rng::seed_from_u64(1);
    let mut r2 = ChaCha8Rng::seed_from_u64(2);
    assert_eq!(
        game.sample_payoffs(&[1, 2], &mut r1).unwrap(),
        game.sample_payoffs(&[1, 2], &mut r2).unwrap()
    );
    assert_eq!(
        game.sample_payoffs(&[1, 2], &mut r1).unwrap(),
        game.deterministic_payoffs(&[1, 2]).unwrap()
    );
}
