//! Structural properties of the elimination solver: the ladder-game grid,
//! certificate auditing, and invariance under action relabeling.

use proptest::prelude::*;

use domlab::iesds::{verify_certificates, STRICTNESS_TOL};
use domlab::{iesds, lemons_analytic_path, Game, LemonsParams};

/// The full ladder grid: K actions per side eliminate one action per
/// iteration, the first mover first, ending at the top rung.
#[test]
fn ladder_grid_structure() {
    for k in 3usize..=10 {
        for c in [2.0 * k as f64, 3.0 * (k * k) as f64] {
            let game = Game::dir(k, c).unwrap();
            let path = iesds(&game).unwrap();
            assert_eq!(path.elimination_length(), 2 * k - 2, "K={k} c={c}");
            assert_eq!(path.survivor_profile(), Some(vec![k - 1, k - 1]));
            for (idx, round) in path.rounds.iter().enumerate() {
                let expected = if idx % 2 == 0 {
                    (0, idx / 2)
                } else {
                    (1, idx / 2)
                };
                assert_eq!(round.removed, vec![expected], "K={k} c={c} round {idx}");
            }
            for i in 0..k - 1 {
                assert_eq!(path.distance(0, i).unwrap(), 2 * i);
                assert_eq!(path.distance(1, i).unwrap(), 2 * i + 1);
            }
            assert_eq!(path.distance(0, k - 1).unwrap(), 2 * k - 2);
            assert_eq!(path.distance(1, k - 1).unwrap(), 2 * k - 2);
            let delta = 1.0 / (k as f64).max(c);
            assert!((path.gap.unwrap() - delta).abs() < 1e-12, "K={k} c={c}");
            verify_certificates(&game, &path).unwrap();
        }
    }
}

#[test]
fn certificates_have_margin_above_tolerance_and_disjoint_support() {
    let game = Game::dir(6, 14.0).unwrap();
    let path = iesds(&game).unwrap();
    for round in &path.rounds {
        for cert in &round.certificates {
            assert!(cert.margin > STRICTNESS_TOL);
            // The dominator never leans on the action it disqualifies.
            assert_eq!(cert.dominator.probs()[cert.dominated], 0.0);
        }
    }
}

#[test]
fn closed_form_lemons_path_matches_exact_solver_on_single_survivor_instance() {
    // Three unit-spaced sellers with listing cost 1.5: the market clears in
    // batches of two, and exactly one price survives, which keeps the exact
    // solver from adding a trailing price-vs-price iteration.
    let params = LemonsParams {
        num_sellers: 3,
        qualities: vec![2.5, 3.5, 4.5],
        price_set: vec![2.5, 3.5, 4.5],
        listing_cost: 1.5,
        buyer_multiplier: 1.2,
        quality_noise_std: 0.0,
    };
    let game = Game::lemons(params.clone()).unwrap();
    let analytic = lemons_analytic_path(&params).unwrap();
    let exact = iesds(&game).unwrap();
    assert_eq!(analytic.elimination_length(), exact.elimination_length());
    for (a, e) in analytic.rounds.iter().zip(&exact.rounds) {
        let mut a_sorted = a.removed.clone();
        let mut e_sorted = e.removed.clone();
        a_sorted.sort_unstable();
        e_sorted.sort_unstable();
        assert_eq!(a_sorted, e_sorted);
    }
    assert_eq!(analytic.survivors, exact.survivors);
    assert_eq!(analytic.distances, exact.distances);
}

fn permute_player0(game: &Game, perm: &[usize]) -> Game {
    let (ka, kb) = (game.num_actions(0), game.num_actions(1));
    let mut payoffs = vec![0.0; ka * kb * 2];
    for player in 0..2 {
        for a in 0..ka {
            for b in 0..kb {
                let value = game.deterministic_payoff(&[a, b], player).unwrap();
                payoffs[player * ka * kb + perm[a] * kb + b] = value;
            }
        }
    }
    Game::tensor(vec![ka, kb], payoffs).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Relabeling one player's actions relabels the elimination path and
    /// nothing else: distances, round count, and the dominance gap carry
    /// over through the permutation.
    #[test]
    fn elimination_is_invariant_under_relabeling(
        payoffs in prop::collection::vec(-1.0f64..1.0, 24..=24),
        swap in 0usize..6,
    ) {
        let game = Game::tensor(vec![3, 4], payoffs).unwrap();
        let perms = [
            [0usize, 1, 2], [0, 2, 1], [1, 0, 2],
            [1, 2, 0], [2, 0, 1], [2, 1, 0],
        ];
        let perm = perms[swap];
        let relabeled = permute_player0(&game, &perm);

        let original = iesds(&game).unwrap();
        let mapped = iesds(&relabeled).unwrap();

        prop_assert_eq!(original.elimination_length(), mapped.elimination_length());
        for a in 0..3 {
            prop_assert_eq!(
                original.distance(0, a).unwrap(),
                mapped.distance(0, perm[a]).unwrap()
            );
        }
        for b in 0..4 {
            prop_assert_eq!(
                original.distance(1, b).unwrap(),
                mapped.distance(1, b).unwrap()
            );
        }
        match (original.gap, mapped.gap) {
            (None, None) => {}
            (Some(g), Some(h)) => prop_assert!((g - h).abs() < 1e-9),
            other => prop_assert!(false, "gap mismatch {:?}", other),
        }
    }

    /// On arbitrary games the path is well-formed: rounds nonempty, nothing
    /// removed twice, survivors are the complement, and every certificate
    /// replays.
    #[test]
    fn random_games_produce_auditable_paths(
        payoffs in prop::collection::vec(-1.0f64..1.0, 24..=24),
    ) {
        let game = Game::tensor(vec![4, 3], payoffs).unwrap();
        let path = iesds(&game).unwrap();
        let mut seen = std::collections::HashSet::new();
        for round in &path.rounds {
            prop_assert!(!round.removed.is_empty());
            for &cut in &round.removed {
                prop_assert!(seen.insert(cut), "{cut:?} removed twice");
            }
        }
        for (player, k) in [(0usize, 4usize), (1, 3)] {
            for a in 0..k {
                let removed = seen.contains(&(player, a));
                let surviving = path.survivors[player].contains(&a);
                prop_assert!(removed != surviving);
            }
            prop_assert!(!path.survivors[player].is_empty());
        }
        verify_certificates(&game, &path).unwrap();

        // Cumulative sets grow by exactly each round's removals.
        let sets = path.cumulative_sets();
        let mut expected = 0;
        for (set, round) in sets.iter().zip(&path.rounds) {
            expected += round.removed.len();
            prop_assert_eq!(set.len(), expected);
        }
    }
}
