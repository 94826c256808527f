//! Iterated elimination of strictly dominated strategies.
//!
//! Dominance here always means strict dominance by a possibly mixed strategy,
//! certified by the max-margin LP in [`crate::lp`]. The solver uses the
//! simultaneous-maximal schedule: each iteration removes every action
//! certifiable against the surviving sets as they stood at the start of the
//! iteration. For strict dominance this schedule is order-independent and no
//! schedule can finish in fewer iterations, so the resulting path and the
//! per-action elimination distances are canonical.
//!
//! The lemons market game additionally has a closed-form path
//! ([`lemons_analytic_path`]) that avoids enumerating the exponentially many
//! seller profiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{next_profile, Game, LemonsParams, MixedStrategy};
use crate::lp::max_margin_mixture;

/// Margins at or below this are treated as ties, not strict dominance.
pub const STRICTNESS_TOL: f64 = 1e-9;

/// Proof that one action is strictly dominated.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DominanceCertificate {
    pub player: usize,
    pub dominated: usize,
    /// Mixture over the player's full action set; mass only on actions that
    /// were surviving when the certificate was issued.
    pub dominator: MixedStrategy,
    /// LP-optimal worst-case payoff advantage of the dominator, in the
    /// game's own payoff units.
    pub margin: f64,
}

/// One iteration of the elimination: the actions removed and their
/// certificates, index-aligned. Closed-form paths carry no certificates.
#[derive(Debug, Clone, Default)]
pub struct EliminationRound {
    pub removed: Vec<(usize, usize)>,
    pub certificates: Vec<DominanceCertificate>,
}

/// The full elimination record for one game.
#[derive(Debug, Clone)]
pub struct EliminationPath {
    pub rounds: Vec<EliminationRound>,
    /// Surviving actions per player, ascending.
    pub survivors: Vec<Vec<usize>>,
    /// Elimination distance per player per action: the number of whole
    /// iterations an action outlives (0 for the very first cut, the round
    /// count for survivors).
    pub distances: Vec<Vec<usize>>,
    /// Smallest certificate margin along the path; absent when the path is
    /// empty or was produced in closed form.
    pub gap: Option<f64>,
}

impl EliminationPath {
    /// Number of elimination iterations.
    pub fn elimination_length(&self) -> usize {
        self.rounds.len()
    }

    /// The nested cumulative eliminated sets, one per iteration.
    pub fn cumulative_sets(&self) -> Vec<Vec<(usize, usize)>> {
        let mut acc: Vec<(usize, usize)> = Vec::new();
        let mut out = Vec::with_capacity(self.rounds.len());
        for round in &self.rounds {
            acc.extend(round.removed.iter().copied());
            out.push(acc.clone());
        }
        out
    }

    /// True when every player is left with exactly one action.
    pub fn is_dominance_solvable(&self) -> bool {
        self.survivors.iter().all(|s| s.len() == 1)
    }

    /// The unique surviving profile, when the game is dominance solvable.
    pub fn survivor_profile(&self) -> Option<Vec<usize>> {
        if self.is_dominance_solvable() {
            Some(self.survivors.iter().map(|s| s[0]).collect())
        } else {
            None
        }
    }

    /// Elimination distance of one action; see the `distances` field.
    pub fn distance(&self, player: usize, action: usize) -> Result<usize> {
        self.distances
            .get(player)
            .and_then(|row| row.get(action))
            .copied()
            .ok_or_else(|| Error::IndexOutOfRange(format!("player {player} action {action}")))
    }

    fn from_rounds(
        rounds: Vec<EliminationRound>,
        action_counts: &[usize],
        gap: Option<f64>,
    ) -> EliminationPath {
        let length = rounds.len();
        let mut distances: Vec<Vec<usize>> =
            action_counts.iter().map(|&k| vec![length; k]).collect();
        let mut survivors: Vec<Vec<usize>> = action_counts
            .iter()
            .map(|&k| (0..k).collect::<Vec<_>>())
            .collect();
        for (idx, round) in rounds.iter().enumerate() {
            for &(n, a) in &round.removed {
                distances[n][a] = idx;
                survivors[n].retain(|&x| x != a);
            }
        }
        EliminationPath {
            rounds,
            survivors,
            distances,
            gap,
        }
    }
}

fn require_exact_pure(game: &Game) -> Result<()> {
    if !game.is_deterministic() {
        return Err(Error::Capability(
            "dominance analysis needs deterministic payoffs".into(),
        ));
    }
    Ok(())
}

/// Payoff rows of `actions` for `player` against every surviving opponent
/// profile, enumerated mixed-radix (later players vary fastest).
fn payoff_rows(
    game: &Game,
    player: usize,
    actions: &[usize],
    surviving: &[Vec<usize>],
) -> Result<Vec<Vec<f64>>> {
    let players = game.num_players();
    let mut counts: Vec<usize> = surviving.iter().map(|s| s.len()).collect();
    counts[player] = 1;
    let needed: u128 = counts.iter().map(|&k| k as u128).product();
    if needed > game.enumeration_limit() as u128 {
        return Err(Error::EnumerationLimit {
            needed,
            limit: game.enumeration_limit(),
        });
    }

    let mut rows = vec![Vec::with_capacity(needed as usize); actions.len()];
    let mut cursor = vec![0usize; players];
    let mut profile = vec![0usize; players];
    loop {
        for n in 0..players {
            if n != player {
                profile[n] = surviving[n][cursor[n]];
            }
        }
        for (row, &a) in rows.iter_mut().zip(actions) {
            profile[player] = a;
            row.push(game.deterministic_payoff(&profile, player)?);
        }
        if !next_profile(&mut cursor, &counts) {
            break;
        }
    }
    Ok(rows)
}

/// Searches for a mixed strategy over the player's surviving actions that
/// strictly dominates `action`, against every surviving opponent profile.
/// Returns the max-margin certificate, or `None` when the optimal margin is
/// within the strictness tolerance.
pub fn find_dominator(
    game: &Game,
    player: usize,
    action: usize,
    surviving: &[Vec<usize>],
) -> Result<Option<DominanceCertificate>> {
    require_exact_pure(game)?;
    if player >= game.num_players() {
        return Err(Error::IndexOutOfRange(format!("player {player}")));
    }
    if !surviving[player].contains(&action) {
        return Err(Error::IndexOutOfRange(format!(
            "action {action} is not surviving for player {player}"
        )));
    }
    // Any optimal mixture puts zero weight on the dominated action itself
    // (shifting its weight onto the rest only widens the margin), so the LP
    // runs over the other surviving actions.
    let support: Vec<usize> = surviving[player]
        .iter()
        .copied()
        .filter(|&a| a != action)
        .collect();
    if support.is_empty() {
        return Ok(None);
    }
    let mut with_target = support.clone();
    with_target.push(action);
    let mut rows = payoff_rows(game, player, &with_target, surviving)?;
    let target = rows.pop().expect("target row present");

    let solution = max_margin_mixture(&rows, &target)?;
    if solution.margin <= STRICTNESS_TOL {
        return Ok(None);
    }
    let mut dominator = vec![0.0; game.num_actions(player)];
    for (&a, &w) in support.iter().zip(&solution.weights) {
        dominator[a] = w;
    }
    Ok(Some(DominanceCertificate {
        player,
        dominated: action,
        dominator: MixedStrategy::new(dominator)?,
        margin: solution.margin,
    }))
}

/// Pure-strategy dominance scan: the best single surviving action that
/// strictly dominates `action`, with its worst-case margin. Exists mainly to
/// demonstrate where pure dominance is weaker than mixed dominance.
pub fn find_pure_dominator(
    game: &Game,
    player: usize,
    action: usize,
    surviving: &[Vec<usize>],
) -> Result<Option<(usize, f64)>> {
    require_exact_pure(game)?;
    let candidates: Vec<usize> = surviving[player]
        .iter()
        .copied()
        .filter(|&a| a != action)
        .collect();
    if candidates.is_empty() {
        return Ok(None);
    }
    let mut with_target = candidates.clone();
    with_target.push(action);
    let mut rows = payoff_rows(game, player, &with_target, surviving)?;
    let target = rows.pop().expect("target row present");
    let mut best: Option<(usize, f64)> = None;
    for (&a, row) in candidates.iter().zip(&rows) {
        let margin = row
            .iter()
            .zip(&target)
            .map(|(r, t)| r - t)
            .fold(f64::INFINITY, f64::min);
        if margin > STRICTNESS_TOL && best.map_or(true, |(_, m)| margin > m) {
            best = Some((a, margin));
        }
    }
    Ok(best)
}

/// Runs iterated elimination to a fixed point and returns the full path.
pub fn iesds(game: &Game) -> Result<EliminationPath> {
    require_exact_pure(game)?;
    let counts = game.action_counts();
    let mut surviving: Vec<Vec<usize>> = counts.iter().map(|&k| (0..k).collect()).collect();
    let mut rounds: Vec<EliminationRound> = Vec::new();

    loop {
        let snapshot = surviving.clone();
        let mut round = EliminationRound::default();
        for player in 0..counts.len() {
            if snapshot[player].len() < 2 {
                continue;
            }
            for &action in &snapshot[player] {
                if let Some(cert) = find_dominator(game, player, action, &snapshot)? {
                    round.removed.push((player, action));
                    round.certificates.push(cert);
                }
            }
        }
        if round.removed.is_empty() {
            break;
        }
        for &(n, a) in &round.removed {
            surviving[n].retain(|&x| x != a);
        }
        // An action that is payoff-maximal against some surviving profile
        // cannot be dominated, so at least one action per player remains.
        debug_assert!(surviving.iter().all(|s| !s.is_empty()));
        rounds.push(round);
    }

    let gap = rounds
        .iter()
        .flat_map(|r| r.certificates.iter().map(|c| c.margin))
        .fold(None, |acc: Option<f64>, m| {
            Some(acc.map_or(m, |a| a.min(m)))
        });
    Ok(EliminationPath::from_rounds(rounds, &counts, gap))
}

/// Replays every certificate in `path` against the reconstructed surviving
/// sets and checks the recorded margins, set nesting, and terminal stability.
/// Intended for tests and for auditing solver output.
pub fn verify_certificates(game: &Game, path: &EliminationPath) -> Result<()> {
    require_exact_pure(game)?;
    let counts = game.action_counts();
    let mut surviving: Vec<Vec<usize>> = counts.iter().map(|&k| (0..k).collect()).collect();

    for (idx, round) in path.rounds.iter().enumerate() {
        if round.removed.is_empty() {
            return Err(Error::Domain(format!("iteration {idx} removed nothing")));
        }
        if round.removed.len() != round.certificates.len() {
            return Err(Error::Domain(format!(
                "iteration {idx}: {} removals, {} certificates",
                round.removed.len(),
                round.certificates.len()
            )));
        }
        for (&(player, action), cert) in round.removed.iter().zip(&round.certificates) {
            if cert.player != player || cert.dominated != action {
                return Err(Error::Domain(format!(
                    "iteration {idx}: certificate does not match removal ({player},{action})"
                )));
            }
            let support: Vec<usize> = cert
                .dominator
                .probs()
                .iter()
                .enumerate()
                .filter(|(_, &w)| w > 0.0)
                .map(|(a, _)| a)
                .collect();
            if support.iter().any(|a| !surviving[player].contains(a)) {
                return Err(Error::Domain(format!(
                    "iteration {idx}: dominator of ({player},{action}) uses removed actions"
                )));
            }
            let mut actions = support.clone();
            actions.push(action);
            let mut rows = payoff_rows(game, player, &actions, &surviving)?;
            let target = rows.pop().expect("target row");
            let weights: Vec<f64> = support
                .iter()
                .map(|&a| cert.dominator.probs()[a])
                .collect();
            let mut replayed = f64::INFINITY;
            for c in 0..target.len() {
                let mixed: f64 = rows.iter().zip(&weights).map(|(r, w)| w * r[c]).sum();
                replayed = replayed.min(mixed - target[c]);
            }
            if replayed < cert.margin - STRICTNESS_TOL {
                return Err(Error::Domain(format!(
                    "iteration {idx}: ({player},{action}) margin replays at {replayed}, \
                     certificate claims {}",
                    cert.margin
                )));
            }
            if cert.margin <= STRICTNESS_TOL {
                return Err(Error::Domain(format!(
                    "iteration {idx}: certificate margin {} is not strict",
                    cert.margin
                )));
            }
        }
        for &(n, a) in &round.removed {
            if !surviving[n].contains(&a) {
                return Err(Error::Domain(format!(
                    "iteration {idx}: ({n},{a}) eliminated twice"
                )));
            }
            surviving[n].retain(|&x| x != a);
        }
    }
    if surviving != path.survivors {
        return Err(Error::Domain("survivors do not match the rounds".into()));
    }
    // Terminal stability: no surviving action admits a certificate. Only
    // checked when the final position is cheap to scan.
    let needed: u128 = surviving.iter().map(|s| s.len() as u128).product();
    if needed <= game.enumeration_limit() as u128 {
        for player in 0..counts.len() {
            for &action in &surviving[player] {
                if find_dominator(game, player, action, &surviving)?.is_some() {
                    return Err(Error::Domain(format!(
                        "player {player} action {action} is still dominated at termination"
                    )));
                }
            }
        }
    }
    Ok(())
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// The closed-form elimination path of the lemons market.
///
/// Requires the noise-free game, a price grid containing every quality with
/// the top quality as its maximum, and a uniform elimination width `k`
/// satisfying `q_i - q_{i-k} >= c_1 > q_i - q_{i-k+1}` wherever the indices
/// exist. Under those conditions the market unravels top-down: the costliest
/// `k` sellers leave, the buyer drops the prices that only they traded at,
/// and so on, for `2*ceil(N/k) - 1` iterations in total.
pub fn lemons_analytic_path(params: &LemonsParams) -> Result<EliminationPath> {
    let n = params.num_sellers;
    let q = &params.qualities;
    let prices = &params.price_set;
    if params.quality_noise_std != 0.0 {
        return Err(Error::AnalyticPathUnavailable(
            "the closed form describes the noise-free market".into(),
        ));
    }
    if q.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::AnalyticPathUnavailable(
            "qualities must be strictly increasing".into(),
        ));
    }
    for quality in q {
        if !prices.iter().any(|p| close(*p, *quality)) {
            return Err(Error::AnalyticPathUnavailable(format!(
                "price set must contain every quality; {quality} is missing"
            )));
        }
    }
    if !close(*prices.last().unwrap(), q[n - 1]) {
        return Err(Error::AnalyticPathUnavailable(
            "the maximum price must equal the top quality".into(),
        ));
    }

    // Uniform elimination width: in each round, exactly the k most expensive
    // remaining sellers are priced out. At most one k can satisfy both
    // inequalities (they contradict for nested widths), so take the first.
    let c1 = params.listing_cost;
    let width = (1..=n).find(|&k| {
        let upper = (k + 1..=n).all(|i| q[i - 1] - q[i - 1 - k] >= c1);
        let lower = (k..=n).all(|i| c1 > q[i - 1] - q[i - k]);
        upper && lower
    });
    let Some(k) = width else {
        return Err(Error::AnalyticPathUnavailable(
            "no uniform elimination width matches the listing cost".into(),
        ));
    };

    let stages = n.div_ceil(k); // seller rounds
    let mut rounds = Vec::with_capacity(2 * stages - 1);
    let mut price_alive = vec![true; prices.len()];
    for j in 0..stages {
        if j > 0 {
            // Buyer round 2j: every surviving price above the new top
            // quality q_{n-jk} pays more without buying anything extra.
            let boundary = q[n - j * k - 1];
            let mut removed = Vec::new();
            for (idx, &p) in prices.iter().enumerate() {
                if price_alive[idx] && p > boundary && !close(p, boundary) {
                    price_alive[idx] = false;
                    removed.push((0usize, idx));
                }
            }
            debug_assert!(!removed.is_empty());
            rounds.push(EliminationRound {
                removed,
                certificates: Vec::new(),
            });
        }
        // Seller round 2j+1: sellers in (n-(j+1)k, n-jk] can no longer cover
        // the listing cost at any surviving price, so "list" goes.
        let hi = n - j * k; // inclusive, 1-based
        let lo = n.saturating_sub((j + 1) * k) + 1;
        let removed: Vec<(usize, usize)> = (lo..=hi).map(|i| (i, 1usize)).collect();
        debug_assert!(!removed.is_empty());
        rounds.push(EliminationRound {
            removed,
            certificates: Vec::new(),
        });
    }

    let mut counts = vec![2usize; n + 1];
    counts[0] = prices.len();
    Ok(EliminationPath::from_rounds(rounds, &counts, None))
}
