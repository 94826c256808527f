//! Correlated-equilibrium objects: joint distributions, the deviation gap,
//! the staircase ε-CE construction for DIR games, welfare, Nash checks, and
//! the variational-stability witness.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::game::Game;

/// A sparse joint distribution over action profiles.
///
/// Profiles are stored 0-based in memory and 1-based on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    support: Vec<(Vec<usize>, f64)>,
}

impl JointDistribution {
    pub fn new(support: Vec<(Vec<usize>, f64)>) -> Result<JointDistribution> {
        if support.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        let players = support[0].0.len();
        let mut total = 0.0;
        for (i, (profile, p)) in support.iter().enumerate() {
            if profile.len() != players {
                return Err(Error::InvalidDistribution(format!(
                    "profile {i} has {} entries, expected {players}",
                    profile.len()
                )));
            }
            if !p.is_finite() || *p < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "probability {p} at entry {i}"
                )));
            }
            total += p;
            if support[..i].iter().any(|(other, _)| other == profile) {
                return Err(Error::InvalidDistribution(format!(
                    "profile {profile:?} appears twice"
                )));
            }
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(JointDistribution { support })
    }

    /// All probability on a single profile.
    pub fn point_mass(profile: Vec<usize>) -> Result<JointDistribution> {
        JointDistribution::new(vec![(profile, 1.0)])
    }

    pub fn support(&self) -> &[(Vec<usize>, f64)] {
        &self.support
    }

    pub fn num_players(&self) -> usize {
        self.support[0].0.len()
    }

    /// Probability of one profile (0 when outside the support).
    pub fn prob(&self, profile: &[usize]) -> f64 {
        self.support
            .iter()
            .find(|(q, _)| q == profile)
            .map_or(0.0, |(_, p)| *p)
    }

    /// Checks every profile against a game's action ranges.
    pub fn check_against(&self, game: &Game) -> Result<()> {
        if self.num_players() != game.num_players() {
            return Err(Error::InvalidDistribution(format!(
                "distribution is over {} players, game has {}",
                self.num_players(),
                game.num_players()
            )));
        }
        for (profile, _) in &self.support {
            for (n, &a) in profile.iter().enumerate() {
                if a >= game.num_actions(n) {
                    return Err(Error::InvalidDistribution(format!(
                        "profile {profile:?}: action {a} out of range for player {n}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct SupportEntry {
    profile: Vec<usize>,
    p: f64,
}

#[derive(Serialize, Deserialize)]
struct DistributionFile {
    support: Vec<SupportEntry>,
}

impl Serialize for JointDistribution {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let file = DistributionFile {
            support: self
                .support
                .iter()
                .map(|(profile, p)| SupportEntry {
                    profile: profile.iter().map(|a| a + 1).collect(),
                    p: *p,
                })
                .collect(),
        };
        file.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for JointDistribution {
    fn deserialize<D: Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<JointDistribution, D::Error> {
        let file = DistributionFile::deserialize(deserializer)?;
        let mut support = Vec::with_capacity(file.support.len());
        for entry in file.support {
            let mut profile = Vec::with_capacity(entry.profile.len());
            for a in entry.profile {
                if a == 0 {
                    return Err(D::Error::custom("profiles are 1-based; found action 0"));
                }
                profile.push(a - 1);
            }
            support.push((profile, entry.p));
        }
        JointDistribution::new(support).map_err(D::Error::custom)
    }
}

fn require_exact(game: &Game) -> Result<()> {
    if !game.is_deterministic() {
        return Err(Error::Capability(
            "equilibrium analysis needs deterministic payoffs".into(),
        ));
    }
    Ok(())
}

/// Maximum benefit any player can gain by deviating from a recommendation.
///
/// For each player and each recommended action with positive marginal mass,
/// considers every alternative action played whenever that recommendation
/// arrives. The result can be negative; `pi` is an ε-CE exactly when the gap
/// is at most ε.
pub fn epsilon_ce_gap(game: &Game, pi: &JointDistribution) -> Result<f64> {
    require_exact(game)?;
    pi.check_against(game)?;
    let mut gap = f64::NEG_INFINITY;
    let mut scratch = Vec::new();
    for n in 0..game.num_players() {
        let k = game.num_actions(n);
        // benefit[a][a'] accumulates pi(a, rest) * (u(a', rest) - u(a, rest))
        let mut benefit = vec![vec![0.0f64; k]; k];
        let mut mass = vec![0.0f64; k];
        for (profile, p) in pi.support() {
            let a = profile[n];
            mass[a] += p;
            scratch.clear();
            scratch.extend_from_slice(profile);
            let base = game.deterministic_payoff(&scratch, n)?;
            for alt in 0..k {
                if alt == a {
                    continue;
                }
                scratch[n] = alt;
                let u = game.deterministic_payoff(&scratch, n)?;
                benefit[a][alt] += p * (u - base);
            }
            scratch[n] = a;
        }
        for a in 0..k {
            if mass[a] <= 0.0 {
                continue;
            }
            for alt in 0..k {
                if alt != a {
                    gap = gap.max(benefit[a][alt]);
                }
            }
        }
    }
    if gap == f64::NEG_INFINITY {
        // Every player has a single action: nothing to deviate to.
        gap = 0.0;
    }
    Ok(gap)
}

/// Total expected payoff across players under `pi`.
pub fn welfare(game: &Game, pi: &JointDistribution) -> Result<f64> {
    require_exact(game)?;
    pi.check_against(game)?;
    let mut total = 0.0;
    for (profile, p) in pi.support() {
        let payoffs = game.deterministic_payoffs(profile)?;
        total += p * payoffs.iter().sum::<f64>();
    }
    Ok(total)
}

/// Builds the low-welfare ε-correlated equilibrium of a DIR game.
///
/// Probability mass sits on the staircase `(1,1),(2,1),(2,2),(3,2),…`
/// (1-based actions): step weights grow geometrically at the threat-cost
/// rate until the remaining mass is exhausted at some step `k`, which exists
/// whenever `eps` is not too small relative to the full staircase sum.
pub fn construct_dir_epsilon_ce(
    num_actions: usize,
    threat_cost: f64,
    eps: f64,
) -> Result<JointDistribution> {
    let game = Game::dir(num_actions, threat_cost)?;
    let scale = game.as_dir().expect("dir game").scale();
    if threat_cost <= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "need threat cost > 1 for the geometric staircase; got {threat_cost}"
        )));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("need eps > 0; got {eps}")));
    }

    let max_step = 2 * num_actions - 1;
    // Find the first step where the cumulative geometric mass
    // eps * scale * (1 + c + ... + c^(k-1)) reaches 1. The running term
    // cannot overflow: it stops growing the moment the total crosses 1.
    let mut term = eps * scale; // eps * scale * c^(i-1)
    let mut below = 0.0; // cumulative mass strictly before the current step
    let mut step = None;
    for i in 1..=max_step {
        if below + term >= 1.0 - 1e-12 {
            step = Some(i);
            break;
        }
        below += term;
        term *= threat_cost;
    }
    let Some(k) = step else {
        return Err(Error::InvalidParameter(format!(
            "eps = {eps} too small: need 1/eps <= scale * sum_{{i=1}}^{{{max_step}}} c^(i-1) \
             with scale = {scale}, c = {threat_cost}"
        )));
    };

    let mut support = Vec::with_capacity(k);
    let mut weight = eps * scale;
    let mut used = 0.0;
    for i in 1..=k {
        let delta = if i == k { 1.0 - used } else { weight };
        // 1-based staircase step i: odd steps sit on the diagonal, even
        // steps have the first player one action ahead.
        let (a, b) = if i % 2 == 1 {
            ((i + 1) / 2, (i + 1) / 2)
        } else {
            (i / 2 + 1, i / 2)
        };
        support.push((vec![a - 1, b - 1], delta));
        used += weight;
        weight *= threat_cost;
    }
    JointDistribution::new(support)
}

/// Checks a pure profile for Nash stability.
///
/// Returns whether no player has a strictly improving unilateral deviation,
/// together with the worst-case slack `u(played) - u(best deviation)` over
/// all players (infinite when nobody has an alternative action).
pub fn verify_ne(game: &Game, profile: &[usize]) -> Result<(bool, f64)> {
    require_exact(game)?;
    if profile.len() != game.num_players() {
        return Err(Error::IndexOutOfRange(format!(
            "profile has {} entries, game has {} players",
            profile.len(),
            game.num_players()
        )));
    }
    let mut slack = f64::INFINITY;
    let mut scratch = profile.to_vec();
    for n in 0..game.num_players() {
        let a = profile[n];
        if a >= game.num_actions(n) {
            return Err(Error::IndexOutOfRange(format!(
                "action {a} out of range for player {n}"
            )));
        }
        let base = game.deterministic_payoff(profile, n)?;
        for alt in 0..game.num_actions(n) {
            if alt == a {
                continue;
            }
            scratch[n] = alt;
            let u = game.deterministic_payoff(&scratch, n)?;
            slack = slack.min(base - u);
        }
        scratch[n] = a;
    }
    Ok((slack >= 0.0, slack))
}

/// Evaluates the variational-inequality form at the symmetric pure point
/// `(i, i)` of a DIR game, measured against the equilibrium `(K, K)`:
/// the payoff field dotted with the displacement, summed over both players.
/// Positive values witness that no global variational inequality can hold.
pub fn variational_witness(num_actions: usize, threat_cost: f64, i: usize) -> Result<f64> {
    let game = Game::dir(num_actions, threat_cost)?;
    if i < 1 || i >= num_actions {
        return Err(Error::InvalidParameter(format!(
            "witness point needs 1 <= i <= K-1; got i = {i}, K = {num_actions}"
        )));
    }
    let a = i - 1; // 0-based
    let eq = num_actions - 1;
    // Player 0: payoff vector against opponent fixed at i, dotted with
    // e_i - e_K. Player 1 symmetrically with its own deviation slot.
    let part0 =
        game.deterministic_payoff(&[a, a], 0)? - game.deterministic_payoff(&[eq, a], 0)?;
    let part1 =
        game.deterministic_payoff(&[a, a], 1)? - game.deterministic_payoff(&[a, eq], 1)?;
    Ok(part0 + part1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(support: Vec<(Vec<usize>, f64)>) -> JointDistribution {
        JointDistribution::new(support).unwrap()
    }

    #[test]
    fn gap_point_mass_on_equilibrium_is_negative() {
        let g = Game::dir(3, 9.0).unwrap();
        let pi = JointDistribution::point_mass(vec![2, 2]).unwrap();
        let gap = epsilon_ce_gap(&g, &pi).unwrap();
        assert!((gap - (-1.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn gap_two_point_staircase() {
        let g = Game::dir(3, 9.0).unwrap();
        let pi = dist(vec![(vec![0, 0], 0.1), (vec![1, 0], 0.9)]);
        let gap = epsilon_ce_gap(&g, &pi).unwrap();
        assert!((gap - 1.0 / 90.0).abs() < 1e-15, "gap {gap}");
    }

    #[test]
    fn gap_matches_brute_force() {
        let g = Game::dir(4, 8.0).unwrap();
        let pi = dist(vec![
            (vec![0, 0], 0.3),
            (vec![1, 0], 0.25),
            (vec![2, 3], 0.25),
            (vec![3, 3], 0.2),
        ]);
        let gap = epsilon_ce_gap(&g, &pi).unwrap();
        // Direct enumeration over players, recommendations, deviations.
        let mut expect = f64::NEG_INFINITY;
        for n in 0..2 {
            for rec in 0..4 {
                for alt in 0..4 {
                    if alt == rec {
                        continue;
                    }
                    let mut sum = 0.0;
                    let mut mass = 0.0;
                    for (profile, p) in pi.support() {
                        if profile[n] != rec {
                            continue;
                        }
                        mass += p;
                        let mut dev = profile.clone();
                        dev[n] = alt;
                        sum += p
                            * (g.deterministic_payoff(&dev, n).unwrap()
                                - g.deterministic_payoff(profile, n).unwrap());
                    }
                    if mass > 0.0 {
                        expect = expect.max(sum);
                    }
                }
            }
        }
        assert!((gap - expect).abs() < 1e-15);
    }

    #[test]
    fn construction_matches_hand_example() {
        let pi = construct_dir_epsilon_ce(3, 9.0, 1.0 / 90.0).unwrap();
        assert_eq!(pi.support().len(), 2);
        assert_eq!(pi.support()[0].0, vec![0, 0]);
        assert!((pi.support()[0].1 - 0.1).abs() < 1e-12);
        assert_eq!(pi.support()[1].0, vec![1, 0]);
        assert!((pi.support()[1].1 - 0.9).abs() < 1e-12);
        let g = Game::dir(3, 9.0).unwrap();
        let gap = epsilon_ce_gap(&g, &pi).unwrap();
        assert!((gap - 1.0 / 90.0).abs() < 1e-12);
        assert_eq!(pi.prob(&[2, 2]), 0.0);
        let w = welfare(&g, &pi).unwrap();
        assert!((w - 2.9 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn construction_rejects_bad_parameters() {
        assert!(matches!(
            construct_dir_epsilon_ce(3, 1.0, 0.01),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            construct_dir_epsilon_ce(3, 9.0, 0.0),
            Err(Error::InvalidParameter(_))
        ));
        // 1/eps beyond scale * sum of the full staircase: infeasible.
        assert!(matches!(
            construct_dir_epsilon_ce(3, 2.0, 1e-9),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn construction_survives_huge_exponents() {
        // c^(2K-1) overflows f64 comfortably; the search must still work.
        let pi = construct_dir_epsilon_ce(300, 50.0, 1e-9).unwrap();
        let total: f64 = pi.support().iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(pi.support().len() <= 8); // ceil(log_50(1e9)) steps
        assert_eq!(pi.prob(&[299, 299]), 0.0);
    }

    #[test]
    fn nash_checks() {
        let g = Game::dir(3, 9.0).unwrap();
        let (ok, slack) = verify_ne(&g, &[2, 2]).unwrap();
        assert!(ok);
        assert!((slack - 1.0 / 9.0).abs() < 1e-15);
        let (ok, _) = verify_ne(&g, &[0, 0]).unwrap();
        assert!(!ok);
    }

    #[test]
    fn witness_values() {
        let w1 = variational_witness(3, 9.0, 1).unwrap();
        assert!((w1 - 20.0 / 9.0).abs() < 1e-12);
        let w2 = variational_witness(3, 9.0, 2).unwrap();
        assert!((w2 - 10.0 / 9.0).abs() < 1e-12);
        assert!(matches!(
            variational_witness(3, 9.0, 3),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn distribution_serialization_is_one_based() {
        let pi = dist(vec![(vec![0, 1], 0.25), (vec![2, 0], 0.75)]);
        let json = serde_json::to_string(&pi).unwrap();
        assert!(json.contains("\"profile\":[1,2]"), "{json}");
        assert!(json.contains("\"profile\":[3,1]"), "{json}");
        let back: JointDistribution = serde_json::from_str(&json).unwrap();
        assert_eq!(back, pi);
        assert!(serde_json::from_str::<JointDistribution>(
            "{\"support\":[{\"profile\":[0,1],\"p\":1.0}]}"
        )
        .is_err());
    }

    #[test]
    fn invalid_distributions_rejected() {
        assert!(JointDistribution::new(vec![]).is_err());
        assert!(JointDistribution::new(vec![(vec![0], 0.5), (vec![0], 0.5)]).is_err());
        assert!(JointDistribution::new(vec![(vec![0], 0.9)]).is_err());
        assert!(JointDistribution::new(vec![(vec![0], -0.1), (vec![1], 1.1)]).is_err());
    }
}
