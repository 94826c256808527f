//! Normal-form games.
//!
//! Three kinds share one [`Game`] front end:
//!
//! * [`TensorGame`]: an explicit payoff tensor for any number of players.
//! * `Dir`: the two-player "demand with threats" family used throughout the
//!   crate as the canonical dominance-solvable benchmark.
//! * `Lemons`: a market game with one buyer posting a price and many sellers
//!   deciding whether to list a used car; the trade decision can be perturbed
//!   by quality observation noise, which makes payoffs stochastic.
//!
//! Deterministic games expose exact pure payoffs; stochastic ones are sampled
//! through an RNG the caller supplies. Exact expectation queries (needed by
//! the gradient-feedback simulator) are only available for the tensor and
//! `Dir` kinds and enumerate opponent profiles up to a configurable ceiling.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default ceiling on how many pure profiles an exact-expectation query may
/// enumerate before giving up with [`Error::EnumerationLimit`].
pub const DEFAULT_ENUMERATION_LIMIT: u64 = 1_000_000;

fn default_enumeration_limit() -> u64 {
    DEFAULT_ENUMERATION_LIMIT
}

/// Parameters of the two-player demand game `Dir(K, c)`.
///
/// Both players pick a demand level in `1..=K` (encoded 0-based). A player
/// whose demand stays within one step of the opponent's earns her demand,
/// anyone who overreaches pays the threat cost `c`. All payoffs are divided
/// by `max(K, c)` so the payoff bound is exactly 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirParams {
    /// Number of demand levels per player.
    #[serde(rename = "K")]
    pub num_actions: usize,
    /// Penalty for overreaching, before normalization.
    #[serde(rename = "c")]
    pub threat_cost: f64,
}

impl DirParams {
    /// The normalization constant `max(K, c)`.
    pub fn scale(&self) -> f64 {
        (self.num_actions as f64).max(self.threat_cost)
    }
}

/// Parameters of the lemons market game.
///
/// Player 0 is the buyer and picks a price from `price_set`; players
/// `1..=num_sellers` each decide to list (action 1) or stay out (action 0).
/// A listed car trades when its observed quality `q_i + noise` is at most the
/// posted price. Sellers pay `listing_cost` whenever they list and earn
/// `price - q_i` on a trade; the buyer always pays the posted price and
/// receives `buyer_multiplier` times the mean true quality of the cars she
/// bought (zero when nothing trades).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemonsParams {
    pub num_sellers: usize,
    /// True qualities `q_1 <= ... <= q_N`, one per seller.
    pub qualities: Vec<f64>,
    /// Prices the buyer may post, strictly increasing.
    pub price_set: Vec<f64>,
    /// Cost a seller pays for listing, traded or not.
    pub listing_cost: f64,
    /// Buyer's valuation multiplier on mean purchased quality.
    pub buyer_multiplier: f64,
    /// Standard deviation of the quality observation noise; 0 makes the game
    /// deterministic.
    pub quality_noise_std: f64,
}

impl LemonsParams {
    /// Number of players: the buyer plus every seller.
    pub fn num_players(&self) -> usize {
        self.num_sellers + 1
    }
}

/// A dense payoff tensor.
///
/// `payoffs` holds one block of `actions.iter().product()` entries per
/// player, flattened so that the **last** player's action varies fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorGame {
    pub players: usize,
    pub actions: Vec<usize>,
    pub payoffs: Vec<f64>,
}

impl TensorGame {
    fn flat_index(&self, profile: &[usize]) -> usize {
        let mut idx = 0;
        for (player, &a) in profile.iter().enumerate() {
            idx = idx * self.actions[player] + a;
        }
        idx
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GameKind {
    Tensor(TensorGame),
    Dir(DirParams),
    Lemons(LemonsParams),
}

/// A normal-form game of one of the supported kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Game {
    #[serde(flatten)]
    kind: GameKind,
    #[serde(skip, default = "default_enumeration_limit")]
    enumeration_limit: u64,
}

impl Game {
    /// Builds the demand game `Dir(K, c)`.
    pub fn dir(num_actions: usize, threat_cost: f64) -> Result<Game> {
        let game = Game::from_kind(GameKind::Dir(DirParams {
            num_actions,
            threat_cost,
        }));
        game.validate()?;
        Ok(game)
    }

    /// Builds a lemons market game from explicit parameters.
    pub fn lemons(params: LemonsParams) -> Result<Game> {
        let game = Game::from_kind(GameKind::Lemons(params));
        game.validate()?;
        Ok(game)
    }

    /// Builds an explicit tensor game. `payoffs` must hold `players` blocks
    /// of one entry per pure profile, last player fastest.
    pub fn tensor(actions: Vec<usize>, payoffs: Vec<f64>) -> Result<Game> {
        let game = Game::from_kind(GameKind::Tensor(TensorGame {
            players: actions.len(),
            actions,
            payoffs,
        }));
        game.validate()?;
        Ok(game)
    }

    /// Builds a two-player tensor game from row-player and column-player
    /// matrices indexed `[row][col]`.
    pub fn bimatrix(row: Vec<Vec<f64>>, col: Vec<Vec<f64>>) -> Result<Game> {
        let rows = row.len();
        let cols = row.first().map(|r| r.len()).unwrap_or(0);
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter("empty payoff matrix".into()));
        }
        if col.len() != rows || row.iter().chain(col.iter()).any(|r| r.len() != cols) {
            return Err(Error::InvalidParameter(
                "payoff matrices must share one shape".into(),
            ));
        }
        let mut payoffs = Vec::with_capacity(2 * rows * cols);
        for matrix in [&row, &col] {
            for r in matrix {
                payoffs.extend_from_slice(r);
            }
        }
        Game::tensor(vec![rows, cols], payoffs)
    }

    /// Builds a tensor game with payoffs drawn uniformly from `[-1, 1]`.
    pub fn random<R: Rng + ?Sized>(actions: &[usize], rng: &mut R) -> Result<Game> {
        let players = actions.len();
        let profiles: usize = actions.iter().product();
        let payoffs = (0..players * profiles)
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect();
        Game::tensor(actions.to_vec(), payoffs)
    }

    fn from_kind(kind: GameKind) -> Game {
        Game {
            kind,
            enumeration_limit: DEFAULT_ENUMERATION_LIMIT,
        }
    }

    /// Checks structural invariants. Called by the constructors; callers that
    /// deserialize a game from disk should call it themselves.
    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            GameKind::Dir(p) => {
                if p.num_actions < 2 {
                    return Err(Error::InvalidParameter(
                        "dir game needs at least 2 demand levels".into(),
                    ));
                }
                if !(p.threat_cost > 0.0) || !p.threat_cost.is_finite() {
                    return Err(Error::InvalidParameter(
                        "dir threat cost must be positive and finite".into(),
                    ));
                }
            }
            GameKind::Lemons(p) => {
                if p.num_sellers == 0 {
                    return Err(Error::InvalidParameter("lemons game needs a seller".into()));
                }
                if p.qualities.len() != p.num_sellers {
                    return Err(Error::InvalidParameter(
                        "lemons game needs one quality per seller".into(),
                    ));
                }
                if p.qualities.windows(2).any(|w| w[0] > w[1]) {
                    return Err(Error::InvalidParameter(
                        "lemons qualities must be sorted ascending".into(),
                    ));
                }
                if p.price_set.is_empty() {
                    return Err(Error::InvalidParameter("lemons price set is empty".into()));
                }
                if p.price_set.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidParameter(
                        "lemons prices must be strictly increasing".into(),
                    ));
                }
                if !(p.listing_cost > 0.0) {
                    return Err(Error::InvalidParameter(
                        "lemons listing cost must be positive".into(),
                    ));
                }
                if !(p.buyer_multiplier > 0.0) {
                    return Err(Error::InvalidParameter(
                        "lemons buyer multiplier must be positive".into(),
                    ));
                }
                if !(p.quality_noise_std >= 0.0) {
                    return Err(Error::InvalidParameter(
                        "lemons quality noise std must be nonnegative".into(),
                    ));
                }
                let finite = p
                    .qualities
                    .iter()
                    .chain(p.price_set.iter())
                    .chain([&p.listing_cost, &p.buyer_multiplier, &p.quality_noise_std])
                    .all(|v| v.is_finite());
                if !finite {
                    return Err(Error::InvalidParameter(
                        "lemons parameters must be finite".into(),
                    ));
                }
            }
            GameKind::Tensor(t) => {
                if t.players == 0 || t.players != t.actions.len() {
                    return Err(Error::InvalidParameter(
                        "tensor game needs one action count per player".into(),
                    ));
                }
                if t.actions.iter().any(|&k| k == 0) {
                    return Err(Error::InvalidParameter(
                        "every player needs at least one action".into(),
                    ));
                }
                let profiles: u128 = t.actions.iter().map(|&k| k as u128).product();
                let expected = profiles * t.players as u128;
                if expected != t.payoffs.len() as u128 {
                    return Err(Error::InvalidParameter(format!(
                        "tensor payoff table has {} entries, expected {}",
                        t.payoffs.len(),
                        expected
                    )));
                }
                if t.payoffs.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter(
                        "tensor payoffs must be finite".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> &GameKind {
        &self.kind
    }

    /// Short lowercase name of the game kind, matching the serialized tag.
    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            GameKind::Tensor(_) => "tensor",
            GameKind::Dir(_) => "dir",
            GameKind::Lemons(_) => "lemons",
        }
    }

    pub fn as_dir(&self) -> Option<&DirParams> {
        match &self.kind {
            GameKind::Dir(p) => Some(p),
            _ => None,
        }
    }

    pub fn as_lemons(&self) -> Option<&LemonsParams> {
        match &self.kind {
            GameKind::Lemons(p) => Some(p),
            _ => None,
        }
    }

    pub fn num_players(&self) -> usize {
        match &self.kind {
            GameKind::Tensor(t) => t.players,
            GameKind::Dir(_) => 2,
            GameKind::Lemons(p) => p.num_players(),
        }
    }

    /// Number of actions available to `player`.
    pub fn num_actions(&self, player: usize) -> usize {
        match &self.kind {
            GameKind::Tensor(t) => t.actions[player],
            GameKind::Dir(p) => p.num_actions,
            GameKind::Lemons(p) => {
                if player == 0 {
                    p.price_set.len()
                } else {
                    2
                }
            }
        }
    }

    /// Action counts for all players in order.
    pub fn action_counts(&self) -> Vec<usize> {
        (0..self.num_players()).map(|n| self.num_actions(n)).collect()
    }

    /// Whether pure-profile payoffs are deterministic.
    pub fn is_deterministic(&self) -> bool {
        match &self.kind {
            GameKind::Tensor(_) | GameKind::Dir(_) => true,
            GameKind::Lemons(p) => p.quality_noise_std == 0.0,
        }
    }

    /// Whether exact expectations over mixed strategies are available.
    /// The lemons game intentionally reports `false` even in its noise-free
    /// configuration: its consumers are expected to estimate from samples.
    pub fn supports_exact_expectation(&self) -> bool {
        matches!(self.kind, GameKind::Tensor(_) | GameKind::Dir(_))
    }

    /// A bound `U` with every realizable `|payoff| <= U`. Exact for the
    /// tensor and `Dir` kinds, conservative for lemons.
    pub fn payoff_bound(&self) -> f64 {
        match &self.kind {
            GameKind::Tensor(t) => t
                .payoffs
                .iter()
                .fold(0.0f64, |acc, v| acc.max(v.abs()))
                .max(f64::MIN_POSITIVE),
            // By construction: demands and the threat cost are both divided
            // by max(K, c), so the largest magnitude is exactly 1.
            GameKind::Dir(_) => 1.0,
            GameKind::Lemons(p) => {
                let q_max = *p.qualities.last().unwrap();
                let p_max = *p.price_set.last().unwrap();
                let buyer = p.buyer_multiplier * q_max.abs() + p_max.abs();
                let seller = p_max.abs() + q_max.abs() + p.listing_cost;
                buyer.max(seller)
            }
        }
    }

    fn check_profile(&self, profile: &[usize]) -> Result<()> {
        if profile.len() != self.num_players() {
            return Err(Error::IndexOutOfRange(format!(
                "profile has {} entries for a {}-player game",
                profile.len(),
                self.num_players()
            )));
        }
        for (n, &a) in profile.iter().enumerate() {
            if a >= self.num_actions(n) {
                return Err(Error::IndexOutOfRange(format!(
                    "action {} for player {} (has {} actions)",
                    a,
                    n,
                    self.num_actions(n)
                )));
            }
        }
        Ok(())
    }

    /// Exact pure payoffs for every player. Errors with
    /// [`Error::MissingRng`] when the game is stochastic.
    pub fn deterministic_payoffs(&self, profile: &[usize]) -> Result<Vec<f64>> {
        if !self.is_deterministic() {
            return Err(Error::MissingRng);
        }
        self.check_profile(profile)?;
        Ok(self.payoffs_unchecked(profile, None::<&mut rand_chacha::ChaCha8Rng>))
    }

    /// Exact pure payoff of a single player; see [`Game::deterministic_payoffs`].
    pub fn deterministic_payoff(&self, profile: &[usize], player: usize) -> Result<f64> {
        if player >= self.num_players() {
            return Err(Error::IndexOutOfRange(format!("player {player}")));
        }
        Ok(self.deterministic_payoffs(profile)?[player])
    }

    /// Samples one play of `profile` and returns every player's payoff from
    /// that single shared realization. Deterministic games ignore the RNG.
    pub fn sample_payoffs<R: Rng + ?Sized>(
        &self,
        profile: &[usize],
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        self.check_profile(profile)?;
        Ok(self.payoffs_unchecked(profile, Some(rng)))
    }

    /// Samples one play of `profile` and returns `player`'s payoff. Each call
    /// draws fresh noise.
    pub fn sample_payoff<R: Rng + ?Sized>(
        &self,
        profile: &[usize],
        player: usize,
        rng: &mut R,
    ) -> Result<f64> {
        if player >= self.num_players() {
            return Err(Error::IndexOutOfRange(format!("player {player}")));
        }
        Ok(self.sample_payoffs(profile, rng)?[player])
    }

    fn payoffs_unchecked<R: Rng + ?Sized>(
        &self,
        profile: &[usize],
        rng: Option<&mut R>,
    ) -> Vec<f64> {
        match &self.kind {
            GameKind::Tensor(t) => {
                let flat = t.flat_index(profile);
                let block: usize = t.actions.iter().product();
                (0..t.players).map(|n| t.payoffs[n * block + flat]).collect()
            }
            GameKind::Dir(p) => {
                let scale = p.scale();
                let (a, b) = (profile[0], profile[1]);
                // 0-based encoding of "within one step": player 0 may demand
                // at most one level above player 1, player 1 at most equal.
                let u0 = if a <= b + 1 {
                    (a + 1) as f64 / scale
                } else {
                    -p.threat_cost / scale
                };
                let u1 = if b <= a {
                    (b + 1) as f64 / scale
                } else {
                    -p.threat_cost / scale
                };
                vec![u0, u1]
            }
            GameKind::Lemons(p) => lemons_payoffs(p, profile, rng),
        }
    }

    /// Sets the profile-enumeration ceiling used by the exact-expectation
    /// queries.
    pub fn set_enumeration_limit(&mut self, limit: u64) {
        self.enumeration_limit = limit.max(1);
    }

    pub fn enumeration_limit(&self) -> u64 {
        self.enumeration_limit
    }

    fn require_exact(&self) -> Result<()> {
        if !self.supports_exact_expectation() {
            return Err(Error::Capability(format!(
                "{} games do not support exact expectations",
                self.kind_name()
            )));
        }
        Ok(())
    }

    fn check_strategies(&self, strategies: &[MixedStrategy]) -> Result<()> {
        if strategies.len() != self.num_players() {
            return Err(Error::IndexOutOfRange(format!(
                "{} strategies for a {}-player game",
                strategies.len(),
                self.num_players()
            )));
        }
        for (n, s) in strategies.iter().enumerate() {
            if s.len() != self.num_actions(n) {
                return Err(Error::IndexOutOfRange(format!(
                    "strategy for player {} has {} entries, needs {}",
                    n,
                    s.len(),
                    self.num_actions(n)
                )));
            }
        }
        Ok(())
    }

    /// Exact expected payoff of `player` under a full mixed profile.
    pub fn expected_payoff(&self, player: usize, strategies: &[MixedStrategy]) -> Result<f64> {
        self.require_exact()?;
        self.check_strategies(strategies)?;
        if player >= self.num_players() {
            return Err(Error::IndexOutOfRange(format!("player {player}")));
        }
        let counts = self.action_counts();
        self.check_enumeration(&counts)?;
        let mut total = 0.0;
        let mut profile = vec![0usize; counts.len()];
        loop {
            let mut weight = 1.0;
            for (n, &a) in profile.iter().enumerate() {
                weight *= strategies[n].probs()[a];
                if weight == 0.0 {
                    break;
                }
            }
            if weight != 0.0 {
                total += weight * self.payoffs_unchecked::<rand::rngs::ThreadRng>(&profile, None)[player];
            }
            if !next_profile(&mut profile, &counts) {
                break;
            }
        }
        Ok(total)
    }

    /// Expected payoff of every action of `player` against the opponents'
    /// mixed strategies. `strategies` must cover all players; the entry for
    /// `player` is ignored.
    pub fn action_payoff_vector(
        &self,
        player: usize,
        strategies: &[MixedStrategy],
    ) -> Result<Vec<f64>> {
        self.require_exact()?;
        self.check_strategies(strategies)?;
        if player >= self.num_players() {
            return Err(Error::IndexOutOfRange(format!("player {player}")));
        }
        let counts = self.action_counts();
        let mut other_counts = counts.clone();
        other_counts[player] = 1;
        self.check_enumeration(&other_counts)?;

        let own = counts[player];
        let mut out = vec![0.0; own];
        let mut profile = vec![0usize; counts.len()];
        loop {
            let mut weight = 1.0;
            for (n, &a) in profile.iter().enumerate() {
                if n == player {
                    continue;
                }
                weight *= strategies[n].probs()[a];
                if weight == 0.0 {
                    break;
                }
            }
            if weight != 0.0 {
                let mut full = profile.clone();
                for (a, slot) in out.iter_mut().enumerate() {
                    full[player] = a;
                    *slot +=
                        weight * self.payoffs_unchecked::<rand::rngs::ThreadRng>(&full, None)[player];
                }
            }
            if !next_profile(&mut profile, &other_counts) {
                break;
            }
        }
        Ok(out)
    }

    fn check_enumeration(&self, counts: &[usize]) -> Result<()> {
        let needed: u128 = counts.iter().map(|&k| k as u128).product();
        if needed > self.enumeration_limit as u128 {
            return Err(Error::EnumerationLimit {
                needed,
                limit: self.enumeration_limit,
            });
        }
        Ok(())
    }
}

/// Advances `profile` through the mixed-radix space given by `counts`,
/// last position fastest. Returns false once the space is exhausted.
pub(crate) fn next_profile(profile: &mut [usize], counts: &[usize]) -> bool {
    for i in (0..profile.len()).rev() {
        profile[i] += 1;
        if profile[i] < counts[i] {
            return true;
        }
        profile[i] = 0;
    }
    false
}

fn lemons_payoffs<R: Rng + ?Sized>(
    p: &LemonsParams,
    profile: &[usize],
    rng: Option<&mut R>,
) -> Vec<f64> {
    let price = p.price_set[profile[0]];
    let mut traded_quality_sum = 0.0;
    let mut traded = 0usize;
    let mut payoffs = vec![0.0; p.num_players()];

    let noise = if p.quality_noise_std > 0.0 {
        let rng = rng.expect("stochastic lemons payoff sampled without an RNG");
        let normal = Normal::new(0.0, p.quality_noise_std).expect("valid std");
        // One observation draw per seller per play, listed or not, so a play
        // consumes a fixed amount of the stream regardless of the profile.
        (0..p.num_sellers).map(|_| normal.sample(rng)).collect()
    } else {
        vec![0.0; p.num_sellers]
    };

    for i in 0..p.num_sellers {
        if profile[i + 1] == 0 {
            continue;
        }
        let quality = p.qualities[i];
        let sold = quality + noise[i] <= price;
        let mut u = -p.listing_cost;
        if sold {
            u += price - quality;
            traded_quality_sum += quality;
            traded += 1;
        }
        payoffs[i + 1] = u;
    }

    // The buyer pays her posted price unconditionally; the cars' value only
    // accrues when something actually trades.
    let mean_quality = if traded > 0 {
        traded_quality_sum / traded as f64
    } else {
        0.0
    };
    payoffs[0] = p.buyer_multiplier * mean_quality - price;
    payoffs
}

/// A probability distribution over one player's actions.
///
/// Construction validates nonnegativity (up to -1e-12, clamped) and that the
/// entries sum to 1 within 1e-9; the stored values are kept as given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MixedStrategy {
    probs: Vec<f64>,
}

impl MixedStrategy {
    pub fn new(probs: Vec<f64>) -> Result<MixedStrategy> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty distribution".into()));
        }
        let mut sum = 0.0;
        let mut cleaned = probs;
        for v in &mut cleaned {
            if !v.is_finite() {
                return Err(Error::InvalidDistribution(format!("entry {v} not finite")));
            }
            if *v < 0.0 {
                if *v < -1e-12 {
                    return Err(Error::InvalidDistribution(format!("negative entry {v}")));
                }
                *v = 0.0;
            }
            sum += *v;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(MixedStrategy { probs: cleaned })
    }

    /// Uniform distribution over `k` actions.
    pub fn uniform(k: usize) -> MixedStrategy {
        MixedStrategy {
            probs: vec![1.0 / k as f64; k.max(1)],
        }
    }

    /// Point mass on `action` among `k` actions.
    pub fn point_mass(k: usize, action: usize) -> Result<MixedStrategy> {
        if action >= k {
            return Err(Error::IndexOutOfRange(format!(
                "point mass on action {action} of {k}"
            )));
        }
        let mut probs = vec![0.0; k];
        probs[action] = 1.0;
        Ok(MixedStrategy { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Samples an action index by inverse CDF.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // Float round-off can leave acc a hair under 1; fall back to the last
        // action that carries any mass.
        self.probs
            .iter()
            .rposition(|&p| p > 0.0)
            .unwrap_or(self.probs.len() - 1)
    }
}

impl TryFrom<Vec<f64>> for MixedStrategy {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<MixedStrategy> {
        MixedStrategy::new(v)
    }
}

impl From<MixedStrategy> for Vec<f64> {
    fn from(s: MixedStrategy) -> Vec<f64> {
        s.probs
    }
}
