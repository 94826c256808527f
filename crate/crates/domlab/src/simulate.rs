//! Self-play simulation: wiring learners to a game, elimination-progress
//! metrics, checkpoint schedules, and deterministic CSV traces.

use std::io::{BufRead, BufReader, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::game::{Game, MixedStrategy};
use crate::iesds::EliminationPath;
use crate::learners::{AlgoSpec, Exp3Dh, FeedbackKind, Learner};

/// How learners are fed each round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedbackMode {
    /// Sample a profile, play the game once, report own noisy payoff.
    Bandit,
    /// Report the exact expected payoff vector against the opponents'
    /// current mixed strategies. Requires enumerable expectations and runs
    /// without any randomness.
    ExactGradient,
}

/// When to record distribution snapshots.
#[derive(Debug, Clone, PartialEq)]
pub enum CheckpointSchedule {
    /// Round 0, rounds ceil(10^(j/40)) for j = 0, 1, ..., and the horizon.
    LogSpaced,
    /// Every multiple of the step, plus round 0 and the horizon.
    Every(u64),
    /// Exactly these rounds (deduplicated, sorted), clipped to the horizon.
    Explicit(Vec<u64>),
}

impl CheckpointSchedule {
    /// The sorted, deduplicated list of rounds to snapshot for horizon `t`.
    pub fn times(&self, horizon: u64) -> Vec<u64> {
        let mut out = vec![0];
        match self {
            CheckpointSchedule::LogSpaced => {
                let mut j = 0u32;
                loop {
                    let t = 10f64.powf(j as f64 / 40.0).ceil() as u64;
                    if t > horizon {
                        break;
                    }
                    out.push(t);
                    j += 1;
                }
            }
            CheckpointSchedule::Every(step) => {
                if *step > 0 {
                    let mut t = *step;
                    while t <= horizon {
                        out.push(t);
                        t = t.saturating_add(*step);
                    }
                }
            }
            CheckpointSchedule::Explicit(list) => {
                out.extend(list.iter().copied().filter(|&t| t <= horizon));
            }
        }
        out.push(horizon);
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// One simulation run to configure.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub algo: AlgoSpec,
    pub horizon: u64,
    pub seed: u64,
    /// Standard deviation of the additive gaussian observation noise, in
    /// normalized payoff units.
    pub noise_std: f64,
    pub feedback: FeedbackMode,
    pub checkpoints: CheckpointSchedule,
    /// Record per-action distributions at checkpoints, not just metrics.
    pub record_distributions: bool,
}

/// Snapshot of all agents' mixed strategies at one round.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub round: u64,
    pub distributions: Vec<Vec<f64>>,
    pub poe: f64,
    /// Mean over agents of the probability on the unique surviving action;
    /// absent when the game is not dominance solvable.
    pub ne_mass: Option<f64>,
    /// Largest probability any agent puts on any eliminated action.
    pub max_dom_prob: f64,
}

/// A completed run: the configuration echo and the checkpoint series.
#[derive(Debug, Clone)]
pub struct Trace {
    pub algo: String,
    pub seed: u64,
    pub num_agents: usize,
    pub checkpoints: Vec<Checkpoint>,
}

impl Trace {
    pub fn final_checkpoint(&self) -> &Checkpoint {
        self.checkpoints.last().expect("at least round 0")
    }
}

/// Progress of elimination: the mass-weighted mean elimination distance,
/// normalized by the path length and averaged over agents. Reaches 1 when
/// every agent plays only surviving actions.
pub fn poe(path: &EliminationPath, distributions: &[Vec<f64>]) -> Result<f64> {
    let length = path.elimination_length();
    if length == 0 {
        return Err(Error::Domain(
            "progress is undefined for an empty elimination path".into(),
        ));
    }
    if distributions.len() != path.distances.len() {
        return Err(Error::InvalidParameter(format!(
            "{} distributions for {} players",
            distributions.len(),
            path.distances.len()
        )));
    }
    let mut total = 0.0;
    for (dist, row) in distributions.iter().zip(&path.distances) {
        if dist.len() != row.len() {
            return Err(Error::InvalidParameter(
                "distribution length does not match action count".into(),
            ));
        }
        let mut agent = 0.0;
        for (&p, &d) in dist.iter().zip(row) {
            agent += p * d as f64;
        }
        total += agent / length as f64;
    }
    Ok(total / distributions.len() as f64)
}

fn survivor_masses(path: &EliminationPath, distributions: &[Vec<f64>]) -> Option<f64> {
    let profile = path.survivor_profile()?;
    let mut total = 0.0;
    for (dist, &a) in distributions.iter().zip(&profile) {
        total += dist[a];
    }
    Some(total / distributions.len() as f64)
}

fn max_eliminated_mass(path: &EliminationPath, distributions: &[Vec<f64>]) -> f64 {
    let length = path.elimination_length();
    let mut worst = 0.0f64;
    for (dist, row) in distributions.iter().zip(&path.distances) {
        for (&p, &d) in dist.iter().zip(row) {
            if d < length {
                worst = worst.max(p);
            }
        }
    }
    worst
}

/// Per-action verdicts for essential elimination at one probability
/// threshold eps/(4·K·N).
#[derive(Debug, Clone)]
pub struct EssentialEliminationReport {
    pub threshold: f64,
    /// (player, action, probability, within threshold) per eliminated action.
    pub actions: Vec<(usize, usize, f64, bool)>,
    pub all_essential: bool,
    /// When every eliminated action passes: the implied bound eps/2 on the
    /// L1 distance between the concatenated strategy profile and the pure
    /// surviving profile.
    pub l1_bound: Option<f64>,
}

/// Checks each eliminated action's probability against eps/(4·K·N), where
/// K is the largest action count and N the number of agents.
pub fn essential_elimination_report(
    path: &EliminationPath,
    distributions: &[Vec<f64>],
    eps: f64,
) -> Result<EssentialEliminationReport> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "eps = {eps} outside (0, 1]"
        )));
    }
    if distributions.len() != path.distances.len() {
        return Err(Error::InvalidParameter(format!(
            "{} distributions for {} players",
            distributions.len(),
            path.distances.len()
        )));
    }
    let num_agents = distributions.len();
    let max_actions = path.distances.iter().map(|row| row.len()).max().unwrap_or(0);
    let threshold = eps / (4.0 * max_actions as f64 * num_agents as f64);
    let length = path.elimination_length();
    let mut actions = Vec::new();
    let mut all = true;
    for (player, (dist, row)) in distributions.iter().zip(&path.distances).enumerate() {
        for (action, (&p, &d)) in dist.iter().zip(row).enumerate() {
            if d < length {
                let ok = p <= threshold;
                all &= ok;
                actions.push((player, action, p, ok));
            }
        }
    }
    let l1_bound = if all { Some(eps / 2.0) } else { None };
    Ok(EssentialEliminationReport {
        threshold,
        actions,
        all_essential: all,
        l1_bound,
    })
}

/// Derives the per-purpose RNG stream seeds from the master seed. Streams:
/// 0 is the environment (game draws), 1 + 2n is agent n's action sampling,
/// 2 + 2n is agent n's observation noise.
fn stream_rng(master: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(master ^ stream.wrapping_mul(0x9E3779B97F4A7C15))
}

/// Runs one self-play session of every agent learning with the same
/// algorithm, measuring progress against the supplied elimination path.
pub fn run_selfplay(game: &Game, path: &EliminationPath, config: &RunConfig) -> Result<Trace> {
    if path.elimination_length() == 0 {
        return Err(Error::Domain(
            "the game has no elimination path to measure progress against".into(),
        ));
    }
    let num_agents = game.num_players();
    let payoff_scale = game.payoff_bound();
    let mut learners: Vec<Box<dyn Learner>> = (0..num_agents)
        .map(|n| config.algo.build(game.num_actions(n)))
        .collect::<Result<Vec<_>>>()?;

    match config.feedback {
        FeedbackMode::ExactGradient => {
            if config.noise_std != 0.0 {
                return Err(Error::InvalidParameter(
                    "exact-gradient feedback is noiseless; set the noise to zero".into(),
                ));
            }
            if !game.supports_exact_expectation() {
                return Err(Error::Capability(
                    "game cannot evaluate exact expected payoffs".into(),
                ));
            }
            for learner in &learners {
                if learner.feedback_kind() != FeedbackKind::FullVector {
                    return Err(Error::Capability(format!(
                        "`{}` consumes bandit feedback; use bandit mode",
                        config.algo
                    )));
                }
            }
        }
        FeedbackMode::Bandit => {
            if config.noise_std < 0.0 || !config.noise_std.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "noise std {}",
                    config.noise_std
                )));
            }
            for learner in &learners {
                if learner.feedback_kind() != FeedbackKind::Bandit {
                    return Err(Error::Capability(format!(
                        "`{}` needs exact-gradient feedback",
                        config.algo
                    )));
                }
            }
        }
    }

    let mut env_rng = stream_rng(config.seed, 0);
    let mut action_rngs: Vec<ChaCha8Rng> = (0..num_agents)
        .map(|n| stream_rng(config.seed, 1 + 2 * n as u64))
        .collect();
    let mut noise_rngs: Vec<ChaCha8Rng> = (0..num_agents)
        .map(|n| stream_rng(config.seed, 2 + 2 * n as u64))
        .collect();
    let noise = if config.noise_std > 0.0 {
        Some(Normal::new(0.0, config.noise_std).map_err(|e| {
            Error::InvalidParameter(format!("noise std {}: {e}", config.noise_std))
        })?)
    } else {
        None
    };

    let schedule = config.checkpoints.times(config.horizon);
    let mut next_checkpoint = 0usize;
    let mut checkpoints = Vec::with_capacity(schedule.len());
    let mut profile = vec![0usize; num_agents];

    for round in 0..=config.horizon {
        let dists: Vec<MixedStrategy> = learners
            .iter_mut()
            .map(|l| l.next_distribution())
            .collect::<Result<Vec<_>>>()?;
        if next_checkpoint < schedule.len() && schedule[next_checkpoint] == round {
            let raw: Vec<Vec<f64>> = dists.iter().map(|d| d.probs().to_vec()).collect();
            checkpoints.push(Checkpoint {
                round,
                poe: poe(path, &raw)?,
                ne_mass: survivor_masses(path, &raw),
                max_dom_prob: max_eliminated_mass(path, &raw),
                distributions: raw,
            });
            next_checkpoint += 1;
        }
        if round == config.horizon {
            break;
        }

        match config.feedback {
            FeedbackMode::Bandit => {
                for (n, dist) in dists.iter().enumerate() {
                    profile[n] = dist.sample(&mut action_rngs[n]);
                }
                let payoffs = game.sample_payoffs(&profile, &mut env_rng)?;
                for (n, learner) in learners.iter_mut().enumerate() {
                    let mut reward = payoffs[n] / payoff_scale;
                    if let Some(normal) = &noise {
                        reward += normal.sample(&mut noise_rngs[n]);
                    }
                    learner.observe_bandit(profile[n], reward)?;
                }
            }
            FeedbackMode::ExactGradient => {
                for (n, learner) in learners.iter_mut().enumerate() {
                    let vector = game.action_payoff_vector(n, &dists)?;
                    let normalized: Vec<f64> =
                        vector.iter().map(|u| u / payoff_scale).collect();
                    learner.observe_vector(&normalized)?;
                }
            }
        }
    }

    Ok(Trace {
        algo: config.algo.raw().to_string(),
        seed: config.seed,
        num_agents,
        checkpoints,
    })
}

/// Writes a trace as CSV with a fixed five-column schema. Floats use 17
/// significant digits so the file is a faithful image of the run.
pub fn write_trace_csv<W: Write>(trace: &Trace, include_distributions: bool, out: W) -> Result<()> {
    let mut out = std::io::BufWriter::new(out);
    writeln!(out, "t,seed,agent,metric,value")?;
    for cp in &trace.checkpoints {
        let t = cp.round;
        let seed = trace.seed;
        writeln!(out, "{t},{seed},-1,poe,{:.16e}", cp.poe)?;
        if let Some(mass) = cp.ne_mass {
            writeln!(out, "{t},{seed},-1,ne_mass,{mass:.16e}")?;
        }
        writeln!(out, "{t},{seed},-1,max_dom_prob,{:.16e}", cp.max_dom_prob)?;
        if include_distributions {
            for (agent, dist) in cp.distributions.iter().enumerate() {
                for (action, p) in dist.iter().enumerate() {
                    writeln!(out, "{t},{seed},{agent},p_{},{p:.16e}", action + 1)?;
                }
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// One parsed CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub round: u64,
    pub seed: u64,
    pub agent: i64,
    pub metric: String,
    pub value: f64,
}

/// Reads back a trace CSV written by [`write_trace_csv`].
pub fn read_trace_csv<R: Read>(input: R) -> Result<Vec<TraceRow>> {
    let reader = BufReader::new(input);
    let mut lines = reader.lines();
    match lines.next() {
        Some(header) => {
            let header = header?;
            if header.trim() != "t,seed,agent,metric,value" {
                return Err(Error::Trace(format!("unexpected header `{header}`")));
            }
        }
        None => return Err(Error::Trace("empty trace file".into())),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Trace(format!(
                "line {}: expected 5 fields, got {}",
                idx + 2,
                fields.len()
            )));
        }
        fn field<T: std::str::FromStr>(what: &str, s: &str, line: usize) -> Result<T> {
            s.parse::<T>()
                .map_err(|_| Error::Trace(format!("line {line}: bad {what} `{s}`")))
        }
        rows.push(TraceRow {
            round: field("round", fields[0], idx + 2)?,
            seed: field("seed", fields[1], idx + 2)?,
            agent: field("agent", fields[2], idx + 2)?,
            metric: fields[3].to_string(),
            value: field("value", fields[4], idx + 2)?,
        });
    }
    Ok(rows)
}

/// Configuration of the score-separation experiment: a single discounted
/// bandit learner plays a ladder game against a uniformly mixing opponent,
/// and after the run its internal score for a dominating action should
/// exceed the dominated one's by a computable margin.
#[derive(Debug, Clone, Copy)]
pub struct Lemma1Params {
    /// Ladder size; the learner controls the first player.
    pub num_actions: usize,
    pub threat_cost: f64,
    /// First-player action expected to fall behind.
    pub dominated: usize,
    /// First-player action expected to pull ahead.
    pub dominator: usize,
    /// Observations per trial.
    pub horizon: u64,
    pub beta: f64,
    pub b: f64,
    pub delta: f64,
    pub noise_std: f64,
    pub trials: u32,
    pub seed: u64,
}

/// Outcome of [`lemma1_empirical_check`].
#[derive(Debug, Clone, Copy)]
pub struct Lemma1Report {
    pub trials: u32,
    pub passes: u32,
    pub pass_rate: f64,
    /// 1 - delta minus three binomial standard errors.
    pub threshold: f64,
    /// The score-difference lower bound each trial is tested against.
    pub bound: f64,
}

impl Lemma1Report {
    pub fn holds(&self) -> bool {
        self.pass_rate >= self.threshold
    }
}

/// Runs independent trials of a discounted bandit learner against a uniform
/// opponent and counts how often the final score difference between the
/// dominating and dominated actions clears its high-probability lower bound.
pub fn lemma1_empirical_check(params: &Lemma1Params) -> Result<Lemma1Report> {
    let game = Game::dir(params.num_actions, params.threat_cost)?;
    let k = params.num_actions;
    if params.dominated >= k || params.dominator >= k || params.dominated == params.dominator {
        return Err(Error::InvalidParameter(format!(
            "action pair ({}, {}) invalid for {} actions",
            params.dominated, params.dominator, k
        )));
    }
    if params.trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    if params.horizon == 0 {
        return Err(Error::InvalidParameter("need at least one round".into()));
    }
    if !(params.delta > 0.0 && params.delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta = {} outside (0, 1)",
            params.delta
        )));
    }
    if !(params.noise_std >= 0.0 && params.noise_std.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise std {}",
            params.noise_std
        )));
    }
    let scale = game.payoff_bound();
    let opp_actions = game.num_actions(1);
    // Worst-case advantage of the dominator over the dominated action across
    // all opponent actions, in normalized units.
    let mut pair_gap = f64::INFINITY;
    for c in 0..opp_actions {
        let better = game.deterministic_payoff(&[params.dominator, c], 0)?;
        let worse = game.deterministic_payoff(&[params.dominated, c], 0)?;
        pair_gap = pair_gap.min((better - worse) / scale);
    }
    if pair_gap <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "action {} does not strictly dominate action {}",
            params.dominator, params.dominated
        )));
    }

    // Discounted sums the bound is built from: the drift weight of each
    // round and the variance weight inflated by the exploration floor.
    let t_final = params.horizon as f64;
    let mut drift_sum = 0.0;
    let mut variance_sum = 0.0;
    for t in 1..=params.horizon {
        let t = t as f64;
        let w = (t / t_final).powf(params.beta);
        drift_sum += w;
        variance_sum += w * w * t.powf(params.b);
    }
    let kf = k as f64;
    let sigma2 = params.noise_std * params.noise_std;
    let deviation = 4.0
        * (2.0 * kf / params.delta).ln().sqrt()
        * (kf * (1.0 + sigma2) * variance_sum).sqrt();
    let bound = pair_gap * drift_sum - deviation;

    let noise = if params.noise_std > 0.0 {
        Some(Normal::new(0.0, params.noise_std).map_err(|e| {
            Error::InvalidParameter(format!("noise std {}: {e}", params.noise_std))
        })?)
    } else {
        None
    };

    let mut passes = 0u32;
    for trial in 0..params.trials {
        let trial_seed = params.seed ^ (trial as u64).wrapping_mul(0xD1B54A32D192ED03);
        let mut opp_rng = stream_rng(trial_seed, 0);
        let mut action_rng = stream_rng(trial_seed, 1);
        let mut noise_rng = stream_rng(trial_seed, 2);
        let mut learner = Exp3Dh::new(k, params.b, params.beta)?;
        for _ in 0..=params.horizon {
            let dist = learner.next_distribution()?;
            let played = dist.sample(&mut action_rng);
            let opp = opp_rng.random_range(0..opp_actions);
            let mut reward = game.deterministic_payoff(&[played, opp], 0)? / scale;
            if let Some(normal) = &noise {
                reward += normal.sample(&mut noise_rng);
            }
            learner.observe_bandit(played, reward)?;
        }
        let scores = learner.scores();
        if scores[params.dominator] - scores[params.dominated] >= bound {
            passes += 1;
        }
    }

    let trials = params.trials as f64;
    let pass_rate = passes as f64 / trials;
    let threshold =
        1.0 - params.delta - 3.0 * (params.delta * (1.0 - params.delta) / trials).sqrt();
    Ok(Lemma1Report {
        trials: params.trials,
        passes,
        pass_rate,
        threshold,
        bound,
    })
}
