//! Exp3.P (high-probability Exp3) and its no-swap-regret wrapper.

use crate::error::{Error, Result};
use crate::game::MixedStrategy;
use crate::learners::{
    check_bandit_input, softmax, stationary_distribution, FeedbackKind, Learner,
};

/// Fixed-horizon Exp3.P: a confidence bonus is added to every action's
/// estimate each round, and the rates are calibrated to the declared horizon
/// and failure probability. Rewards are internally shifted from [-1, 1] to
/// [0, 1] gains, which the bonus calibration assumes.
#[derive(Debug, Clone)]
pub struct Exp3P {
    scores: Vec<f64>,
    eta: f64,
    gamma: f64,
    alpha: f64,
}

impl Exp3P {
    pub fn new(num_actions: usize, horizon: u64, delta: f64) -> Result<Exp3P> {
        if num_actions == 0 {
            return Err(Error::InvalidParameter("learner needs actions".into()));
        }
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be positive".into()));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "confidence delta = {delta} outside (0, 1)"
            )));
        }
        let k = num_actions as f64;
        let t = horizon as f64;
        let log_k = k.ln();
        Ok(Exp3P {
            scores: vec![0.0; num_actions],
            eta: 0.95 * (log_k / (t * k)).sqrt(),
            gamma: (1.05 * (k * log_k / t).sqrt()).min(1.0),
            alpha: ((k / delta).ln() / (k * t)).sqrt(),
        })
    }

    fn current(&self) -> Vec<f64> {
        let k = self.scores.len() as f64;
        let scaled: Vec<f64> = self.scores.iter().map(|&y| self.eta * y).collect();
        let mut probs = softmax(&scaled);
        for p in &mut probs {
            *p = (1.0 - self.gamma) * *p + self.gamma / k;
        }
        probs
    }
}

impl Learner for Exp3P {
    fn num_actions(&self) -> usize {
        self.scores.len()
    }

    fn feedback_kind(&self) -> FeedbackKind {
        FeedbackKind::Bandit
    }

    fn next_distribution(&mut self) -> Result<MixedStrategy> {
        MixedStrategy::new(self.current())
    }

    fn observe_bandit(&mut self, played: usize, reward: f64) -> Result<()> {
        check_bandit_input(self.scores.len(), played, reward)?;
        let probs = self.current();
        let gain = (reward + 1.0) / 2.0;
        for (i, (score, &p)) in self.scores.iter_mut().zip(&probs).enumerate() {
            let hit = if i == played { gain } else { 0.0 };
            *score += (hit + self.alpha) / p;
        }
        Ok(())
    }
}

/// The external-to-swap-regret reduction over Exp3.P: one base copy per
/// action, the played distribution is the stationary distribution of the
/// row-stochastic matrix of base distributions, and each base learns from
/// the reward scaled by its own stationary weight.
pub struct SwapExp3P {
    bases: Vec<Exp3P>,
    /// Stationary distribution for the coming round, filled lazily.
    pending: Option<Vec<f64>>,
    /// Warm start for the power iteration; the matrix moves slowly between
    /// rounds, so the previous fixed point is an excellent initial guess.
    previous: Vec<f64>,
}

impl SwapExp3P {
    pub fn new(num_actions: usize, horizon: u64, delta: f64) -> Result<SwapExp3P> {
        if num_actions == 0 {
            return Err(Error::InvalidParameter("learner needs actions".into()));
        }
        let bases = (0..num_actions)
            .map(|_| Exp3P::new(num_actions, horizon, delta))
            .collect::<Result<Vec<_>>>()?;
        Ok(SwapExp3P {
            bases,
            pending: None,
            previous: vec![1.0 / num_actions as f64; num_actions],
        })
    }

    fn stationary(&mut self) -> Result<&Vec<f64>> {
        if self.pending.is_none() {
            let rows: Vec<Vec<f64>> = self.bases.iter().map(|b| b.current()).collect();
            let solved = match stationary_distribution(&rows, &self.previous, 10_000) {
                Some(p) => p,
                None => {
                    // Blend in a little uniform noise to force aperiodicity
                    // and try once more before giving up.
                    let k = rows.len() as f64;
                    let blended: Vec<Vec<f64>> = rows
                        .iter()
                        .map(|row| row.iter().map(|&m| 1e-6 / k + (1.0 - 1e-6) * m).collect())
                        .collect();
                    stationary_distribution(&blended, &self.previous, 10_000)
                        .ok_or(Error::StationaryDiverged(10_000))?
                }
            };
            self.pending = Some(solved);
        }
        Ok(self.pending.as_ref().expect("just filled"))
    }
}

impl Learner for SwapExp3P {
    fn num_actions(&self) -> usize {
        self.bases.len()
    }

    fn feedback_kind(&self) -> FeedbackKind {
        FeedbackKind::Bandit
    }

    fn next_distribution(&mut self) -> Result<MixedStrategy> {
        MixedStrategy::new(self.stationary()?.clone())
    }

    fn observe_bandit(&mut self, played: usize, reward: f64) -> Result<()> {
        check_bandit_input(self.bases.len(), played, reward)?;
        let weights = self.stationary()?.clone();
        for (base, &w) in self.bases.iter_mut().zip(&weights) {
            base.observe_bandit(played, w * reward)?;
        }
        self.previous = weights;
        self.pending = None;
        Ok(())
    }
}
