//! Exp3 with diminishing history: every observation decays all scores by
//! a power of the round ratio before the new estimate lands, so the score
//! vector is always a recency-weighted sum of past estimates, and the
//! exploration floor shrinks polynomially instead of vanishing.

use crate::error::{Error, Result};
use crate::game::MixedStrategy;
use crate::learners::{check_bandit_input, softmax, FeedbackKind, Learner};

/// The play distribution after `rounds` observations: softmax of the scores
/// mixed with a uniform floor of weight rounds^(-b), which is 1 before the
/// first observation (pure exploration).
pub fn exp3dh_distribution(scores: &[f64], rounds: u64, b: f64) -> Vec<f64> {
    let k = scores.len() as f64;
    let floor = if rounds == 0 {
        1.0
    } else {
        (rounds as f64).powf(-b)
    };
    let mut probs = softmax(scores);
    for p in &mut probs {
        *p = (1.0 - floor) * *p + floor / k;
    }
    probs
}

#[derive(Debug, Clone)]
pub struct Exp3Dh {
    scores: Vec<f64>,
    rounds: u64,
    b: f64,
    beta: f64,
}

impl Exp3Dh {
    pub fn new(num_actions: usize, b: f64, beta: f64) -> Result<Exp3Dh> {
        if num_actions == 0 {
            return Err(Error::InvalidParameter("learner needs actions".into()));
        }
        if !(b > 0.0 && b < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "exploration exponent b = {b} outside (0, 1)"
            )));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "history exponent beta = {beta}"
            )));
        }
        Ok(Exp3Dh {
            scores: vec![0.0; num_actions],
            rounds: 0,
            b,
            beta,
        })
    }

    /// Current score vector; after t observations it equals the
    /// recency-weighted sum over past estimates with weights (tau/(t-1))^beta.
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }
}

impl Learner for Exp3Dh {
    fn num_actions(&self) -> usize {
        self.scores.len()
    }

    fn feedback_kind(&self) -> FeedbackKind {
        FeedbackKind::Bandit
    }

    fn next_distribution(&mut self) -> Result<MixedStrategy> {
        MixedStrategy::new(exp3dh_distribution(&self.scores, self.rounds, self.b))
    }

    fn observe_bandit(&mut self, played: usize, reward: f64) -> Result<()> {
        check_bandit_input(self.scores.len(), played, reward)?;
        let probs = exp3dh_distribution(&self.scores, self.rounds, self.b);
        let estimate = reward / probs[played];
        // Decay keeps the invariant y(t+1) = sum_tau (tau/t)^beta * est(tau)
        // over observations tau = 0..=t: the previous weights (tau/(t-1))^beta
        // all shrink by ((t-1)/t)^beta. At t = 0 there is no history, and
        // 0^0 = 1 makes beta = 0 degrade gracefully to plain accumulation.
        let t = self.rounds as f64;
        let decay = if self.rounds == 0 {
            0.0
        } else {
            ((t - 1.0) / t).powf(self.beta)
        };
        for score in &mut self.scores {
            *score *= decay;
        }
        self.scores[played] += estimate;
        self.rounds += 1;
        Ok(())
    }
}
