//! The anytime Exp3 baseline and its recency-biased variant.

use crate::error::{Error, Result};
use crate::game::MixedStrategy;
use crate::learners::{check_bandit_input, softmax, FeedbackKind, Learner};

/// Anytime rates for round `t1` (1-based): exploration floor and step size
/// both shrink like 1/sqrt(t1).
fn anytime_rates(num_actions: usize, t1: u64) -> (f64, f64) {
    let k = num_actions as f64;
    let log_k = k.ln();
    let t = t1 as f64;
    let gamma = (k * log_k / t).sqrt().min(1.0);
    let eta = (log_k / (k * t)).sqrt();
    (gamma, eta)
}

fn mix_with_uniform(mut probs: Vec<f64>, gamma: f64) -> Vec<f64> {
    let k = probs.len() as f64;
    for p in &mut probs {
        *p = (1.0 - gamma) * *p + gamma / k;
    }
    probs
}

/// Classic Exp3 with the anytime learning-rate schedule: the round-t
/// distribution mixes softmax(eta_t * y) with uniform exploration.
#[derive(Debug, Clone)]
pub struct Exp3 {
    scores: Vec<f64>,
    rounds: u64,
}

impl Exp3 {
    pub fn new(num_actions: usize) -> Result<Exp3> {
        if num_actions == 0 {
            return Err(Error::InvalidParameter("learner needs actions".into()));
        }
        Ok(Exp3 {
            scores: vec![0.0; num_actions],
            rounds: 0,
        })
    }

    fn current(&self) -> Vec<f64> {
        let (gamma, eta) = anytime_rates(self.scores.len(), self.rounds + 1);
        let scaled: Vec<f64> = self.scores.iter().map(|&y| eta * y).collect();
        mix_with_uniform(softmax(&scaled), gamma)
    }
}

impl Learner for Exp3 {
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
        self.scores[played] += reward / probs[played];
        self.rounds += 1;
        Ok(())
    }
}

/// Exp3 with recency bias: the distribution is computed as if the latest
/// payoff estimate had arrived twice, which speeds up tracking.
#[derive(Debug, Clone)]
pub struct Exp3Rvu {
    scores: Vec<f64>,
    last_estimate: Vec<f64>,
    rounds: u64,
}

impl Exp3Rvu {
    pub fn new(num_actions: usize) -> Result<Exp3Rvu> {
        if num_actions == 0 {
            return Err(Error::InvalidParameter("learner needs actions".into()));
        }
        Ok(Exp3Rvu {
            scores: vec![0.0; num_actions],
            last_estimate: vec![0.0; num_actions],
            rounds: 0,
        })
    }

    fn current(&self) -> Vec<f64> {
        let (gamma, eta) = anytime_rates(self.scores.len(), self.rounds + 1);
        let scaled: Vec<f64> = self
            .scores
            .iter()
            .zip(&self.last_estimate)
            .map(|(&y, &l)| eta * (y + l))
            .collect();
        mix_with_uniform(softmax(&scaled), gamma)
    }
}

impl Learner for Exp3Rvu {
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
        let estimate = reward / probs[played];
        self.scores[played] += estimate;
        self.last_estimate.fill(0.0);
        self.last_estimate[played] = estimate;
        self.rounds += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_round_is_uniform() {
        // gamma_1 = min(1, sqrt(K log K)) = 1 for K >= 2.
        let mut learner = Exp3::new(5).unwrap();
        let dist = learner.next_distribution().unwrap();
        assert!(dist.probs().iter().all(|&p| (p - 0.2).abs() < 1e-15));
        let mut rvu = Exp3Rvu::new(5).unwrap();
        let dist = rvu.next_distribution().unwrap();
        assert!(dist.probs().iter().all(|&p| (p - 0.2).abs() < 1e-15));
    }

    #[test]
    fn update_matches_hand_computation() {
        let mut learner = Exp3::new(2).unwrap();
        learner.observe_bandit(0, 1.0).unwrap();
        // Round 1 was uniform, so the estimate is 1/0.5 = 2.
        assert_eq!(learner.scores, vec![2.0, 0.0]);
        let (gamma, eta) = anytime_rates(2, 2);
        let soft = softmax(&[eta * 2.0, 0.0]);
        let dist = learner.next_distribution().unwrap();
        assert!((dist.probs()[0] - ((1.0 - gamma) * soft[0] + gamma / 2.0)).abs() < 1e-15);
        assert!(dist.probs()[0] > 0.5);
    }

    #[test]
    fn recency_bias_tracks_faster() {
        // Constant reward on action 0: at every round the RVU learner puts
        // at least as much mass on it as plain Exp3 does.
        let mut plain = Exp3::new(2).unwrap();
        let mut rvu = Exp3Rvu::new(2).unwrap();
        for _ in 0..1000 {
            let p = plain.next_distribution().unwrap().probs()[0];
            let r = rvu.next_distribution().unwrap().probs()[0];
            assert!(r >= p - 1e-12, "rvu {r} fell below exp3 {p}");
            plain.observe_bandit(0, 1.0).unwrap();
            rvu.observe_bandit(0, 1.0).unwrap();
        }
    }

    #[test]
    fn vector_feedback_rejected() {
        let mut learner = Exp3::new(2).unwrap();
        assert!(learner.observe_vector(&[1.0, 0.0]).is_err());
        assert!(learner.observe_bandit(5, 1.0).is_err());
        assert!(learner.observe_bandit(0, f64::NAN).is_err());
    }
}
