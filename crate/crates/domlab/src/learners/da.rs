//! Dual averaging over the simplex with pluggable mirror maps: exponential
//! weights, lazy projected gradient descent, and fictitious play are all the
//! same score-accumulation loop with different maps.

use crate::error::{Error, Result};
use crate::game::MixedStrategy;
use crate::learners::{project_simplex, softmax, FeedbackKind, Learner};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MirrorMapKind {
    /// Softmax of the scores (exponential weights).
    Entropic,
    /// Euclidean projection of the scores onto the simplex.
    Euclidean,
    /// Point mass on the best score, lowest index on ties.
    BestResponse,
}

/// Maps a finite score vector to a distribution.
pub fn mirror_map(kind: MirrorMapKind, scores: &[f64]) -> Result<MixedStrategy> {
    if scores.is_empty() {
        return Err(Error::InvalidParameter("empty score vector".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidParameter(
            "mirror map needs finite scores".into(),
        ));
    }
    let probs = match kind {
        MirrorMapKind::Entropic => softmax(scores),
        MirrorMapKind::Euclidean => project_simplex(scores),
        MirrorMapKind::BestResponse => {
            let mut best = 0;
            for (i, &s) in scores.iter().enumerate() {
                if s > scores[best] {
                    best = i;
                }
            }
            return Ok(MixedStrategy::point_mass(scores.len(), best)?);
        }
    };
    MixedStrategy::new(probs)
}

/// Full-information score accumulation: y grows by η_t times the payoff
/// vector each round, with η_t = eta0 · t^(-b) on 1-based rounds.
#[derive(Debug, Clone)]
pub struct DualAveraging {
    map: MirrorMapKind,
    eta0: f64,
    b: f64,
    scores: Vec<f64>,
    rounds: u64,
}

impl DualAveraging {
    pub fn new(num_actions: usize, map: MirrorMapKind, eta0: f64, b: f64) -> Result<DualAveraging> {
        if num_actions == 0 {
            return Err(Error::InvalidParameter("learner needs actions".into()));
        }
        if !(eta0 > 0.0 && eta0.is_finite()) {
            return Err(Error::InvalidParameter(format!("eta0 = {eta0}")));
        }
        if !(0.0..=1.0).contains(&b) {
            return Err(Error::InvalidParameter(format!(
                "rate exponent b = {b} outside [0, 1]"
            )));
        }
        Ok(DualAveraging {
            map,
            eta0,
            b,
            scores: vec![0.0; num_actions],
            rounds: 0,
        })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }
}

impl Learner for DualAveraging {
    fn num_actions(&self) -> usize {
        self.scores.len()
    }

    fn feedback_kind(&self) -> FeedbackKind {
        FeedbackKind::FullVector
    }

    fn next_distribution(&mut self) -> Result<MixedStrategy> {
        mirror_map(self.map, &self.scores)
    }

    fn observe_vector(&mut self, payoffs: &[f64]) -> Result<()> {
        if payoffs.len() != self.scores.len() {
            return Err(Error::InvalidParameter(format!(
                "payoff vector of length {}, learner has {} actions",
                payoffs.len(),
                self.scores.len()
            )));
        }
        if payoffs.iter().any(|u| !u.is_finite()) {
            return Err(Error::InvalidParameter("non-finite payoff".into()));
        }
        self.rounds += 1;
        let rate = self.eta0 * (self.rounds as f64).powf(-self.b);
        for (score, &u) in self.scores.iter_mut().zip(payoffs) {
            *score += rate * u;
        }
        Ok(())
    }
}
