//! Online mirror descent with a log-barrier regularizer and per-coordinate
//! increasing learning rates.
//!
//! The iterate is the distribution itself. Each observation solves the
//! implicit update 1/x'_i = 1/x_i - eta_i * (est_i - lambda) for the unique
//! lambda that renormalizes x'; whenever a coordinate's inverse probability
//! doubles past its running threshold, that coordinate's rate is bumped.

use crate::error::{Error, Result};
use crate::game::MixedStrategy;
use crate::learners::{check_bandit_input, FeedbackKind, Learner};

#[derive(Debug, Clone)]
pub struct OmdLb {
    point: Vec<f64>,
    rates: Vec<f64>,
    thresholds: Vec<f64>,
    bump: f64,
}

impl OmdLb {
    pub fn new(num_actions: usize, horizon: u64) -> Result<OmdLb> {
        if num_actions == 0 {
            return Err(Error::InvalidParameter("learner needs actions".into()));
        }
        if horizon < 2 {
            return Err(Error::InvalidParameter(
                "log-barrier rates need a horizon of at least 2".into(),
            ));
        }
        let k = num_actions as f64;
        let t = horizon as f64;
        let eta = (t.ln() / (k * t)).sqrt();
        Ok(OmdLb {
            point: vec![1.0 / k; num_actions],
            rates: vec![eta; num_actions],
            thresholds: vec![2.0 * k; num_actions],
            bump: (1.0 / t.ln()).exp(),
        })
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }
}

/// Sum of 1/(base_i + rate_i * lambda); strictly decreasing in lambda on the
/// domain where every denominator is positive.
fn mass(bases: &[f64], rates: &[f64], lambda: f64) -> f64 {
    bases
        .iter()
        .zip(rates)
        .map(|(&a, &h)| 1.0 / (a + h * lambda))
        .sum()
}

impl Learner for OmdLb {
    fn num_actions(&self) -> usize {
        self.point.len()
    }

    fn feedback_kind(&self) -> FeedbackKind {
        FeedbackKind::Bandit
    }

    fn next_distribution(&mut self) -> Result<MixedStrategy> {
        MixedStrategy::new(self.point.clone())
    }

    fn observe_bandit(&mut self, played: usize, reward: f64) -> Result<()> {
        check_bandit_input(self.point.len(), played, reward)?;
        if reward == 0.0 {
            return Ok(()); // zero estimate: lambda = 0 leaves x unchanged
        }
        // Importance-weighted estimate, nonzero only on the played action.
        let estimate = reward / self.point[played];
        let bases: Vec<f64> = self
            .point
            .iter()
            .zip(&self.rates)
            .enumerate()
            .map(|(i, (&x, &h))| 1.0 / x - if i == played { h * estimate } else { 0.0 })
            .collect();

        // Every denominator base_i + rate_i * lambda must stay positive.
        let floor = bases
            .iter()
            .zip(&self.rates)
            .map(|(&a, &h)| -a / h)
            .fold(f64::NEG_INFINITY, f64::max);

        // Bracket the root of mass(lambda) = 1: walk down toward the floor
        // until the mass exceeds 1, then away from it until it drops below.
        let mut lo_step = 1.0;
        let mut guard = 0;
        while mass(&bases, &self.rates, floor + lo_step) < 1.0 {
            lo_step /= 2.0;
            guard += 1;
            if guard > 2000 {
                return Err(Error::Domain(
                    "log-barrier update: no lower bracket".into(),
                ));
            }
        }
        let mut hi_step = lo_step;
        guard = 0;
        while mass(&bases, &self.rates, floor + hi_step) > 1.0 {
            hi_step *= 2.0;
            guard += 1;
            if guard > 2000 {
                return Err(Error::Domain(
                    "log-barrier update: no upper bracket".into(),
                ));
            }
        }
        let (mut lo, mut hi) = (floor + lo_step, floor + hi_step);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if mass(&bases, &self.rates, mid) >= 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let lambda = 0.5 * (lo + hi);

        let mut next: Vec<f64> = bases
            .iter()
            .zip(&self.rates)
            .map(|(&a, &h)| 1.0 / (a + h * lambda))
            .collect();
        let total: f64 = next.iter().sum();
        if !(total.is_finite() && (total - 1.0).abs() < 1e-6) {
            return Err(Error::Domain(format!(
                "log-barrier update: normalization drifted to {total}"
            )));
        }
        for x in &mut next {
            *x /= total;
        }

        for i in 0..next.len() {
            let inverse = 1.0 / next[i];
            if inverse > self.thresholds[i] {
                self.thresholds[i] = 2.0 * inverse;
                self.rates[i] *= self.bump;
            }
        }
        self.point = next;
        Ok(())
    }
}
