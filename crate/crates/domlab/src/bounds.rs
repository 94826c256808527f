//! Horizon calculators: when the first elimination level becomes visible in
//! play, and how the per-level horizons grow after that.

use crate::error::{Error, Result};

/// Inputs for the first-level horizon.
#[derive(Debug, Clone, Copy)]
pub struct T1Params {
    /// Largest action count among agents.
    pub num_actions: usize,
    pub num_agents: usize,
    /// Observation-noise standard deviation, normalized units.
    pub noise_std: f64,
    /// History-discount exponent of the learner.
    pub beta: f64,
    /// Exploration-floor exponent of the learner.
    pub b: f64,
    /// Smallest dominance margin, normalized units.
    pub gap: f64,
    pub eps: f64,
    pub delta: f64,
}

impl T1Params {
    fn validate(&self) -> Result<()> {
        if self.num_actions < 2 {
            return Err(Error::InvalidParameter("need at least 2 actions".into()));
        }
        if self.num_agents < 1 {
            return Err(Error::InvalidParameter("need at least 1 agent".into()));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise std {}",
                self.noise_std
            )));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta {}", self.beta)));
        }
        if !(self.b > 0.0 && self.b < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "exploration exponent b = {} outside (0, 1)",
                self.b
            )));
        }
        if !(self.gap > 0.0 && self.gap.is_finite()) {
            return Err(Error::InvalidParameter(format!("gap {}", self.gap)));
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "eps = {} outside (0, 1]",
                self.eps
            )));
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "delta = {} outside (0, 0.5)",
                self.delta
            )));
        }
        Ok(())
    }
}

/// The decaying tail expression whose crossing below the essential
/// elimination threshold defines the first horizon: an exploration-floor
/// term plus a concentration term that bulges before dying exponentially.
pub fn t1_lhs(params: &T1Params, t: f64) -> f64 {
    let k = params.num_actions as f64;
    let sigma2 = params.noise_std * params.noise_std;
    let growth = 4.0
        * (std::f64::consts::E * k * (1.0 + sigma2) / (1.0 + 2.0 * params.beta + params.b)).sqrt()
        * (2.0 * k / params.delta).ln().sqrt();
    let decay = params.gap / (16.0 * (1.0 + params.beta));
    t.powf(-params.b) / k + (growth * t.powf((1.0 + params.b) / 2.0) - decay * t).exp()
}

fn t1_rhs(params: &T1Params) -> f64 {
    let k = params.num_actions as f64;
    let n = params.num_agents as f64;
    params.eps.min(params.gap / 2.0) / (4.0 * k * n)
}

/// Smallest round from which the tail expression stays below the threshold.
///
/// The left side strictly decreases once the concentration bulge peaks, and
/// at the peak it still exceeds 1 (the exponent is nonnegative there) while
/// the threshold is below 1/(4K), so the crossing is unique and sits on the
/// decreasing branch. Doubling plus bisection finds it exactly.
pub fn t1_bound(params: &T1Params) -> Result<u64> {
    params.validate()?;
    let rhs = t1_rhs(params);
    let k = params.num_actions as f64;
    let sigma2 = params.noise_std * params.noise_std;
    let growth = 4.0
        * (std::f64::consts::E * k * (1.0 + sigma2) / (1.0 + 2.0 * params.beta + params.b)).sqrt()
        * (2.0 * k / params.delta).ln().sqrt();
    let decay = params.gap / (16.0 * (1.0 + params.beta));
    // Peak of the exponent growth*t^((1+b)/2) - decay*t.
    let peak = (growth * (1.0 + params.b) / (2.0 * decay)).powf(2.0 / (1.0 - params.b));

    const LIMIT: f64 = 9.0e15; // stay where f64 resolves adjacent integers
    let mut lo = peak.floor().max(1.0);
    if lo > LIMIT {
        return Err(Error::Domain(
            "first-level horizon exceeds the exactly representable range".into(),
        ));
    }
    debug_assert!(t1_lhs(params, lo) >= rhs);
    let mut hi = 2.0 * lo;
    while t1_lhs(params, hi) >= rhs {
        hi *= 2.0;
        if hi > LIMIT {
            return Err(Error::Domain(
                "first-level horizon exceeds the exactly representable range".into(),
            ));
        }
    }
    // Invariant: lhs(lo) >= rhs > lhs(hi); shrink to adjacent integers.
    while hi - lo > 1.0 {
        let mid = ((lo + hi) / 2.0).floor();
        if t1_lhs(params, mid) >= rhs {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi as u64)
}

/// The horizon for the next elimination level, given the current one: the
/// larger of a geometric stretch and an additive concentration cost.
pub fn next_t_bound(current: u64, gap: f64, beta: f64, delta: f64) -> Result<u64> {
    if current < 1 {
        return Err(Error::InvalidParameter("current horizon must be >= 1".into()));
    }
    if !(gap > 0.0 && gap.is_finite()) {
        return Err(Error::InvalidParameter(format!("gap {gap}")));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!("beta {beta}")));
    }
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "delta = {delta} outside (0, 0.5)"
        )));
    }
    let t = current as f64;
    let stretch = (1.0 + 8.0 / gap).powf(1.0 / (1.0 + beta)) * t;
    let additive = t
        + (1.0 + beta).powi(2) * (4.0 + gap).powi(2) * (8.0 + gap).powi(2)
            / (4.0 * (1.0 + 2.0 * beta) * gap * gap)
            * (1.0 / delta).ln();
    Ok(stretch.max(additive).ceil() as u64)
}

/// Iterates [`next_t_bound`] to produce the per-level horizon table
/// T_1, ..., T_levels.
pub fn level_schedule(
    first: u64,
    levels: usize,
    gap: f64,
    beta: f64,
    delta: f64,
) -> Result<Vec<u64>> {
    if levels == 0 {
        return Err(Error::InvalidParameter("need at least one level".into()));
    }
    let mut out = Vec::with_capacity(levels);
    out.push(first);
    for _ in 1..levels {
        let next = next_t_bound(*out.last().expect("nonempty"), gap, beta, delta)?;
        out.push(next);
    }
    Ok(out)
}
