//! Sequential decision algorithms driven by per-round feedback.
//!
//! Every learner is a deterministic state machine: `next_distribution`
//! reports the mixed strategy for the coming round without changing state,
//! and one of the `observe_*` methods advances it. Action sampling and
//! reward noise live in the simulator, so identical feedback streams always
//! reproduce identical trajectories.

mod da;
mod exp3;
mod exp3dh;
mod exp3p;
mod omdlb;

pub use da::{mirror_map, DualAveraging, MirrorMapKind};
pub use exp3::{Exp3, Exp3Rvu};
pub use exp3dh::{exp3dh_distribution, Exp3Dh};
pub use exp3p::{Exp3P, SwapExp3P};
pub use omdlb::OmdLb;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::game::MixedStrategy;

/// What kind of feedback a learner consumes each round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedbackKind {
    /// The reward of the single action played.
    Bandit,
    /// The full payoff vector over own actions.
    FullVector,
}

pub trait Learner: Send {
    fn num_actions(&self) -> usize;

    fn feedback_kind(&self) -> FeedbackKind;

    /// The mixed strategy for the coming round. Repeated calls without an
    /// intervening observe return the same value.
    fn next_distribution(&mut self) -> Result<MixedStrategy>;

    /// Feeds back the reward of the action actually played.
    fn observe_bandit(&mut self, played: usize, reward: f64) -> Result<()> {
        let _ = (played, reward);
        Err(Error::Capability(
            "this learner needs full payoff vectors".into(),
        ))
    }

    /// Feeds back the payoff of every own action.
    fn observe_vector(&mut self, payoffs: &[f64]) -> Result<()> {
        let _ = payoffs;
        Err(Error::Capability(
            "this learner accepts only bandit feedback".into(),
        ))
    }
}

pub(crate) fn check_bandit_input(num_actions: usize, played: usize, reward: f64) -> Result<()> {
    if played >= num_actions {
        return Err(Error::IndexOutOfRange(format!(
            "played action {played}, learner has {num_actions}"
        )));
    }
    if !reward.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "non-finite reward {reward}"
        )));
    }
    Ok(())
}

/// Numerically stable softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let peak = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = scores.iter().map(|&s| (s - peak).exp()).collect();
    let total: f64 = out.iter().sum();
    for p in &mut out {
        *p /= total;
    }
    out
}

/// Euclidean projection onto the probability simplex (sort-and-threshold).
pub fn project_simplex(point: &[f64]) -> Vec<f64> {
    let mut sorted = point.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite scores"));
    let mut cumulative = 0.0;
    let mut threshold = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (1.0 - cumulative) / (j + 1) as f64;
        if u + candidate > 0.0 {
            threshold = candidate;
        }
    }
    point.iter().map(|&u| (u + threshold).max(0.0)).collect()
}

/// Left stationary distribution of a row-stochastic matrix by power
/// iteration from `start`, to L1 tolerance 1e-12 within `max_iters` sweeps.
pub fn stationary_distribution(
    rows: &[Vec<f64>],
    start: &[f64],
    max_iters: usize,
) -> Option<Vec<f64>> {
    let k = rows.len();
    let mut p = start.to_vec();
    let mut next = vec![0.0; k];
    for _ in 0..max_iters {
        for item in next.iter_mut() {
            *item = 0.0;
        }
        for (i, row) in rows.iter().enumerate() {
            let w = p[i];
            if w == 0.0 {
                continue;
            }
            for (j, &m) in row.iter().enumerate() {
                next[j] += w * m;
            }
        }
        let total: f64 = next.iter().sum();
        for item in next.iter_mut() {
            *item /= total;
        }
        let change: f64 = p.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut p, &mut next);
        if change <= 1e-12 {
            return Some(p);
        }
    }
    None
}

/// A parsed algorithm specification string, e.g. `exp3dh:b=0.2,beta=20`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgoSpec {
    raw: String,
    pub kind: AlgoKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AlgoKind {
    Exp3Dh { b: f64, beta: f64 },
    Exp3,
    Exp3P { horizon: u64, delta: f64 },
    Exp3Rvu,
    SwapExp3P { horizon: u64, delta: f64 },
    OmdLb { horizon: u64 },
    DualAveraging { map: MirrorMapKind, eta0: f64, b: f64 },
}

impl AlgoSpec {
    /// The original spec string, for display and file naming.
    pub fn raw(&self) -> &str {
        &self.raw
    }

    /// Instantiates a fresh learner for a player with `num_actions` actions.
    pub fn build(&self, num_actions: usize) -> Result<Box<dyn Learner>> {
        Ok(match self.kind {
            AlgoKind::Exp3Dh { b, beta } => Box::new(Exp3Dh::new(num_actions, b, beta)?),
            AlgoKind::Exp3 => Box::new(Exp3::new(num_actions)?),
            AlgoKind::Exp3P { horizon, delta } => {
                Box::new(Exp3P::new(num_actions, horizon, delta)?)
            }
            AlgoKind::Exp3Rvu => Box::new(Exp3Rvu::new(num_actions)?),
            AlgoKind::SwapExp3P { horizon, delta } => {
                Box::new(SwapExp3P::new(num_actions, horizon, delta)?)
            }
            AlgoKind::OmdLb { horizon } => Box::new(OmdLb::new(num_actions, horizon)?),
            AlgoKind::DualAveraging { map, eta0, b } => {
                Box::new(DualAveraging::new(num_actions, map, eta0, b)?)
            }
        })
    }
}

impl fmt::Display for AlgoSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

fn spec_err(spec: &str, reason: impl Into<String>) -> Error {
    Error::AlgoSpec {
        spec: spec.to_string(),
        reason: reason.into(),
    }
}

struct Params<'a> {
    spec: &'a str,
    entries: Vec<(&'a str, &'a str)>,
}

impl<'a> Params<'a> {
    fn parse(spec: &'a str, body: Option<&'a str>) -> Result<Params<'a>> {
        let mut entries = Vec::new();
        if let Some(body) = body {
            for piece in body.split(',') {
                let (key, value) = piece
                    .split_once('=')
                    .ok_or_else(|| spec_err(spec, format!("expected key=value, got `{piece}`")))?;
                if entries.iter().any(|(k, _)| *k == key) {
                    return Err(spec_err(spec, format!("duplicate key `{key}`")));
                }
                entries.push((key, value));
            }
        }
        Ok(Params { spec, entries })
    }

    fn real(&mut self, key: &str) -> Result<Option<f64>> {
        let Some(pos) = self.entries.iter().position(|(k, _)| *k == key) else {
            return Ok(None);
        };
        let (_, value) = self.entries.remove(pos);
        let parsed: f64 = value
            .parse()
            .map_err(|_| spec_err(self.spec, format!("`{key}` must be a number, got `{value}`")))?;
        if !parsed.is_finite() {
            return Err(spec_err(self.spec, format!("`{key}` must be finite")));
        }
        Ok(Some(parsed))
    }

    fn integer(&mut self, key: &str) -> Result<Option<u64>> {
        let Some(value) = self.real(key)? else {
            return Ok(None);
        };
        if value < 1.0 || value.fract() != 0.0 || value > u64::MAX as f64 {
            return Err(spec_err(
                self.spec,
                format!("`{key}` must be a positive integer"),
            ));
        }
        Ok(Some(value as u64))
    }

    fn require_real(&mut self, key: &str) -> Result<f64> {
        self.real(key)?
            .ok_or_else(|| spec_err(self.spec, format!("missing required key `{key}`")))
    }

    fn require_integer(&mut self, key: &str) -> Result<u64> {
        self.integer(key)?
            .ok_or_else(|| spec_err(self.spec, format!("missing required key `{key}`")))
    }

    fn finish(self) -> Result<()> {
        if let Some((key, _)) = self.entries.first() {
            return Err(spec_err(self.spec, format!("unknown key `{key}`")));
        }
        Ok(())
    }
}

impl FromStr for AlgoSpec {
    type Err = Error;

    fn from_str(raw: &str) -> Result<AlgoSpec> {
        let (name, body) = match raw.split_once(':') {
            Some((name, body)) => (name, Some(body)),
            None => (raw, None),
        };
        let mut params = Params::parse(raw, body)?;
        let kind = match name {
            "exp3dh" => {
                let b = params.require_real("b")?;
                let beta = params.require_real("beta")?;
                if !(b > 0.0 && b < 1.0) {
                    return Err(spec_err(raw, "need 0 < b < 1"));
                }
                if beta < 0.0 {
                    return Err(spec_err(raw, "need beta >= 0"));
                }
                AlgoKind::Exp3Dh { b, beta }
            }
            "exp3" => AlgoKind::Exp3,
            "exp3p" | "exp3pswap" => {
                let horizon = params.require_integer("T")?;
                let delta = params.real("delta")?.unwrap_or(0.01);
                if !(delta > 0.0 && delta < 1.0) {
                    return Err(spec_err(raw, "need 0 < delta < 1"));
                }
                if name == "exp3p" {
                    AlgoKind::Exp3P { horizon, delta }
                } else {
                    AlgoKind::SwapExp3P { horizon, delta }
                }
            }
            "exp3rvu" => AlgoKind::Exp3Rvu,
            "omdlb" => {
                let horizon = params.require_integer("T")?;
                if horizon < 2 {
                    return Err(spec_err(raw, "need T >= 2"));
                }
                AlgoKind::OmdLb { horizon }
            }
            "ew" | "lgd" | "fp" => {
                let map = match name {
                    "ew" => MirrorMapKind::Entropic,
                    "lgd" => MirrorMapKind::Euclidean,
                    _ => MirrorMapKind::BestResponse,
                };
                let eta0 = params.real("eta0")?.unwrap_or(1.0);
                let b = params.real("b")?.unwrap_or(0.5);
                if eta0 <= 0.0 {
                    return Err(spec_err(raw, "need eta0 > 0"));
                }
                if !(0.0..=1.0).contains(&b) {
                    return Err(spec_err(raw, "need 0 <= b <= 1"));
                }
                AlgoKind::DualAveraging { map, eta0, b }
            }
            other => return Err(spec_err(raw, format!("unknown algorithm `{other}`"))),
        };
        params.finish()?;
        Ok(AlgoSpec {
            raw: raw.to_string(),
            kind,
        })
    }
}
