//! Game-theory laboratory: normal-form games with dominance structure,
//! certificate-producing iterated elimination, correlated-equilibrium
//! constructions, bandit learners, self-play simulation, and the horizon
//! calculators that predict when elimination becomes visible in play.

pub mod bounds;
pub mod equilibrium;
mod error;
pub mod game;
pub mod iesds;
pub mod learners;
mod lp;
pub mod simulate;

pub use error::{Error, Result};
pub use game::{DirParams, Game, GameKind, LemonsParams, MixedStrategy, TensorGame};
pub use iesds::{iesds, lemons_analytic_path, EliminationPath};
pub use learners::{AlgoSpec, Learner};
pub use lp::{max_margin_mixture, MarginSolution};
