use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or setter was handed a value outside its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A player or action index does not exist in the game it was used with.
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    /// The operation is not supported by this game kind (for example asking a
    /// sampled-payoff game for exact expectations).
    #[error("capability mismatch: {0}")]
    Capability(String),

    /// An exact computation would need to enumerate more opponent profiles
    /// than the configured ceiling allows.
    #[error("profile enumeration needs {needed} profiles, limit is {limit}")]
    EnumerationLimit { needed: u128, limit: u64 },

    /// A stochastic payoff was requested without a random source.
    #[error("this game has stochastic payoffs and needs an RNG")]
    MissingRng,

    /// The inputs are structurally fine but describe a situation the algorithm
    /// cannot handle (wrong feedback kind, empty elimination order, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// The closed-form elimination order is only defined for a parameter
    /// family this game instance is not a member of.
    #[error("no analytic elimination path: {0}")]
    AnalyticPathUnavailable(String),

    /// A probability vector failed validation.
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    /// The stationary-distribution iteration did not converge.
    #[error("stationary distribution solve diverged after {0} iterations")]
    StationaryDiverged(usize),

    /// An algorithm-spec string could not be parsed.
    #[error("bad algorithm spec `{spec}`: {reason}")]
    AlgoSpec { spec: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    /// A trace file did not match the expected CSV schema.
    #[error("trace format: {0}")]
    Trace(String),
}

pub type Result<T> = std::result::Result<T, Error>;
