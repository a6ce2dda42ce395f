use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter vector leaves the family's domain. `coordinate` is the
    /// first offending index (0-based; equal to `d` when the constraint that
    /// fails is the implicit remainder mass of a simplex parameter).
    #[error("parameter out of domain for {family}: coordinate {coordinate}: {detail}")]
    ParameterOutOfDomain {
        family: &'static str,
        coordinate: usize,
        detail: String,
    },

    /// The Fisher information is singular or undefined at the reference
    /// point (boundary parameter).
    #[error("singular information: {0}")]
    SingularInformation(String),

    /// An enumeration or search was requested beyond the supported size.
    #[error("capacity exceeded: {what} is limited to {limit}, got {requested}")]
    CapacityExceeded {
        what: &'static str,
        limit: usize,
        requested: usize,
    },

    /// A quantity cannot be evaluated by exact enumeration for this input
    /// (continuous spaces without closed forms, callback predicates, ...).
    #[error("unsupported for enumeration: {0}")]
    UnsupportedEnumeration(String),

    /// The communication budget cannot carry the protocol (e.g. fewer total
    /// bits than coordinates, or no complete sensor group).
    #[error("insufficient budget: {0}")]
    InsufficientBudget(String),

    /// Inputs whose shapes disagree with the object they are applied to
    /// (wrong transcript length, wrong message count, wrong vector length).
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A scalar argument is outside the mathematical domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A bound's applicability condition fails (e.g. Fano's packing
    /// condition `Nmax + Nmin < |V|`).
    #[error("bound not applicable: {0}")]
    Inapplicable(String),

    /// The sub-Gaussian norm does not exist below the search cap.
    #[error("no finite sub-Gaussian norm at or below {cap}")]
    NoFinitePsi2 { cap: f64 },

    /// A conditioning event with zero probability.
    #[error("conditioning set has zero probability")]
    ZeroMeasureSet,

    /// The regression design matrix is rank deficient.
    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    /// Semantic configuration error; `path` names the offending key.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
