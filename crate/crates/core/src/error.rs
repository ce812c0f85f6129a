use std::fmt;

/// Errors raised by the calibration toolkit.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("outcome space needs at least two distinct, non-empty labels: {0}")]
    InvalidSpace(String),
    #[error("weight {value} at index {index} is negative")]
    NegativeWeight { index: usize, value: f64 },
    #[error("weights sum to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("operands live on different outcome spaces")]
    SpaceMismatch,
    #[error("no record matches the conditioning event on `{0}`")]
    EmptyEvent(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("property `{0}` needs a numeric embedding of the outcomes")]
    MissingEmbedding(String),
    #[error("bad parameter: {0}")]
    BadParam(String),
    #[error("value kind mismatch: expected {expected}, got {got}")]
    KindMismatch { expected: ValueKind, got: ValueKind },
    #[error("could not find equal-valued pairs for `{0}` within the rejection budget")]
    RejectionBudgetExceeded(String),
    #[error("candidate grid is empty")]
    EmptyGrid,
    #[error("identification function `{0}` is not oriented")]
    NotOriented(String),
    #[error("outcome space is not binary with embedding {{0, 1}}")]
    NotBinary,
    #[error("records carry no prediction named `{0}`")]
    MissingPrediction(String),
    #[error("records carry no distributional prediction named `{0}`")]
    MissingDistPrediction(String),
    #[error("residual map is empty")]
    EmptyMap,
    #[error("group `{0}` has no weight")]
    EmptyGroup(String),
    #[error("scenario lacks `{0}`")]
    MissingIngredient(String),
    #[error("moment constraints are not realizable on the embedding: {0}")]
    Unrealizable(String),
    #[error("no separating hyperplane for predicted point {point}: nearest other point {other} at distance {distance}")]
    SeparationFailure {
        point: usize,
        other: usize,
        distance: f64,
    },
    #[error("scenario too large for enumeration: {0}")]
    TooLarge(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Variant tag of a [`crate::properties::PropertyValue`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ValueKind {
    Real,
    Token,
    Ranking,
    Distribution,
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ValueKind::Real => "real",
            ValueKind::Token => "token",
            ValueKind::Ranking => "ranking",
            ValueKind::Distribution => "distribution",
        };
        f.write_str(s)
    }
}
