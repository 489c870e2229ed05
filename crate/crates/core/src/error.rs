use alloc::string::String;

/// Errors shared by every module in the crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("catalog has no items")]
    EmptyCatalog,
    #[error("schema property {key:?} has an empty value space")]
    EmptyValueSpace { key: String },
    #[error("duplicate property key {key:?}")]
    DuplicateProperty { key: String },
    #[error("duplicate value {value:?} in property {key:?}")]
    DuplicateValue { key: String, value: String },
    #[error("duplicate item id {id:?}")]
    DuplicateItem { id: String },
    #[error("unknown item {id:?}")]
    UnknownItem { id: String },
    #[error("unknown property {key:?}")]
    UnknownProperty { key: String },
    #[error("item {id:?} defines {got} property values, schema has {expected}")]
    ItemArity { id: String, expected: usize, got: usize },
    #[error("item {id:?} has value index {index} out of range for property {key:?} (size {size})")]
    ValueOutOfRange {
        id: String,
        key: String,
        index: usize,
        size: usize,
    },
    #[error("smoothing epsilon {value} outside [0, 1)")]
    InvalidEpsilon { value: f64 },

    #[error("distribution has empty support")]
    EmptySupport,
    #[error("probability at index {index} is invalid: {value}")]
    InvalidProbability { index: usize, value: f64 },
    #[error("probabilities sum to {sum}, not 1")]
    ProbabilitySum { sum: f64 },
    #[error("weights sum to zero or are not finite")]
    ZeroWeightSum,
    #[error("support mismatch: {left} vs {right}")]
    SupportMismatch { left: usize, right: usize },
    #[error("infinite divergence: reference is zero at index {index} where p > 0 (unsmoothed reference?)")]
    InfiniteDivergence { index: usize },

    #[error("session is empty")]
    EmptySession,
    #[error("smoothing rate alpha is negative: {value}")]
    NegativeAlpha { value: f64 },
    #[error("events are not sorted by (user_id, timestamp)")]
    UnsortedEvents,
    #[error("max_gap must be positive, got {value}")]
    InvalidMaxGap { value: i64 },
    #[error("unknown event type {value:?}")]
    UnknownEventType { value: String },

    #[error("significance {value} outside (0, 1)")]
    InvalidSignificance { value: f64 },
    #[error("n_samples {got} below the minimum {min}")]
    TooFewSamples { got: usize, min: usize },
    #[error("M_max must be at least 1")]
    InvalidMMax,
    #[error("expected {expected} per-property values, got {got}")]
    PropertyCountMismatch { expected: usize, got: usize },
    #[error("alpha for property {key:?} differs from the value the table was calibrated with")]
    AlphaMismatch { key: String },
    #[error("threshold table does not match the catalog schema: {detail}")]
    TableSchemaMismatch { detail: String },
    #[error("threshold for property {key:?} at length {m} is invalid: {value}")]
    InvalidThreshold { key: String, m: usize, value: f64 },

    #[error("static-cosine scorer requires an anchor item")]
    MissingAnchor,
    #[error("reference distribution is zero at a value of property {key:?} (unsmoothed model?)")]
    ZeroReference { key: String },
    #[error("top-N must be at least 1")]
    InvalidTopN,

    #[error("tilted item distribution has zero total mass (no item matches the targets)")]
    ZeroTiltMass,
    #[error("synthetic catalog needs at least 2 items, got {got}")]
    TooFewItems { got: usize },
    #[error("synthetic property {key:?} needs at least 2 values")]
    DegenerateSchema { key: String },
    #[error("session length range {min}..={max} is empty or zero")]
    InvalidLengthRange { min: usize, max: usize },
    #[error("tilt ratio must be positive and finite, got {value}")]
    InvalidRatio { value: f64 },

    #[error("no session of length >= 2 to evaluate")]
    NoEvaluableSessions,
}
