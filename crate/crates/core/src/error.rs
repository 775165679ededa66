use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Everything that can go wrong inside the numerical pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty ensemble: no predictions to aggregate")]
    EmptyEnsemble,

    #[error("schema violation: {distinct} distinct labels but the universe declares k = {k}")]
    SchemaViolation { distinct: usize, k: usize },

    #[error("label `{label}` is not in the declared label universe")]
    UnknownLabel { label: String },

    #[error("risk {risk} out of range [0.50, 0.99] for case `{case_id}`, model `{model_id}`")]
    RiskOutOfRange {
        case_id: String,
        model_id: String,
        risk: f64,
    },

    #[error("case `{case_id}` has a single prediction; external entropy needs at least two models")]
    DegenerateEnsemble { case_id: String },

    #[error("duplicate prediction for case `{case_id}`, model `{model_id}`")]
    DuplicateRecord { case_id: String, model_id: String },

    #[error("records span domains `{first}` and `{second}`; aggregate one domain at a time")]
    MixedDomains { first: String, second: String },

    #[error("case `{case_id}` has no ground-truth label")]
    MissingTruth { case_id: String },

    #[error("insufficient data: need at least {needed} values, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("degenerate bootstrap: {skipped} of {resamples} resamples had a constant column")]
    DegenerateBootstrap { skipped: usize, resamples: usize },

    #[error("invalid weights ({w1}, {w2}): both must be finite and >= 0, not both zero")]
    InvalidWeights { w1: f64, w2: f64 },

    #[error("invalid thresholds: theta_low {low} must be below theta_high {high}")]
    InvalidThresholds { low: f64, high: f64 },

    #[error("no threshold pair keeps every tier at or above the {min_coverage} coverage floor")]
    Infeasible { min_coverage: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    /// True for optimization problems with no feasible solution.
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible { .. })
    }
}
