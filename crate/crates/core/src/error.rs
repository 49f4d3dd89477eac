use thiserror::Error;

/// Errors surfaced by model construction, sampling, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid arm for treatment '{treatment}': {reason}")]
    InvalidArm { treatment: String, reason: String },

    #[error("invalid study '{id}': {reason}")]
    InvalidStudy { id: String, reason: String },

    #[error("insufficient sample in study '{0}' (total n equals arm count)")]
    InsufficientSample(String),

    #[error("invalid network '{subgroup}': {reason}")]
    InvalidNetwork { subgroup: String, reason: String },

    #[error("unknown treatment '{0}'")]
    UnknownTreatment(String),

    #[error("network for '{subgroup}' is disconnected; components: {components:?}")]
    Disconnected {
        subgroup: String,
        components: Vec<Vec<String>>,
    },

    #[error("no borrowable comparisons: common treatments reduce to the reference alone")]
    NoBorrowableComparisons,

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),

    #[error("sampler error: {0}")]
    Sampler(String),

    #[error("unknown parameter '{0}'")]
    UnknownParameter(String),

    #[error("diagnostic requires >=2 chains")]
    SingleChain,

    #[error("empty sample for parameter '{0}'")]
    EmptySample(String),

    #[error("comparison '{0}' has no direct evidence")]
    NoDirectEvidence(String),

    #[error("comparison '{0}' not splittable: no indirect path remains")]
    NotSplittable(String),

    #[error("pairwise meta-analysis unavailable for '{comparison}': {reason}; fallback to non-informative")]
    PairwiseUnavailable { comparison: String, reason: String },

    #[error("expert pool error: {0}")]
    ExpertPool(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("convergence failure: {0}")]
    ConvergenceFailure(String),

    #[error("analysis configuration error: {0}")]
    Analysis(String),

    #[error("i/o error at '{path}': {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
