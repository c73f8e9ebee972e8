use std::path::PathBuf;

use crate::ids::{ModelId, SampleId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid identifier {0:?}: ids must be nonempty and contain no commas or newlines")]
    InvalidId(String),

    #[error("no such version: {0}")]
    NoSuchVersion(usize),

    #[error("sample id reused: {0}")]
    SampleReused(SampleId),

    #[error("duplicate sample id within batch: {0}")]
    DuplicateSample(SampleId),

    #[error("model {0} is already on the roster and cannot be introduced again")]
    ModelAlreadyOnRoster(ModelId),

    #[error("unknown re-evaluated model: {0}")]
    UnknownModel(ModelId),

    #[error("version 0 cannot re-evaluate old models ({0} given)")]
    ReevaluationAtStart(usize),

    #[error("available model {0} is not on the roster")]
    AvailableNotOnRoster(ModelId),

    #[error("model {model} is not scheduled for evaluation at version {version}")]
    NotScheduled { model: ModelId, version: usize },

    #[error("sample {sample} does not belong to version {version}")]
    SampleNotInVersion { sample: SampleId, version: usize },

    #[error("outcome conflict for ({model}, {sample}): recorded {recorded}, got {got}")]
    OutcomeConflict {
        model: ModelId,
        sample: SampleId,
        recorded: u8,
        got: u8,
    },

    #[error("model {model} is not fully evaluated on version {version}")]
    NotFullyEvaluated { model: ModelId, version: usize },

    #[error("version {version} is not sealed: {missing} outcome(s) missing")]
    NotSealed { version: usize, missing: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("malformed snapshot: {0}")]
    Snapshot(#[from] serde_json::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("non-finite parameter value")]
    NonFinite,

    #[error("no parameter for model {0}")]
    MissingAbility(ModelId),

    #[error("no parameter for sample {0}")]
    MissingDifficulty(SampleId),

    #[error("empty observation set")]
    EmptyObservations,

    #[error("model {0} has no observations")]
    UnobservedModel(ModelId),

    #[error("sample {0} has no observations")]
    UnobservedSample(SampleId),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("empty input")]
    EmptyInput,

    #[error("undefined correlation: constant vector")]
    UndefinedCorrelation,

    #[error("budget {budget} exceeds {what} ({available})")]
    BudgetTooLarge {
        budget: usize,
        available: usize,
        what: &'static str,
    },

    #[error("budget must be at least 1")]
    ZeroBudget,

    #[error("no available candidates")]
    NoCandidates,

    #[error("no sealed prior version to plan from")]
    NoPriorVersion,

    #[error("invalid question {id}: {reason}")]
    InvalidQuestion { id: String, reason: String },

    #[error("judge {judge} has the wrong capability for this filter (need {need})")]
    WrongCapability { judge: String, need: &'static str },

    #[error("question {0} has no media reference")]
    MissingMedia(SampleId),

    #[error("unparseable response: {0:?}")]
    Unparseable(String),

    #[error("judge error: {0}")]
    Judge(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
