use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rule file line {line}: {message}")]
    RuleSyntax { line: usize, message: String },

    #[error("rule file line {line}: unknown attribute `{name}`")]
    UnknownAttribute { line: usize, name: String },

    #[error("rule file line {line}: attribute `{attribute}` appears on both sides of `{rule}`")]
    RhsInLhs {
        line: usize,
        rule: String,
        attribute: String,
    },

    #[error("rule file line {line}: duplicate rule id `{id}`")]
    DuplicateRule { line: usize, id: String },

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("unknown tuple `{0}`")]
    UnknownTuple(String),

    #[error("unknown attribute `{0}`")]
    UnknownAttributeName(String),

    #[error("update {0} is not pending (stale or already decided)")]
    StaleUpdate(String),

    #[error("invalid feedback: {0}")]
    InvalidFeedback(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("unknown or empty group `{0}`")]
    UnknownGroup(String),

    #[error("model for attribute `{0}` is not trained")]
    UntrainedModel(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
