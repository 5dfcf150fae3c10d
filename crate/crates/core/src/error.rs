use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input is empty")]
    EmptyInput,

    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: u64,
        expected: usize,
        found: usize,
    },

    #[error("malformed delimited text: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("relation has no attributes")]
    NoAttributes,

    #[error("{0} attributes exceed the supported maximum of 64")]
    TooManyAttributes(usize),

    #[error("attribute index {0} is out of range")]
    AttributeOutOfRange(usize),

    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),

    #[error("partitions come from relations of different sizes ({0} vs {1} rows)")]
    RowCountMismatch(usize, usize),

    #[error("invalid value for `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("invalid parameters: {}", describe(.0))]
    InvalidParameters(Vec<FieldError>),

    #[error("metric `{metric}` cannot be used with attribute `{attribute}` of type {found}")]
    MetricMismatch {
        metric: String,
        attribute: String,
        found: String,
    },

    #[error("distance is undefined for a null operand")]
    NullOperand,

    #[error("dependency sets are over different schemas")]
    SchemaMismatch,

    #[error("row {0} was already removed by an earlier resolution")]
    StaleResolution(u32),

    #[error("row {0} does not exist")]
    UnknownRow(u32),

    #[error("operation was cancelled")]
    Cancelled,
}

/// One offending option, as reported to callers that validate a whole
/// parameter document at once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub reason: String,
}

fn describe(fields: &[FieldError]) -> String {
    let parts: Vec<String> = fields.iter().map(|f| format!("`{}` {}", f.field, f.reason)).collect();
    parts.join("; ")
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl Error {
    /// The offending fields for validation errors, `None` for other kinds.
    pub fn field_errors(&self) -> Option<Vec<FieldError>> {
        match self {
            Error::InvalidParameter { field, reason } => Some(vec![FieldError {
                field: field.clone(),
                reason: reason.clone(),
            }]),
            Error::InvalidParameters(fields) => Some(fields.clone()),
            _ => None,
        }
    }
}
