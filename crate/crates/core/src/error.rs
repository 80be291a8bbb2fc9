use std::path::PathBuf;

use crate::kb::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read or write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: parse error at line {line}, column {column}: {message}")]
    Parse {
        context: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("knowledge base failed validation ({} violation(s)): {}", .0.len(), summarize(.0))]
    Invalid(Vec<Violation>),

    #[error("unknown {kind} id `{id}`")]
    UnknownId { kind: &'static str, id: String },

    #[error("manifestation `{0}` cannot be both present and absent")]
    ConflictingFinding(String),

    #[error("findings have zero likelihood under the model")]
    ZeroLikelihood,

    #[error("{what}: {actual} exceeds the limit of {limit}")]
    CapExceeded {
        what: &'static str,
        limit: usize,
        actual: usize,
    },

    #[error("all {samples} Monte-Carlo sample weights are zero")]
    AllWeightsZero { samples: u64 },

    #[error("infeasible generator spec: {0}")]
    InfeasibleSpec(String),

    #[error("`{treatment}` is not a treatment for `{disease}`")]
    NotATreatingPair { treatment: String, disease: String },

    #[error("threshold table was computed for knowledge base {found}, current is {expected}")]
    StaleThresholds { expected: String, found: String },

    #[error("posterior report has no entry for disease `{0}`")]
    MissingPosterior(String),

    #[error("Monte-Carlo estimates are not bounds; pruning with them requires the unsafe flag")]
    UnsafeMethod,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("component {component}: {source}")]
    Component {
        component: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown session `{0}`")]
    UnknownSession(String),

    #[error("could not construct a verified case: {0}")]
    Verification(String),
}

fn summarize(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| format!("[{}] {}: {}", v.node, v.rule, v.message))
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(context: impl Into<String>, err: &serde_json::Error) -> Self {
        Error::Parse {
            context: context.into(),
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}
