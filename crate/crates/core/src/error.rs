use std::path::PathBuf;

/// Errors raised anywhere in the scoring pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{0}")]
    Validation(String),

    #[error(
        "dimension mismatch: sentence '{sentence_id}' has a vector of length {found}, \
         but '{reference}' established dimension {expected}"
    )]
    DimensionMismatch {
        sentence_id: String,
        reference: String,
        expected: usize,
        found: usize,
    },

    #[error("duplicate record for sentence '{sentence_id}', system '{system_id}'")]
    DuplicateRecord {
        sentence_id: String,
        system_id: String,
    },

    #[error("insufficient anchors: found {found}, need at least {required}")]
    InsufficientAnchors { found: usize, required: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("every sample was excluded from evaluation ({excluded} excluded)")]
    EmptyEvaluation { excluded: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("stage '{stage}'{}: {source}", sentence_id.as_ref().map(|s| format!(" (sentence '{s}')")).unwrap_or_default())]
    Stage {
        stage: &'static str,
        sentence_id: Option<String>,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str, sentence_id: Option<&str>) -> Self {
        Error::Stage {
            stage,
            sentence_id: sentence_id.map(str::to_owned),
            source: Box::new(self),
        }
    }

    /// True for errors caused by malformed or inconsistent input data.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Parse { .. }
            | Error::Validation(_)
            | Error::DimensionMismatch { .. }
            | Error::DuplicateRecord { .. }
            | Error::Config(_) => true,
            Error::Stage { source, .. } => source.is_validation(),
            _ => false,
        }
    }

    /// Process exit status: 1 for validation failures, 2 for runtime or numeric failures.
    pub fn exit_code(&self) -> i32 {
        if self.is_validation() {
            1
        } else {
            2
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
