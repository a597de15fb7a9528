use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("{0} is empty")]
    EmptySet(String),

    #[error("invalid strata spec: {0}")]
    InvalidStrata(String),

    #[error("band {band} is underfull: need {needed} documents, found {available}")]
    UnderfullBand {
        band: String,
        needed: usize,
        available: usize,
    },

    #[error("unknown answer-type label `{0}`")]
    UnknownLabel(String),

    #[error("no entity-type mapping for answer type `{0}`")]
    UnmappedType(String),

    #[error("annotation references unknown document (question `{question_id}`, rank {rank})")]
    UnknownDocument { question_id: String, rank: u32 },

    #[error("embedding cache has no entry for text with sha256 {hash}")]
    CacheMiss { hash: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("question ids not present in the judgments: {}", .0.join(", "))]
    UnknownQuestions(Vec<String>),

    #[error("no document set for question `{0}`")]
    MissingDocset(String),

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(source_name: impl Into<String>, line: usize, message: impl ToString) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            line,
            message: message.to_string(),
        }
    }

    /// True for errors caused by a bad configuration rather than bad data.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::InvalidStrata(_))
    }
}

/// Reads a whole file, attaching the path to any I/O error.
pub(crate) fn read_to_string(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
