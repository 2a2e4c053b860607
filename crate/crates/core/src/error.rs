use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the registry can report. Each variant maps to a stable
/// machine-readable code (see [`Error::code`]) that the HTTP layer puts in
/// error bodies.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{0} not found")]
    NotFound(String),

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("permission denied: {0}")]
    Permission(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: u64, column: u64, message: String },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("document contains no extractable terms")]
    EmptyImport,

    #[error("authentication failed")]
    Authentication,

    #[error("session token expired")]
    TokenExpired,

    #[error("malformed ARK: {0}")]
    ArkSyntax(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("storage error: {0}")]
    Storage(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::NotFound(_) => "not_found",
            Error::Conflict(_) => "conflict",
            Error::Validation(_) => "validation_failed",
            Error::Permission(_) => "permission_denied",
            Error::Parse { .. } => "parse_error",
            Error::UnsupportedFormat(_) => "unsupported_format",
            Error::EmptyImport => "empty_import",
            Error::Authentication => "authentication_failed",
            Error::TokenExpired => "token_expired",
            Error::ArkSyntax(_) => "ark_syntax",
            Error::Config(_) => "config_error",
            Error::Storage(_) => "storage_error",
        }
    }

    pub(crate) fn not_found(what: impl std::fmt::Display) -> Self {
        Error::NotFound(what.to_string())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn denied(msg: impl Into<String>) -> Self {
        Error::Permission(msg.into())
    }

    /// Builds a parse error from a byte offset into `doc`.
    pub(crate) fn parse_at(doc: &[u8], offset: usize, message: impl Into<String>) -> Self {
        let (line, column) = line_column(doc, offset);
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }
}

/// 1-based line and column of a byte offset.
pub(crate) fn line_column(doc: &[u8], offset: usize) -> (u64, u64) {
    let upto = &doc[..offset.min(doc.len())];
    let line = upto.iter().filter(|&&b| b == b'\n').count() as u64 + 1;
    let column = match upto.iter().rposition(|&b| b == b'\n') {
        Some(nl) => (upto.len() - nl) as u64,
        None => upto.len() as u64 + 1,
    };
    (line, column)
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Storage(e.to_string())
    }
}
