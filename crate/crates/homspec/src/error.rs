use std::io;

/// Failure to read or write one of the documented file formats.
#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("byte offset {offset}: {message}")]
    Binary { offset: u64, message: String },
    #[error("line {line}: {message}")]
    Text { line: u64, message: String },
    #[error(transparent)]
    Model(#[from] homspec_core::Error),
}

impl FormatError {
    pub(crate) fn binary(offset: u64, message: impl Into<String>) -> Self {
        Self::Binary {
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn text(line: u64, message: impl Into<String>) -> Self {
        Self::Text {
            line,
            message: message.into(),
        }
    }
}

impl From<csv::Error> for FormatError {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line()).unwrap_or(0);
        match e.into_kind() {
            csv::ErrorKind::Io(e) => Self::Io(e),
            kind => Self::text(line, format!("{kind:?}")),
        }
    }
}

pub type FormatResult<T> = Result<T, FormatError>;
