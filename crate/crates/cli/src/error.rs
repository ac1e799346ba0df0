use std::path::PathBuf;

use bloomcast::ErrorKind;
use chrono::NaiveDate;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {}: {message}", path.display())]
    Config { path: PathBuf, message: String },
    #[error("{0}")]
    Incompatible(String),
    #[error("temperature data lacks {} day(s) of the window: {}", .0.len(), join_dates(.0))]
    MissingDays(Vec<NaiveDate>),
    #[error("{context}: {source}")]
    Core {
        context: String,
        source: bloomcast::Error,
    },
}

fn join_dates(dates: &[NaiveDate]) -> String {
    dates.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::MissingDays(_) => 1,
            CliError::Config { .. } | CliError::Incompatible(_) => 2,
            CliError::Core { source, .. } => match source.kind() {
                ErrorKind::Input => 1,
                ErrorKind::Invalid => 2,
                ErrorKind::Numeric => 3,
            },
        }
    }
}

pub trait Context<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T, CliError>;
}

impl<T> Context<T> for bloomcast::Result<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T, CliError> {
        self.map_err(|source| CliError::Core {
            context: context(),
            source,
        })
    }
}
