use thiserror::Error;

/// Harness failures, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    /// 2 for configuration and i/o, 3 for calibration, 4 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Io { .. } => 2,
            HarnessError::Calibration(_) => 3,
            HarnessError::Numerical(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Config(_) => "config",
            HarnessError::Calibration(_) => "calibration",
            HarnessError::Numerical(_) => "numerical",
            HarnessError::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Classifies an error raised while calibrating.
    pub(crate) fn calibration(err: dicesgd::Error) -> Self {
        HarnessError::Calibration(err.to_string())
    }
}

impl From<dicesgd::Error> for HarnessError {
    fn from(err: dicesgd::Error) -> Self {
        use dicesgd::Error as E;
        let msg = err.to_string();
        match err.root() {
            E::Calibration(_) => HarnessError::Calibration(msg),
            E::NonFinite { .. } | E::Domain(_) => HarnessError::Numerical(msg),
            E::DimensionMismatch { .. }
            | E::IndexOutOfRange { .. }
            | E::Config(_)
            | E::Data(_)
            | E::AtIteration { .. } => HarnessError::Config(msg),
        }
    }
}

impl From<serde_json::Error> for HarnessError {
    fn from(err: serde_json::Error) -> Self {
        HarnessError::Config(err.to_string())
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
