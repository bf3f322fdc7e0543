use std::fmt;
use std::process::ExitCode;

use simulmt_core::corpus::CorpusError;
use simulmt_core::independence::IndependenceError;
use simulmt_core::metrics::MetricsError;
use simulmt_core::mock_mt::LexiconError;
use simulmt_core::noise::NoiseError;
use simulmt_core::simul::SimulError;

/// Failure class, which decides the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Missing, unreadable or malformed input files.
    Input,
    /// Invalid configuration or parameter values.
    Config,
    /// A component broke its contract (translator, engine).
    Contract,
    Other,
}

impl ErrorKind {
    pub fn exit_code(self) -> u8 {
        match self {
            ErrorKind::Other => 1,
            ErrorKind::Input => 2,
            ErrorKind::Config => 3,
            ErrorKind::Contract => 4,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub error: anyhow::Error,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn new(kind: ErrorKind, error: impl Into<anyhow::Error>) -> Self {
        Self {
            kind,
            error: error.into(),
        }
    }

    pub fn input(msg: impl fmt::Display) -> Self {
        Self::new(ErrorKind::Input, anyhow::anyhow!("{msg}"))
    }

    pub fn config(msg: impl fmt::Display) -> Self {
        Self::new(ErrorKind::Config, anyhow::anyhow!("{msg}"))
    }

    pub fn context(self, ctx: impl fmt::Display + Send + Sync + 'static) -> Self {
        Self {
            kind: self.kind,
            error: self.error.context(ctx),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.kind.exit_code())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        let kind = match e {
            CorpusError::PrefixOutOfRange { .. } => ErrorKind::Other,
            _ => ErrorKind::Input,
        };
        Self::new(kind, e)
    }
}

impl From<NoiseError> for CliError {
    fn from(e: NoiseError) -> Self {
        let kind = match e {
            NoiseError::Io { .. }
            | NoiseError::Parse { .. }
            | NoiseError::Version { .. }
            | NoiseError::InvalidModel(_)
            | NoiseError::NoGoldTokens => ErrorKind::Input,
            NoiseError::Unattainable { .. } | NoiseError::InvalidTarget(_) | NoiseError::DegenerateModel => {
                ErrorKind::Config
            }
            NoiseError::InfiniteInsertionRate(_) => ErrorKind::Other,
        };
        Self::new(kind, e)
    }
}

impl From<SimulError> for CliError {
    fn from(e: SimulError) -> Self {
        Self::new(ErrorKind::Contract, e)
    }
}

impl From<LexiconError> for CliError {
    fn from(e: LexiconError) -> Self {
        Self::new(ErrorKind::Input, e)
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        let kind = match e {
            MetricsError::LengthMismatch { .. }
            | MetricsError::NoReferences
            | MetricsError::EmptyGold
            | MetricsError::DegenerateTable { .. } => ErrorKind::Input,
            MetricsError::TooFewResamples(_) => ErrorKind::Config,
            _ => ErrorKind::Other,
        };
        Self::new(kind, e)
    }
}

impl From<IndependenceError> for CliError {
    fn from(e: IndependenceError) -> Self {
        match e {
            IndependenceError::Metrics(m) => m.into(),
            other => Self::new(ErrorKind::Input, other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::new(ErrorKind::Input, e)
    }
}
