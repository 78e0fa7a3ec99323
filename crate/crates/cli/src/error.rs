use salstream_core::abr::AbrError;
use salstream_core::forecast::ForecastError;
use salstream_core::live::LiveError;
use salstream_core::perception::PerceptionError;
use salstream_core::ranking::RankingError;
use salstream_core::rater::OracleError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("dataset {path}: line {line}: {msg}")]
    Dataset {
        path: String,
        line: u64,
        msg: String,
    },
    #[error("oracle: {0}")]
    Oracle(String),
    #[error("training: {0}")]
    Training(String),
    #[error("simulation: {0}")]
    Simulation(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit status for this failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Dataset { .. } => 2,
            CliError::Oracle(_) => 3,
            CliError::Training(_) => 4,
            CliError::Simulation(_) => 5,
            CliError::Io(_) => 6,
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Config(m) => CliError::Config(format!("oracle: {m}")),
            e => CliError::Oracle(e.to_string()),
        }
    }
}

impl From<PerceptionError> for CliError {
    fn from(e: PerceptionError) -> Self {
        match e {
            PerceptionError::Oracle { .. } | PerceptionError::RatingCount { .. } => {
                CliError::Oracle(e.to_string())
            }
            e => CliError::Simulation(e.to_string()),
        }
    }
}

impl From<RankingError> for CliError {
    fn from(e: RankingError) -> Self {
        if e.oracle().is_some() {
            CliError::Oracle(e.to_string())
        } else {
            CliError::Simulation(e.to_string())
        }
    }
}

impl From<ForecastError> for CliError {
    fn from(e: ForecastError) -> Self {
        CliError::Training(e.to_string())
    }
}

impl From<LiveError> for CliError {
    fn from(e: LiveError) -> Self {
        match e {
            LiveError::Config(_) | LiveError::MissingModels(_) => CliError::Config(e.to_string()),
            LiveError::Io(e) => CliError::Io(e),
            e => CliError::Simulation(e.to_string()),
        }
    }
}

impl From<AbrError> for CliError {
    fn from(e: AbrError) -> Self {
        match e {
            AbrError::TraceParse { .. } | AbrError::BadLadder | AbrError::BadParam(_) => {
                CliError::Config(e.to_string())
            }
            e => CliError::Simulation(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}
