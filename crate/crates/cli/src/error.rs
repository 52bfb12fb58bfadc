use std::io;

use thiserror::Error;
use worldgrid_core::broker::BrokerError;
use worldgrid_core::datagrid::DataError;
use worldgrid_core::fabric::FabricError;
use worldgrid_core::grid::GridError;
use worldgrid_core::jdl::JdlError;
use worldgrid_core::production::ProductionError;
use worldgrid_core::topology::ConfigError;
use worldgrid_core::vomgmt::VoError;

/// Process exit codes.
pub mod code {
    pub const USAGE: i32 = 2;
    pub const CONFIG: i32 = 3;
    pub const NOT_FOUND: i32 = 4;
    pub const STATE: i32 = 5;
    pub const AUTH: i32 = 6;
    pub const JDL: i32 = 7;
    pub const DATA: i32 = 8;
    pub const ASSERT: i32 = 9;
    pub const IO: i32 = 10;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    State(String),
    #[error("{0}")]
    Auth(String),
    #[error("JDL: {0}")]
    Jdl(#[from] JdlError),
    #[error("{0}")]
    Data(String),
    #[error("assertion failed: {0}")]
    Assert(String),
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
    /// An error raised by a scenario line, tagged with its position.
    #[error("{path}:{line}: {source}")]
    At {
        path: String,
        line: usize,
        source: Box<CliError>,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => code::USAGE,
            CliError::Config(_) => code::CONFIG,
            CliError::NotFound(_) => code::NOT_FOUND,
            CliError::State(_) => code::STATE,
            CliError::Auth(_) => code::AUTH,
            CliError::Jdl(_) => code::JDL,
            CliError::Data(_) => code::DATA,
            CliError::Assert(_) => code::ASSERT,
            CliError::Io { .. } => code::IO,
            CliError::At { source, .. } => source.exit_code(),
        }
    }

    pub fn io(context: impl Into<String>) -> impl FnOnce(io::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Io { context, source }
    }
}

impl From<BrokerError> for CliError {
    fn from(e: BrokerError) -> Self {
        let msg = e.to_string();
        match e {
            BrokerError::Parse(j) => CliError::Jdl(j),
            BrokerError::ProxyExpired | BrokerError::VoMismatch { .. } => CliError::Auth(msg),
            BrokerError::UnknownBroker(_) | BrokerError::UnknownJob(_) | BrokerError::UnknownProfile(_) => {
                CliError::NotFound(msg)
            }
            BrokerError::NotDone(_) | BrokerError::AlreadyCleared(_) | BrokerError::IllegalTransition { .. } => {
                CliError::State(msg)
            }
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::UnknownSe(_) | DataError::UnknownLfn(_) => CliError::NotFound(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<VoError> for CliError {
    fn from(e: VoError) -> Self {
        match e {
            VoError::NotAVoMember { .. } => CliError::Auth(e.to_string()),
            VoError::UnknownVo(_) | VoError::UnknownSite(_) => CliError::NotFound(e.to_string()),
            VoError::InvalidLifetime => CliError::Usage(e.to_string()),
        }
    }
}

impl From<FabricError> for CliError {
    fn from(e: FabricError) -> Self {
        match e {
            FabricError::UnknownCe(_) | FabricError::UnknownProfile(_) => CliError::NotFound(e.to_string()),
            FabricError::AuthorizationDenied { .. } => CliError::Auth(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ProductionError> for CliError {
    fn from(e: ProductionError) -> Self {
        let msg = e.to_string();
        match e {
            ProductionError::UnknownAssignment(_) | ProductionError::UnknownBossId(_) => CliError::NotFound(msg),
            ProductionError::ProxyExpired => CliError::Auth(msg),
            ProductionError::InvalidRequest(_) => CliError::Usage(msg),
            ProductionError::MissingUpstream(_)
            | ProductionError::WrongState { .. }
            | ProductionError::JobsStillRunning(_)
            | ProductionError::MonotonicityViolation { .. } => CliError::State(msg),
        }
    }
}

impl From<GridError> for CliError {
    fn from(e: GridError) -> Self {
        CliError::Config(ConfigError {
            path: None,
            line: 0,
            message: e.to_string(),
        })
    }
}
