//! Monte Carlo production: request store, job factory and run-time
//! bookkeeping.

mod boss;
mod impala;
mod refdb;

use thiserror::Error;

pub use boss::{BossDb, BossFilter, BossJobRecord, BossStatus, FilterSpec, Rule, BOSS_HEADER};
pub use impala::{create, declare, job_seed, Workspace};
pub use refdb::{ProductionRequest, RefDb, RequestSpec, RequestStatus, Step, Summary};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProductionError {
    #[error("dataset {0} has no complete CMKIN assignment")]
    MissingUpstream(String),
    #[error("unknown assignment {0}")]
    UnknownAssignment(u64),
    #[error("assignment {id} is {found}, expected {expected}")]
    WrongState {
        id: u64,
        expected: RequestStatus,
        found: RequestStatus,
    },
    #[error("proxy expired")]
    ProxyExpired,
    #[error("assignment {0} still has jobs running")]
    JobsStillRunning(u64),
    #[error("unknown BOSS id {0}")]
    UnknownBossId(u64),
    #[error("BOSS {id}: events_done {new} < {old}")]
    MonotonicityViolation { id: u64, old: u64, new: u64 },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}
