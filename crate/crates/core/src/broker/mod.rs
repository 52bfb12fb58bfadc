//! The resource broker: job records, the state machine and match-making.

mod job;
mod matchmaking;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::ids::{HostId, JobId, RbId, VoName};
use crate::infosys::SchemaFlavor;
use crate::jdl::JdlError;
use crate::time::SimTime;

pub use job::{FileInfo, JobRecord, JobState, Reason, StagedInput};
#[cfg(feature = "parallel")]
pub use matchmaking::match_parallel;
pub use matchmaking::{
    ce_env, evaluate_candidate, match_resources, match_sequential, rank_order, Candidate, MatchRequest,
    MatchResult, PARALLEL_THRESHOLD,
};

/// Size assumed for an input-sandbox file the simulator knows nothing about.
pub const DEFAULT_SANDBOX_FILE_BYTES: u64 = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BrokerError {
    #[error("{0}")]
    Parse(#[from] JdlError),
    #[error("proxy expired")]
    ProxyExpired,
    #[error("proxy is for VO {proxy}, job asks for {job}")]
    VoMismatch { proxy: VoName, job: VoName },
    #[error("unknown resource broker `{0}`")]
    UnknownBroker(RbId),
    #[error("unknown job {0}")]
    UnknownJob(JobId),
    #[error("unknown workload profile `{0}`")]
    UnknownProfile(String),
    #[error("job {0} is not done")]
    NotDone(JobId),
    #[error("output of job {0} already retrieved")]
    AlreadyCleared(JobId),
    #[error("job {job}: illegal transition {from} -> {to}")]
    IllegalTransition { job: JobId, from: JobState, to: JobState },
}

#[derive(Debug, Clone)]
pub struct ResourceBroker {
    pub rb_id: RbId,
    pub flavor: SchemaFlavor,
    pub host: HostId,
    /// Delay between submission and match-making.
    pub latency: SimTime,
    sandbox_store: BTreeMap<JobId, Vec<FileInfo>>,
}

impl ResourceBroker {
    pub fn new(rb_id: RbId, flavor: SchemaFlavor, host: HostId) -> Self {
        ResourceBroker {
            rb_id,
            flavor,
            host,
            latency: SimTime::ZERO,
            sandbox_store: BTreeMap::new(),
        }
    }

    pub fn hold(&mut self, job: JobId, files: Vec<FileInfo>) {
        self.sandbox_store.entry(job).or_default().extend(files);
    }

    pub fn held(&self, job: JobId) -> &[FileInfo] {
        self.sandbox_store.get(&job).map_or(&[], Vec::as_slice)
    }

    pub fn release(&mut self, job: JobId) -> Vec<FileInfo> {
        self.sandbox_store.remove(&job).unwrap_or_default()
    }
}
