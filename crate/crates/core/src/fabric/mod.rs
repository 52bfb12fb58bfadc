//! Sites, computing elements, workload execution and the link model.

pub mod lrms;
pub mod network;
pub mod profile;

use thiserror::Error;

use crate::ids::{CeId, JobId};
use crate::vomgmt::Denial;

pub use lrms::{ComputingElement, DispatchOutcome, QueuedJob, RunningJob};
pub use network::{Hop, LinkSpec, Location, Network, NoRoute, Region, DEFAULT_LAN};
pub use profile::{output_checksum, OutputDestination, ProfileTable, WorkloadProfile, GB, KB, MB};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FabricError {
    #[error("job {job} denied: {reason}")]
    AuthorizationDenied { job: JobId, reason: Denial },
    #[error("{0}")]
    NoRoute(NoRoute),
    #[error("no physical file {path} on {se}")]
    NoSuchPhysicalFile { se: String, path: String },
    #[error("unknown CE `{0}`")]
    UnknownCe(CeId),
    #[error("unknown workload profile `{0}`")]
    UnknownProfile(String),
}

impl From<NoRoute> for FabricError {
    fn from(e: NoRoute) -> Self {
        FabricError::NoRoute(e)
    }
}

/// Scenario-driven fault knobs. Everything is off by default.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FailureConfig {
    /// Probability that any single transfer fails.
    pub transfer_failure_p: f64,
}
