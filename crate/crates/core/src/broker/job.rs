use std::collections::BTreeMap;
use std::fmt;

use crate::datagrid::Replica;
use crate::fabric::WorkloadProfile;
use crate::ids::{CeId, JobId, Lfn, RbId};
use crate::jdl::JobDescription;
use crate::time::SimTime;
use crate::vomgmt::{Denial, Proxy};

use super::{BrokerError, MatchResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum JobState {
    Submitted,
    Waiting,
    Matched,
    Scheduled,
    Running,
    DoneOk,
    DoneFailed,
    Aborted,
    Cleared,
}

impl JobState {
    pub const ALL: [JobState; 9] = [
        JobState::Submitted,
        JobState::Waiting,
        JobState::Matched,
        JobState::Scheduled,
        JobState::Running,
        JobState::DoneOk,
        JobState::DoneFailed,
        JobState::Aborted,
        JobState::Cleared,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            JobState::Submitted => "SUBMITTED",
            JobState::Waiting => "WAITING",
            JobState::Matched => "MATCHED",
            JobState::Scheduled => "SCHEDULED",
            JobState::Running => "RUNNING",
            JobState::DoneOk => "DONE_OK",
            JobState::DoneFailed => "DONE_FAILED",
            JobState::Aborted => "ABORTED",
            JobState::Cleared => "CLEARED",
        }
    }

    /// No further transition is driven by the simulation itself.
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            JobState::DoneOk | JobState::DoneFailed | JobState::Aborted | JobState::Cleared
        )
    }

    pub fn can_transition(self, to: JobState) -> bool {
        use JobState::*;
        matches!(
            (self, to),
            (Submitted, Waiting)
                | (Waiting, Matched)
                | (Matched, Scheduled)
                | (Scheduled, Running)
                | (Running, DoneOk)
                | (Running, DoneFailed)
                | (DoneOk, Cleared)
                | (DoneFailed, Cleared)
                | (Submitted | Waiting | Matched | Scheduled, Aborted)
        )
    }
}

impl fmt::Display for JobState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for JobState {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        JobState::ALL
            .into_iter()
            .find(|st| st.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown job state `{s}`"))
    }
}

/// Why a job was aborted or failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reason {
    NoMatchingResources,
    AuthorizationDenied(Denial),
    NoRoute,
    TransferFailed,
    WnCrash,
    NoSuchPhysicalFile,
    SeFull,
    RegistrationFailed(String),
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reason::NoMatchingResources => f.write_str("NoMatchingResources"),
            Reason::AuthorizationDenied(d) => write!(f, "AuthorizationDenied({d})"),
            Reason::NoRoute => f.write_str("NoRoute"),
            Reason::TransferFailed => f.write_str("TransferFailed"),
            Reason::WnCrash => f.write_str("WnCrash"),
            Reason::NoSuchPhysicalFile => f.write_str("NoSuchPhysicalFile"),
            Reason::SeFull => f.write_str("SeFull"),
            Reason::RegistrationFailed(why) => write!(f, "RegistrationFailed({why})"),
        }
    }
}

/// A file produced by, or shipped with, a job.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileInfo {
    pub name: String,
    pub size_bytes: u64,
    pub checksum: u64,
}

/// One input file copied onto the worker node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StagedInput {
    pub lfn: Lfn,
    pub replica: Replica,
    pub checksum: u64,
    pub arrived_at: SimTime,
}

#[derive(Debug, Clone)]
pub struct JobRecord {
    pub job_id: JobId,
    pub rb_id: RbId,
    pub owner: Proxy,
    pub description: JobDescription,
    pub profile: WorkloadProfile,
    pub dataset: String,
    pub index: u64,
    pub state: JobState,
    pub history: Vec<(JobState, SimTime)>,
    pub matched_ce: Option<CeId>,
    pub match_result: Option<MatchResult>,
    pub chosen_replicas: BTreeMap<Lfn, Replica>,
    pub staged: Vec<StagedInput>,
    pub input_sandbox: Vec<FileInfo>,
    pub wn: Option<String>,
    pub exec_started_at: Option<SimTime>,
    pub exec_finished_at: Option<SimTime>,
    pub events_done: u64,
    /// Files shipped back to the RB.
    pub output_sandbox: Vec<FileInfo>,
    /// Data file written to an SE and registered, if any.
    pub output_data: Option<(FileInfo, Replica)>,
    pub reason: Option<Reason>,
}

impl JobRecord {
    pub fn new(
        job_id: JobId,
        rb_id: RbId,
        owner: Proxy,
        description: JobDescription,
        profile: WorkloadProfile,
        input_sandbox: Vec<FileInfo>,
        now: SimTime,
    ) -> Self {
        let dataset = description
            .extra_str("Dataset")
            .unwrap_or_else(|| description.job_profile.clone());
        let index = description.extra_u64("JobIndex").unwrap_or(0);
        JobRecord {
            job_id,
            rb_id,
            owner,
            description,
            profile,
            dataset,
            index,
            state: JobState::Submitted,
            history: vec![(JobState::Submitted, now)],
            matched_ce: None,
            match_result: None,
            chosen_replicas: BTreeMap::new(),
            staged: Vec::new(),
            input_sandbox,
            wn: None,
            exec_started_at: None,
            exec_finished_at: None,
            events_done: 0,
            output_sandbox: Vec::new(),
            output_data: None,
            reason: None,
        }
    }

    pub fn transition(&mut self, to: JobState, now: SimTime) -> Result<(), BrokerError> {
        if !self.state.can_transition(to) {
            return Err(BrokerError::IllegalTransition {
                job: self.job_id,
                from: self.state,
                to,
            });
        }
        self.state = to;
        self.history.push((to, now));
        Ok(())
    }

    pub fn entered_at(&self, state: JobState) -> Option<SimTime> {
        self.history.iter().find(|(s, _)| *s == state).map(|(_, t)| *t)
    }

    pub fn submitted_at(&self) -> SimTime {
        self.history[0].1
    }

    /// Measured execution time on the WN.
    pub fn runtime(&self) -> Option<SimTime> {
        Some(self.exec_finished_at? - self.exec_started_at?)
    }

    /// Files handed to the user by `get_output`.
    pub fn manifest(&self) -> &[FileInfo] {
        &self.output_sandbox
    }
}
