use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::ids::{RbId, SeId, VoName};

use super::ProductionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Step {
    Cmkin,
    Cmsim,
}

impl Step {
    pub fn profile(self) -> &'static str {
        match self {
            Step::Cmkin => "cmkin",
            Step::Cmsim => "cmsim",
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Step::Cmkin => "CMKIN",
            Step::Cmsim => "CMSIM",
        })
    }
}

impl FromStr for Step {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_uppercase().as_str() {
            "CMKIN" => Ok(Step::Cmkin),
            "CMSIM" => Ok(Step::Cmsim),
            other => Err(format!("unknown step `{other}` (CMKIN or CMSIM)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RequestStatus {
    New,
    Declared,
    Created,
    Submitted,
    Complete,
}

impl fmt::Display for RequestStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RequestStatus::New => "NEW",
            RequestStatus::Declared => "DECLARED",
            RequestStatus::Created => "CREATED",
            RequestStatus::Submitted => "SUBMITTED",
            RequestStatus::Complete => "COMPLETE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Summary {
    pub jobs_ok: u64,
    pub jobs_failed: u64,
    pub total_events_done: u64,
    pub lfns: Vec<String>,
}

/// Parameters of a new request. For CMSIM, omitted totals are taken from the
/// upstream CMKIN assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestSpec {
    pub dataset: String,
    pub step: Step,
    pub total_events: Option<u64>,
    pub events_per_job: Option<u64>,
    pub rb_id: RbId,
    pub default_se: Option<SeId>,
    pub vo: VoName,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProductionRequest {
    pub assignment_id: u64,
    pub dataset: String,
    pub step: Step,
    pub total_events: u64,
    pub events_per_job: u64,
    pub rb_id: RbId,
    pub default_se: Option<SeId>,
    pub vo: VoName,
    pub upstream: Option<u64>,
    pub status: RequestStatus,
    pub job_events: Vec<u64>,
    pub jdls: Vec<String>,
    pub boss_ids: Vec<u64>,
    pub summary: Option<Summary>,
}

impl ProductionRequest {
    pub fn job_count(&self) -> u64 {
        self.total_events.div_ceil(self.events_per_job)
    }

    pub(crate) fn expect(&self, expected: RequestStatus) -> Result<(), ProductionError> {
        if self.status == expected {
            Ok(())
        } else {
            Err(ProductionError::WrongState {
                id: self.assignment_id,
                expected,
                found: self.status,
            })
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RefDb {
    requests: BTreeMap<u64, ProductionRequest>,
    next_id: u64,
}

impl RefDb {
    pub fn new() -> Self {
        RefDb::default()
    }

    pub fn create_request(&mut self, spec: RequestSpec) -> Result<u64, ProductionError> {
        let (mut total, mut per_job) = (spec.total_events, spec.events_per_job);
        let mut upstream = None;
        if spec.step == Step::Cmsim {
            let up = self
                .requests
                .values()
                .rev()
                .find(|r| {
                    r.step == Step::Cmkin && r.dataset == spec.dataset && r.status == RequestStatus::Complete
                })
                .ok_or_else(|| ProductionError::MissingUpstream(spec.dataset.clone()))?;
            if total.is_some_and(|t| t != up.total_events) || per_job.is_some_and(|p| p != up.events_per_job) {
                return Err(ProductionError::InvalidRequest(format!(
                    "CMSIM split must match CMKIN assignment {} ({} events, {} per job)",
                    up.assignment_id, up.total_events, up.events_per_job
                )));
            }
            total = Some(up.total_events);
            per_job = Some(up.events_per_job);
            upstream = Some(up.assignment_id);
        }
        let total = total.ok_or_else(|| ProductionError::InvalidRequest("total_events missing".into()))?;
        let per_job = per_job.ok_or_else(|| ProductionError::InvalidRequest("events_per_job missing".into()))?;
        if per_job == 0 || total < per_job {
            return Err(ProductionError::InvalidRequest(format!(
                "need total_events >= events_per_job >= 1, got {total} and {per_job}"
            )));
        }
        if spec.dataset.is_empty() || spec.dataset.chars().any(|c| c.is_whitespace()) {
            return Err(ProductionError::InvalidRequest(format!("bad dataset name `{}`", spec.dataset)));
        }
        self.next_id += 1;
        let id = self.next_id;
        self.requests.insert(
            id,
            ProductionRequest {
                assignment_id: id,
                dataset: spec.dataset,
                step: spec.step,
                total_events: total,
                events_per_job: per_job,
                rb_id: spec.rb_id,
                default_se: spec.default_se,
                vo: spec.vo,
                upstream,
                status: RequestStatus::New,
                job_events: Vec::new(),
                jdls: Vec::new(),
                boss_ids: Vec::new(),
                summary: None,
            },
        );
        Ok(id)
    }

    pub fn get(&self, id: u64) -> Result<&ProductionRequest, ProductionError> {
        self.requests.get(&id).ok_or(ProductionError::UnknownAssignment(id))
    }

    pub fn get_mut(&mut self, id: u64) -> Result<&mut ProductionRequest, ProductionError> {
        self.requests.get_mut(&id).ok_or(ProductionError::UnknownAssignment(id))
    }

    pub fn requests(&self) -> impl Iterator<Item = &ProductionRequest> {
        self.requests.values()
    }

    pub fn mark_submitted(&mut self, id: u64, boss_ids: Vec<u64>) -> Result<(), ProductionError> {
        let r = self.get_mut(id)?;
        r.expect(RequestStatus::Created)?;
        r.boss_ids = boss_ids;
        r.status = RequestStatus::Submitted;
        Ok(())
    }

    /// Stores the summary; the request becomes COMPLETE only if no job failed.
    pub fn post_summary(&mut self, id: u64, summary: Summary) -> Result<RequestStatus, ProductionError> {
        let r = self.get_mut(id)?;
        if !matches!(r.status, RequestStatus::Submitted | RequestStatus::Complete) {
            return Err(ProductionError::WrongState {
                id,
                expected: RequestStatus::Submitted,
                found: r.status,
            });
        }
        if summary.jobs_failed == 0 {
            r.status = RequestStatus::Complete;
        }
        r.summary = Some(summary);
        Ok(r.status)
    }

    /// One request per line: id, dataset, step, events, per-job, status, summary.
    pub fn dump(&self) -> String {
        let mut s = String::from(
            "assignment_id\tdataset\tstep\ttotal_events\tevents_per_job\trb\tstatus\tjobs_ok\tjobs_failed\tevents_done\tlfns\n",
        );
        for r in self.requests.values() {
            let (ok, failed, ev, lfns) = match &r.summary {
                Some(m) => (
                    m.jobs_ok.to_string(),
                    m.jobs_failed.to_string(),
                    m.total_events_done.to_string(),
                    m.lfns.len().to_string(),
                ),
                None => ("-".into(), "-".into(), "-".into(), "-".into()),
            };
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{ok}\t{failed}\t{ev}\t{lfns}\n",
                r.assignment_id, r.dataset, r.step, r.total_events, r.events_per_job, r.rb_id, r.status
            ));
        }
        s
    }
}
