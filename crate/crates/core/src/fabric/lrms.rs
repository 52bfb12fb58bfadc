//! Computing elements: a FIFO batch queue in front of `wn_count` worker nodes.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::ids::{CeId, JobId, SiteId};
use crate::infosys::{CeLoad, QueuedLoad, RunningLoad};
use crate::time::SimTime;
use crate::vomgmt::{Denial, Proxy, VoManager};

use super::FabricError;

#[derive(Debug, Clone, PartialEq)]
pub struct QueuedJob {
    pub job: JobId,
    pub proxy: Proxy,
    pub events: u64,
    pub cpu_estimate: SimTime,
    pub enqueued_at: SimTime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunningJob {
    pub job: JobId,
    pub wn: u32,
    pub started_at: SimTime,
    pub events: u64,
    pub cpu_total: SimTime,
    pub exec_started_at: Option<SimTime>,
    pub events_done: u64,
    pub exec_done: bool,
}

impl RunningJob {
    /// total x (1 - events_done / events), to the millisecond.
    pub fn cpu_remaining(&self) -> SimTime {
        if self.events == 0 {
            return SimTime::ZERO;
        }
        let left = self.events - self.events_done.min(self.events);
        SimTime::from_millis(
            (u128::from(self.cpu_total.as_millis()) * u128::from(left) / u128::from(self.events)) as u64,
        )
    }

    pub fn wn_name(&self, ce: &CeId) -> String {
        format!("{ce}/wn{:02}", self.wn)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DispatchOutcome {
    Started { job: JobId, wn: u32 },
    Denied { job: JobId, reason: Denial },
}

#[derive(Debug, Clone)]
pub struct ComputingElement {
    pub ce_id: CeId,
    pub site_id: SiteId,
    pub wn_count: u32,
    pub cpu_mhz: u32,
    queue: VecDeque<QueuedJob>,
    free_wns: BTreeSet<u32>,
    running: BTreeMap<JobId, RunningJob>,
    dispatch_log: Vec<JobId>,
    enqueue_log: Vec<JobId>,
}

impl ComputingElement {
    pub fn new(ce_id: CeId, site_id: SiteId, wn_count: u32, cpu_mhz: u32) -> Self {
        ComputingElement {
            ce_id,
            site_id,
            wn_count,
            cpu_mhz,
            queue: VecDeque::new(),
            free_wns: (0..wn_count).collect(),
            running: BTreeMap::new(),
            dispatch_log: Vec::new(),
            enqueue_log: Vec::new(),
        }
    }

    /// Appends the job to the queue and dispatches as far as free WNs allow.
    /// The proxy is checked against the site both here and at dispatch.
    pub fn enqueue(&mut self, job: QueuedJob, vo: &VoManager, now: SimTime) -> Result<Vec<DispatchOutcome>, FabricError> {
        vo.authorize(&self.site_id, &job.proxy, now)
            .map_err(|reason| FabricError::AuthorizationDenied { job: job.job, reason })?;
        self.enqueue_log.push(job.job);
        self.queue.push_back(job);
        Ok(self.dispatch(vo, now))
    }

    pub fn dispatch(&mut self, vo: &VoManager, now: SimTime) -> Vec<DispatchOutcome> {
        let mut out = Vec::new();
        while !self.free_wns.is_empty() {
            let Some(q) = self.queue.pop_front() else { break };
            if let Err(reason) = vo.authorize(&self.site_id, &q.proxy, now) {
                out.push(DispatchOutcome::Denied { job: q.job, reason });
                continue;
            }
            let wn = self.free_wns.pop_first().expect("checked non-empty");
            self.dispatch_log.push(q.job);
            self.running.insert(
                q.job,
                RunningJob {
                    job: q.job,
                    wn,
                    started_at: now,
                    events: q.events,
                    cpu_total: q.cpu_estimate,
                    exec_started_at: None,
                    events_done: 0,
                    exec_done: false,
                },
            );
            out.push(DispatchOutcome::Started { job: q.job, wn });
        }
        out
    }

    /// Frees the job's WN. Call [`dispatch`](Self::dispatch) afterwards.
    pub fn release(&mut self, job: JobId) -> Option<RunningJob> {
        let r = self.running.remove(&job)?;
        self.free_wns.insert(r.wn);
        Some(r)
    }

    /// Drops a job still waiting in the queue.
    pub fn remove_queued(&mut self, job: JobId) -> Option<QueuedJob> {
        let pos = self.queue.iter().position(|q| q.job == job)?;
        self.queue.remove(pos)
    }

    pub fn running(&self, job: JobId) -> Option<&RunningJob> {
        self.running.get(&job)
    }

    pub fn running_mut(&mut self, job: JobId) -> Option<&mut RunningJob> {
        self.running.get_mut(&job)
    }

    pub fn running_jobs(&self) -> impl Iterator<Item = &RunningJob> {
        self.running.values()
    }

    pub fn queued_jobs(&self) -> impl Iterator<Item = &QueuedJob> {
        self.queue.iter()
    }

    pub fn free_wn_count(&self) -> usize {
        self.free_wns.len()
    }

    pub fn dispatch_log(&self) -> &[JobId] {
        &self.dispatch_log
    }

    pub fn enqueue_log(&self) -> &[JobId] {
        &self.enqueue_log
    }

    pub fn load(&self) -> CeLoad {
        CeLoad {
            running: self
                .running
                .values()
                .map(|r| RunningLoad {
                    job: r.job,
                    cpu_total: r.cpu_total,
                    exec_started_at: r.exec_started_at,
                    exec_done: r.exec_done,
                })
                .collect(),
            queued: self
                .queue
                .iter()
                .map(|q| QueuedLoad {
                    job: q.job,
                    cpu_estimate: q.cpu_estimate,
                })
                .collect(),
        }
    }
}
