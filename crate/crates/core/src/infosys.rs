//! Information Index: resource documents per schema flavor, broker queries,
//! and the estimated traversal time (ETT) of a computing element.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::ids::{CeId, JobId, SeId, SiteId, VoName};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Lrms {
    Pbs,
    Lsf,
    Condor,
}

impl fmt::Display for Lrms {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Lrms::Pbs => "PBS",
            Lrms::Lsf => "LSF",
            Lrms::Condor => "CONDOR",
        })
    }
}

impl FromStr for Lrms {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_uppercase().as_str() {
            "PBS" => Ok(Lrms::Pbs),
            "LSF" => Ok(Lrms::Lsf),
            "CONDOR" => Ok(Lrms::Condor),
            other => Err(format!("unknown LRMS `{other}` (expected PBS, LSF or CONDOR)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SchemaFlavor {
    Edg,
    Glue,
    GlobusOnly,
}

impl fmt::Display for SchemaFlavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemaFlavor::Edg => "EDG",
            SchemaFlavor::Glue => "GLUE",
            SchemaFlavor::GlobusOnly => "GLOBUS_ONLY",
        })
    }
}

impl FromStr for SchemaFlavor {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_uppercase().as_str() {
            "EDG" => Ok(SchemaFlavor::Edg),
            "GLUE" => Ok(SchemaFlavor::Glue),
            "GLOBUS_ONLY" | "GLOBUS" => Ok(SchemaFlavor::GlobusOnly),
            other => Err(format!(
                "unknown schema flavor `{other}` (expected EDG, GLUE or GLOBUS_ONLY)"
            )),
        }
    }
}

/// A job occupying a worker node. `cpu_total` is wall time on this CE.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunningLoad {
    pub job: JobId,
    pub cpu_total: SimTime,
    pub exec_started_at: Option<SimTime>,
    pub exec_done: bool,
}

impl RunningLoad {
    pub fn remaining(&self, now: SimTime) -> SimTime {
        if self.exec_done {
            return SimTime::ZERO;
        }
        match self.exec_started_at {
            Some(start) => self.cpu_total.saturating_sub(now.saturating_sub(start)),
            None => self.cpu_total,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueuedLoad {
    pub job: JobId,
    pub cpu_estimate: SimTime,
}

/// Published queue state of a CE.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CeLoad {
    pub running: Vec<RunningLoad>,
    pub queued: Vec<QueuedLoad>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CeRecord {
    pub ce_id: CeId,
    pub site_id: SiteId,
    pub lrms: Lrms,
    pub schema_flavors: BTreeSet<SchemaFlavor>,
    pub run_time_environment: Vec<String>,
    pub wn_count: u32,
    pub cpu_mhz: u32,
    pub authorized_vos: Vec<VoName>,
    pub close_ses: Vec<SeId>,
    /// Publishes EDG information for a Condor LRMS even though EDG ships
    /// no provider for it.
    pub allow_condor_edg: bool,
    pub load: CeLoad,
}

impl CeRecord {
    pub fn jobs_running(&self) -> usize {
        self.load.running.len()
    }

    pub fn jobs_queued(&self) -> usize {
        self.load.queued.len()
    }

    pub fn validate(&self) -> Result<(), InfoError> {
        let bad = |m: String| Err(InfoError::InvariantViolation(format!("CE {}: {m}", self.ce_id)));
        if self.wn_count < 1 {
            return bad("wn_count must be at least 1".into());
        }
        if self.cpu_mhz < 1 {
            return bad("cpu_mhz must be positive".into());
        }
        if self.jobs_running() > self.wn_count as usize {
            return bad(format!(
                "{} running jobs exceed {} worker nodes",
                self.jobs_running(),
                self.wn_count
            ));
        }
        if self.lrms == Lrms::Condor
            && self.schema_flavors.contains(&SchemaFlavor::Edg)
            && !self.allow_condor_edg
        {
            return bad("EDG information providers are not available for a Condor LRMS".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeRecord {
    pub se_id: SeId,
    pub site_id: SiteId,
    pub capacity_bytes: u64,
    pub used_bytes: u64,
    pub close_ces: Vec<CeId>,
}

impl SeRecord {
    pub fn validate(&self) -> Result<(), InfoError> {
        if self.used_bytes > self.capacity_bytes {
            return Err(InfoError::InvariantViolation(format!(
                "SE {}: used {} exceeds capacity {}",
                self.se_id, self.used_bytes, self.capacity_bytes
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    Ce(CeRecord),
    Se(SeRecord),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InfoError {
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("unknown CE `{0}`")]
    UnknownCe(CeId),
}

#[derive(Debug, Clone, Default)]
pub struct InfoIndex {
    ces: BTreeMap<CeId, CeRecord>,
    ses: BTreeMap<SeId, SeRecord>,
}

impl InfoIndex {
    pub fn new() -> Self {
        InfoIndex::default()
    }

    /// Validates and stores a record, replacing any previous one with the same id.
    pub fn publish(&mut self, record: Record) -> Result<(), InfoError> {
        match record {
            Record::Ce(ce) => {
                ce.validate()?;
                self.ces.insert(ce.ce_id.clone(), ce);
            }
            Record::Se(se) => {
                se.validate()?;
                self.ses.insert(se.se_id.clone(), se);
            }
        }
        Ok(())
    }

    /// Replaces only the load section of a published CE.
    pub fn publish_load(&mut self, ce_id: &CeId, load: CeLoad) -> Result<(), InfoError> {
        let ce = self
            .ces
            .get(ce_id)
            .ok_or_else(|| InfoError::UnknownCe(ce_id.clone()))?;
        let mut next = ce.clone();
        next.load = load;
        self.publish(Record::Ce(next))
    }

    pub fn publish_se_usage(&mut self, se_id: &SeId, used_bytes: u64) -> Result<(), InfoError> {
        let Some(se) = self.ses.get(se_id) else {
            return Err(InfoError::InvariantViolation(format!("unknown SE `{se_id}`")));
        };
        let mut next = se.clone();
        next.used_bytes = used_bytes;
        self.publish(Record::Se(next))
    }

    /// CEs publishing `flavor` and authorising `vo`, sorted by id.
    pub fn query(&self, flavor: SchemaFlavor, vo: &VoName) -> Vec<&CeRecord> {
        self.ces
            .values()
            .filter(|ce| ce.schema_flavors.contains(&flavor) && ce.authorized_vos.contains(vo))
            .collect()
    }

    pub fn ce(&self, id: &CeId) -> Option<&CeRecord> {
        self.ces.get(id)
    }

    pub fn se(&self, id: &SeId) -> Option<&SeRecord> {
        self.ses.get(id)
    }

    pub fn ces(&self) -> impl Iterator<Item = &CeRecord> {
        self.ces.values()
    }

    pub fn ses(&self) -> impl Iterator<Item = &SeRecord> {
        self.ses.values()
    }

    /// Outstanding work per worker node, in seconds:
    /// (remaining time of running jobs + estimates of queued jobs) / wn_count.
    pub fn estimated_traversal_time(&self, ce_id: &CeId, now: SimTime) -> Result<f64, InfoError> {
        let ce = self
            .ces
            .get(ce_id)
            .ok_or_else(|| InfoError::UnknownCe(ce_id.clone()))?;
        Ok(ett_of(ce, now))
    }

    /// Checks that CE.close_ses and SE.close_ces describe the same relation.
    pub fn check_closeness_symmetry(&self) -> Result<(), InfoError> {
        for ce in self.ces.values() {
            for se_id in &ce.close_ses {
                let se = self.ses.get(se_id).ok_or_else(|| {
                    InfoError::InvariantViolation(format!(
                        "CE {} lists unknown close SE {se_id}",
                        ce.ce_id
                    ))
                })?;
                if !se.close_ces.contains(&ce.ce_id) {
                    return Err(InfoError::InvariantViolation(format!(
                        "SE {se_id} does not list {} as close",
                        ce.ce_id
                    )));
                }
            }
        }
        for se in self.ses.values() {
            for ce_id in &se.close_ces {
                if !self
                    .ces
                    .get(ce_id)
                    .is_some_and(|ce| ce.close_ses.contains(&se.se_id))
                {
                    return Err(InfoError::InvariantViolation(format!(
                        "SE {} lists {ce_id} as close but not vice versa",
                        se.se_id
                    )));
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn ett_of(ce: &CeRecord, now: SimTime) -> f64 {
    let running: u64 = ce
        .load
        .running
        .iter()
        .map(|r| r.remaining(now).as_millis())
        .sum();
    let queued: u64 = ce.load.queued.iter().map(|q| q.cpu_estimate.as_millis()).sum();
    (running + queued) as f64 / 1000.0 / f64::from(ce.wn_count)
}
