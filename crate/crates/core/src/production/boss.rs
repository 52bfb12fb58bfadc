use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::ids::JobId;
use crate::time::SimTime;

use super::{ProductionError, Step};

pub const BOSS_HEADER: &str =
    "boss_id\tstatus\texit_status\tinput_file\toutput_file\tevents_declared\tevents_done";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BossStatus {
    Submitted,
    Running,
    Finished,
    Failed,
}

impl BossStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, BossStatus::Finished | BossStatus::Failed)
    }
}

impl fmt::Display for BossStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BossStatus::Submitted => "submitted",
            BossStatus::Running => "running",
            BossStatus::Finished => "finished",
            BossStatus::Failed => "failed",
        })
    }
}

impl FromStr for BossStatus {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "submitted" => Ok(BossStatus::Submitted),
            "running" => Ok(BossStatus::Running),
            "finished" => Ok(BossStatus::Finished),
            "failed" => Ok(BossStatus::Failed),
            other => Err(format!("unknown BOSS status `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BossJobRecord {
    pub boss_id: u64,
    pub scheduler_job_id: JobId,
    pub job_type: Step,
    pub assignment_id: u64,
    pub dataset: String,
    pub status: BossStatus,
    pub exit_status: Option<i32>,
    pub input_file: String,
    pub output_file: String,
    pub events_declared: u64,
    pub events_done: u64,
    pub submitted_at: SimTime,
    pub updated_at: SimTime,
}

impl BossJobRecord {
    pub fn row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.boss_id,
            self.status,
            self.exit_status.map_or_else(|| "-".to_string(), |e| e.to_string()),
            self.input_file,
            self.output_file,
            self.events_declared,
            self.events_done
        )
    }
}

/// How a record field is extracted from a monitoring payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    /// Key looked up in the payload.
    pub source: String,
}

/// Per job type: record field -> extraction rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterSpec {
    pub job_type: Step,
    pub rules: BTreeMap<String, Rule>,
}

impl FilterSpec {
    pub const FIELDS: [&'static str; 3] = ["events_done", "output_file", "exit_status"];

    pub fn standard(job_type: Step) -> Self {
        FilterSpec {
            job_type,
            rules: Self::FIELDS
                .iter()
                .map(|f| (f.to_string(), Rule { source: f.to_string() }))
                .collect(),
        }
    }

    /// Every run-time field has a rule.
    pub fn is_complete(&self) -> bool {
        Self::FIELDS.iter().all(|f| self.rules.contains_key(*f))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BossFilter {
    pub job_type: Option<Step>,
    pub status: Option<BossStatus>,
    pub dataset: Option<String>,
    pub assignment_id: Option<u64>,
}

impl BossFilter {
    fn accepts(&self, r: &BossJobRecord) -> bool {
        self.job_type.is_none_or(|t| t == r.job_type)
            && self.status.is_none_or(|s| s == r.status)
            && self.dataset.as_deref().is_none_or(|d| d == r.dataset)
            && self.assignment_id.is_none_or(|a| a == r.assignment_id)
    }
}

#[derive(Debug, Clone)]
pub struct BossDb {
    records: BTreeMap<u64, BossJobRecord>,
    by_job: BTreeMap<JobId, u64>,
    filters: BTreeMap<Step, FilterSpec>,
    violations: Vec<(SimTime, ProductionError)>,
    next_id: u64,
}

impl Default for BossDb {
    fn default() -> Self {
        BossDb {
            records: BTreeMap::new(),
            by_job: BTreeMap::new(),
            filters: [Step::Cmkin, Step::Cmsim]
                .into_iter()
                .map(|s| (s, FilterSpec::standard(s)))
                .collect(),
            violations: Vec::new(),
            next_id: 0,
        }
    }
}

impl BossDb {
    pub fn new() -> Self {
        BossDb::default()
    }

    #[allow(clippy::too_many_arguments)]
    pub fn register(
        &mut self,
        job: JobId,
        job_type: Step,
        assignment_id: u64,
        dataset: &str,
        input_file: &str,
        events_declared: u64,
        now: SimTime,
    ) -> u64 {
        self.next_id += 1;
        let id = self.next_id;
        self.records.insert(
            id,
            BossJobRecord {
                boss_id: id,
                scheduler_job_id: job,
                job_type,
                assignment_id,
                dataset: dataset.to_string(),
                status: BossStatus::Submitted,
                exit_status: None,
                input_file: input_file.to_string(),
                output_file: "-".into(),
                events_declared,
                events_done: 0,
                submitted_at: now,
                updated_at: now,
            },
        );
        self.by_job.insert(job, id);
        id
    }

    pub fn set_filter(&mut self, spec: FilterSpec) {
        self.filters.insert(spec.job_type, spec);
    }

    pub fn get(&self, id: u64) -> Option<&BossJobRecord> {
        self.records.get(&id)
    }

    pub fn boss_id_of(&self, job: JobId) -> Option<u64> {
        self.by_job.get(&job).copied()
    }

    pub fn records(&self) -> impl Iterator<Item = &BossJobRecord> {
        self.records.values()
    }

    pub fn violations(&self) -> &[(SimTime, ProductionError)] {
        &self.violations
    }

    pub fn update(&mut self, id: u64, key: &str, value: &str, now: SimTime) -> Result<(), ProductionError> {
        let r = self.records.get_mut(&id).ok_or(ProductionError::UnknownBossId(id))?;
        let bad = |why: String| ProductionError::InvalidRequest(format!("BOSS {id}: {why}"));
        match key {
            "events_done" => {
                let v: u64 = value.parse().map_err(|_| bad(format!("events_done `{value}`")))?;
                if v < r.events_done {
                    let e = ProductionError::MonotonicityViolation {
                        id,
                        old: r.events_done,
                        new: v,
                    };
                    self.violations.push((now, e.clone()));
                    return Err(e);
                }
                r.events_done = v.min(r.events_declared);
                if r.status == BossStatus::Submitted {
                    r.status = BossStatus::Running;
                }
            }
            "output_file" => r.output_file = value.to_string(),
            "exit_status" => {
                r.exit_status = Some(value.parse().map_err(|_| bad(format!("exit_status `{value}`")))?)
            }
            "status" => r.status = value.parse().map_err(bad)?,
            other => return Err(bad(format!("unknown field `{other}`"))),
        }
        r.updated_at = now;
        Ok(())
    }

    /// Applies the job type's filter to one monitoring payload. Rejected
    /// values are logged and skipped.
    pub fn apply_tick(&mut self, id: u64, payload: &[(String, String)], now: SimTime) -> Result<(), ProductionError> {
        let job_type = self.records.get(&id).ok_or(ProductionError::UnknownBossId(id))?.job_type;
        let rules = self.filters.get(&job_type).cloned().unwrap_or_else(|| FilterSpec::standard(job_type));
        for (field, rule) in &rules.rules {
            if let Some((_, v)) = payload.iter().find(|(k, _)| *k == rule.source) {
                let _ = self.update(id, field, v, now);
            }
        }
        Ok(())
    }

    /// Terminal bookkeeping when the job's output comes back (or it dies).
    pub fn finalize(
        &mut self,
        id: u64,
        exit_status: i32,
        events_done: u64,
        output_file: Option<&str>,
        now: SimTime,
    ) -> Result<(), ProductionError> {
        let r = self.records.get_mut(&id).ok_or(ProductionError::UnknownBossId(id))?;
        r.status = if exit_status == 0 { BossStatus::Finished } else { BossStatus::Failed };
        r.exit_status = Some(exit_status);
        r.events_done = r.events_done.max(events_done.min(r.events_declared));
        if let Some(o) = output_file {
            r.output_file = o.to_string();
        }
        r.updated_at = now;
        Ok(())
    }

    pub fn query(&self, filter: &BossFilter) -> Vec<&BossJobRecord> {
        self.records.values().filter(|r| filter.accepts(r)).collect()
    }

    pub fn table(rows: &[&BossJobRecord]) -> String {
        let mut s = String::from(BOSS_HEADER);
        s.push('\n');
        for r in rows {
            s.push_str(&r.row());
            s.push('\n');
        }
        s
    }

    pub fn dump(&self) -> String {
        Self::table(&self.query(&BossFilter::default()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detail;

    fn db() -> (BossDb, u64) {
        let mut db = BossDb::new();
        let id = db.register(JobId(7), Step::Cmkin, 1, "demo", "-", 250, SimTime::ZERO);
        (db, id)
    }

    #[test]
    fn ticks_update_events() {
        let (mut db, id) = db();
        db.apply_tick(id, &detail!("events_done" => 10, "phase" => "running")[..], SimTime::from_secs(5))
            .unwrap();
        db.apply_tick(id, &detail!("events_done" => 20)[..], SimTime::from_secs(10)).unwrap();
        let r = db.get(id).unwrap();
        assert_eq!((r.events_done, r.status), (20, BossStatus::Running));
        assert_eq!(r.updated_at, SimTime::from_secs(10));
    }

    #[test]
    fn regression_is_logged_and_ignored() {
        let (mut db, id) = db();
        db.update(id, "events_done", "20", SimTime::ZERO).unwrap();
        let e = db.update(id, "events_done", "10", SimTime::ZERO).unwrap_err();
        assert_eq!(e, ProductionError::MonotonicityViolation { id, old: 20, new: 10 });
        db.apply_tick(id, &detail!("events_done" => 5)[..], SimTime::ZERO).unwrap();
        assert_eq!(db.get(id).unwrap().events_done, 20);
        assert_eq!(db.violations().len(), 2);
    }

    #[test]
    fn finalize_without_ticks() {
        let (mut db, id) = db();
        db.finalize(id, 0, 250, Some("demo_1.ntpl"), SimTime::from_secs(130)).unwrap();
        assert_eq!(db.dump(), format!("{BOSS_HEADER}\n1\tfinished\t0\t-\tdemo_1.ntpl\t250\t250\n"));
        assert_eq!(db.update(99, "status", "running", SimTime::ZERO), Err(ProductionError::UnknownBossId(99)));
    }

    #[test]
    fn query_filters() {
        let (mut db, id) = db();
        db.register(JobId(8), Step::Cmsim, 2, "demo", "demo_1.ntpl", 250, SimTime::ZERO);
        db.update(id, "events_done", "10", SimTime::ZERO).unwrap();
        let running = db.query(&BossFilter {
            status: Some(BossStatus::Running),
            ..Default::default()
        });
        assert_eq!(running.len(), 1);
        assert_eq!(running[0].boss_id, id);
        let sim = db.query(&BossFilter {
            job_type: Some(Step::Cmsim),
            ..Default::default()
        });
        assert_eq!(sim[0].input_file, "demo_1.ntpl");
        assert!(BossDb::new().dump().lines().count() == 1);
        assert!(FilterSpec::standard(Step::Cmsim).is_complete());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn events_done_never_regresses(ticks in proptest::collection::vec(0u64..300, 0..40)) {
                let (mut db, id) = db();
                let mut last = 0;
                for t in ticks {
                    let _ = db.update(id, "events_done", &t.to_string(), SimTime::ZERO);
                    let now = db.get(id).unwrap().events_done;
                    prop_assert!(now >= last);
                    prop_assert!(now <= 250);
                    last = now;
                }
            }
        }
    }
}
