use crate::jdl::{Expr, JdlFile};

use super::{ProductionError, RefDb, RequestStatus, Step};

/// Parameters of an assignment, materialised by the declaration step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workspace {
    pub assignment_id: u64,
    pub dataset: String,
    pub step: Step,
    /// Events per job; the last job carries the remainder.
    pub job_events: Vec<u64>,
}

impl Workspace {
    pub fn job_count(&self) -> usize {
        self.job_events.len()
    }
}

fn split(total: u64, per_job: u64) -> Vec<u64> {
    let n = total.div_ceil(per_job);
    (0..n)
        .map(|i| if i + 1 == n { total - per_job * (n - 1) } else { per_job })
        .collect()
}

/// Seed of job `n` (1-based) of a dataset.
pub fn job_seed(n: u64) -> i64 {
    2000 + n as i64 - 1
}

pub fn declare(db: &mut RefDb, id: u64) -> Result<Workspace, ProductionError> {
    let r = db.get_mut(id)?;
    r.expect(RequestStatus::New)?;
    r.job_events = split(r.total_events, r.events_per_job);
    r.status = RequestStatus::Declared;
    Ok(Workspace {
        assignment_id: id,
        dataset: r.dataset.clone(),
        step: r.step,
        job_events: r.job_events.clone(),
    })
}

/// Instantiates one JDL per declared job.
pub fn create(db: &mut RefDb, id: u64, catalog: &str) -> Result<Vec<String>, ProductionError> {
    let r = db.get_mut(id)?;
    r.expect(RequestStatus::Declared)?;
    let exe = r.step.profile();
    let strs = |v: &[&str]| Expr::List(v.iter().map(|s| Expr::str(s)).collect());
    let mut jdls = Vec::with_capacity(r.job_events.len());
    for (i, events) in r.job_events.iter().enumerate() {
        let n = i as u64 + 1;
        let out = format!("{exe}.out");
        let err = format!("{exe}.err");
        let mut f = JdlFile::default();
        f.push("Executable", Expr::str(&format!("{exe}.sh")));
        f.push("StdOutput", Expr::str(&out));
        f.push("StdError", Expr::str(&err));
        f.push("InputSandbox", strs(&[&format!("{exe}.sh")]));
        f.push("OutputSandbox", strs(&[&out, &err]));
        f.push("VirtualOrganisation", Expr::str(r.vo.as_str()));
        f.push(
            "Requirements",
            Expr::member(Expr::str("CMS"), Expr::attr("RunTimeEnvironment")),
        );
        if r.step == Step::Cmsim {
            f.push(
                "InputData",
                Expr::List(vec![Expr::Str(format!("lfn:{}_{n}.ntpl", r.dataset))]),
            );
            f.push("ReplicaCatalog", Expr::str(catalog));
        }
        f.push("Events", Expr::Num(*events as f64));
        f.push("JobSeed", Expr::Num(job_seed(n) as f64));
        f.push("Dataset", Expr::str(&r.dataset));
        f.push("JobIndex", Expr::Num(n as f64));
        f.push("AssignmentId", Expr::Num(id as f64));
        if let Some(se) = &r.default_se {
            f.push("OutputSE", Expr::str(se.as_str()));
        }
        jdls.push(f.to_string());
    }
    r.jdls = jdls.clone();
    r.status = RequestStatus::Created;
    Ok(jdls)
}
