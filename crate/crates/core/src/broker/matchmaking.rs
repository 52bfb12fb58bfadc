use std::cmp::Ordering;
use std::fmt::Write as _;

use crate::datagrid::Replica;
use crate::ids::{CeId, Lfn, VoName};
use crate::infosys::{ett_of, CeRecord, InfoIndex, SchemaFlavor};
use crate::jdl::{evaluate, requirement_satisfied, Env, Expr, Value};
use crate::parallel;
use crate::time::SimTime;
use crate::vomgmt::{Proxy, VoManager};

/// Everything the broker needs to rank CEs for one job.
#[derive(Debug, Clone, Copy)]
pub struct MatchRequest<'a> {
    pub flavor: SchemaFlavor,
    pub vo: &'a VoName,
    pub proxy: &'a Proxy,
    pub requirements: &'a Expr,
    pub rank: Option<&'a Expr>,
    /// Replica lists of the job's input files, as returned by the catalogue.
    pub inputs: &'a [(Lfn, Vec<Replica>)],
    pub now: SimTime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub ce_id: CeId,
    /// `None` when the rank expression is undefined at this CE.
    pub rank: Option<f64>,
    pub ett: f64,
    /// Close-SE replica chosen per input file.
    pub replicas: Vec<(Lfn, Replica)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchResult {
    /// Sorted by rank descending (undefined last), then ce_id ascending.
    pub candidates: Vec<Candidate>,
}

impl MatchResult {
    pub fn chosen(&self) -> Option<&Candidate> {
        self.candidates.first()
    }

    /// `ce=rank` pairs for the trace.
    pub fn table(&self) -> String {
        let mut s = String::new();
        for (i, c) in self.candidates.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            match c.rank {
                Some(r) => write!(s, "{}={r:.3}", c.ce_id).unwrap(),
                None => write!(s, "{}=UNDEFINED", c.ce_id).unwrap(),
            }
        }
        s
    }
}

/// Attributes a CE exposes to `other.<Name>` references.
pub fn ce_env(ce: &CeRecord, ett: f64) -> Env {
    let mut env = Env::new();
    env.bind("RunTimeEnvironment", Value::list(ce.run_time_environment.iter().cloned()))
        .bind("LRMSType", Value::Str(ce.lrms.to_string()))
        .bind("EstimatedTraversalTime", Value::Num(ett))
        .bind("CEId", Value::Str(ce.ce_id.to_string()));
    if let Some(se) = ce.close_ses.first() {
        env.bind("CloseSE", Value::Str(se.to_string()));
    }
    env
}

pub fn rank_order(a: &Candidate, b: &Candidate) -> Ordering {
    match (a.rank, b.rank) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
    .then_with(|| a.ce_id.cmp(&b.ce_id))
}

/// Applies the authorization, requirements and data-locality filters to one
/// CE and ranks it.
pub fn evaluate_candidate(ce: &CeRecord, vo: &VoManager, req: &MatchRequest<'_>) -> Option<Candidate> {
    vo.authorize(&ce.site_id, req.proxy, req.now).ok()?;
    let ett = ett_of(ce, req.now);
    let env = ce_env(ce, ett);
    if !requirement_satisfied(req.requirements, &env) {
        return None;
    }
    let mut replicas = Vec::with_capacity(req.inputs.len());
    for (lfn, reps) in req.inputs {
        let r = reps.iter().filter(|r| ce.close_ses.contains(&r.se_id)).min()?;
        replicas.push((lfn.clone(), r.clone()));
    }
    let rank = match req.rank {
        None => Some(-ett),
        Some(e) => match evaluate(e, &env) {
            Value::Num(x) if x.is_finite() => Some(x),
            _ => None,
        },
    };
    Some(Candidate {
        ce_id: ce.ce_id.clone(),
        rank,
        ett,
        replicas,
    })
}

fn finish(mut candidates: Vec<Candidate>) -> MatchResult {
    candidates.sort_by(rank_order);
    MatchResult { candidates }
}

pub fn match_sequential(index: &InfoIndex, vo: &VoManager, req: &MatchRequest<'_>) -> MatchResult {
    let ces = index.query(req.flavor, req.vo);
    finish(
        parallel::map_seq(&ces, |ce| evaluate_candidate(ce, vo, req))
            .into_iter()
            .flatten()
            .collect(),
    )
}

#[cfg(feature = "parallel")]
pub fn match_parallel(index: &InfoIndex, vo: &VoManager, req: &MatchRequest<'_>) -> MatchResult {
    let ces = index.query(req.flavor, req.vo);
    finish(
        parallel::map_par(&ces, |ce| evaluate_candidate(ce, vo, req))
            .into_iter()
            .flatten()
            .collect(),
    )
}

/// Below this many CEs the scan stays on the calling thread.
pub const PARALLEL_THRESHOLD: usize = 64;

pub fn match_resources(index: &InfoIndex, vo: &VoManager, req: &MatchRequest<'_>) -> MatchResult {
    let ces = index.query(req.flavor, req.vo);
    let scored = if ces.len() >= PARALLEL_THRESHOLD {
        parallel::map(&ces, |ce| evaluate_candidate(ce, vo, req))
    } else {
        parallel::map_seq(&ces, |ce| evaluate_candidate(ce, vo, req))
    };
    finish(scored.into_iter().flatten().collect())
}
