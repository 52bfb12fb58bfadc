//! The assembled testbed: every service wired to one event kernel.

mod report;
mod world;

use std::collections::BTreeMap;
use std::io;

use thiserror::Error;

pub use report::Report;
pub use world::{Ev, Leg, MatchEvent, MatchObserver};

use crate::broker::{BrokerError, FileInfo, JobRecord, JobState, ResourceBroker};
use crate::datagrid::{DataError, ReplicaCatalog, Storage, StorageElement};
use crate::fabric::{ComputingElement, FabricError, FailureConfig, Network, WorkloadProfile};
use crate::ids::{CeId, HostId, JobId, Lfn, RbId, SeId, SiteId, UserDn, VoName};
use crate::infosys::{InfoError, InfoIndex, Record, SeRecord};
use crate::jdl::parse_jdl;
use crate::production::{self, BossDb, ProductionError, RefDb, RequestSpec, RequestStatus, Step, Summary, Workspace};
use crate::simcore::{Kernel, TraceEntry};
use crate::time::SimTime;
use crate::topology::TopologyConfig;
use crate::vomgmt::{Proxy, VoDirectory, VoError, VoManager};
use crate::detail;

use world::World;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error(transparent)]
    Info(#[from] InfoError),
    #[error(transparent)]
    Vo(#[from] VoError),
    #[error("topology has no replica catalogue")]
    NoCatalog,
}

pub struct Grid {
    kernel: Kernel<Ev>,
    world: World,
}

impl Grid {
    pub fn new(cfg: &TopologyConfig, seed: u64) -> Result<Grid, GridError> {
        let mut index = InfoIndex::new();
        let mut vo = VoManager::new();
        for v in &cfg.vos {
            let mut d = VoDirectory::new(v.name.clone());
            for m in &v.members {
                d.add_member(m.clone());
            }
            vo.add_directory(d);
        }
        let mut network = Network::new();
        let mut sites = BTreeMap::new();
        for s in &cfg.sites {
            vo.set_site_policy(s.id.clone(), s.vos.clone());
            network.add_site(&s.id, s.region, s.lan);
            sites.insert(s.id.clone(), s.clone());
        }
        vo.sync_all(SimTime::ZERO)?;
        for h in &cfg.hosts {
            network.add_host(&h.id, h.region);
        }
        for l in &cfg.links {
            network.add_link(&l.a, &l.b, l.spec);
        }
        for w in &cfg.wan_defaults {
            network.set_region_default(w.a, w.b, w.spec);
        }
        let mut ces = BTreeMap::new();
        for c in &cfg.ces {
            index.publish(Record::Ce(cfg.ce_record(c)))?;
            ces.insert(
                c.id.clone(),
                ComputingElement::new(c.id.clone(), c.site.clone(), c.wn_count, c.cpu_mhz),
            );
        }
        let mut storage = Storage::new();
        let mut se_site = BTreeMap::new();
        for s in &cfg.ses {
            storage.add(StorageElement::new(s.id.clone(), s.site.clone(), s.capacity_bytes));
            se_site.insert(s.id.clone(), s.site.clone());
            index.publish(Record::Se(SeRecord {
                se_id: s.id.clone(),
                site_id: s.site.clone(),
                capacity_bytes: s.capacity_bytes,
                used_bytes: 0,
                close_ces: cfg.close_ces(&s.id),
            }))?;
        }
        let brokers = cfg
            .brokers
            .iter()
            .map(|b| {
                let mut rb = ResourceBroker::new(b.id.clone(), b.flavor, HostId::new(&b.host));
                rb.latency = b.latency;
                (b.id.clone(), rb)
            })
            .collect();
        let cat = cfg.catalog.as_ref().ok_or(GridError::NoCatalog)?;
        Ok(Grid {
            kernel: Kernel::new(seed),
            world: World {
                index,
                vo,
                storage,
                catalog: ReplicaCatalog::new(&cat.id),
                catalog_host: cat.host.clone(),
                network,
                ces,
                brokers,
                profiles: cfg.profiles.clone(),
                sites,
                se_site,
                jobs: BTreeMap::new(),
                next_job: 0,
                failures: FailureConfig::default(),
                pending: BTreeMap::new(),
                replications: BTreeMap::new(),
                next_replication: 0,
                refdb: RefDb::new(),
                boss: BossDb::new(),
                observer: None,
            },
        })
    }

    /// The shipped WorldGrid topology.
    pub fn worldgrid(seed: u64) -> Grid {
        Grid::new(&TopologyConfig::default_topology(), seed).expect("shipped topology is valid")
    }

    // ---- clock ----

    pub fn now(&self) -> SimTime {
        self.kernel.now()
    }

    pub fn seed(&self) -> u64 {
        self.kernel.seed()
    }

    /// Delivers every event due at or before `t` and leaves the clock at `t`.
    pub fn run_until(&mut self, t: SimTime) -> usize {
        self.kernel.run_until(t, |k, ev| self.world.handle(k, ev))
    }

    pub fn advance(&mut self, dt: SimTime) -> usize {
        let t = self.now() + dt;
        self.run_until(t)
    }

    /// Runs until the event queue is empty.
    pub fn run(&mut self) -> usize {
        self.kernel.run_all(|k, ev| self.world.handle(k, ev))
    }

    pub fn pending_events(&self) -> usize {
        self.kernel.pending_count()
    }

    // ---- trace ----

    pub fn trace(&self) -> &[TraceEntry] {
        self.kernel.trace_entries()
    }

    pub fn export_trace<W: io::Write>(&self, w: W) -> io::Result<()> {
        self.kernel.export_trace(w)
    }

    pub fn trace_text(&self) -> String {
        let mut buf = Vec::new();
        self.export_trace(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("trace is UTF-8")
    }

    // ---- state access ----

    pub fn index(&self) -> &InfoIndex {
        &self.world.index
    }

    pub fn vo(&self) -> &VoManager {
        &self.world.vo
    }

    pub fn storage(&self) -> &Storage {
        &self.world.storage
    }

    pub fn catalog(&self) -> &ReplicaCatalog {
        &self.world.catalog
    }

    pub fn catalog_host(&self) -> &str {
        &self.world.catalog_host
    }

    pub fn network(&self) -> &Network {
        &self.world.network
    }

    pub fn ce(&self, id: &CeId) -> Option<&ComputingElement> {
        self.world.ces.get(id)
    }

    pub fn ces(&self) -> impl Iterator<Item = &ComputingElement> {
        self.world.ces.values()
    }

    pub fn broker(&self, id: &RbId) -> Option<&ResourceBroker> {
        self.world.brokers.get(id)
    }

    pub fn brokers(&self) -> impl Iterator<Item = &ResourceBroker> {
        self.world.brokers.values()
    }

    pub fn profile(&self, name: &str) -> Option<&WorkloadProfile> {
        self.world.profiles.get(name)
    }

    pub fn job(&self, id: JobId) -> Option<&JobRecord> {
        self.world.jobs.get(&id)
    }

    pub fn jobs(&self) -> impl Iterator<Item = &JobRecord> {
        self.world.jobs.values()
    }

    pub fn site_of_se(&self, se: &SeId) -> Option<&SiteId> {
        self.world.se_site.get(se)
    }

    pub fn refdb(&self) -> &RefDb {
        &self.world.refdb
    }

    pub fn boss(&self) -> &BossDb {
        &self.world.boss
    }

    pub fn boss_mut(&mut self) -> &mut BossDb {
        &mut self.world.boss
    }

    pub fn report(&self) -> Report {
        Report::build(self)
    }

    // ---- VO management ----

    pub fn create_proxy(&self, dn: &UserDn, vo: &VoName, lifetime: Option<SimTime>) -> Result<Proxy, VoError> {
        self.world.vo.create_proxy(dn, vo, lifetime, self.now())
    }

    /// Adds `dn` to the VO directory. Sites see it after their next sync.
    pub fn add_vo_member(&mut self, vo: &VoName, dn: UserDn) -> Result<bool, VoError> {
        let added = self.world.vo.directory_mut(vo)?.add_member(dn.clone());
        self.kernel.trace("vo", "add-member", detail!("vo" => vo, "dn" => dn));
        Ok(added)
    }

    pub fn remove_vo_member(&mut self, vo: &VoName, dn: &UserDn) -> Result<bool, VoError> {
        let removed = self.world.vo.directory_mut(vo)?.remove_member(dn);
        self.kernel.trace("vo", "remove-member", detail!("vo" => vo, "dn" => dn));
        Ok(removed)
    }

    /// Regenerates the grid-mapfile of one site, or of every site.
    pub fn sync_mapfiles(&mut self, site: Option<&SiteId>) -> Result<(), VoError> {
        let now = self.now();
        match site {
            Some(s) => {
                let n = self.world.vo.sync_mapfile(s, now)?.entries.len();
                self.kernel.trace(s.as_str(), "mapfile-sync", detail!("entries" => n));
            }
            None => {
                self.world.vo.sync_all(now)?;
                self.kernel.trace("vo", "mapfile-sync", detail!("sites" => "all"));
            }
        }
        Ok(())
    }

    // ---- jobs ----

    pub fn submit(&mut self, rb: &RbId, jdl: &str, proxy: &Proxy) -> Result<JobId, BrokerError> {
        self.world.submit(&mut self.kernel, rb, jdl, proxy)
    }

    pub fn job_state(&self, id: JobId) -> Result<JobState, BrokerError> {
        self.job(id).map(|j| j.state).ok_or(BrokerError::UnknownJob(id))
    }

    /// Hands back the files held by the RB and clears the job.
    pub fn get_output(&mut self, id: JobId) -> Result<Vec<FileInfo>, BrokerError> {
        self.world.get_output(&mut self.kernel, id)
    }

    /// Called for every match-making decision, before its result is applied.
    pub fn set_match_observer(&mut self, obs: Option<MatchObserver>) {
        self.world.observer = obs;
    }

    // ---- data ----

    /// Stores a file on `se` under its LFN and registers it.
    pub fn upload(&mut self, lfn: &Lfn, se: &SeId, size_bytes: u64) -> Result<u64, DataError> {
        self.world.upload(&mut self.kernel, lfn, se, size_bytes)
    }

    /// Starts a copy of `lfn` to `to`. Returns the completion time, or
    /// `None` if `to` already holds a replica.
    pub fn replicate(&mut self, lfn: &Lfn, to: &SeId) -> Result<Option<SimTime>, DataError> {
        self.world.replicate(&mut self.kernel, lfn, to)
    }

    // ---- faults ----

    pub fn set_failures(&mut self, f: FailureConfig) {
        self.world.failures = f;
    }

    pub fn failures(&self) -> &FailureConfig {
        &self.world.failures
    }

    /// Kills one running job on the CE, if any.
    pub fn inject_wn_crash(&mut self, ce: &CeId) -> Result<Option<JobId>, FabricError> {
        self.world.crash_wn(&mut self.kernel, ce)
    }

    pub fn set_outbound(&mut self, site: &SiteId, on: bool) -> Result<(), VoError> {
        let s = self
            .world
            .sites
            .get_mut(site)
            .ok_or_else(|| VoError::UnknownSite(site.clone()))?;
        s.outbound = on;
        self.kernel.trace(site.as_str(), "outbound", detail!("enabled" => on));
        Ok(())
    }

    // ---- production ----

    pub fn refdb_request(&mut self, spec: RequestSpec) -> Result<u64, ProductionError> {
        if !self.world.brokers.contains_key(&spec.rb_id) {
            return Err(ProductionError::InvalidRequest(format!("unknown RB `{}`", spec.rb_id)));
        }
        if let Some(se) = &spec.default_se {
            if !self.world.se_site.contains_key(se) {
                return Err(ProductionError::InvalidRequest(format!("unknown SE `{se}`")));
            }
        }
        let (ds, step) = (spec.dataset.clone(), spec.step);
        let id = self.world.refdb.create_request(spec)?;
        self.kernel
            .trace("RefDB", "request", detail!("assignment" => id, "dataset" => ds, "step" => step));
        Ok(id)
    }

    pub fn impala_declare(&mut self, id: u64) -> Result<Workspace, ProductionError> {
        let ws = production::declare(&mut self.world.refdb, id)?;
        self.kernel
            .trace("IMPALA", "declare", detail!("assignment" => id, "jobs" => ws.job_count()));
        Ok(ws)
    }

    pub fn impala_create(&mut self, id: u64) -> Result<Vec<String>, ProductionError> {
        let jdls = production::create(&mut self.world.refdb, id, &self.world.catalog.id)?;
        self.kernel
            .trace("IMPALA", "create", detail!("assignment" => id, "jdls" => jdls.len()));
        Ok(jdls)
    }

    /// Submits every JDL of the assignment and registers it with BOSS.
    /// Nothing is submitted unless the proxy and broker are usable.
    pub fn impala_submit(&mut self, id: u64, proxy: &Proxy) -> Result<Vec<u64>, ProductionError> {
        let req = self.world.refdb.get(id)?;
        req.expect(RequestStatus::Created)?;
        if !proxy.is_valid_at(self.now()) {
            return Err(ProductionError::ProxyExpired);
        }
        if proxy.vo_name != req.vo {
            return Err(ProductionError::InvalidRequest(format!(
                "proxy is for VO {}, assignment for {}",
                proxy.vo_name, req.vo
            )));
        }
        if !self.world.brokers.contains_key(&req.rb_id) {
            return Err(ProductionError::InvalidRequest(format!("unknown RB `{}`", req.rb_id)));
        }
        for (i, text) in req.jdls.iter().enumerate() {
            parse_jdl(text).map_err(|e| ProductionError::InvalidRequest(format!("job {}: {e}", i + 1)))?;
        }
        let (rb, step, ds) = (req.rb_id.clone(), req.step, req.dataset.clone());
        let jobs: Vec<(String, u64)> = req.jdls.iter().cloned().zip(req.job_events.iter().copied()).collect();
        let mut boss_ids = Vec::with_capacity(jobs.len());
        for (i, (text, events)) in jobs.into_iter().enumerate() {
            let job = self
                .world
                .submit(&mut self.kernel, &rb, &text, proxy)
                .map_err(|e| ProductionError::InvalidRequest(e.to_string()))?;
            let input = match step {
                Step::Cmsim => format!("{ds}_{}.ntpl", i + 1),
                Step::Cmkin => "-".to_string(),
            };
            let now = self.now();
            let b = self.world.boss.register(job, step, id, &ds, &input, events, now);
            self.kernel
                .trace("BOSS", "register", detail!("boss_id" => b, "job" => job, "assignment" => id));
            boss_ids.push(b);
        }
        self.world.refdb.mark_submitted(id, boss_ids.clone())?;
        Ok(boss_ids)
    }

    /// Collects the BOSS rows of the assignment into a RefDB summary.
    pub fn refdb_summary(&mut self, id: u64) -> Result<(RequestStatus, Summary), ProductionError> {
        let req = self.world.refdb.get(id)?;
        let mut s = Summary::default();
        for b in &req.boss_ids {
            let r = self.world.boss.get(*b).ok_or(ProductionError::UnknownBossId(*b))?;
            if !r.status.is_terminal() {
                return Err(ProductionError::JobsStillRunning(id));
            }
            if r.exit_status == Some(0) {
                s.jobs_ok += 1;
                s.lfns.push(r.output_file.clone());
            } else {
                s.jobs_failed += 1;
            }
            s.total_events_done += r.events_done;
        }
        let status = self.world.refdb.post_summary(id, s.clone())?;
        self.kernel.trace(
            "RefDB",
            "summary",
            detail!("assignment" => id, "ok" => s.jobs_ok, "failed" => s.jobs_failed, "status" => status),
        );
        Ok((status, s))
    }
}

/// Runs `f` once per seed, in parallel when the feature is on.
/// Results come back in seed order.
pub fn sweep<R, F>(seeds: &[u64], f: F) -> Vec<R>
where
    R: Send,
    F: Fn(u64) -> R + Sync + Send,
{
    crate::parallel::map(seeds, |s| f(*s))
}
