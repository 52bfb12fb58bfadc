use std::collections::BTreeMap;

use rand::Rng;

use crate::broker::{
    match_resources, BrokerError, FileInfo, JobRecord, JobState, MatchRequest, MatchResult, Reason, ResourceBroker,
    StagedInput, DEFAULT_SANDBOX_FILE_BYTES,
};
use crate::datagrid::{DataError, Replica, ReplicaCatalog, Storage};
use crate::detail;
use crate::digest::fnv1a64;
use crate::fabric::{
    output_checksum, ComputingElement, DispatchOutcome, FabricError, FailureConfig, Location, Network,
    OutputDestination, ProfileTable, QueuedJob, KB,
};
use crate::ids::{CeId, HostId, JobId, Lfn, RbId, SeId, SiteId};
use crate::infosys::{InfoIndex, SchemaFlavor};
use crate::jdl::parse_jdl;
use crate::production::{BossDb, RefDb};
use crate::simcore::{EventHandle, EventKind, Kernel, SimEvent};
use crate::time::SimTime;
use crate::topology::SiteSpec;
use crate::vomgmt::{Proxy, VoManager};

/// Transfer legs of a job's pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Leg {
    SandboxIn,
    StageIn(usize),
    OutputCopy,
    SandboxOut,
}

impl Leg {
    fn as_str(self) -> &'static str {
        match self {
            Leg::SandboxIn => "sandbox-in",
            Leg::StageIn(_) => "stage-in",
            Leg::OutputCopy => "output-copy",
            Leg::SandboxOut => "sandbox-out",
        }
    }
}

/// Event payloads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ev {
    Match(JobId),
    Transfer { job: JobId, leg: Leg, ok: bool },
    Tick { job: JobId, events_done: u64, last: bool },
    ExecDone(JobId),
    Replicated(u64),
}

pub type K = Kernel<Ev>;

/// What a match observer sees.
pub struct MatchEvent<'a> {
    pub job: &'a JobRecord,
    pub flavor: SchemaFlavor,
    pub now: SimTime,
    pub index: &'a InfoIndex,
    pub vo: &'a VoManager,
    pub result: &'a MatchResult,
}

pub type MatchObserver = Box<dyn FnMut(&MatchEvent<'_>) + Send>;

#[derive(Debug, Clone)]
pub(crate) struct Replication {
    pub lfn: Lfn,
    pub path: String,
    pub to: SeId,
    pub size: u64,
    pub checksum: u64,
}

pub struct World {
    pub(crate) index: InfoIndex,
    pub(crate) vo: VoManager,
    pub(crate) storage: Storage,
    pub(crate) catalog: ReplicaCatalog,
    pub(crate) catalog_host: String,
    pub(crate) network: Network,
    pub(crate) ces: BTreeMap<CeId, ComputingElement>,
    pub(crate) brokers: BTreeMap<RbId, ResourceBroker>,
    pub(crate) profiles: ProfileTable,
    pub(crate) sites: BTreeMap<SiteId, SiteSpec>,
    pub(crate) se_site: BTreeMap<SeId, SiteId>,
    pub(crate) jobs: BTreeMap<JobId, JobRecord>,
    pub(crate) next_job: u64,
    pub(crate) failures: FailureConfig,
    pub(crate) pending: BTreeMap<JobId, Vec<EventHandle>>,
    pub(crate) replications: BTreeMap<u64, Replication>,
    pub(crate) next_replication: u64,
    pub(crate) refdb: RefDb,
    pub(crate) boss: BossDb,
    pub(crate) observer: Option<MatchObserver>,
}

fn sandbox_file(name: &str) -> FileInfo {
    FileInfo {
        name: name.to_string(),
        size_bytes: DEFAULT_SANDBOX_FILE_BYTES,
        checksum: fnv1a64([b"sandbox".as_slice(), name.as_bytes()]),
    }
}

fn hex(x: u64) -> String {
    format!("{x:016x}")
}

impl World {
    fn job(&self, id: JobId) -> &JobRecord {
        &self.jobs[&id]
    }

    fn job_mut(&mut self, id: JobId) -> &mut JobRecord {
        self.jobs.get_mut(&id).expect("job exists")
    }

    fn ce_of(&self, id: JobId) -> CeId {
        self.job(id).matched_ce.clone().expect("matched job")
    }

    fn site_of_ce(&self, ce: &CeId) -> SiteId {
        self.ces[ce].site_id.clone()
    }

    fn rb_host(&self, id: JobId) -> HostId {
        self.brokers[&self.job(id).rb_id].host.clone()
    }

    fn sync_ce(&mut self, ce: &CeId) {
        let load = self.ces[ce].load();
        self.index.publish_load(ce, load).expect("CE is published");
    }

    fn set_state(&mut self, k: &mut K, id: JobId, to: JobState) {
        let now = k.now();
        let rec = self.job_mut(id);
        rec.transition(to, now).expect("pipeline only makes legal transitions");
        let rb = rec.rb_id.clone();
        match to {
            JobState::Scheduled | JobState::Running => {
                let ce = self.ce_of(id);
                let mut d = detail!("job" => id, "state" => to);
                if let Some(wn) = &self.job(id).wn {
                    d.push(("wn".into(), wn.clone()));
                }
                k.trace(ce.as_str(), to.as_str().to_ascii_lowercase(), d);
            }
            _ => {
                let mut d = detail!("job" => id, "state" => to);
                if let Some(r) = &self.job(id).reason {
                    d.push(("reason".into(), r.to_string()));
                }
                k.trace(rb.as_str(), to.as_str().to_ascii_lowercase(), d);
            }
        }
    }

    fn track(&mut self, id: JobId, h: EventHandle) {
        self.pending.entry(id).or_default().push(h);
    }

    pub(crate) fn handle(&mut self, k: &mut K, ev: SimEvent<Ev>) {
        match ev.payload {
            Ev::Match(job) => self.do_match(k, job),
            Ev::Transfer { job, leg, ok } => {
                if !ok {
                    k.trace("net", "transfer-failed", detail!("job" => job, "leg" => leg.as_str()));
                    self.fail(k, job, Reason::TransferFailed);
                    return;
                }
                match leg {
                    Leg::SandboxIn => self.after_sandbox_in(k, job),
                    Leg::StageIn(i) => self.after_stage(k, job, i),
                    Leg::OutputCopy => self.after_output_copy(k, job),
                    Leg::SandboxOut => self.after_sandbox_out(k, job),
                }
            }
            Ev::Tick { job, events_done, last } => self.tick(k, job, events_done, last),
            Ev::ExecDone(job) => self.exec_done(k, job),
            Ev::Replicated(id) => self.after_replication(k, id),
        }
    }

    // ---- submission and match-making ----

    pub(crate) fn submit(&mut self, k: &mut K, rb_id: &RbId, text: &str, proxy: &Proxy) -> Result<JobId, BrokerError> {
        let rb = self
            .brokers
            .get(rb_id)
            .ok_or_else(|| BrokerError::UnknownBroker(rb_id.clone()))?;
        let desc = parse_jdl(text)?;
        let now = k.now();
        if !proxy.is_valid_at(now) {
            return Err(BrokerError::ProxyExpired);
        }
        if proxy.vo_name != desc.virtual_organisation {
            return Err(BrokerError::VoMismatch {
                proxy: proxy.vo_name.clone(),
                job: desc.virtual_organisation.clone(),
            });
        }
        let profile = self
            .profiles
            .get(&desc.job_profile)
            .cloned()
            .ok_or_else(|| BrokerError::UnknownProfile(desc.job_profile.clone()))?;
        let latency = rb.latency;
        self.next_job += 1;
        let id = JobId(self.next_job);
        let inputs: Vec<FileInfo> = desc.input_sandbox.iter().map(|n| sandbox_file(n)).collect();
        self.brokers.get_mut(rb_id).expect("checked").hold(id, inputs.clone());
        let rec = JobRecord::new(id, rb_id.clone(), proxy.clone(), desc, profile, inputs, now);
        k.trace(
            rb_id.as_str(),
            "submitted",
            detail!(
                "job" => id,
                "executable" => rec.description.executable,
                "events" => rec.description.events,
                "vo" => rec.description.virtual_organisation,
                "owner" => proxy.user_dn,
            ),
        );
        self.jobs.insert(id, rec);
        self.set_state(k, id, JobState::Waiting);
        let h = k.schedule_in(EventKind::JobDispatch, Ev::Match(id), latency);
        self.track(id, h);
        Ok(id)
    }

    fn do_match(&mut self, k: &mut K, id: JobId) {
        if self.job(id).state != JobState::Waiting {
            return;
        }
        let now = k.now();
        let rec = &self.jobs[&id];
        let flavor = self.brokers[&rec.rb_id].flavor;
        let catalog_ok = rec
            .description
            .replica_catalog
            .as_deref()
            .is_none_or(|c| c == self.catalog.id);
        let inputs: Vec<(Lfn, Vec<Replica>)> = rec
            .description
            .input_data
            .iter()
            .map(|l| (l.clone(), if catalog_ok { self.catalog.lookup(l) } else { Vec::new() }))
            .collect();
        let req = MatchRequest {
            flavor,
            vo: &rec.description.virtual_organisation,
            proxy: &rec.owner,
            requirements: &rec.description.requirements,
            rank: rec.description.rank.as_ref(),
            inputs: &inputs,
            now,
        };
        let result = match_resources(&self.index, &self.vo, &req);
        if let Some(obs) = self.observer.as_mut() {
            obs(&MatchEvent {
                job: rec,
                flavor,
                now,
                index: &self.index,
                vo: &self.vo,
                result: &result,
            });
        }
        let rb = rec.rb_id.clone();
        let Some(chosen) = result.chosen().cloned() else {
            k.trace(rb.as_str(), "matched", detail!("job" => id, "candidates" => "", "chosen" => "-"));
            self.abort(k, id, Reason::NoMatchingResources);
            return;
        };
        k.trace(
            rb.as_str(),
            "matched",
            detail!("job" => id, "candidates" => result.table(), "chosen" => chosen.ce_id),
        );
        let rec = self.job_mut(id);
        rec.matched_ce = Some(chosen.ce_id.clone());
        rec.chosen_replicas = chosen.replicas.iter().cloned().collect();
        rec.match_result = Some(result);
        self.set_state(k, id, JobState::Matched);
        self.schedule_on_ce(k, id);
    }

    fn schedule_on_ce(&mut self, k: &mut K, id: JobId) {
        let now = k.now();
        let ce_id = self.ce_of(id);
        self.set_state(k, id, JobState::Scheduled);
        let rec = &self.jobs[&id];
        let ce = self.ces.get_mut(&ce_id).expect("matched CE exists");
        let q = QueuedJob {
            job: id,
            proxy: rec.owner.clone(),
            events: rec.description.events,
            cpu_estimate: rec.profile.runtime(rec.description.events, ce.cpu_mhz),
            enqueued_at: now,
        };
        match ce.enqueue(q, &self.vo, now) {
            Ok(outcomes) => {
                self.sync_ce(&ce_id);
                self.apply_dispatch(k, &ce_id, outcomes);
            }
            Err(FabricError::AuthorizationDenied { reason, .. }) => {
                self.abort(k, id, Reason::AuthorizationDenied(reason));
            }
            Err(e) => unreachable!("enqueue only denies authorization: {e}"),
        }
    }

    fn apply_dispatch(&mut self, k: &mut K, ce_id: &CeId, outcomes: Vec<DispatchOutcome>) {
        for o in outcomes {
            match o {
                DispatchOutcome::Started { job, wn } => self.start_running(k, ce_id, job, wn),
                DispatchOutcome::Denied { job, reason } => {
                    self.sync_ce(ce_id);
                    self.abort(k, job, Reason::AuthorizationDenied(reason));
                }
            }
        }
        self.sync_ce(ce_id);
    }

    // ---- execution pipeline ----

    fn start_running(&mut self, k: &mut K, ce_id: &CeId, id: JobId, _wn: u32) {
        let wn_name = self.ces[ce_id].running(id).expect("dispatched").wn_name(ce_id);
        self.job_mut(id).wn = Some(wn_name);
        self.set_state(k, id, JobState::Running);
        let bytes = self.job(id).input_sandbox.iter().map(|f| f.size_bytes).sum();
        let from = Location::Host(self.rb_host(id));
        let to = Location::Wn(self.site_of_ce(ce_id));
        self.start_transfer(k, id, Leg::SandboxIn, bytes, from, to);
    }

    fn start_transfer(&mut self, k: &mut K, id: JobId, leg: Leg, bytes: u64, from: Location, to: Location) {
        let dt = match self.network.transfer_time(bytes, &from, &to) {
            Ok(dt) => dt,
            Err(e) => {
                k.trace("net", "no-route", detail!("job" => id, "leg" => leg.as_str(), "error" => e));
                self.fail(k, id, Reason::NoRoute);
                return;
            }
        };
        let p = self.failures.transfer_failure_p;
        let ok = p <= 0.0 || k.rng("fabric").random::<f64>() >= p;
        k.trace(
            "net",
            "transfer",
            detail!("job" => id, "leg" => leg.as_str(), "from" => from, "to" => to, "bytes" => bytes, "duration" => dt),
        );
        let h = k.schedule_in(EventKind::TransferComplete, Ev::Transfer { job: id, leg, ok }, dt);
        self.track(id, h);
    }

    fn after_sandbox_in(&mut self, k: &mut K, id: JobId) {
        if self.job(id).description.input_data.is_empty() {
            self.start_exec(k, id);
        } else {
            self.stage(k, id, 0);
        }
    }

    fn chosen_replica(&self, id: JobId, i: usize) -> (Lfn, Replica) {
        let rec = self.job(id);
        let lfn = rec.description.input_data[i].clone();
        let r = rec.chosen_replicas[&lfn].clone();
        (lfn, r)
    }

    fn stage(&mut self, k: &mut K, id: JobId, i: usize) {
        let (lfn, r) = self.chosen_replica(id, i);
        let Some(file) = self.storage.file(&r.se_id, &r.path) else {
            k.trace(r.se_id.as_str(), "missing", detail!("job" => id, "lfn" => lfn, "path" => r.path));
            self.fail(k, id, Reason::NoSuchPhysicalFile);
            return;
        };
        let bytes = file.size_bytes;
        let from = Location::Se(self.se_site[&r.se_id].clone());
        let to = Location::Wn(self.site_of_ce(&self.ce_of(id)));
        self.start_transfer(k, id, Leg::StageIn(i), bytes, from, to);
    }

    fn after_stage(&mut self, k: &mut K, id: JobId, i: usize) {
        let (lfn, r) = self.chosen_replica(id, i);
        let Some(file) = self.storage.file(&r.se_id, &r.path) else {
            self.fail(k, id, Reason::NoSuchPhysicalFile);
            return;
        };
        let checksum = file.checksum;
        let wn = self.job(id).wn.clone().unwrap_or_default();
        k.trace(
            wn,
            "staged",
            detail!("job" => id, "lfn" => lfn, "se" => r.se_id, "checksum" => hex(checksum)),
        );
        let now = k.now();
        self.job_mut(id).staged.push(StagedInput {
            lfn,
            replica: r,
            checksum,
            arrived_at: now,
        });
        if i + 1 < self.job(id).description.input_data.len() {
            self.stage(k, id, i + 1);
        } else {
            self.start_exec(k, id);
        }
    }

    fn start_exec(&mut self, k: &mut K, id: JobId) {
        let now = k.now();
        let ce_id = self.ce_of(id);
        let run = self.ces.get_mut(&ce_id).and_then(|c| c.running_mut(id)).expect("running");
        run.exec_started_at = Some(now);
        let runtime = run.cpu_total;
        self.sync_ce(&ce_id);
        let rec = self.job_mut(id);
        rec.exec_started_at = Some(now);
        let events = rec.description.events;
        let every = rec.profile.monitor_every_events;
        let wn = rec.wn.clone().unwrap_or_default();
        k.trace(
            wn,
            "exec-start",
            detail!("job" => id, "profile" => rec.profile.name, "events" => events, "runtime" => runtime),
        );
        let ms = u128::from(runtime.as_millis());
        let mut e = every;
        while e < events {
            let at = SimTime::from_millis((ms * u128::from(e) / u128::from(events)) as u64);
            let h = k.schedule_in(
                EventKind::MonitorTick,
                Ev::Tick {
                    job: id,
                    events_done: e,
                    last: false,
                },
                at,
            );
            self.track(id, h);
            e += every;
        }
        let h = k.schedule_in(
            EventKind::MonitorTick,
            Ev::Tick {
                job: id,
                events_done: events,
                last: true,
            },
            runtime,
        );
        self.track(id, h);
        let h = k.schedule_in(EventKind::JobFinish, Ev::ExecDone(id), runtime);
        self.track(id, h);
    }

    fn data_file(rec: &JobRecord) -> FileInfo {
        let d = &rec.description;
        FileInfo {
            name: rec.profile.output_file_name(&rec.dataset, rec.index, d.job_seed),
            size_bytes: rec.profile.output_bytes(d.events),
            checksum: output_checksum(&rec.profile.name, &rec.dataset, rec.index, d.events, "data"),
        }
    }

    fn tick(&mut self, k: &mut K, id: JobId, events_done: u64, last: bool) {
        let ce_id = self.ce_of(id);
        if let Some(r) = self.ces.get_mut(&ce_id).and_then(|c| c.running_mut(id)) {
            r.events_done = events_done;
        }
        let rec = self.job_mut(id);
        rec.events_done = events_done;
        let phase = if last { "finished" } else { "running" };
        let mut payload = detail!("events_done" => events_done, "phase" => phase);
        if last {
            payload.push(("output_file".into(), Self::data_file(rec).name));
        }
        let wn = rec.wn.clone().unwrap_or_default();
        let site = self.site_of_ce(&ce_id);
        let outbound = self.sites.get(&site).is_none_or(|s| s.outbound);
        let mut d = detail!("job" => id);
        d.extend(payload.iter().cloned());
        k.trace(wn, "tick", d);
        if let Some(b) = self.boss.boss_id_of(id) {
            if outbound {
                let _ = self.boss.apply_tick(b, &payload, k.now());
            } else {
                k.trace("BOSS", "update-dropped", detail!("boss_id" => b, "job" => id));
            }
        }
    }

    fn exec_done(&mut self, k: &mut K, id: JobId) {
        let now = k.now();
        let ce_id = self.ce_of(id);
        if let Some(r) = self.ces.get_mut(&ce_id).and_then(|c| c.running_mut(id)) {
            r.exec_done = true;
        }
        self.sync_ce(&ce_id);
        let rec = self.job_mut(id);
        rec.exec_finished_at = Some(now);
        let d = rec.description.clone();
        let (p, ds, ix) = (rec.profile.name.clone(), rec.dataset.clone(), rec.index);
        let stdout = d.std_output.clone().unwrap_or_else(|| "std.out".into());
        let stderr = d.std_error.clone().unwrap_or_else(|| "std.err".into());
        let mut outs = vec![
            FileInfo {
                checksum: output_checksum(&p, &ds, ix, d.events, "stdout"),
                name: stdout.clone(),
                size_bytes: 1024 + 64 * d.events,
            },
            FileInfo {
                checksum: output_checksum(&p, &ds, ix, d.events, "stderr"),
                name: stderr.clone(),
                size_bytes: 512,
            },
        ];
        for n in &d.output_sandbox {
            if *n != stdout && *n != stderr {
                outs.push(FileInfo {
                    name: n.clone(),
                    size_bytes: 16 * KB,
                    checksum: output_checksum(&p, &ds, ix, d.events, n),
                });
            }
        }
        let data = Self::data_file(rec);
        let wn = rec.wn.clone().unwrap_or_default();
        k.trace(
            wn,
            "exec-done",
            detail!("job" => id, "runtime" => now - rec.exec_started_at.unwrap_or(now), "output" => data.name, "checksum" => hex(data.checksum)),
        );
        match rec.profile.output {
            OutputDestination::Sandbox => {
                outs.push(data);
                rec.output_sandbox = outs;
                self.sandbox_out(k, id);
            }
            OutputDestination::CloseSe => {
                rec.output_sandbox = outs;
                let target = match d.extra_str("OutputSE") {
                    Some(se) => Some(SeId::new(se)),
                    None => self.index.ce(&ce_id).and_then(|c| c.close_ses.first().cloned()),
                };
                let Some(se) = target.filter(|se| self.se_site.contains_key(se)) else {
                    self.fail(k, id, Reason::RegistrationFailed("no output SE".into()));
                    return;
                };
                let bytes = data.size_bytes;
                self.job_mut(id).output_data = Some((
                    data.clone(),
                    Replica {
                        se_id: se.clone(),
                        path: data.name.clone(),
                    },
                ));
                let from = Location::Wn(self.site_of_ce(&ce_id));
                let to = Location::Se(self.se_site[&se].clone());
                self.start_transfer(k, id, Leg::OutputCopy, bytes, from, to);
            }
        }
    }

    fn after_output_copy(&mut self, k: &mut K, id: JobId) {
        let (file, r) = self.job(id).output_data.clone().expect("output copy has data");
        if let Err(e) = self.storage.store(&r.se_id, &r.path, file.size_bytes, file.checksum) {
            k.trace(r.se_id.as_str(), "store-failed", detail!("job" => id, "error" => e));
            let reason = match e {
                DataError::SeFull { .. } => Reason::SeFull,
                other => Reason::RegistrationFailed(other.to_string()),
            };
            self.fail(k, id, reason);
            return;
        }
        let used = self.storage.se(&r.se_id).map_or(0, |s| s.used_bytes());
        self.index.publish_se_usage(&r.se_id, used).expect("SE is published");
        k.trace(
            r.se_id.as_str(),
            "stored",
            detail!("job" => id, "path" => r.path, "bytes" => file.size_bytes, "checksum" => hex(file.checksum)),
        );
        let lfn = Lfn::new(&file.name);
        if let Err(e) = self.catalog.register(&lfn, &r.se_id, &r.path, &self.storage) {
            k.trace(self.catalog.id.as_str(), "register-failed", detail!("job" => id, "lfn" => lfn, "error" => e));
            self.fail(k, id, Reason::RegistrationFailed(e.to_string()));
            return;
        }
        k.trace(self.catalog.id.as_str(), "registered", detail!("job" => id, "lfn" => lfn, "se" => r.se_id));
        self.sandbox_out(k, id);
    }

    fn sandbox_out(&mut self, k: &mut K, id: JobId) {
        let bytes = self.job(id).output_sandbox.iter().map(|f| f.size_bytes).sum();
        let from = Location::Wn(self.site_of_ce(&self.ce_of(id)));
        let to = Location::Host(self.rb_host(id));
        self.start_transfer(k, id, Leg::SandboxOut, bytes, from, to);
    }

    fn after_sandbox_out(&mut self, k: &mut K, id: JobId) {
        let rec = self.job(id);
        let rb = rec.rb_id.clone();
        let outs = rec.output_sandbox.clone();
        let b = self.brokers.get_mut(&rb).expect("broker exists");
        b.release(id);
        b.hold(id, outs);
        self.set_state(k, id, JobState::DoneOk);
        self.finish(k, id);
    }

    /// Frees the WN and closes the BOSS record.
    fn finish(&mut self, k: &mut K, id: JobId) {
        for h in self.pending.remove(&id).unwrap_or_default() {
            k.cancel(h);
        }
        let rec = self.job(id);
        let state = rec.state;
        if let Some(ce_id) = rec.matched_ce.clone() {
            let ce = self.ces.get_mut(&ce_id).expect("CE exists");
            let was_running = ce.release(id).is_some();
            ce.remove_queued(id);
            if was_running {
                let outcomes = ce.dispatch(&self.vo, k.now());
                self.sync_ce(&ce_id);
                self.apply_dispatch(k, &ce_id, outcomes);
            } else {
                self.sync_ce(&ce_id);
            }
        }
        if let Some(b) = self.boss.boss_id_of(id) {
            let rec = self.job(id);
            let (exit, out) = match state {
                JobState::DoneOk => (0, Some(Self::data_file(rec).name)),
                JobState::DoneFailed => (1, None),
                _ => (2, None),
            };
            let _ = self.boss.finalize(b, exit, rec.events_done, out.as_deref(), k.now());
            k.trace("BOSS", "final", detail!("boss_id" => b, "job" => id, "exit_status" => exit));
        }
    }

    fn abort(&mut self, k: &mut K, id: JobId, reason: Reason) {
        let rec = self.job_mut(id);
        rec.reason = Some(reason);
        let rb = rec.rb_id.clone();
        self.brokers.get_mut(&rb).expect("broker exists").release(id);
        self.set_state(k, id, JobState::Aborted);
        self.finish(k, id);
    }

    pub(crate) fn fail(&mut self, k: &mut K, id: JobId, reason: Reason) {
        if self.job(id).state != JobState::Running {
            if !self.job(id).state.is_terminal() {
                self.abort(k, id, reason);
            }
            return;
        }
        let rec = self.job_mut(id);
        rec.reason = Some(reason);
        let rb = rec.rb_id.clone();
        self.brokers.get_mut(&rb).expect("broker exists").release(id);
        self.set_state(k, id, JobState::DoneFailed);
        self.finish(k, id);
    }

    // ---- user-driven operations ----

    pub(crate) fn get_output(&mut self, k: &mut K, id: JobId) -> Result<Vec<FileInfo>, BrokerError> {
        let rec = self.jobs.get(&id).ok_or(BrokerError::UnknownJob(id))?;
        match rec.state {
            JobState::DoneOk | JobState::DoneFailed => {}
            JobState::Cleared => return Err(BrokerError::AlreadyCleared(id)),
            _ => return Err(BrokerError::NotDone(id)),
        }
        let rb = rec.rb_id.clone();
        let files = self.brokers.get_mut(&rb).expect("broker exists").release(id);
        self.set_state(k, id, JobState::Cleared);
        Ok(files)
    }

    pub(crate) fn crash_wn(&mut self, k: &mut K, ce: &CeId) -> Result<Option<JobId>, FabricError> {
        let c = self.ces.get(ce).ok_or_else(|| FabricError::UnknownCe(ce.clone()))?;
        let running: Vec<JobId> = c.running_jobs().map(|r| r.job).collect();
        if running.is_empty() {
            k.trace(ce.as_str(), "wn-crash", detail!("job" => "-"));
            return Ok(None);
        }
        let victim = running[k.rng("fabric").random_range(0..running.len())];
        k.trace(ce.as_str(), "wn-crash", detail!("job" => victim));
        self.fail(k, victim, Reason::WnCrash);
        Ok(Some(victim))
    }

    pub(crate) fn replicate(&mut self, k: &mut K, lfn: &Lfn, to: &SeId) -> Result<Option<SimTime>, DataError> {
        let entry = self.catalog.entry(lfn).ok_or_else(|| DataError::UnknownLfn(lfn.clone()))?;
        let dest = self.storage.se(to).ok_or_else(|| DataError::UnknownSe(to.clone()))?;
        if self.catalog.holds_on(lfn, to) {
            return Ok(None);
        }
        if !dest.has_room(entry.size_bytes) {
            return Err(DataError::SeFull {
                se: to.clone(),
                needed: entry.size_bytes,
                free: dest.free_bytes(),
            });
        }
        let to_loc = Location::Se(self.se_site[to].clone());
        let best = entry
            .replicas
            .iter()
            .filter_map(|r| {
                let from = Location::Se(self.se_site.get(&r.se_id)?.clone());
                let dt = self.network.transfer_time(entry.size_bytes, &from, &to_loc).ok()?;
                Some((dt, r))
            })
            .min_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(b.1)));
        let Some((dt, src)) = best else {
            return Err(DataError::NoRoute {
                lfn: lfn.clone(),
                se: to.clone(),
            });
        };
        self.next_replication += 1;
        let rid = self.next_replication;
        let rep = Replication {
            lfn: lfn.clone(),
            path: src.path.clone(),
            to: to.clone(),
            size: entry.size_bytes,
            checksum: entry.checksum,
        };
        k.trace(
            self.catalog.id.as_str(),
            "replicate",
            detail!("lfn" => lfn, "from" => src.se_id, "to" => to, "bytes" => rep.size, "duration" => dt),
        );
        self.replications.insert(rid, rep);
        k.schedule_in(EventKind::TransferComplete, Ev::Replicated(rid), dt);
        Ok(Some(k.now() + dt))
    }

    fn after_replication(&mut self, k: &mut K, rid: u64) {
        let Some(r) = self.replications.remove(&rid) else { return };
        let res = self
            .storage
            .store(&r.to, &r.path, r.size, r.checksum)
            .and_then(|_| self.catalog.register(&r.lfn, &r.to, &r.path, &self.storage));
        match res {
            Ok(()) => {
                let used = self.storage.se(&r.to).map_or(0, |s| s.used_bytes());
                self.index.publish_se_usage(&r.to, used).expect("SE is published");
                k.trace(
                    self.catalog.id.as_str(),
                    "replicated",
                    detail!("lfn" => r.lfn, "se" => r.to, "checksum" => hex(r.checksum)),
                );
            }
            Err(e) => k.trace(
                self.catalog.id.as_str(),
                "replicate-failed",
                detail!("lfn" => r.lfn, "se" => r.to, "error" => e),
            ),
        }
    }

    pub(crate) fn upload(&mut self, k: &mut K, lfn: &Lfn, se: &SeId, size: u64) -> Result<u64, DataError> {
        let checksum = fnv1a64([b"upload".as_slice(), lfn.as_str().as_bytes(), &size.to_le_bytes()]);
        let path = lfn.as_str().to_string();
        self.storage.store(se, &path, size, checksum)?;
        self.catalog.register(lfn, se, &path, &self.storage)?;
        let used = self.storage.se(se).map_or(0, |s| s.used_bytes());
        self.index.publish_se_usage(se, used).expect("SE is published");
        k.trace(
            self.catalog.id.as_str(),
            "registered",
            detail!("lfn" => lfn, "se" => se, "bytes" => size, "checksum" => hex(checksum)),
        );
        Ok(checksum)
    }
}
