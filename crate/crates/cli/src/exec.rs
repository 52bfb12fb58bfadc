//! Applies commands to a simulator and renders their output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use worldgrid_core::broker::JobState;
use worldgrid_core::fabric::{FailureConfig, Region};
use worldgrid_core::grid::Grid;
use worldgrid_core::ids::{CeId, JobId, Lfn, RbId, SeId, SiteId, UserDn, VoName};
use worldgrid_core::infosys::SchemaFlavor;
use worldgrid_core::jdl::{parse_expr, parse_file};
use worldgrid_core::production::{BossDb, BossFilter, BossStatus, RequestSpec};
use worldgrid_core::topology::TopologyConfig;
use worldgrid_core::vomgmt::Proxy;

use crate::commands::*;
use crate::error::CliError;

pub type Result<T> = std::result::Result<T, CliError>;

/// A simulator plus the user-side state the commands need.
pub struct Sim {
    pub grid: Grid,
    pub topology: TopologyConfig,
    pub proxy: Option<Proxy>,
    /// Relative JDL and output paths resolve against this directory.
    pub base_dir: PathBuf,
    /// False while replaying a journal: no files are written.
    pub write_files: bool,
}

pub fn read_topology(path: &Path) -> Result<TopologyConfig> {
    let text = fs::read_to_string(path).map_err(CliError::io(format!("reading {}", path.display())))?;
    TopologyConfig::parse(&text).map_err(|e| CliError::Config(e.with_path(path.display().to_string())))
}

fn parse_state(s: &str) -> Result<JobState> {
    JobState::ALL
        .into_iter()
        .find(|st| st.as_str().eq_ignore_ascii_case(s))
        .ok_or_else(|| CliError::Usage(format!("unknown job state `{s}`")))
}

fn job_id(s: &str) -> Result<JobId> {
    s.parse().map(JobId).map_err(|_| CliError::Usage(format!("bad job id `{s}`")))
}

impl Sim {
    pub fn new(topology: TopologyConfig, seed: u64) -> Result<Sim> {
        Ok(Sim {
            grid: Grid::new(&topology, seed)?,
            topology,
            proxy: None,
            base_dir: PathBuf::from("."),
            write_files: true,
        })
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn proxy(&self) -> Result<&Proxy> {
        self.proxy
            .as_ref()
            .ok_or_else(|| CliError::Auth("no proxy; run `proxy init` first".into()))
    }

    /// Executes one command, appending its printable output to `out`.
    pub fn exec(&mut self, cmd: &Cmd, out: &mut String) -> Result<()> {
        match cmd {
            Cmd::Topo { op } => self.topo(op, out),
            Cmd::Vo { op } => self.vo(op, out),
            Cmd::Proxy { op } => self.proxy_cmd(op, out),
            Cmd::Submit(args) => {
                let text = self.jdl_text(args)?;
                let p = self.proxy()?.clone();
                let id = self.grid.submit(&RbId::new(&args.rb), &text, &p)?;
                writeln!(out, "{id}").unwrap();
                Ok(())
            }
            Cmd::Status { job } => self.status(*job, out),
            Cmd::GetOutput { job, dest } => {
                let files = self.grid.get_output(JobId(*job))?;
                out.push_str("name\tsize_bytes\tchecksum\n");
                for f in &files {
                    writeln!(out, "{}\t{}\t{:016x}", f.name, f.size_bytes, f.checksum).unwrap();
                }
                if let (Some(dir), true) = (dest, self.write_files) {
                    let dir = self.resolve(dir);
                    fs::create_dir_all(&dir).map_err(CliError::io(format!("creating {}", dir.display())))?;
                    for f in &files {
                        let path = dir.join(&f.name);
                        let body = format!("simulated file\nsize_bytes={}\nchecksum={:016x}\n", f.size_bytes, f.checksum);
                        fs::write(&path, body).map_err(CliError::io(format!("writing {}", path.display())))?;
                    }
                }
                Ok(())
            }
            Cmd::Rc { op } => self.rc(op, out),
            Cmd::Refdb { op } => self.refdb(op, out),
            Cmd::Impala { op } => self.impala(op, out),
            Cmd::Boss { op } => {
                match op {
                    BossOp::Dump => out.push_str(&self.grid.boss().dump()),
                    BossOp::Query { status, job_type, dataset } => {
                        let filter = BossFilter {
                            job_type: *job_type,
                            status: status
                                .as_deref()
                                .map(str::parse::<BossStatus>)
                                .transpose()
                                .map_err(CliError::Usage)?,
                            dataset: dataset.clone(),
                            assignment_id: None,
                        };
                        out.push_str(&BossDb::table(&self.grid.boss().query(&filter)));
                    }
                }
                Ok(())
            }
            Cmd::Run { until } => {
                match until {
                    Some(t) if *t < self.grid.now() => {
                        return Err(CliError::State(format!("cannot run back to {t}: time is {}", self.grid.now())))
                    }
                    Some(t) => self.grid.run_until(*t),
                    None => self.grid.run(),
                };
                writeln!(out, "time {}", self.grid.now()).unwrap();
                Ok(())
            }
            Cmd::Report => {
                out.push_str(&self.grid.report().to_string());
                Ok(())
            }
            Cmd::Trace { op: TraceOp::Export { path } } => {
                if self.write_files {
                    let path = self.resolve(path);
                    fs::write(&path, self.grid.trace_text()).map_err(CliError::io(format!("writing {}", path.display())))?;
                }
                Ok(())
            }
            Cmd::Fault { op } => self.fault(op, out),
            Cmd::Assert { op } => self.assert(op),
        }
    }

    fn topo(&mut self, op: &TopoOp, out: &mut String) -> Result<()> {
        match op {
            TopoOp::Validate { path } => {
                let cfg = read_topology(&self.resolve(path))?;
                writeln!(out, "{cfg}").unwrap();
                Ok(())
            }
            TopoOp::Show => {
                let t = &self.topology;
                writeln!(out, "{t}").unwrap();
                out.push_str("flavor\tces\n");
                for f in [SchemaFlavor::Edg, SchemaFlavor::Glue, SchemaFlavor::GlobusOnly] {
                    let n = self.grid.index().ces().filter(|c| c.schema_flavors.contains(&f)).count();
                    writeln!(out, "{f}\t{n}").unwrap();
                }
                out.push_str("\nce\tsite\tregion\tlrms\tflavors\twn_count\tcpu_mhz\tclose_ses\n");
                for c in self.grid.index().ces() {
                    let flavors: Vec<String> = c.schema_flavors.iter().map(|f| f.to_string()).collect();
                    let ses: Vec<&str> = c.close_ses.iter().map(|s| s.as_str()).collect();
                    writeln!(
                        out,
                        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                        c.ce_id,
                        c.site_id,
                        t.region_of(c.site_id.as_str()).map_or("-".into(), |r| r.to_string()),
                        c.lrms,
                        flavors.join(","),
                        c.wn_count,
                        c.cpu_mhz,
                        ses.join(",")
                    )
                    .unwrap();
                }
                Ok(())
            }
            TopoOp::Load { .. } => Err(CliError::Usage(
                "`topo load` starts a new session and is only available on the command line".into(),
            )),
        }
    }

    fn vo(&mut self, op: &VoOp, out: &mut String) -> Result<()> {
        match op {
            VoOp::Sync { site } => {
                let site = site.as_deref().map(SiteId::new);
                self.grid.sync_mapfiles(site.as_ref())?;
            }
            VoOp::Add { vo, dn } => {
                self.grid.add_vo_member(&VoName::new(vo), UserDn::new(dn))?;
            }
            VoOp::Remove { vo, dn } => {
                self.grid.remove_vo_member(&VoName::new(vo), &UserDn::new(dn))?;
            }
            VoOp::Mapfile { site } => {
                let m = self
                    .grid
                    .vo()
                    .mapfile(&SiteId::new(site))
                    .ok_or_else(|| CliError::NotFound(format!("no mapfile for site `{site}`")))?;
                out.push_str(&m.dump());
            }
        }
        Ok(())
    }

    fn proxy_cmd(&mut self, op: &ProxyOp, out: &mut String) -> Result<()> {
        match op {
            ProxyOp::Init { dn, vo, lifetime } => {
                let p = self.grid.create_proxy(&UserDn::new(dn), &VoName::new(vo), *lifetime)?;
                writeln!(out, "proxy for {} in {} valid until {}", p.user_dn, p.vo_name, p.expires_at()).unwrap();
                self.proxy = Some(p);
            }
            ProxyOp::Info => {
                let p = self.proxy()?;
                let left = if p.is_valid_at(self.grid.now()) {
                    (p.expires_at() - self.grid.now()).to_string()
                } else {
                    "expired".into()
                };
                out.push_str("dn\tvo\tissued_at\texpires_at\ttime_left\n");
                writeln!(out, "{}\t{}\t{}\t{}\t{left}", p.user_dn, p.vo_name, p.issued_at, p.expires_at()).unwrap();
            }
        }
        Ok(())
    }

    /// The JDL file's text, with the extra requirement folded in.
    pub fn jdl_text(&self, args: &SubmitArgs) -> Result<String> {
        let path = self.resolve(&args.jdl);
        let text = fs::read_to_string(&path).map_err(CliError::io(format!("reading {}", path.display())))?;
        let Some(extra) = &args.require else { return Ok(text) };
        let extra = parse_expr(extra)?;
        let mut file = parse_file(&text)?;
        match file.assignments.iter_mut().find(|a| a.name.eq_ignore_ascii_case("Requirements")) {
            Some(a) => a.value = a.value.clone().and(extra),
            None => file.push("Requirements", extra),
        }
        Ok(file.to_string())
    }

    fn status(&self, job: Option<u64>, out: &mut String) -> Result<()> {
        out.push_str("job_id\tstate\trb\tce\twn\tevents_done\tsubmitted_at\tlast_change\treason\n");
        let jobs: Vec<_> = match job {
            Some(id) => vec![self.grid.job(JobId(id)).ok_or_else(|| CliError::NotFound(format!("unknown job {id}")))?],
            None => self.grid.jobs().collect(),
        };
        for j in jobs {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                j.job_id,
                j.state,
                j.rb_id,
                j.matched_ce.as_ref().map_or("-", |c| c.as_str()),
                j.wn.as_deref().unwrap_or("-"),
                j.events_done,
                j.submitted_at(),
                j.history.last().map(|h| h.1).unwrap_or_default(),
                j.reason.as_ref().map_or("-".into(), |r| r.to_string()),
            )
            .unwrap();
        }
        Ok(())
    }

    fn rc(&mut self, op: &RcOp, out: &mut String) -> Result<()> {
        match op {
            RcOp::Register { lfn, se, size } => {
                let sum = self.grid.upload(&Lfn::new(lfn), &SeId::new(se), *size)?;
                writeln!(out, "{}\t{se}\t{size}\t{sum:016x}", Lfn::new(lfn)).unwrap();
            }
            RcOp::Lookup { lfn } => {
                let lfn = Lfn::new(lfn);
                let e = self
                    .grid
                    .catalog()
                    .entry(&lfn)
                    .ok_or_else(|| CliError::NotFound(format!("unknown logical file `{lfn}`")))?;
                out.push_str("lfn\tse\tsite\tpath\tsize_bytes\tchecksum\n");
                for r in &e.replicas {
                    let site = self.grid.site_of_se(&r.se_id).map_or("-", |s| s.as_str());
                    writeln!(out, "{lfn}\t{}\t{site}\t{}\t{}\t{:016x}", r.se_id, r.path, e.size_bytes, e.checksum).unwrap();
                }
            }
            RcOp::Replicate { lfn, to } => match self.grid.replicate(&Lfn::new(lfn), &SeId::new(to))? {
                Some(t) => writeln!(out, "replica of {} on {to} at {t}", Lfn::new(lfn)).unwrap(),
                None => writeln!(out, "{to} already holds {}", Lfn::new(lfn)).unwrap(),
            },
            RcOp::List => out.push_str(&self.grid.catalog().dump()),
        }
        Ok(())
    }

    fn refdb(&mut self, op: &RefdbOp, out: &mut String) -> Result<()> {
        match op {
            RefdbOp::Request {
                dataset,
                step,
                events,
                per_job,
                rb,
                se,
                vo,
            } => {
                let id = self.grid.refdb_request(RequestSpec {
                    dataset: dataset.clone(),
                    step: *step,
                    total_events: *events,
                    events_per_job: *per_job,
                    rb_id: RbId::new(rb),
                    default_se: se.as_deref().map(SeId::new),
                    vo: VoName::new(vo),
                })?;
                writeln!(out, "{id}").unwrap();
            }
            RefdbOp::Summary { id } => {
                let (status, s) = self.grid.refdb_summary(*id)?;
                out.push_str("assignment_id\tstatus\tjobs_ok\tjobs_failed\tevents_done\tlfns\n");
                writeln!(
                    out,
                    "{id}\t{status}\t{}\t{}\t{}\t{}",
                    s.jobs_ok,
                    s.jobs_failed,
                    s.total_events_done,
                    s.lfns.join(",")
                )
                .unwrap();
            }
            RefdbOp::Dump => out.push_str(&self.grid.refdb().dump()),
        }
        Ok(())
    }

    fn impala(&mut self, op: &ImpalaOp, out: &mut String) -> Result<()> {
        match op {
            ImpalaOp::Declare { id } => {
                let ws = self.grid.impala_declare(*id)?;
                let ev: Vec<String> = ws.job_events.iter().map(u64::to_string).collect();
                writeln!(out, "assignment {id}: {} jobs ({})", ws.job_count(), ev.join(",")).unwrap();
            }
            ImpalaOp::Create { id } => {
                let n = self.grid.impala_create(*id)?.len();
                writeln!(out, "assignment {id}: {n} JDLs").unwrap();
            }
            ImpalaOp::Submit { id } => {
                let p = self.proxy()?.clone();
                let ids = self.grid.impala_submit(*id, &p)?;
                out.push_str("boss_id\tjob_id\n");
                for b in ids {
                    let r = self.grid.boss().get(b).expect("just registered");
                    writeln!(out, "{b}\t{}", r.scheduler_job_id).unwrap();
                }
            }
        }
        Ok(())
    }

    fn fault(&mut self, op: &FaultOp, out: &mut String) -> Result<()> {
        match op {
            FaultOp::Crash { ce } => match self.grid.inject_wn_crash(&CeId::new(ce))? {
                Some(j) => writeln!(out, "job {j} lost its worker node").unwrap(),
                None => writeln!(out, "no job running on {ce}").unwrap(),
            },
            FaultOp::TransferP { p } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(CliError::Usage(format!("probability {p} outside [0, 1]")));
                }
                self.grid.set_failures(FailureConfig { transfer_failure_p: *p });
            }
            FaultOp::Outbound { site, state } => {
                self.grid.set_outbound(&SiteId::new(site), matches!(state, OnOff::On))?;
            }
        }
        Ok(())
    }

    fn assert(&self, op: &AssertOp) -> Result<()> {
        let fail = |msg: String| Err(CliError::Assert(msg));
        match op {
            AssertOp::State { job, state } => {
                let want = parse_state(state)?;
                if job == "all" {
                    if let Some(j) = self.grid.jobs().find(|j| j.state != want) {
                        return fail(format!("job {} is {}, expected {want}", j.job_id, j.state));
                    }
                } else {
                    let got = self.grid.job_state(job_id(job)?)?;
                    if got != want {
                        return fail(format!("job {job} is {got}, expected {want}"));
                    }
                }
            }
            AssertOp::Count { state, n } => {
                let want = parse_state(state)?;
                let got = self.grid.jobs().filter(|j| j.state == want).count();
                if got != *n {
                    return fail(format!("{got} jobs are {want}, expected {n}"));
                }
            }
            AssertOp::Regions => {
                let r = self.grid.report();
                if r.ran_in(Region::Eu) == 0 || r.ran_in(Region::Us) == 0 {
                    return fail(format!(
                        "jobs ran in EU: {}, US: {}",
                        r.ran_in(Region::Eu),
                        r.ran_in(Region::Us)
                    ));
                }
            }
            AssertOp::Refdb { id, status } => {
                let got = self.grid.refdb().get(*id)?.status.to_string();
                if !got.eq_ignore_ascii_case(status) {
                    return fail(format!("assignment {id} is {got}, expected {status}"));
                }
            }
            AssertOp::Boss { status, n } => {
                let s: BossStatus = status.parse().map_err(CliError::Usage)?;
                let got = self.grid.boss().records().filter(|r| r.status == s).count();
                if got != *n {
                    return fail(format!("{got} BOSS rows are {s}, expected {n}"));
                }
            }
        }
        Ok(())
    }
}
