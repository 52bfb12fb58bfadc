use worldgrid_core::broker::{BrokerError, JobState, Reason};
use worldgrid_core::datagrid::DataError;
use worldgrid_core::fabric::{FailureConfig, MB};
use worldgrid_core::grid::Grid;
use worldgrid_core::ids::{CeId, JobId, Lfn, RbId, SeId, SiteId, UserDn, VoName};
use worldgrid_core::production::{BossStatus, RequestSpec, RequestStatus, Step};
use worldgrid_core::vomgmt::{Denial, Proxy, VoError};
use worldgrid_core::SimTime;

const FLAVIA: &str = "/C=IT/O=INFN/OU=Personal Certificate/L=Pisa/CN=Flavia Donno";

fn proxy(g: &Grid) -> Proxy {
    g.create_proxy(&UserDn::new(FLAVIA), &VoName::new("datatag"), None).unwrap()
}

fn jdl(exe: &str, events: u64, extra: &str) -> String {
    format!(
        "Executable = \"{exe}.sh\"; VirtualOrganisation = \"datatag\"; \
         Requirements = Member(\"CMS\", other.RunTimeEnvironment); Events = {events}; {extra}"
    )
}

fn pinned(exe: &str, events: u64, ce: &str) -> String {
    format!(
        "Executable = \"{exe}.sh\"; VirtualOrganisation = \"datatag\"; \
         Requirements = other.CEId == \"{ce}\"; Events = {events};"
    )
}

fn rb(id: &str) -> RbId {
    RbId::new(id)
}

fn submit(g: &mut Grid, text: &str) -> JobId {
    let p = proxy(g);
    g.submit(&rb("rb_pisa"), text, &p).unwrap()
}

#[test]
fn atlas_job_runs_to_done_and_returns_its_data() {
    let mut g = Grid::worldgrid(1);
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/jdl/atlas_100.jdl")).unwrap();
    let id = submit(&mut g, &text);
    g.run_until(SimTime::from_secs(20_000));
    let j = g.job(id).unwrap();
    assert_eq!(j.state, JobState::DoneOk, "{:?}", j.reason);
    let ce = g.ce(j.matched_ce.as_ref().unwrap()).unwrap();
    let expect = SimTime::from_secs_f64(100.0 * 150.0 * 1000.0 / f64::from(ce.cpu_mhz));
    assert_eq!(j.runtime(), Some(expect));
    assert_eq!(j.events_done, 100);
    assert_eq!(g.catalog().entries().count(), 0);
    let files = g.get_output(id).unwrap();
    let names: Vec<_> = files.iter().map(|f| f.name.as_str()).collect();
    assert_eq!(names, ["atlsim.out", "atlsim.err", "atlas.log", "atlval_0.zebra"]);
    assert_eq!(g.job_state(id).unwrap(), JobState::Cleared);
    assert!(matches!(g.get_output(id), Err(BrokerError::AlreadyCleared(_))));
}

#[test]
fn output_before_done_is_refused() {
    let mut g = Grid::worldgrid(1);
    let id = submit(&mut g, &jdl("atlsim", 1, ""));
    assert!(matches!(g.get_output(id), Err(BrokerError::NotDone(_))));
    assert!(matches!(g.get_output(JobId(99)), Err(BrokerError::UnknownJob(_))));
}

#[test]
fn cmkin_output_lands_on_the_close_se() {
    let mut g = Grid::worldgrid(3);
    let id = submit(&mut g, &jdl("cmkin", 250, "Dataset = \"demo\"; JobIndex = 1;"));
    g.run();
    let j = g.job(id).unwrap();
    assert_eq!(j.state, JobState::DoneOk);
    let ce = g.index().ce(j.matched_ce.as_ref().unwrap()).unwrap();
    let reps = g.catalog().lookup(&Lfn::new("demo_1.ntpl"));
    assert_eq!(reps.len(), 1);
    assert_eq!(reps[0].se_id, ce.close_ses[0]);
    assert_eq!(g.catalog().entry(&Lfn::new("demo_1.ntpl")).unwrap().size_bytes, 250 * 50 * 1024);
    assert_eq!(j.runtime().unwrap(), SimTime::from_secs_f64(125.0 * 1000.0 / f64::from(ce.cpu_mhz)));
}

#[test]
fn full_output_se_fails_the_job() {
    let mut g = Grid::worldgrid(1);
    let se = SeId::new("se_bristol");
    let cap = g.storage().se(&se).unwrap().capacity_bytes;
    g.upload(&Lfn::new("filler.dat"), &se, cap - 1000).unwrap();
    let id = submit(&mut g, &jdl("cmkin", 250, "OutputSE = \"se_bristol\";"));
    g.run();
    let j = g.job(id).unwrap();
    assert_eq!(j.state, JobState::DoneFailed);
    assert_eq!(j.reason, Some(Reason::SeFull));
    assert!(g.ces().all(|c| c.free_wn_count() == c.wn_count as usize));
}

#[test]
fn replicate_cmsim_sized_file_takes_45_1_s() {
    let mut g = Grid::worldgrid(1);
    let lfn = Lfn::new("demo_1_2000.fz");
    let size = 250 * g.profile("cmsim").unwrap().output_bytes_per_event;
    let sum = g.upload(&lfn, &SeId::new("se_milano"), size).unwrap();
    let done = g.replicate(&lfn, &SeId::new("se_padova")).unwrap();
    assert_eq!(done, Some(SimTime::from_millis(45_100)));
    g.run();
    let e = g.catalog().entry(&lfn).unwrap();
    assert_eq!(e.replicas.len(), 2);
    assert_eq!(e.checksum, sum);
    assert_eq!(g.storage().file(&SeId::new("se_padova"), lfn.as_str()).unwrap().checksum, sum);
    assert_eq!(g.replicate(&lfn, &SeId::new("se_padova")).unwrap(), None);
    assert!(matches!(
        g.replicate(&Lfn::new("nope"), &SeId::new("se_padova")),
        Err(DataError::UnknownLfn(_))
    ));
}

#[test]
fn cmsim_stages_its_input_from_the_close_se() {
    let mut g = Grid::worldgrid(1);
    let lfn = Lfn::new("demo_22.ntpl");
    let sum = g.upload(&lfn, &SeId::new("se_padova"), 12 * MB + MB / 2).unwrap();
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/jdl/cmsim_demo_22.jdl")).unwrap();
    let id = submit(&mut g, &text);
    g.run();
    let j = g.job(id).unwrap();
    assert_eq!(j.state, JobState::DoneOk, "{:?}", j.reason);
    assert_eq!(j.matched_ce, Some(CeId::new("ce_padova")));
    assert_eq!(j.staged.len(), 1);
    assert_eq!(j.staged[0].checksum, sum);
    assert!(g.catalog().entry(&Lfn::new("demo_22_2021.fz")).is_some());
}

#[test]
fn no_matching_ce_aborts() {
    let mut g = Grid::worldgrid(1);
    let id = submit(&mut g, &pinned("atlsim", 1, "ce_nowhere"));
    g.run();
    let j = g.job(id).unwrap();
    assert_eq!(j.state, JobState::Aborted);
    assert_eq!(j.reason, Some(Reason::NoMatchingResources));
}

#[test]
fn condor_ce_is_invisible_to_edg() {
    let mut g = Grid::worldgrid(1);
    let id = submit(&mut g, &pinned("atlsim", 1, "ce_batavia"));
    g.run();
    assert_eq!(g.job(id).unwrap().reason, Some(Reason::NoMatchingResources));
}

#[test]
fn proxy_expiring_in_the_queue_is_denied_at_dispatch() {
    let mut g = Grid::worldgrid(1);
    let long = proxy(&g);
    for _ in 0..8 {
        g.submit(&rb("rb_pisa"), &pinned("cmkin", 20, "ce_bristol"), &long).unwrap();
    }
    let short = g
        .create_proxy(&UserDn::new(FLAVIA), &VoName::new("datatag"), Some(SimTime::from_secs(1)))
        .unwrap();
    let id = g.submit(&rb("rb_pisa"), &pinned("cmkin", 20, "ce_bristol"), &short).unwrap();
    g.run();
    let j = g.job(id).unwrap();
    assert_eq!(j.state, JobState::Aborted);
    assert_eq!(j.reason, Some(Reason::AuthorizationDenied(Denial::ProxyExpired)));
    let queued = j.entered_at(JobState::Scheduled).unwrap();
    let aborted = j.entered_at(JobState::Aborted).unwrap();
    assert!(aborted - queued >= SimTime::from_secs(10), "{queued} -> {aborted}");
}

#[test]
fn unknown_user_gets_no_proxy() {
    let g = Grid::worldgrid(1);
    assert!(matches!(
        g.create_proxy(&UserDn::new("/CN=Mallory"), &VoName::new("datatag"), None),
        Err(VoError::NotAVoMember { .. })
    ));
}

#[test]
fn removed_member_keeps_access_until_the_mapfile_sync() {
    let mut g = Grid::worldgrid(1);
    let p = proxy(&g);
    g.remove_vo_member(&VoName::new("datatag"), &UserDn::new(FLAVIA)).unwrap();
    let stale = g.submit(&rb("rb_pisa"), &pinned("atlsim", 1, "ce_padova"), &p).unwrap();
    g.run();
    assert_eq!(g.job_state(stale).unwrap(), JobState::DoneOk);
    g.sync_mapfiles(Some(&SiteId::new("padova"))).unwrap();
    let id = g.submit(&rb("rb_pisa"), &pinned("atlsim", 1, "ce_padova"), &p).unwrap();
    g.run();
    assert_eq!(g.job(id).unwrap().reason, Some(Reason::NoMatchingResources));
}

#[test]
fn wn_crash_fails_the_running_job() {
    let mut g = Grid::worldgrid(1);
    let id = submit(&mut g, &pinned("atlsim", 10, "ce_padova"));
    g.run_until(SimTime::from_secs(100));
    assert_eq!(g.job_state(id).unwrap(), JobState::Running);
    assert_eq!(g.inject_wn_crash(&CeId::new("ce_padova")).unwrap(), Some(id));
    let j = g.job(id).unwrap();
    assert_eq!(j.state, JobState::DoneFailed);
    assert_eq!(j.reason, Some(Reason::WnCrash));
    assert_eq!(g.pending_events(), 0);
    assert_eq!(g.inject_wn_crash(&CeId::new("ce_padova")).unwrap(), None);
}

#[test]
fn failing_transfers_fail_the_job() {
    let mut g = Grid::worldgrid(1);
    g.set_failures(FailureConfig { transfer_failure_p: 1.0 });
    let id = submit(&mut g, &jdl("atlsim", 1, ""));
    g.run();
    assert_eq!(g.job(id).unwrap().reason, Some(Reason::TransferFailed));
}

fn production(g: &mut Grid, step: Step, total: Option<u64>, per: Option<u64>) -> u64 {
    let id = g
        .refdb_request(RequestSpec {
            dataset: "demo".into(),
            step,
            total_events: total,
            events_per_job: per,
            rb_id: rb("rb_pisa"),
            default_se: None,
            vo: VoName::new("datatag"),
        })
        .unwrap();
    g.impala_declare(id).unwrap();
    g.impala_create(id).unwrap();
    let p = proxy(g);
    g.impala_submit(id, &p).unwrap();
    id
}

#[test]
fn cmkin_then_cmsim_pipeline() {
    let mut g = Grid::worldgrid(7);
    let kin = production(&mut g, Step::Cmkin, Some(2000), Some(250));
    g.run();
    let (status, sum) = g.refdb_summary(kin).unwrap();
    assert_eq!(status, RequestStatus::Complete);
    assert_eq!(sum.lfns.len(), 8);
    let sim = production(&mut g, Step::Cmsim, None, None);
    assert!(matches!(
        g.refdb_summary(sim),
        Err(worldgrid_core::production::ProductionError::JobsStillRunning(_))
    ));
    g.run();
    assert_eq!(g.refdb_summary(sim).unwrap().0, RequestStatus::Complete);
    let rows: Vec<_> = g.boss().records().collect();
    assert_eq!(rows.len(), 16);
    for r in &rows {
        assert_eq!((r.status, r.exit_status), (BossStatus::Finished, Some(0)));
        assert_eq!(r.events_done, r.events_declared);
        let j = g.job(r.scheduler_job_id).unwrap();
        assert_eq!(j.state, JobState::DoneOk);
        if r.job_type == Step::Cmsim {
            let ce = g.index().ce(j.matched_ce.as_ref().unwrap()).unwrap();
            let input = Lfn::new(&r.input_file);
            assert!(ce.close_ses.iter().any(|se| g.catalog().holds_on(&input, se)));
            assert_eq!(j.staged[0].checksum, g.catalog().entry(&input).unwrap().checksum);
        }
    }
}

#[test]
fn monitoring_without_outbound_connectivity_only_records_the_end() {
    let mut g = Grid::worldgrid(1);
    let sites: Vec<SiteId> = g.ces().map(|c| c.site_id.clone()).collect();
    for s in &sites {
        g.set_outbound(s, false).unwrap();
    }
    let id = production(&mut g, Step::Cmkin, Some(250), Some(250));
    g.run_until(SimTime::from_secs(5));
    let b = g.refdb().get(id).unwrap().boss_ids[0];
    assert_eq!(g.boss().get(b).unwrap().events_done, 0);
    g.run();
    let r = g.boss().get(b).unwrap();
    assert_eq!((r.status, r.events_done), (BossStatus::Finished, 250));
    assert!(g.trace().iter().any(|e| e.action == "update-dropped"));
}

#[test]
fn expired_proxy_submits_nothing() {
    let mut g = Grid::worldgrid(1);
    let id = g
        .refdb_request(RequestSpec {
            dataset: "demo".into(),
            step: Step::Cmkin,
            total_events: Some(2000),
            events_per_job: Some(250),
            rb_id: rb("rb_pisa"),
            default_se: None,
            vo: VoName::new("datatag"),
        })
        .unwrap();
    g.impala_declare(id).unwrap();
    g.impala_create(id).unwrap();
    let p = g
        .create_proxy(&UserDn::new(FLAVIA), &VoName::new("datatag"), Some(SimTime::from_secs(1)))
        .unwrap();
    g.run_until(SimTime::from_secs(2));
    assert!(g.impala_submit(id, &p).is_err());
    assert_eq!(g.jobs().count(), 0);
    assert_eq!(g.refdb().get(id).unwrap().status, RequestStatus::Created);
}

fn small_run(seed: u64) -> (String, String) {
    let mut g = Grid::worldgrid(seed);
    g.set_failures(FailureConfig { transfer_failure_p: 0.05 });
    production(&mut g, Step::Cmkin, Some(1000), Some(100));
    for i in 0..10 {
        submit(&mut g, &jdl("atlsim", 1 + i, ""));
    }
    g.run_until(SimTime::from_secs(200));
    g.inject_wn_crash(&CeId::new("ce_geneva")).unwrap();
    g.run();
    (g.trace_text(), g.boss().dump())
}

#[test]
fn same_seed_same_bytes() {
    let a = small_run(42);
    assert_eq!(a, small_run(42));
    assert!(a.0.starts_with("time\tactor\taction\tdetail\n"));
}

#[test]
fn report_counts_regions() {
    let mut g = Grid::worldgrid(1);
    for i in 0..40 {
        submit(&mut g, &jdl("cmkin", 10 + i, &format!("JobIndex = {i};")));
    }
    g.run();
    let r = g.report();
    assert_eq!(r.per_state.get(&JobState::DoneOk), Some(&40));
    assert_eq!(r.per_site.values().map(|(_, n)| n).sum::<u64>(), 40);
    assert_eq!(r.to_string(), g.report().to_string());
}
