use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const FLAVIA: &str = "/C=IT/O=INFN/OU=Personal Certificate/L=Pisa/CN=Flavia Donno";

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn jdl(name: &str) -> String {
    root().join("crates/core/tests/fixtures/jdl").join(name).display().to_string()
}

struct Session {
    dir: TempDir,
}

impl Session {
    fn new() -> Self {
        Session {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self) -> PathBuf {
        self.dir.path().join("s")
    }

    fn raw(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_worldgrid"))
            .current_dir(self.dir.path())
            .arg("--session")
            .arg(self.path())
            .args(args)
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let o = self.raw(args);
        assert!(
            o.status.success(),
            "{args:?} exited {:?}: {}",
            o.status.code(),
            String::from_utf8_lossy(&o.stderr)
        );
        String::from_utf8(o.stdout).unwrap()
    }

    fn code(&self, args: &[&str]) -> i32 {
        let o = self.raw(args);
        if !o.status.success() {
            let err = String::from_utf8_lossy(&o.stderr);
            assert!(!err.trim().is_empty(), "{args:?} failed silently");
        }
        o.status.code().unwrap()
    }

    fn with_proxy(self) -> Self {
        self.ok(&["proxy", "init", "--dn", FLAVIA, "--vo", "datatag"]);
        self
    }
}

#[test]
fn submit_run_status() {
    let s = Session::new().with_proxy();
    assert_eq!(s.ok(&["submit", &jdl("atlas_100.jdl"), "--rb", "rb_pisa"]).trim(), "1");
    let out = s.ok(&["run", "--until", "20000"]);
    assert_eq!(out.lines().last(), Some("time 20000.000"));
    let status = s.ok(&["status", "1"]);
    assert!(status.starts_with("job_id\tstate\t"), "{status}");
    assert_eq!(status.lines().nth(1).unwrap().split('\t').nth(1), Some("DONE_OK"));
    let dest = s.dir.path().join("out");
    let listing = s.ok(&["get-output", "1", "--dest", dest.to_str().unwrap()]);
    assert_eq!(listing.lines().count(), 5);
    assert!(dest.join("atlsim.out").exists());
    assert_eq!(s.code(&["get-output", "1"]), 5);
    assert_eq!(s.code(&["assert", "state", "1", "CLEARED"]), 0);
}

#[test]
fn submitted_jdl_is_kept_in_the_session() {
    let s = Session::new().with_proxy();
    let tmp = s.dir.path().join("job.jdl");
    fs::copy(jdl("cmkin_demo_1.jdl"), &tmp).unwrap();
    s.ok(&["submit", tmp.to_str().unwrap(), "--rb", "rb_pisa"]);
    fs::remove_file(&tmp).unwrap();
    s.ok(&["run"]);
    assert_eq!(s.code(&["assert", "count", "DONE_OK", "1"]), 0);
    let journal = s.ok(&["session", "show"]);
    assert!(journal.contains("cmd submit jdl/0002.jdl --rb rb_pisa"), "{journal}");
}

#[test]
fn require_narrows_the_match() {
    let s = Session::new().with_proxy();
    s.ok(&[
        "submit",
        &jdl("atlas_100.jdl"),
        "--rb",
        "rb_pisa",
        "--require",
        r#"other.CEId == "ce_lisbon""#,
    ]);
    s.ok(&["run"]);
    let status = s.ok(&["status", "1"]);
    assert_eq!(status.lines().nth(1).unwrap().split('\t').nth(3), Some("ce_lisbon"));
}

#[test]
fn report_is_idempotent() {
    let s = Session::new().with_proxy();
    s.ok(&["submit", &jdl("cmkin_demo_1.jdl"), "--rb", "rb_pisa"]);
    s.ok(&["run"]);
    let a = s.ok(&["report"]);
    assert_eq!(a, s.ok(&["report"]));
    assert!(a.contains("DONE_OK\t1"), "{a}");
}

#[test]
fn replica_catalogue_commands() {
    let s = Session::new();
    s.ok(&["rc", "register", "lfn:demo_22.ntpl", "--se", "se_bologna", "--size", "12 MB"]);
    s.ok(&["rc", "replicate", "lfn:demo_22.ntpl", "--to", "se_padova"]);
    s.ok(&["run"]);
    let table = s.ok(&["rc", "lookup", "lfn:demo_22.ntpl"]);
    let lines: Vec<_> = table.lines().collect();
    assert_eq!(lines[0], "lfn\tse\tsite\tpath\tsize_bytes\tchecksum");
    assert_eq!(lines.len(), 3, "{table}");
    assert!(lines[1].contains("se_bologna") && lines[2].contains("se_padova"));
    assert_eq!(s.code(&["rc", "lookup", "lfn:nothing"]), 4);
}

#[test]
fn production_through_the_cli() {
    let s = Session::new().with_proxy();
    let id = s.ok(&[
        "refdb", "request", "--dataset", "demo", "--step", "CMKIN", "--events", "1000", "--per-job", "250", "--rb",
        "rb_pisa",
    ]);
    assert_eq!(id.trim(), "1");
    s.ok(&["impala", "declare", "1"]);
    s.ok(&["impala", "create", "1"]);
    s.ok(&["impala", "submit", "1"]);
    assert_eq!(s.code(&["refdb", "summary", "1"]), 5);
    s.ok(&["run"]);
    assert!(s.ok(&["refdb", "summary", "1"]).contains("COMPLETE"));
    let rows = s.ok(&["boss", "query", "--status", "finished", "--type", "CMKIN"]);
    assert_eq!(rows.lines().count(), 5, "{rows}");
}

#[test]
fn exit_codes() {
    let s = Session::new();
    assert_eq!(s.code(&["no-such-command"]), 2);
    let bad = s.dir.path().join("bad.topo");
    fs::write(&bad, "[ce ce_x]\nsite = nowhere\n").unwrap();
    assert_eq!(s.code(&["topo", "validate", bad.to_str().unwrap()]), 3);
    assert_eq!(s.code(&["status", "42"]), 4);
    assert_eq!(s.code(&["proxy", "init", "--dn", "/CN=Mallory", "--vo", "datatag"]), 6);
    assert_eq!(s.code(&["submit", &jdl("minimal.jdl"), "--rb", "rb_pisa"]), 6);
    let s = s.with_proxy();
    let broken = s.dir.path().join("broken.jdl");
    fs::write(&broken, "Executable = ;").unwrap();
    assert_eq!(s.code(&["submit", broken.to_str().unwrap(), "--rb", "rb_pisa"]), 7);
    assert_eq!(s.code(&["rc", "register", "lfn:huge", "--se", "se_lisbon", "--size", "100 TB"]), 8);
    assert_eq!(s.code(&["assert", "count", "DONE_OK", "3"]), 9);
    assert_eq!(s.code(&["submit", "missing.jdl", "--rb", "rb_pisa"]), 10);
    assert_eq!(s.code(&["run", "--until", "10"]), 0);
    assert_eq!(s.code(&["run", "--until", "5"]), 5);
}

#[test]
fn failed_commands_are_not_journaled() {
    let s = Session::new().with_proxy();
    let before = s.ok(&["session", "show"]);
    assert_ne!(s.code(&["submit", &jdl("minimal.jdl"), "--rb", "rb_nowhere"]), 0);
    assert_eq!(before, s.ok(&["session", "show"]));
}

#[test]
fn seed_is_fixed_once_the_session_has_commands() {
    let s = Session::new();
    s.ok(&["--seed", "9", "session", "show"]);
    assert!(s.ok(&["session", "show"]).starts_with("seed 9\n"));
    s.ok(&["--seed", "9", "fault", "transfer-p", "0.5"]);
    assert_eq!(s.code(&["--seed", "3", "report"]), 5);
    s.ok(&["session", "reset"]);
    assert!(s.ok(&["--seed", "3", "session", "show"]).starts_with("seed 3\n"));
}

#[test]
fn topo_load_starts_a_session_on_a_copy() {
    let s = Session::new();
    let topo = s.dir.path().join("grid.topo");
    fs::copy(root().join("crates/core/data/worldgrid.toposample"), &topo).unwrap();
    s.ok(&["--seed", "4", "topo", "load", topo.to_str().unwrap()]);
    fs::remove_file(&topo).unwrap();
    let shown = s.ok(&["topo", "show"]);
    assert!(shown.contains("EDG\t13") && shown.contains("GLUE\t3"), "{shown}");
}

#[test]
fn scenario_and_sweep() {
    let scn = root().join("scenarios/authorization.scn");
    let s = Session::new();
    assert!(s.ok(&["scenario", "check", scn.to_str().unwrap()]).contains("steps"));
    let out = s.ok(&["scenario", "run", scn.to_str().unwrap()]);
    assert!(out.contains("AuthorizationDenied(ProxyExpired)"), "{out}");
    let table = s.ok(&["sweep", scn.to_str().unwrap(), "--seeds", "3"]);
    let rows: Vec<_> = table.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[1..].iter().all(|r| r.split('\t').nth(1) == Some("8")), "{table}");
}

#[test]
fn scenario_errors_carry_the_line() {
    let s = Session::new();
    let scn = s.dir.path().join("bad.scn");
    fs::write(&scn, "at 10: report\nat 5: report\n").unwrap();
    let o = s.raw(&["scenario", "run", scn.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.scn:2:"));
    fs::write(&scn, "at 0: assert count DONE_OK 1\n").unwrap();
    assert_eq!(s.code(&["scenario", "run", scn.to_str().unwrap()]), 9);
}
