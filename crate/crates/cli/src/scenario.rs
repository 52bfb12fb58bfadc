//! Scenario files: timed command scripts run against a fresh simulator.
//!
//! ```text
//! # comment
//! seed 7
//! topology default
//! at 0: proxy init --dn "/CN=someone" --vo datatag
//! at 10: submit job.jdl --rb rb_pisa
//! at 20: ! submit job.jdl --rb rb_nowhere
//! ```
//!
//! A leading `!` marks a command that must fail.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use worldgrid_core::broker::JobState;
use worldgrid_core::digest::fnv1a64;
use worldgrid_core::grid;
use worldgrid_core::topology::TopologyConfig;
use worldgrid_core::SimTime;

use crate::commands::{parse_line, Cmd};
use crate::error::CliError;
use crate::exec::{read_topology, Result, Sim};

#[derive(Debug)]
pub struct Step {
    pub line: usize,
    pub at: SimTime,
    pub expect_failure: bool,
    pub text: String,
    pub cmd: Cmd,
}

#[derive(Debug)]
pub struct Scenario {
    pub path: PathBuf,
    pub seed: u64,
    pub topology: TopologyConfig,
    pub steps: Vec<Step>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario> {
        let text = fs::read_to_string(path).map_err(CliError::io(format!("reading {}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Scenario::parse(&text, path, base)
    }

    pub fn parse(text: &str, path: &Path, base: &Path) -> Result<Scenario> {
        let at = |line: usize, e: CliError| CliError::At {
            path: path.display().to_string(),
            line,
            source: Box::new(e),
        };
        let mut seed = 1;
        let mut topology = None;
        let mut steps: Vec<Step> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            if let Some(rest) = l.strip_prefix("seed ") {
                seed = rest
                    .trim()
                    .parse()
                    .map_err(|_| at(n, CliError::Usage(format!("bad seed `{}`", rest.trim()))))?;
            } else if let Some(rest) = l.strip_prefix("topology ") {
                let rest = rest.trim();
                topology = Some(if rest == "default" {
                    TopologyConfig::default_topology()
                } else {
                    read_topology(&base.join(rest)).map_err(|e| at(n, e))?
                });
            } else if let Some(rest) = l.strip_prefix("at ") {
                let (t, cmd) = rest
                    .split_once(':')
                    .ok_or_else(|| at(n, CliError::Usage("expected `at <seconds>: <command>`".into())))?;
                let t: SimTime = t
                    .trim()
                    .parse()
                    .map_err(|e: worldgrid_core::time::ParseTimeError| at(n, CliError::Usage(e.to_string())))?;
                if let Some(prev) = steps.last() {
                    if t < prev.at {
                        return Err(at(n, CliError::Usage(format!("time {t} is before {}", prev.at))));
                    }
                }
                let cmd = cmd.trim();
                let (expect_failure, cmd) = match cmd.strip_prefix('!') {
                    Some(c) => (true, c.trim()),
                    None => (false, cmd),
                };
                let parsed = parse_line(cmd).map_err(|e| at(n, CliError::Usage(e)))?;
                if matches!(parsed, Cmd::Topo { op: crate::commands::TopoOp::Load { .. } }) {
                    return Err(at(n, CliError::Usage("use a `topology` line instead of `topo load`".into())));
                }
                steps.push(Step {
                    line: n,
                    at: t,
                    expect_failure,
                    text: cmd.to_string(),
                    cmd: parsed,
                });
            } else {
                return Err(at(n, CliError::Usage(format!("unrecognised line `{l}`"))));
            }
        }
        Ok(Scenario {
            path: path.to_path_buf(),
            seed,
            topology: topology.unwrap_or_else(TopologyConfig::default_topology),
            steps,
        })
    }

    fn base_dir(&self) -> PathBuf {
        self.path.parent().unwrap_or(Path::new(".")).to_path_buf()
    }

    /// Runs every step and then drains the queue. Returns the simulator and the transcript.
    pub fn run(&self, seed: u64, write_files: bool) -> Result<(Sim, String)> {
        self.run_with(seed, write_files, |_| {})
    }

    /// Like [`Scenario::run`], with `setup` applied to the fresh simulator first.
    pub fn run_with(&self, seed: u64, write_files: bool, setup: impl FnOnce(&mut Sim)) -> Result<(Sim, String)> {
        let mut sim = Sim::new(self.topology.clone(), seed)?;
        sim.base_dir = self.base_dir();
        sim.write_files = write_files;
        setup(&mut sim);
        let mut out = String::new();
        for s in &self.steps {
            sim.grid.run_until(s.at);
            writeln!(out, "> at {}: {}{}", s.at, if s.expect_failure { "! " } else { "" }, s.text).unwrap();
            let here = |e: CliError| CliError::At {
                path: self.path.display().to_string(),
                line: s.line,
                source: Box::new(e),
            };
            match (sim.exec(&s.cmd, &mut out), s.expect_failure) {
                (Ok(()), false) => {}
                (Err(e), true) => writeln!(out, "error: {e}").unwrap(),
                (Ok(()), true) => return Err(here(CliError::Assert(format!("`{}` succeeded", s.text)))),
                (Err(e), false) => return Err(here(e)),
            }
        }
        sim.grid.run();
        writeln!(out, "> end {}", sim.grid.now()).unwrap();
        Ok((sim, out))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepRow {
    pub seed: u64,
    pub done_ok: usize,
    pub done_failed: usize,
    pub aborted: usize,
    pub end: SimTime,
    pub trace_digest: u64,
}

/// Runs the scenario once per seed; rows come back in seed order.
pub fn sweep(sc: &Scenario, seeds: &[u64]) -> Result<Vec<SweepRow>> {
    grid::sweep(seeds, |seed| {
        let (sim, _) = sc.run(seed, false)?;
        let count = |st: JobState| sim.grid.jobs().filter(|j| j.state == st).count();
        Ok(SweepRow {
            seed,
            done_ok: count(JobState::DoneOk),
            done_failed: count(JobState::DoneFailed),
            aborted: count(JobState::Aborted),
            end: sim.grid.now(),
            trace_digest: fnv1a64([sim.grid.trace_text().as_bytes()]),
        })
    })
    .into_iter()
    .collect()
}

pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut out = String::from("seed\tdone_ok\tdone_failed\taborted\tend\ttrace_digest\n");
    for r in rows {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{:016x}",
            r.seed, r.done_ok, r.done_failed, r.aborted, r.end, r.trace_digest
        )
        .unwrap();
    }
    out
}
