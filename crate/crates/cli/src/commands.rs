//! Command grammar shared by the command line and scenario files.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use worldgrid_core::production::Step;
use worldgrid_core::topology::parse_size;
use worldgrid_core::SimTime;

#[derive(Debug, Parser)]
#[command(name = "worldgrid", version, about = "Discrete-event simulator of the WorldGrid testbed")]
pub struct Cli {
    /// Master seed for a new session.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Session directory holding the command journal.
    #[arg(long, global = true, default_value = ".worldgrid")]
    pub session: PathBuf,
    #[command(subcommand)]
    pub command: Top,
}

#[derive(Debug, Subcommand)]
pub enum Top {
    #[command(flatten)]
    Sim(Cmd),
    /// Run a scenario file from a fresh simulator.
    Scenario {
        #[command(subcommand)]
        op: ScenarioOp,
    },
    /// Run a scenario once per seed and tabulate the outcomes.
    Sweep {
        file: PathBuf,
        /// Seeds 1..=N.
        #[arg(long, default_value_t = 8)]
        seeds: u64,
    },
    /// Inspect or discard the current session.
    Session {
        #[command(subcommand)]
        op: SessionOp,
    },
}

#[derive(Debug, Subcommand)]
pub enum ScenarioOp {
    Run {
        file: PathBuf,
        /// Write the trace export here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the BOSS dump here.
        #[arg(long)]
        boss_dump: Option<PathBuf>,
    },
    /// Parse a scenario without running it.
    Check { file: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum SessionOp {
    Show,
    Reset,
}

/// Commands that act on the simulator.
#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Load or validate a topology file.
    Topo {
        #[command(subcommand)]
        op: TopoOp,
    },
    /// VO directories and grid-mapfiles.
    Vo {
        #[command(subcommand)]
        op: VoOp,
    },
    Proxy {
        #[command(subcommand)]
        op: ProxyOp,
    },
    /// Submit a JDL file to a resource broker.
    Submit(SubmitArgs),
    /// Job status; all jobs when no id is given.
    Status { job: Option<u64> },
    /// Retrieve a finished job's output sandbox.
    GetOutput {
        job: u64,
        #[arg(long)]
        dest: Option<PathBuf>,
    },
    /// Replica catalogue.
    Rc {
        #[command(subcommand)]
        op: RcOp,
    },
    Refdb {
        #[command(subcommand)]
        op: RefdbOp,
    },
    Impala {
        #[command(subcommand)]
        op: ImpalaOp,
    },
    Boss {
        #[command(subcommand)]
        op: BossOp,
    },
    /// Advance simulated time; drains the event queue without --until.
    Run {
        #[arg(long)]
        until: Option<SimTime>,
    },
    /// Jobs per site, state and region.
    Report,
    Trace {
        #[command(subcommand)]
        op: TraceOp,
    },
    /// Inject failures.
    Fault {
        #[command(subcommand)]
        op: FaultOp,
    },
    /// Check the simulator state; exits with code 9 on mismatch.
    Assert {
        #[command(subcommand)]
        op: AssertOp,
    },
}

#[derive(Debug, Subcommand)]
pub enum TopoOp {
    /// Start a new session on this topology.
    Load { path: PathBuf },
    Validate { path: PathBuf },
    /// Summarise the loaded topology.
    Show,
}

#[derive(Debug, Subcommand)]
pub enum VoOp {
    /// Regenerate grid-mapfiles from the VO directories.
    Sync {
        #[arg(long)]
        site: Option<String>,
    },
    Add { vo: String, dn: String },
    Remove { vo: String, dn: String },
    /// Print a site's grid-mapfile.
    Mapfile { site: String },
}

#[derive(Debug, Subcommand)]
pub enum ProxyOp {
    /// Create a proxy; it becomes the one used by later commands.
    Init {
        #[arg(long)]
        dn: String,
        #[arg(long)]
        vo: String,
        /// Seconds; 12 hours when omitted.
        #[arg(long)]
        lifetime: Option<SimTime>,
    },
    Info,
}

#[derive(Debug, Args)]
pub struct SubmitArgs {
    pub jdl: PathBuf,
    #[arg(long)]
    pub rb: String,
    /// Extra requirement ANDed onto the file's Requirements.
    #[arg(long)]
    pub require: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum RcOp {
    /// Store a file on an SE and register it.
    Register {
        lfn: String,
        #[arg(long)]
        se: String,
        /// Bytes, or with a unit: "12 MB".
        #[arg(long, value_parser = parse_size)]
        size: u64,
    },
    Lookup { lfn: String },
    Replicate {
        lfn: String,
        #[arg(long)]
        to: String,
    },
    List,
}

#[derive(Debug, Subcommand)]
pub enum RefdbOp {
    Request {
        #[arg(long)]
        dataset: String,
        #[arg(long)]
        step: Step,
        #[arg(long)]
        events: Option<u64>,
        #[arg(long)]
        per_job: Option<u64>,
        #[arg(long)]
        rb: String,
        #[arg(long)]
        se: Option<String>,
        #[arg(long, default_value = "datatag")]
        vo: String,
    },
    Summary { id: u64 },
    Dump,
}

#[derive(Debug, Subcommand)]
pub enum ImpalaOp {
    Declare { id: u64 },
    Create { id: u64 },
    Submit { id: u64 },
}

#[derive(Debug, Subcommand)]
pub enum BossOp {
    Query {
        #[arg(long)]
        status: Option<String>,
        #[arg(long = "type")]
        job_type: Option<Step>,
        #[arg(long)]
        dataset: Option<String>,
    },
    Dump,
}

#[derive(Debug, Subcommand)]
pub enum TraceOp {
    Export { path: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum FaultOp {
    /// Kill one running job on the CE.
    Crash { ce: String },
    /// Probability that each transfer fails.
    TransferP { p: f64 },
    /// Toggle a site's outbound connectivity.
    Outbound { site: String, state: OnOff },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Subcommand)]
pub enum AssertOp {
    /// A job's state (or every job's, with `all`).
    State { job: String, state: String },
    /// Number of jobs in a state.
    Count { state: String, n: usize },
    /// Jobs ran in both EU and US.
    Regions,
    Refdb { id: u64, status: String },
    /// Number of BOSS rows with this status.
    Boss { status: String, n: usize },
}

impl Cmd {
    /// Whether the command changes simulator state and so belongs in the journal.
    pub fn mutates(&self) -> bool {
        match self {
            Cmd::Topo { .. } | Cmd::Status { .. } | Cmd::Report | Cmd::Trace { .. } | Cmd::Assert { .. } => false,
            Cmd::Vo { op } => !matches!(op, VoOp::Mapfile { .. }),
            Cmd::Proxy { op } => matches!(op, ProxyOp::Init { .. }),
            Cmd::Rc { op } => matches!(op, RcOp::Register { .. } | RcOp::Replicate { .. }),
            Cmd::Refdb { op } => !matches!(op, RefdbOp::Dump),
            Cmd::Boss { .. } => false,
            Cmd::Submit(_) | Cmd::GetOutput { .. } | Cmd::Impala { .. } | Cmd::Run { .. } | Cmd::Fault { .. } => true,
        }
    }
}

/// Parses one scenario or journal line (without the leading program name).
pub fn parse_line(line: &str) -> Result<Cmd, String> {
    #[derive(Parser)]
    #[command(name = "worldgrid", no_binary_name = true)]
    struct Line {
        #[command(subcommand)]
        cmd: Cmd,
    }
    let words = shlex::split(line).ok_or_else(|| format!("unbalanced quotes in `{line}`"))?;
    Line::try_parse_from(words).map(|l| l.cmd).map_err(|e| e.to_string().trim().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lines_parse_with_quotes() {
        let c = parse_line(r#"submit a.jdl --rb rb_pisa --require 'other.CEId == "ce_x"'"#).unwrap();
        let Cmd::Submit(a) = c else { panic!() };
        assert_eq!(a.require.as_deref(), Some(r#"other.CEId == "ce_x""#));
        assert!(parse_line("submit 'a.jdl").is_err());
    }

    #[test]
    fn read_only_commands_are_not_journaled() {
        for (line, mutates) in [
            ("status", false),
            ("report", false),
            ("rc lookup x", false),
            ("vo mapfile padova", false),
            ("run", true),
            ("vo sync", true),
            ("get-output 1", true),
            ("fault transfer-p 0.1", true),
        ] {
            assert_eq!(parse_line(line).unwrap().mutates(), mutates, "{line}");
        }
    }

    #[test]
    fn sizes_take_units() {
        let Cmd::Rc { op: RcOp::Register { size, .. } } = parse_line("rc register x --se s --size '12 MB'").unwrap() else {
            panic!()
        };
        assert_eq!(size, 12 * 1024 * 1024);
    }
}
