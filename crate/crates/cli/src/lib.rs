//! Command-line front end for the WorldGrid simulator.

pub mod commands;
pub mod error;
pub mod exec;
pub mod scenario;
pub mod session;

use std::fs;
use std::path::Path;

use clap::Parser;

use commands::{Cli, Cmd, ScenarioOp, SessionOp, TopoOp, Top};
use error::CliError;
use exec::Result;
use scenario::Scenario;
use session::Session;

/// Removes the global `--seed` and `--session` flags so the rest can be journaled.
fn command_words(args: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        match a.as_str() {
            "--seed" | "--session" => {
                it.next();
            }
            _ if a.starts_with("--seed=") || a.starts_with("--session=") => {}
            _ => out.push(a.clone()),
        }
    }
    out
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(CliError::io(format!("writing {}", path.display())))
}

/// Runs one invocation; `args` includes the program name. Clap's own errors
/// (and `--help`) come back as `Err(clap::Error)`.
pub fn run(args: Vec<String>) -> std::result::Result<Result<String>, clap::Error> {
    let cli = Cli::try_parse_from(&args)?;
    Ok(dispatch(cli, &args))
}

fn dispatch(cli: Cli, args: &[String]) -> Result<String> {
    match cli.command {
        Top::Sim(Cmd::Topo { op: TopoOp::Load { path } }) => {
            let (s, cfg) = Session::create(&cli.session, cli.seed, &path)?;
            Ok(format!("{cfg}\nnew session in {} with seed {}\n", s.dir.display(), s.seed))
        }
        Top::Sim(cmd) => {
            let mut s = Session::open(&cli.session, cli.seed)?;
            s.execute(&cmd, &command_words(args))
        }
        Top::Scenario { op: ScenarioOp::Check { file } } => {
            let sc = Scenario::load(&file)?;
            Ok(format!("{}: {} steps, seed {}\n", file.display(), sc.steps.len(), sc.seed))
        }
        Top::Scenario {
            op: ScenarioOp::Run { file, trace, boss_dump },
        } => {
            let sc = Scenario::load(&file)?;
            let (sim, out) = sc.run(cli.seed.unwrap_or(sc.seed), true)?;
            if let Some(p) = trace {
                write_file(&p, &sim.grid.trace_text())?;
            }
            if let Some(p) = boss_dump {
                write_file(&p, &sim.grid.boss().dump())?;
            }
            Ok(out)
        }
        Top::Sweep { file, seeds } => {
            if seeds == 0 {
                return Err(CliError::Usage("--seeds must be at least 1".into()));
            }
            let sc = Scenario::load(&file)?;
            let seeds: Vec<u64> = (1..=seeds).collect();
            Ok(scenario::sweep_table(&scenario::sweep(&sc, &seeds)?))
        }
        Top::Session { op: SessionOp::Show } => Ok(Session::open(&cli.session, cli.seed)?.text()),
        Top::Session { op: SessionOp::Reset } => {
            Session::reset(&cli.session)?;
            Ok(String::new())
        }
    }
}
