//! A session is a directory holding a journal of state-changing commands.
//! Every invocation rebuilds the simulator by replaying the journal.
//!
//! ```text
//! seed 1
//! topology default
//! cmd proxy init --dn '/CN=x' --vo datatag
//! cmd submit jdl/0001.jdl --rb rb_pisa
//! ```

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use worldgrid_core::topology::TopologyConfig;

use crate::commands::{parse_line, Cmd, SubmitArgs};
use crate::error::CliError;
use crate::exec::{read_topology, Result, Sim};

const JOURNAL: &str = "journal";
const TOPOLOGY: &str = "topology.cfg";

pub struct Session {
    pub dir: PathBuf,
    pub seed: u64,
    topology: Option<String>,
    commands: Vec<String>,
}

fn join(words: &[String]) -> String {
    shlex::try_join(words.iter().map(String::as_str)).expect("arguments contain no NUL bytes")
}

impl Session {
    fn journal(&self) -> PathBuf {
        self.dir.join(JOURNAL)
    }

    /// Opens the session in `dir`, creating an empty one on the default
    /// topology if there is none yet.
    pub fn open(dir: &Path, seed: Option<u64>) -> Result<Session> {
        let path = dir.join(JOURNAL);
        if !path.exists() {
            let s = Session {
                dir: dir.to_path_buf(),
                seed: seed.unwrap_or(1),
                topology: None,
                commands: Vec::new(),
            };
            s.write()?;
            return Ok(s);
        }
        let text = fs::read_to_string(&path).map_err(CliError::io(format!("reading {}", path.display())))?;
        let mut s = Session {
            dir: dir.to_path_buf(),
            seed: 1,
            topology: None,
            commands: Vec::new(),
        };
        for (i, l) in text.lines().enumerate() {
            let bad = || CliError::At {
                path: path.display().to_string(),
                line: i + 1,
                source: Box::new(CliError::Config(worldgrid_core::topology::ConfigError {
                    path: None,
                    line: 0,
                    message: format!("corrupt journal line `{l}`"),
                })),
            };
            match l.split_once(' ') {
                Some(("seed", v)) => s.seed = v.parse().map_err(|_| bad())?,
                Some(("topology", "default")) => s.topology = None,
                Some(("topology", v)) => s.topology = Some(v.to_string()),
                Some(("cmd", v)) => s.commands.push(v.to_string()),
                _ if l.is_empty() => {}
                _ => return Err(bad()),
            }
        }
        if let Some(want) = seed {
            if want != s.seed {
                if !s.commands.is_empty() {
                    return Err(CliError::State(format!(
                        "session {} already runs with seed {}; run `session reset` to change it",
                        dir.display(),
                        s.seed
                    )));
                }
                s.seed = want;
                s.write()?;
            }
        }
        Ok(s)
    }

    /// Starts a new session on a copy of the topology file.
    pub fn create(dir: &Path, seed: Option<u64>, topology: &Path) -> Result<(Session, TopologyConfig)> {
        let cfg = read_topology(topology)?;
        Session::reset(dir)?;
        fs::create_dir_all(dir).map_err(CliError::io(format!("creating {}", dir.display())))?;
        fs::copy(topology, dir.join(TOPOLOGY)).map_err(CliError::io(format!("copying {}", topology.display())))?;
        let s = Session {
            dir: dir.to_path_buf(),
            seed: seed.unwrap_or(1),
            topology: Some(TOPOLOGY.to_string()),
            commands: Vec::new(),
        };
        s.write()?;
        Ok((s, cfg))
    }

    pub fn reset(dir: &Path) -> Result<()> {
        if dir.join(JOURNAL).exists() {
            fs::remove_dir_all(dir).map_err(CliError::io(format!("removing {}", dir.display())))?;
        } else if dir.exists() && fs::read_dir(dir).map(|mut d| d.next().is_some()).unwrap_or(false) {
            return Err(CliError::State(format!("{} is not a session directory", dir.display())));
        }
        Ok(())
    }

    fn write(&self) -> Result<()> {
        fs::create_dir_all(&self.dir).map_err(CliError::io(format!("creating {}", self.dir.display())))?;
        fs::write(self.journal(), self.text()).map_err(CliError::io(format!("writing {}", self.journal().display())))
    }

    pub fn text(&self) -> String {
        let mut t = format!("seed {}\ntopology {}\n", self.seed, self.topology.as_deref().unwrap_or("default"));
        for c in &self.commands {
            t.push_str("cmd ");
            t.push_str(c);
            t.push('\n');
        }
        t
    }

    pub fn topology(&self) -> Result<TopologyConfig> {
        match &self.topology {
            None => Ok(TopologyConfig::default_topology()),
            Some(p) => read_topology(&self.dir.join(p)),
        }
    }

    /// Rebuilds the simulator from the journal.
    pub fn replay(&self) -> Result<Sim> {
        let mut sim = Sim::new(self.topology()?, self.seed)?;
        sim.base_dir = self.dir.clone();
        sim.write_files = false;
        let mut sink = String::new();
        for (i, line) in self.commands.iter().enumerate() {
            let cmd = parse_line(line).map_err(CliError::Usage)?;
            sim.exec(&cmd, &mut sink).map_err(|e| CliError::At {
                path: self.journal().display().to_string(),
                line: i + 3,
                source: Box::new(e),
            })?;
            sink.clear();
        }
        sim.base_dir = PathBuf::from(".");
        sim.write_files = true;
        Ok(sim)
    }

    /// Runs one command against the replayed state and journals it when it
    /// changes that state. `words` are the command-line words that produced `cmd`.
    pub fn execute(&mut self, cmd: &Cmd, words: &[String]) -> Result<String> {
        let mut sim = self.replay()?;
        let mut out = String::new();
        let journaled = match cmd {
            Cmd::Submit(args) => {
                let text = sim.jdl_text(args)?;
                let name = format!("jdl/{:04}.jdl", self.commands.len() + 1);
                let path = self.dir.join(&name);
                fs::create_dir_all(self.dir.join("jdl")).map_err(CliError::io("creating the JDL store"))?;
                fs::write(&path, &text).map_err(CliError::io(format!("writing {}", path.display())))?;
                let stored = SubmitArgs {
                    jdl: path.clone(),
                    rb: args.rb.clone(),
                    require: None,
                };
                let r = sim.exec(&Cmd::Submit(stored), &mut out);
                if r.is_err() {
                    let _ = fs::remove_file(&path);
                }
                r?;
                join(&["submit".into(), name, "--rb".into(), args.rb.clone()])
            }
            _ => {
                sim.exec(cmd, &mut out)?;
                join(words)
            }
        };
        if cmd.mutates() {
            self.commands.push(journaled);
            let mut f = fs::OpenOptions::new()
                .append(true)
                .open(self.journal())
                .map_err(CliError::io(format!("opening {}", self.journal().display())))?;
            writeln!(f, "cmd {}", self.commands.last().unwrap())
                .map_err(CliError::io(format!("writing {}", self.journal().display())))?;
        }
        Ok(out)
    }
}
