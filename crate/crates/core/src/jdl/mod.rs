//! Job Description Language: a small classad-like attribute file plus a
//! three-valued expression language for `Requirements` and `Rank`.
//!
//! ```text
//! file       := [ "[" ] { assignment ";" } [ "]" ]
//! assignment := Name "=" expr
//! expr       := literal | list | "other." Name | "Member" "(" expr "," expr ")"
//!             | "!" expr | "-" expr | expr binop expr | "(" expr ")"
//! list       := "{" [ expr { "," expr } ] "}"
//! ```
//!
//! Binary operators from loosest to tightest: `||`, `&&`, `== !=`,
//! `< <= > >=`. Strings are double-quoted; `#` and `//` start line comments.

mod eval;
mod expr;
mod lexer;
mod parser;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::ids::{Lfn, VoName};

pub use eval::{evaluate, requirement_satisfied, Env, Value};
pub use expr::{BinaryOp, Expr, UnaryOp};
pub use parser::{parse_expr, parse_file};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JdlError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("missing required attribute {0}")]
    MissingAttribute(&'static str),
    #[error("line {line}: attribute {name}: {reason}")]
    InvalidAttribute {
        name: String,
        line: usize,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub name: String,
    pub value: Expr,
    /// Source line; not part of structural equality.
    pub line: usize,
}

/// An attribute file as written, in declaration order.
#[derive(Debug, Clone, Default)]
pub struct JdlFile {
    pub assignments: Vec<Assignment>,
}

impl JdlFile {
    pub fn push(&mut self, name: &str, value: Expr) {
        self.assignments.push(Assignment {
            name: name.to_string(),
            value,
            line: 0,
        });
    }

    pub fn get(&self, name: &str) -> Option<&Expr> {
        self.assignments
            .iter()
            .find(|a| a.name.eq_ignore_ascii_case(name))
            .map(|a| &a.value)
    }
}

/// Structural equality ignores source positions.
impl PartialEq for JdlFile {
    fn eq(&self, other: &Self) -> bool {
        self.assignments.len() == other.assignments.len()
            && self
                .assignments
                .iter()
                .zip(&other.assignments)
                .all(|(a, b)| a.name == b.name && a.value == b.value)
    }
}

impl fmt::Display for JdlFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in &self.assignments {
            writeln!(f, "{} = {};", a.name, a.value)?;
        }
        Ok(())
    }
}

pub const RESERVED: [&str; 13] = [
    "Executable",
    "Arguments",
    "StdOutput",
    "StdError",
    "InputSandbox",
    "OutputSandbox",
    "Requirements",
    "Rank",
    "InputData",
    "ReplicaCatalog",
    "VirtualOrganisation",
    "Events",
    "JobSeed",
];

#[derive(Debug, Clone, PartialEq)]
pub struct JobDescription {
    pub executable: String,
    pub arguments: Vec<String>,
    pub std_output: Option<String>,
    pub std_error: Option<String>,
    pub input_sandbox: Vec<String>,
    pub output_sandbox: Vec<String>,
    pub requirements: Expr,
    pub rank: Option<Expr>,
    pub input_data: Vec<Lfn>,
    pub replica_catalog: Option<String>,
    pub virtual_organisation: VoName,
    /// Workload profile, taken from the executable's file stem.
    pub job_profile: String,
    pub events: u64,
    pub job_seed: i64,
    /// Non-reserved attributes, kept as their printed expression text.
    pub extra: BTreeMap<String, String>,
}

impl JobDescription {
    /// A non-reserved attribute whose value is a string literal.
    pub fn extra_str(&self, name: &str) -> Option<String> {
        match parse_expr(self.extra.get(name)?) {
            Ok(Expr::Str(s)) => Some(s),
            _ => None,
        }
    }

    /// A non-reserved attribute whose value is a non-negative integer literal.
    pub fn extra_u64(&self, name: &str) -> Option<u64> {
        match parse_expr(self.extra.get(name)?) {
            Ok(Expr::Num(n)) if n.fract() == 0.0 && n >= 0.0 => Some(n as u64),
            _ => None,
        }
    }

    pub fn to_file(&self) -> JdlFile {
        let mut f = JdlFile::default();
        let strs = |v: &[String]| Expr::List(v.iter().map(|s| Expr::str(s)).collect());
        f.push("Executable", Expr::str(&self.executable));
        if !self.arguments.is_empty() {
            f.push("Arguments", Expr::str(&self.arguments.join(" ")));
        }
        if let Some(s) = &self.std_output {
            f.push("StdOutput", Expr::str(s));
        }
        if let Some(s) = &self.std_error {
            f.push("StdError", Expr::str(s));
        }
        if !self.input_sandbox.is_empty() {
            f.push("InputSandbox", strs(&self.input_sandbox));
        }
        if !self.output_sandbox.is_empty() {
            f.push("OutputSandbox", strs(&self.output_sandbox));
        }
        f.push("VirtualOrganisation", Expr::str(self.virtual_organisation.as_str()));
        f.push("Requirements", self.requirements.clone());
        if let Some(r) = &self.rank {
            f.push("Rank", r.clone());
        }
        if !self.input_data.is_empty() {
            f.push(
                "InputData",
                Expr::List(
                    self.input_data
                        .iter()
                        .map(|l| Expr::Str(format!("lfn:{l}")))
                        .collect(),
                ),
            );
        }
        if let Some(rc) = &self.replica_catalog {
            f.push("ReplicaCatalog", Expr::str(rc));
        }
        f.push("Events", Expr::Num(self.events as f64));
        if self.job_seed >= 0 {
            f.push("JobSeed", Expr::Num(self.job_seed as f64));
        } else {
            f.push(
                "JobSeed",
                Expr::unary(UnaryOp::Neg, Expr::Num(-(self.job_seed as f64))),
            );
        }
        for (k, v) in &self.extra {
            if let Ok(e) = parse_expr(v) {
                f.push(k, e);
            }
        }
        f
    }
}

/// Profile name carried by the executable: basename without extension,
/// lower-cased (`/opt/cms/cmkin.sh` -> `cmkin`).
pub fn profile_of_executable(exe: &str) -> String {
    let base = exe.rsplit('/').next().unwrap_or(exe);
    let stem = match base.rsplit_once('.') {
        Some((s, _)) if !s.is_empty() => s,
        _ => base,
    };
    stem.to_ascii_lowercase()
}

fn invalid(a: &Assignment, reason: impl Into<String>) -> JdlError {
    JdlError::InvalidAttribute {
        name: a.name.clone(),
        line: a.line,
        reason: reason.into(),
    }
}

fn as_string(a: &Assignment) -> Result<String, JdlError> {
    match &a.value {
        Expr::Str(s) => Ok(s.clone()),
        _ => Err(invalid(a, "expected a string literal")),
    }
}

fn as_string_list(a: &Assignment) -> Result<Vec<String>, JdlError> {
    match &a.value {
        Expr::Str(s) => Ok(vec![s.clone()]),
        Expr::List(items) => items
            .iter()
            .map(|e| match e {
                Expr::Str(s) => Ok(s.clone()),
                _ => Err(invalid(a, "list elements must be string literals")),
            })
            .collect(),
        _ => Err(invalid(a, "expected a string or list of strings")),
    }
}

fn as_integer(a: &Assignment) -> Result<i64, JdlError> {
    let n = match &a.value {
        Expr::Num(n) => *n,
        Expr::Unary(UnaryOp::Neg, inner) => match inner.as_ref() {
            Expr::Num(n) => -n,
            _ => return Err(invalid(a, "expected an integer literal")),
        },
        _ => return Err(invalid(a, "expected an integer literal")),
    };
    if n.fract() != 0.0 || n.abs() > 9.0e15 {
        return Err(invalid(a, "expected an integer literal"));
    }
    Ok(n as i64)
}

impl TryFrom<&JdlFile> for JobDescription {
    type Error = JdlError;

    fn try_from(file: &JdlFile) -> Result<Self, JdlError> {
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        for a in &file.assignments {
            if let Some(prev) = seen.insert(a.name.to_ascii_lowercase(), a.line) {
                return Err(invalid(a, format!("duplicate attribute (first set on line {prev})")));
            }
        }

        let mut executable = None;
        let mut arguments = Vec::new();
        let mut std_output = None;
        let mut std_error = None;
        let mut input_sandbox = Vec::new();
        let mut output_sandbox = Vec::new();
        let mut requirements = None;
        let mut rank = None;
        let mut input_data = Vec::new();
        let mut replica_catalog = None;
        let mut vo = None;
        let mut events = 1u64;
        let mut job_seed = 0i64;
        let mut extra = BTreeMap::new();

        for a in &file.assignments {
            match a.name.to_ascii_lowercase().as_str() {
                "executable" => executable = Some(as_string(a)?),
                "arguments" => {
                    arguments = match &a.value {
                        Expr::Str(s) => s.split_whitespace().map(str::to_string).collect(),
                        _ => as_string_list(a)?,
                    }
                }
                "stdoutput" => std_output = Some(as_string(a)?),
                "stderror" => std_error = Some(as_string(a)?),
                "inputsandbox" => input_sandbox = as_string_list(a)?,
                "outputsandbox" => output_sandbox = as_string_list(a)?,
                "requirements" => requirements = Some(a.value.clone()),
                "rank" => rank = Some(a.value.clone()),
                "inputdata" => {
                    input_data = as_string_list(a)?.iter().map(|s| Lfn::new(s)).collect()
                }
                "replicacatalog" => replica_catalog = Some(as_string(a)?),
                "virtualorganisation" => vo = Some(VoName::new(as_string(a)?)),
                "events" => {
                    let n = as_integer(a)?;
                    if n < 1 {
                        return Err(invalid(a, "must be a positive integer"));
                    }
                    events = n as u64;
                }
                "jobseed" => job_seed = as_integer(a)?,
                _ => {
                    extra.insert(a.name.clone(), a.value.to_string());
                }
            }
        }

        let executable = executable.ok_or(JdlError::MissingAttribute("Executable"))?;
        let virtual_organisation = vo.ok_or(JdlError::MissingAttribute("VirtualOrganisation"))?;
        let requirements = requirements.ok_or(JdlError::MissingAttribute("Requirements"))?;
        if !input_data.is_empty() && replica_catalog.is_none() {
            return Err(JdlError::MissingAttribute("ReplicaCatalog"));
        }
        Ok(JobDescription {
            job_profile: profile_of_executable(&executable),
            executable,
            arguments,
            std_output,
            std_error,
            input_sandbox,
            output_sandbox,
            requirements,
            rank,
            input_data,
            replica_catalog,
            virtual_organisation,
            events,
            job_seed,
            extra,
        })
    }
}

pub fn parse_jdl(text: &str) -> Result<JobDescription, JdlError> {
    JobDescription::try_from(&parse_file(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        Executable = "atlsim.sh";
        VirtualOrganisation = "datatag";
        Requirements = true;
    "#;

    #[test]
    fn minimal_file() {
        let d = parse_jdl(MINIMAL).unwrap();
        assert_eq!(d.executable, "atlsim.sh");
        assert_eq!(d.job_profile, "atlsim");
        assert!(d.input_sandbox.is_empty() && d.output_sandbox.is_empty());
        assert!(d.input_data.is_empty());
        assert_eq!(d.events, 1);
        assert_eq!(d.requirements, Expr::Bool(true));
    }

    #[test]
    fn missing_requirements() {
        let err = parse_jdl("Executable = \"x\"; VirtualOrganisation = \"datatag\";").unwrap_err();
        assert_eq!(err, JdlError::MissingAttribute("Requirements"));
        let err = parse_jdl("VirtualOrganisation = \"v\"; Requirements = true;").unwrap_err();
        assert_eq!(err, JdlError::MissingAttribute("Executable"));
        let err = parse_jdl("Executable = \"x\"; Requirements = true;").unwrap_err();
        assert_eq!(err, JdlError::MissingAttribute("VirtualOrganisation"));
    }

    #[test]
    fn input_data_needs_catalog() {
        let text = format!("{MINIMAL} InputData = {{\"lfn:demo_22.ntpl\"}};");
        assert_eq!(
            parse_jdl(&text).unwrap_err(),
            JdlError::MissingAttribute("ReplicaCatalog")
        );
        let text = format!("{text} ReplicaCatalog = \"rc_cnaf\";");
        let d = parse_jdl(&text).unwrap();
        assert_eq!(d.input_data, vec![Lfn::new("demo_22.ntpl")]);
    }

    #[test]
    fn events_must_be_positive() {
        let text = format!("{MINIMAL} Events = 0;");
        assert!(matches!(
            parse_jdl(&text),
            Err(JdlError::InvalidAttribute { .. })
        ));
        let text = format!("{MINIMAL} Events = 2.5;");
        assert!(parse_jdl(&text).is_err());
    }

    #[test]
    fn unknown_attributes_are_kept() {
        let text = format!("{MINIMAL} Dataset = \"demo\"; JobIndex = 22; Weird = other.X > 1;");
        let d = parse_jdl(&text).unwrap();
        assert_eq!(d.extra_str("Dataset").as_deref(), Some("demo"));
        assert_eq!(d.extra_u64("JobIndex"), Some(22));
        assert_eq!(d.extra.get("Weird").map(String::as_str), Some("other.X > 1"));
    }

    #[test]
    fn duplicate_attribute_rejected() {
        let text = format!("{MINIMAL} executable = \"y\";");
        assert!(matches!(
            parse_jdl(&text),
            Err(JdlError::InvalidAttribute { .. })
        ));
    }

    #[test]
    fn description_round_trips_through_file() {
        let text = format!(
            "{MINIMAL} Arguments = \"-n 100\"; JobSeed = -4; Rank = -other.EstimatedTraversalTime; \
             InputData = {{\"lfn:a.ntpl\"}}; ReplicaCatalog = \"rc\"; Dataset = \"demo\";"
        );
        let d = parse_jdl(&text).unwrap();
        let again = parse_jdl(&d.to_file().to_string()).unwrap();
        assert_eq!(d, again);
    }

    #[test]
    fn profile_from_executable() {
        assert_eq!(profile_of_executable("/opt/cms/bin/cmkin.sh"), "cmkin");
        assert_eq!(profile_of_executable("CMSIM"), "cmsim");
        assert_eq!(profile_of_executable(".hidden"), ".hidden");
    }
}
