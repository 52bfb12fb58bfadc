//! Sectioned `key = value` topology files.
//!
//! ```text
//! [vo datatag]
//! /C=IT/O=INFN/CN=Some User
//!
//! [site padova]
//! region = EU
//! vos = datatag
//!
//! [ce ce_padova]
//! site = padova
//! lrms = PBS
//! flavors = EDG, GLUE
//! wn_count = 20
//! cpu_mhz = 1000
//! tags = CMS
//! close_ses = se_padova
//!
//! [se se_padova]
//! site = padova
//! capacity = 500 GB
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::fabric::{LinkSpec, OutputDestination, ProfileTable, Region, WorkloadProfile, GB, KB, MB};
use crate::ids::{CeId, HostId, RbId, SeId, SiteId, UserDn, VoName};
use crate::infosys::{CeLoad, CeRecord, Lrms, SchemaFlavor};
use crate::time::SimTime;

/// The shipped testbed.
pub const DEFAULT_TOPOLOGY: &str = include_str!("../data/worldgrid.toposample");
pub const DEFAULT_TOPOLOGY_NAME: &str = "worldgrid.toposample";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}{line}: {message}", path.as_ref().map(|p| format!("{p}:")).unwrap_or_default())]
pub struct ConfigError {
    pub path: Option<String>,
    pub line: usize,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        ConfigError {
            path: None,
            line,
            message: message.into(),
        }
    }

    pub fn with_path(mut self, path: impl Into<String>) -> Self {
        self.path = Some(path.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoSpec {
    pub name: VoName,
    pub members: Vec<UserDn>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiteSpec {
    pub id: SiteId,
    pub region: Region,
    pub vos: Vec<VoName>,
    /// Worker nodes can reach the monitoring database.
    pub outbound: bool,
    pub lan: Option<LinkSpec>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CeSpec {
    pub id: CeId,
    pub site: SiteId,
    pub lrms: Lrms,
    pub flavors: BTreeSet<SchemaFlavor>,
    pub wn_count: u32,
    pub cpu_mhz: u32,
    pub tags: Vec<String>,
    pub close_ses: Vec<SeId>,
    /// Defaults to the site's VOs.
    pub vos: Option<Vec<VoName>>,
    pub allow_condor_edg: bool,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeSpec {
    pub id: SeId,
    pub site: SiteId,
    pub capacity_bytes: u64,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HostSpec {
    pub id: HostId,
    pub region: Region,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkDecl {
    pub a: String,
    pub b: String,
    pub spec: LinkSpec,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WanDefault {
    pub a: Region,
    pub b: Region,
    pub spec: LinkSpec,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrokerSpec {
    pub id: RbId,
    pub flavor: SchemaFlavor,
    /// A host or site id.
    pub host: String,
    pub latency: SimTime,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogSpec {
    pub id: String,
    pub host: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TopologyConfig {
    pub vos: Vec<VoSpec>,
    pub sites: Vec<SiteSpec>,
    pub ces: Vec<CeSpec>,
    pub ses: Vec<SeSpec>,
    pub hosts: Vec<HostSpec>,
    pub links: Vec<LinkDecl>,
    pub wan_defaults: Vec<WanDefault>,
    pub brokers: Vec<BrokerSpec>,
    pub catalog: Option<CatalogSpec>,
    pub profiles: ProfileTable,
}

impl TopologyConfig {
    pub fn default_topology() -> Self {
        Self::parse(DEFAULT_TOPOLOGY)
            .map_err(|e| e.with_path(DEFAULT_TOPOLOGY_NAME))
            .expect("shipped topology is valid")
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg = Parser::default().run(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn site(&self, id: &SiteId) -> Option<&SiteSpec> {
        self.sites.iter().find(|s| &s.id == id)
    }

    pub fn region_of(&self, endpoint: &str) -> Option<Region> {
        self.sites
            .iter()
            .find(|s| s.id.as_str() == endpoint)
            .map(|s| s.region)
            .or_else(|| self.hosts.iter().find(|h| h.id.as_str() == endpoint).map(|h| h.region))
    }

    /// The information-index document of a CE, with an idle queue.
    pub fn ce_record(&self, ce: &CeSpec) -> CeRecord {
        let vos = ce.vos.clone().unwrap_or_else(|| {
            self.site(&ce.site).map(|s| s.vos.clone()).unwrap_or_default()
        });
        CeRecord {
            ce_id: ce.id.clone(),
            site_id: ce.site.clone(),
            lrms: ce.lrms,
            schema_flavors: ce.flavors.clone(),
            run_time_environment: ce.tags.clone(),
            wn_count: ce.wn_count,
            cpu_mhz: ce.cpu_mhz,
            authorized_vos: vos,
            close_ses: ce.close_ses.clone(),
            allow_condor_edg: ce.allow_condor_edg,
            load: CeLoad::default(),
        }
    }

    /// CEs that list `se` as close.
    pub fn close_ces(&self, se: &SeId) -> Vec<CeId> {
        self.ces
            .iter()
            .filter(|c| c.close_ses.contains(se))
            .map(|c| c.id.clone())
            .collect()
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let mut endpoints: BTreeMap<&str, usize> = BTreeMap::new();
        for (id, line) in self
            .sites
            .iter()
            .map(|s| (s.id.as_str(), s.line))
            .chain(self.hosts.iter().map(|h| (h.id.as_str(), h.line)))
        {
            if endpoints.insert(id, line).is_some() {
                return Err(ConfigError::at(line, format!("duplicate site/host id `{id}`")));
            }
        }
        let vos: BTreeSet<&VoName> = self.vos.iter().map(|v| &v.name).collect();
        let mut seen = BTreeSet::new();
        for v in &self.vos {
            if !seen.insert(&v.name) {
                return Err(ConfigError::at(v.line, format!("duplicate VO `{}`", v.name)));
            }
        }
        for s in &self.sites {
            for vo in &s.vos {
                if !vos.contains(vo) {
                    return Err(ConfigError::at(s.line, format!("site {}: unknown VO `{vo}`", s.id)));
                }
            }
        }
        let mut se_site = BTreeMap::new();
        for se in &self.ses {
            if !endpoints.contains_key(se.site.as_str()) || self.site(&se.site).is_none() {
                return Err(ConfigError::at(se.line, format!("SE {}: unknown site `{}`", se.id, se.site)));
            }
            if se_site.insert(&se.id, &se.site).is_some() {
                return Err(ConfigError::at(se.line, format!("duplicate SE `{}`", se.id)));
            }
        }
        let mut ce_ids = BTreeSet::new();
        for ce in &self.ces {
            if !ce_ids.insert(&ce.id) {
                return Err(ConfigError::at(ce.line, format!("duplicate CE `{}`", ce.id)));
            }
            if self.site(&ce.site).is_none() {
                return Err(ConfigError::at(ce.line, format!("CE {}: unknown site `{}`", ce.id, ce.site)));
            }
            for se in &ce.close_ses {
                match se_site.get(se) {
                    None => {
                        return Err(ConfigError::at(ce.line, format!("CE {}: unknown close SE `{se}`", ce.id)))
                    }
                    Some(site) if **site != ce.site => {
                        return Err(ConfigError::at(
                            ce.line,
                            format!("CE {}: close SE {se} is at {site}, not {}", ce.id, ce.site),
                        ))
                    }
                    _ => {}
                }
            }
            for vo in ce.vos.iter().flatten() {
                if !vos.contains(vo) {
                    return Err(ConfigError::at(ce.line, format!("CE {}: unknown VO `{vo}`", ce.id)));
                }
            }
            self.ce_record(ce)
                .validate()
                .map_err(|e| ConfigError::at(ce.line, e.to_string()))?;
        }
        for l in &self.links {
            for end in [&l.a, &l.b] {
                if !endpoints.contains_key(end.as_str()) {
                    return Err(ConfigError::at(l.line, format!("link endpoint `{end}` is not a site or host")));
                }
            }
            if l.a == l.b {
                return Err(ConfigError::at(l.line, "link endpoints must differ"));
            }
        }
        let mut rb_ids = BTreeSet::new();
        for b in &self.brokers {
            if !rb_ids.insert(&b.id) {
                return Err(ConfigError::at(b.line, format!("duplicate broker `{}`", b.id)));
            }
            if !endpoints.contains_key(b.host.as_str()) {
                return Err(ConfigError::at(b.line, format!("broker {}: unknown host `{}`", b.id, b.host)));
            }
            if b.flavor == SchemaFlavor::GlobusOnly {
                return Err(ConfigError::at(b.line, format!("broker {}: flavor must be EDG or GLUE", b.id)));
            }
        }
        if let Some(c) = &self.catalog {
            if !endpoints.contains_key(c.host.as_str()) {
                return Err(ConfigError::at(c.line, format!("catalog {}: unknown host `{}`", c.id, c.host)));
            }
        }
        Ok(())
    }
}

impl fmt::Display for TopologyConfig {
    /// One-line counts, e.g. for `topo validate`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} sites, {} CEs, {} SEs, {} brokers, {} VOs",
            self.sites.len(),
            self.ces.len(),
            self.ses.len(),
            self.brokers.len(),
            self.vos.len()
        )
    }
}

/// Parses "500 GB", "12MB", "4096".
pub fn parse_size(s: &str) -> Result<u64, String> {
    let s = s.trim();
    let split = s.find(|c: char| !(c.is_ascii_digit() || c == '.')).unwrap_or(s.len());
    let (num, unit) = s.split_at(split);
    let n: f64 = num.parse().map_err(|_| format!("bad size `{s}`"))?;
    let mult = match unit.trim().to_ascii_uppercase().as_str() {
        "" | "B" => 1,
        "KB" => KB,
        "MB" => MB,
        "GB" => GB,
        "TB" => GB * 1024,
        u => return Err(format!("unknown size unit `{u}`")),
    };
    if !n.is_finite() || n < 0.0 {
        return Err(format!("bad size `{s}`"));
    }
    Ok((n * mult as f64).round() as u64)
}

/// Seconds, with an optional `s` or `ms` suffix.
pub fn parse_seconds(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let (num, scale) = if let Some(n) = s.strip_suffix("ms") {
        (n, 0.001)
    } else if let Some(n) = s.strip_suffix('s') {
        (n, 1.0)
    } else {
        (s, 1.0)
    };
    let v: f64 = num.trim().parse().map_err(|_| format!("bad duration `{s}`"))?;
    if !v.is_finite() || v < 0.0 {
        return Err(format!("bad duration `{s}`"));
    }
    Ok(v * scale)
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("bad boolean `{s}`")),
    }
}

fn list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(String::from).collect()
}

#[derive(Debug)]
struct Section {
    kind: String,
    args: Vec<String>,
    line: usize,
    keys: BTreeMap<String, (String, usize)>,
    raw: Vec<(String, usize)>,
}

impl Section {
    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.keys.remove(key)
    }

    fn req(&mut self, key: &str) -> Result<(String, usize), ConfigError> {
        self.take(key).ok_or_else(|| {
            ConfigError::at(self.line, format!("[{} {}] is missing `{key}`", self.kind, self.args.join(" ")))
        })
    }

    fn parse<T>(&mut self, key: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<T, ConfigError> {
        let (v, line) = self.req(key)?;
        f(&v).map_err(|e| ConfigError::at(line, format!("{key}: {e}")))
    }

    fn parse_opt<T>(&mut self, key: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => f(&v).map(Some).map_err(|e| ConfigError::at(line, format!("{key}: {e}"))),
        }
    }

    fn finish(self) -> Result<(), ConfigError> {
        match self.keys.into_iter().next() {
            None => Ok(()),
            Some((k, (_, line))) => Err(ConfigError::at(line, format!("unknown key `{k}` in [{}]", self.kind))),
        }
    }

    fn one_arg(&self) -> Result<String, ConfigError> {
        match self.args.as_slice() {
            [a] => Ok(a.clone()),
            _ => Err(ConfigError::at(self.line, format!("[{}] takes exactly one id", self.kind))),
        }
    }
}

fn positive<T: PartialOrd + Default + std::str::FromStr>(s: &str) -> Result<T, String> {
    let v: T = s.trim().parse().map_err(|_| format!("bad number `{s}`"))?;
    if v > T::default() {
        Ok(v)
    } else {
        Err(format!("must be positive, got `{s}`"))
    }
}

fn link_spec(sec: &mut Section) -> Result<LinkSpec, ConfigError> {
    let bw: f64 = sec.parse("bandwidth", |s| positive(s.trim().trim_end_matches("MB/s").trim()))?;
    let lat = sec.parse("latency", parse_seconds)?;
    let spec = LinkSpec::mb_per_s(bw, lat);
    spec.validate().map_err(|e| ConfigError::at(sec.line, e))?;
    Ok(spec)
}

#[derive(Default)]
struct Parser {
    cfg: TopologyConfig,
}

impl Parser {
    fn run(mut self, text: &str) -> Result<TopologyConfig, ConfigError> {
        self.cfg.profiles = ProfileTable::builtin();
        let mut current: Option<Section> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            if let Some(inner) = l.strip_prefix('[') {
                let inner = inner
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::at(line, "unterminated section header"))?;
                if let Some(s) = current.take() {
                    self.section(s)?;
                }
                let mut parts = inner.split_whitespace().map(String::from);
                let kind = parts
                    .next()
                    .ok_or_else(|| ConfigError::at(line, "empty section header"))?
                    .to_ascii_lowercase();
                current = Some(Section {
                    kind,
                    args: parts.collect(),
                    line,
                    keys: BTreeMap::new(),
                    raw: Vec::new(),
                });
                continue;
            }
            let Some(sec) = current.as_mut() else {
                return Err(ConfigError::at(line, "content before the first section"));
            };
            if sec.kind == "vo" {
                sec.raw.push((l.to_string(), line));
                continue;
            }
            let (k, v) = l
                .split_once('=')
                .ok_or_else(|| ConfigError::at(line, format!("expected `key = value`, found `{l}`")))?;
            let k = k.trim().to_ascii_lowercase();
            if sec.keys.insert(k.clone(), (v.trim().to_string(), line)).is_some() {
                return Err(ConfigError::at(line, format!("duplicate key `{k}`")));
            }
        }
        if let Some(s) = current.take() {
            self.section(s)?;
        }
        Ok(self.cfg)
    }

    fn section(&mut self, mut sec: Section) -> Result<(), ConfigError> {
        let line = sec.line;
        match sec.kind.as_str() {
            "vo" => {
                let name = VoName::new(sec.one_arg()?);
                let mut members: Vec<UserDn> = Vec::new();
                for (dn, l) in std::mem::take(&mut sec.raw) {
                    let dn = UserDn::new(dn);
                    if members.contains(&dn) {
                        return Err(ConfigError::at(l, format!("duplicate member {dn}")));
                    }
                    members.push(dn);
                }
                self.cfg.vos.push(VoSpec { name, members, line });
            }
            "site" => {
                let id = SiteId::new(sec.one_arg()?);
                let region = sec.parse("region", |s| s.parse())?;
                let vos = sec.parse_opt("vos", |s| Ok(list(s).into_iter().map(VoName::new).collect()))?;
                let outbound = sec.parse_opt("outbound", parse_bool)?.unwrap_or(true);
                let lan = match (sec.take("lan_bandwidth"), sec.take("lan_latency")) {
                    (None, None) => None,
                    (bw, lat) => {
                        let mut tmp = Section {
                            kind: "site".into(),
                            args: vec![],
                            line,
                            keys: BTreeMap::new(),
                            raw: vec![],
                        };
                        tmp.keys.insert("bandwidth".into(), bw.unwrap_or(("100".into(), line)));
                        tmp.keys.insert("latency".into(), lat.unwrap_or(("0.001".into(), line)));
                        Some(link_spec(&mut tmp)?)
                    }
                };
                sec.finish()?;
                self.cfg.sites.push(SiteSpec {
                    id,
                    region,
                    vos: vos.unwrap_or_default(),
                    outbound,
                    lan,
                    line,
                });
            }
            "ce" => {
                let id = CeId::new(sec.one_arg()?);
                let site = SiteId::new(sec.req("site")?.0);
                let lrms = sec.parse("lrms", |s| s.parse())?;
                let flavors = sec.parse("flavors", |s| list(s).iter().map(|f| f.parse()).collect())?;
                let wn_count = sec.parse("wn_count", positive)?;
                let cpu_mhz = sec.parse("cpu_mhz", positive)?;
                let tags = sec.take("tags").map(|(v, _)| list(&v)).unwrap_or_default();
                let close_ses = sec
                    .take("close_ses")
                    .map(|(v, _)| list(&v).into_iter().map(SeId::new).collect())
                    .unwrap_or_default();
                let vos = sec.parse_opt("vos", |s| Ok(list(s).into_iter().map(VoName::new).collect()))?;
                let allow_condor_edg = sec.parse_opt("allow_condor_edg", parse_bool)?.unwrap_or(false);
                sec.finish()?;
                self.cfg.ces.push(CeSpec {
                    id,
                    site,
                    lrms,
                    flavors,
                    wn_count,
                    cpu_mhz,
                    tags,
                    close_ses,
                    vos,
                    allow_condor_edg,
                    line,
                });
            }
            "se" => {
                let id = SeId::new(sec.one_arg()?);
                let site = SiteId::new(sec.req("site")?.0);
                let capacity_bytes = sec.parse("capacity", parse_size)?;
                sec.finish()?;
                self.cfg.ses.push(SeSpec {
                    id,
                    site,
                    capacity_bytes,
                    line,
                });
            }
            "host" => {
                let id = HostId::new(sec.one_arg()?);
                let region = sec.parse("region", |s| s.parse())?;
                sec.finish()?;
                self.cfg.hosts.push(HostSpec { id, region, line });
            }
            "link" => {
                let [a, b] = sec.args.as_slice() else {
                    return Err(ConfigError::at(line, "[link] takes two endpoints"));
                };
                let (a, b) = (a.clone(), b.clone());
                let spec = link_spec(&mut sec)?;
                sec.finish()?;
                self.cfg.links.push(LinkDecl { a, b, spec, line });
            }
            "wan" => {
                let [a, b] = sec.args.as_slice() else {
                    return Err(ConfigError::at(line, "[wan] takes two regions"));
                };
                let a: Region = a.parse().map_err(|e: String| ConfigError::at(line, e))?;
                let b: Region = b.parse().map_err(|e: String| ConfigError::at(line, e))?;
                let spec = link_spec(&mut sec)?;
                sec.finish()?;
                self.cfg.wan_defaults.push(WanDefault { a, b, spec, line });
            }
            "broker" => {
                let id = RbId::new(sec.one_arg()?);
                let flavor = sec.parse("flavor", |s| s.parse())?;
                let host = sec.req("host")?.0;
                let latency = sec
                    .parse_opt("latency", parse_seconds)?
                    .map(SimTime::from_secs_f64)
                    .unwrap_or(SimTime::ZERO);
                sec.finish()?;
                self.cfg.brokers.push(BrokerSpec {
                    id,
                    flavor,
                    host,
                    latency,
                    line,
                });
            }
            "catalog" => {
                let id = sec.one_arg()?;
                let host = sec.req("host")?.0;
                sec.finish()?;
                if self.cfg.catalog.is_some() {
                    return Err(ConfigError::at(line, "only one replica catalogue is supported"));
                }
                self.cfg.catalog = Some(CatalogSpec { id, host, line });
            }
            "profile" => {
                let name = sec.one_arg()?.to_ascii_lowercase();
                let mut p = self.cfg.profiles.get(&name).cloned().unwrap_or(WorkloadProfile {
                    name: name.clone(),
                    per_event_cpu_seconds_at_1ghz: 1.0,
                    output_bytes_per_event: KB,
                    monitor_every_events: 10,
                    output: OutputDestination::Sandbox,
                    output_name: "{dataset}_{index}.out".into(),
                });
                if let Some(v) = sec.parse_opt("cpu_per_event", positive::<f64>)? {
                    p.per_event_cpu_seconds_at_1ghz = v;
                }
                if let Some(v) = sec.parse_opt("output_per_event", parse_size)? {
                    p.output_bytes_per_event = v;
                }
                if let Some(v) = sec.parse_opt("monitor_every", positive::<u64>)? {
                    p.monitor_every_events = v;
                }
                if let Some(v) = sec.parse_opt("output", |s| s.parse())? {
                    p.output = v;
                }
                if let Some((v, _)) = sec.take("output_name") {
                    p.output_name = v;
                }
                sec.finish()?;
                self.cfg.profiles.insert(p).map_err(|e| ConfigError::at(line, e))?;
            }
            other => return Err(ConfigError::at(line, format!("unknown section kind `{other}`"))),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_topology_counts() {
        let t = TopologyConfig::default_topology();
        assert_eq!(t.sites.len(), 17);
        assert_eq!(t.ces.len(), 17);
        assert_eq!(t.brokers.len(), 3);
        assert_eq!(t.sites.iter().filter(|s| s.region == Region::Eu).count(), 8);
        let pbs_us = t
            .ces
            .iter()
            .filter(|c| c.lrms == Lrms::Pbs && t.site(&c.site).unwrap().region == Region::Us)
            .count();
        let pbs_eu = t
            .ces
            .iter()
            .filter(|c| c.lrms == Lrms::Pbs && t.site(&c.site).unwrap().region == Region::Eu)
            .count();
        assert_eq!((pbs_eu, pbs_us), (7, 5));
        assert_eq!(t.ces.iter().filter(|c| c.lrms == Lrms::Condor).count(), 4);
    }

    fn with_default(patch: &str) -> Result<TopologyConfig, ConfigError> {
        TopologyConfig::parse(&format!("{DEFAULT_TOPOLOGY}\n{patch}"))
    }

    #[test]
    fn dangling_close_se() {
        let e = with_default("[ce ce_extra]\nsite = padova\nlrms = PBS\nflavors = EDG\nwn_count = 1\ncpu_mhz = 1000\nclose_ses = se_nowhere\n")
            .unwrap_err();
        assert!(e.message.contains("se_nowhere"), "{e}");
        assert!(e.line > 300);
    }

    #[test]
    fn condor_with_edg_needs_override() {
        let ce = "[ce ce_x]\nsite = boston\nlrms = CONDOR\nflavors = EDG\nwn_count = 1\ncpu_mhz = 1000\n";
        assert!(with_default(ce).is_err());
        assert!(with_default(&format!("{ce}allow_condor_edg = true\n")).is_ok());
    }

    #[test]
    fn diagnostics_carry_lines() {
        let e = TopologyConfig::parse("[site a]\nregion = EU\nbogus\n").unwrap_err();
        assert_eq!(e.line, 3);
        let e = TopologyConfig::parse("[site a]\nregion = MARS\n").unwrap_err();
        assert_eq!(e.line, 2);
        let e = TopologyConfig::parse("\n[site a]\nregion = EU\ncolour = red\n").unwrap_err();
        assert_eq!((e.line, e.to_string()), (4, "4: unknown key `colour` in [site]".to_string()));
        let e = TopologyConfig::parse("[site a]\nregion = EU\n[host a]\nregion = US\n").unwrap_err();
        assert_eq!(e.line, 3);
        assert_eq!(e.with_path("x.topo").to_string(), "x.topo:3: duplicate site/host id `a`");
    }

    #[test]
    fn close_se_must_share_site() {
        let e = with_default("[ce ce_extra]\nsite = padova\nlrms = PBS\nflavors = EDG\nwn_count = 1\ncpu_mhz = 1000\nclose_ses = se_milano\n")
            .unwrap_err();
        assert!(e.message.contains("is at milano"));
    }

    #[test]
    fn sizes_and_durations() {
        assert_eq!(parse_size("500 GB").unwrap(), 500 * GB);
        assert_eq!(parse_size("12.5MB").unwrap(), 12 * MB + MB / 2);
        assert_eq!(parse_size("4096").unwrap(), 4096);
        assert!(parse_size("3 parsecs").is_err());
        assert_eq!(parse_seconds("50ms").unwrap(), 0.05);
        assert_eq!(parse_seconds("0.1").unwrap(), 0.1);
    }

    #[test]
    fn profile_override() {
        let t = with_default("[profile atlsim]\noutput_per_event = 2 MB\n").unwrap();
        assert_eq!(t.profiles.get("atlsim").unwrap().output_bytes_per_event, 2 * MB);
        assert_eq!(t.profiles.get("atlsim").unwrap().per_event_cpu_seconds_at_1ghz, 150.0);
    }
}
