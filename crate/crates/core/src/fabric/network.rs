//! Bandwidth/latency link model.
//!
//! A transfer crosses at most one WAN link between two endpoints (sites or
//! service hosts) plus the LAN of the site hosting a worker node. Storage
//! elements sit at their site's gateway, so SE-to-SE copies are WAN only.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::ids::{HostId, SiteId};
use crate::time::SimTime;

use super::profile::MB;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Region {
    Eu,
    Us,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Region::Eu => "EU",
            Region::Us => "US",
        })
    }
}

impl FromStr for Region {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_uppercase().as_str() {
            "EU" => Ok(Region::Eu),
            "US" => Ok(Region::Us),
            other => Err(format!("unknown region `{other}` (EU or US)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSpec {
    pub bandwidth_bytes_per_s: f64,
    pub latency_s: f64,
}

impl LinkSpec {
    /// Bandwidth in binary MB/s.
    pub fn mb_per_s(bandwidth: f64, latency_s: f64) -> Self {
        LinkSpec {
            bandwidth_bytes_per_s: bandwidth * MB as f64,
            latency_s,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.bandwidth_bytes_per_s.is_finite() && self.bandwidth_bytes_per_s > 0.0) {
            return Err("bandwidth must be positive".into());
        }
        if !(self.latency_s.is_finite() && self.latency_s >= 0.0) {
            return Err("latency must be non-negative".into());
        }
        Ok(())
    }

    /// latency + size / bandwidth, rounded to the millisecond.
    pub fn hop_time(&self, size_bytes: u64) -> SimTime {
        SimTime::from_secs_f64(self.latency_s + size_bytes as f64 / self.bandwidth_bytes_per_s)
    }
}

/// Default intra-site link: 100 MB/s, 1 ms.
pub const DEFAULT_LAN: LinkSpec = LinkSpec {
    bandwidth_bytes_per_s: 100.0 * MB as f64,
    latency_s: 0.001,
};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Location {
    /// A service host (RB, catalogue, UI).
    Host(HostId),
    /// A storage element at the given site.
    Se(SiteId),
    /// A worker node at the given site.
    Wn(SiteId),
}

impl Location {
    fn gateway(&self) -> &str {
        match self {
            Location::Host(h) => h.as_str(),
            Location::Se(s) | Location::Wn(s) => s.as_str(),
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Host(h) => write!(f, "host:{h}"),
            Location::Se(s) => write!(f, "se@{s}"),
            Location::Wn(s) => write!(f, "wn@{s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Hop {
    Wan { a: String, b: String, spec: LinkSpec },
    Lan { site: SiteId, spec: LinkSpec },
}

impl Hop {
    pub fn spec(&self) -> &LinkSpec {
        match self {
            Hop::Wan { spec, .. } | Hop::Lan { spec, .. } => spec,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoRoute {
    pub from: Location,
    pub to: Location,
}

impl fmt::Display for NoRoute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "no route from {} to {}", self.from, self.to)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Network {
    regions: BTreeMap<String, Region>,
    links: BTreeMap<(String, String), LinkSpec>,
    region_defaults: BTreeMap<(Region, Region), LinkSpec>,
    lans: BTreeMap<SiteId, LinkSpec>,
}

fn ordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl Network {
    pub fn new() -> Self {
        Network::default()
    }

    /// Registers a site; its LAN link is created automatically.
    pub fn add_site(&mut self, site: &SiteId, region: Region, lan: Option<LinkSpec>) {
        self.regions.insert(site.to_string(), region);
        self.lans.insert(site.clone(), lan.unwrap_or(DEFAULT_LAN));
    }

    pub fn add_host(&mut self, host: &HostId, region: Region) {
        self.regions.insert(host.to_string(), region);
    }

    pub fn add_link(&mut self, a: &str, b: &str, spec: LinkSpec) {
        self.links.insert(ordered(a, b), spec);
    }

    /// Link used between any two endpoints of these regions without an explicit link.
    pub fn set_region_default(&mut self, a: Region, b: Region, spec: LinkSpec) {
        let key = if a <= b { (a, b) } else { (b, a) };
        self.region_defaults.insert(key, spec);
    }

    pub fn has_endpoint(&self, id: &str) -> bool {
        self.regions.contains_key(id)
    }

    pub fn region(&self, id: &str) -> Option<Region> {
        self.regions.get(id).copied()
    }

    pub fn lan(&self, site: &SiteId) -> Option<&LinkSpec> {
        self.lans.get(site)
    }

    fn wan(&self, a: &str, b: &str) -> Option<LinkSpec> {
        if let Some(l) = self.links.get(&ordered(a, b)) {
            return Some(*l);
        }
        let (ra, rb) = (self.region(a)?, self.region(b)?);
        let key = if ra <= rb { (ra, rb) } else { (rb, ra) };
        self.region_defaults.get(&key).copied()
    }

    pub fn route(&self, from: &Location, to: &Location) -> Result<Vec<Hop>, NoRoute> {
        let no_route = || NoRoute {
            from: from.clone(),
            to: to.clone(),
        };
        let (ga, gb) = (from.gateway(), to.gateway());
        if !self.has_endpoint(ga) || !self.has_endpoint(gb) {
            return Err(no_route());
        }
        let mut hops = Vec::new();
        if ga != gb {
            let spec = self.wan(ga, gb).ok_or_else(no_route)?;
            hops.push(Hop::Wan {
                a: ga.to_string(),
                b: gb.to_string(),
                spec,
            });
        }
        let lan_hop = |site: &SiteId| -> Result<Hop, NoRoute> {
            Ok(Hop::Lan {
                site: site.clone(),
                spec: *self.lans.get(site).ok_or_else(no_route)?,
            })
        };
        match (from, to) {
            (Location::Wn(s), _) | (_, Location::Wn(s)) => hops.push(lan_hop(s)?),
            (Location::Se(s), Location::Se(_)) if ga == gb => hops.push(lan_hop(s)?),
            _ => {}
        }
        Ok(hops)
    }

    /// Sum over hops of (latency + size / bandwidth).
    pub fn transfer_time(&self, size_bytes: u64, from: &Location, to: &Location) -> Result<SimTime, NoRoute> {
        Ok(self
            .route(from, to)?
            .iter()
            .map(|h| h.spec().hop_time(size_bytes))
            .fold(SimTime::ZERO, |a, b| a + b))
    }
}
