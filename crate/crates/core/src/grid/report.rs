use std::collections::BTreeMap;
use std::fmt;

use crate::broker::JobState;
use crate::fabric::Region;
use crate::ids::SiteId;

use super::Grid;

/// Job counts by site, by state and by region.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Report {
    /// Jobs that reached RUNNING, per executing site.
    pub per_site: BTreeMap<SiteId, (Region, u64)>,
    pub per_state: BTreeMap<JobState, u64>,
    pub per_region: BTreeMap<Region, u64>,
}

impl Report {
    pub fn build(g: &Grid) -> Report {
        let mut r = Report::default();
        for j in g.jobs() {
            *r.per_state.entry(j.state).or_default() += 1;
            if j.entered_at(JobState::Running).is_none() {
                continue;
            }
            let Some(ce) = j.matched_ce.as_ref().and_then(|c| g.ce(c)) else { continue };
            let Some(region) = g.network().region(ce.site_id.as_str()) else { continue };
            r.per_site.entry(ce.site_id.clone()).or_insert((region, 0)).1 += 1;
            *r.per_region.entry(region).or_default() += 1;
        }
        r
    }

    pub fn ran_in(&self, region: Region) -> u64 {
        self.per_region.get(&region).copied().unwrap_or(0)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "site\tregion\tjobs")?;
        for (s, (region, n)) in &self.per_site {
            writeln!(f, "{s}\t{region}\t{n}")?;
        }
        writeln!(f)?;
        writeln!(f, "state\tjobs")?;
        for (s, n) in &self.per_state {
            writeln!(f, "{s}\t{n}")?;
        }
        writeln!(f)?;
        writeln!(f, "region\tjobs")?;
        for (region, n) in &self.per_region {
            writeln!(f, "{region}\t{n}")?;
        }
        Ok(())
    }
}
