//! Virtual-organisation membership, per-site grid-mapfiles, and time-limited proxies.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::ids::{SiteId, UserDn, VoName};
use crate::time::SimTime;

pub const DEFAULT_PROXY_LIFETIME: SimTime = SimTime::from_secs(43_200);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoDirectory {
    pub vo_name: VoName,
    members: Vec<UserDn>,
}

impl VoDirectory {
    pub fn new(vo_name: VoName) -> Self {
        VoDirectory {
            vo_name,
            members: Vec::new(),
        }
    }

    /// Returns false if the DN was already a member.
    pub fn add_member(&mut self, dn: UserDn) -> bool {
        if self.members.contains(&dn) {
            return false;
        }
        self.members.push(dn);
        true
    }

    pub fn remove_member(&mut self, dn: &UserDn) -> bool {
        let before = self.members.len();
        self.members.retain(|m| m != dn);
        before != self.members.len()
    }

    pub fn contains(&self, dn: &UserDn) -> bool {
        self.members.contains(dn)
    }

    pub fn members(&self) -> &[UserDn] {
        &self.members
    }

    pub fn pool_tag(&self) -> String {
        pool_tag(&self.vo_name)
    }
}

pub fn pool_tag(vo: &VoName) -> String {
    format!(".{vo}")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMapfile {
    pub site_id: SiteId,
    pub entries: BTreeMap<UserDn, String>,
    pub synced_at: SimTime,
}

impl GridMapfile {
    /// `"<dn>" <pool-tag>` per line, sorted by DN.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (dn, tag) in &self.entries {
            out.push_str(&format!("\"{dn}\" {tag}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proxy {
    pub user_dn: UserDn,
    pub vo_name: VoName,
    pub issued_at: SimTime,
    pub lifetime: SimTime,
}

impl Proxy {
    pub fn expires_at(&self) -> SimTime {
        self.issued_at + self.lifetime
    }

    /// Valid on `[issued_at, issued_at + lifetime)`.
    pub fn is_valid_at(&self, now: SimTime) -> bool {
        now >= self.issued_at && now < self.expires_at()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Denial {
    ProxyExpired,
    NotInMapfile,
}

impl fmt::Display for Denial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Denial::ProxyExpired => "ProxyExpired",
            Denial::NotInMapfile => "NotInMapfile",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VoError {
    #[error("{dn} is not a member of VO {vo}")]
    NotAVoMember { dn: UserDn, vo: VoName },
    #[error("unknown VO `{0}`")]
    UnknownVo(VoName),
    #[error("unknown site `{0}`")]
    UnknownSite(SiteId),
    #[error("proxy lifetime must be positive")]
    InvalidLifetime,
}

#[derive(Debug, Clone, Default)]
pub struct VoManager {
    directories: BTreeMap<VoName, VoDirectory>,
    site_vos: BTreeMap<SiteId, Vec<VoName>>,
    mapfiles: BTreeMap<SiteId, GridMapfile>,
}

impl VoManager {
    pub fn new() -> Self {
        VoManager::default()
    }

    pub fn add_directory(&mut self, dir: VoDirectory) {
        self.directories.insert(dir.vo_name.clone(), dir);
    }

    pub fn directory(&self, vo: &VoName) -> Option<&VoDirectory> {
        self.directories.get(vo)
    }

    pub fn directory_mut(&mut self, vo: &VoName) -> Result<&mut VoDirectory, VoError> {
        self.directories
            .get_mut(vo)
            .ok_or_else(|| VoError::UnknownVo(vo.clone()))
    }

    pub fn directories(&self) -> impl Iterator<Item = &VoDirectory> {
        self.directories.values()
    }

    /// Declares the VOs a site accepts, in priority order for dual members.
    pub fn set_site_policy(&mut self, site: SiteId, accepted: Vec<VoName>) {
        self.site_vos.insert(site, accepted);
    }

    pub fn sites(&self) -> impl Iterator<Item = &SiteId> {
        self.site_vos.keys()
    }

    pub fn create_proxy(
        &self,
        user_dn: &UserDn,
        vo: &VoName,
        lifetime: Option<SimTime>,
        now: SimTime,
    ) -> Result<Proxy, VoError> {
        let dir = self
            .directories
            .get(vo)
            .ok_or_else(|| VoError::UnknownVo(vo.clone()))?;
        if !dir.contains(user_dn) {
            return Err(VoError::NotAVoMember {
                dn: user_dn.clone(),
                vo: vo.clone(),
            });
        }
        let lifetime = lifetime.unwrap_or(DEFAULT_PROXY_LIFETIME);
        if lifetime == SimTime::ZERO {
            return Err(VoError::InvalidLifetime);
        }
        Ok(Proxy {
            user_dn: user_dn.clone(),
            vo_name: vo.clone(),
            issued_at: now,
            lifetime,
        })
    }

    /// Rebuilds the site's mapfile from the current directories. A user in
    /// several accepted VOs maps to the first one in the site's order.
    pub fn sync_mapfile(&mut self, site: &SiteId, now: SimTime) -> Result<&GridMapfile, VoError> {
        let accepted = self
            .site_vos
            .get(site)
            .ok_or_else(|| VoError::UnknownSite(site.clone()))?;
        let mut entries = BTreeMap::new();
        for vo in accepted {
            let Some(dir) = self.directories.get(vo) else {
                return Err(VoError::UnknownVo(vo.clone()));
            };
            for dn in dir.members() {
                entries.entry(dn.clone()).or_insert_with(|| dir.pool_tag());
            }
        }
        let map = GridMapfile {
            site_id: site.clone(),
            entries,
            synced_at: now,
        };
        self.mapfiles.insert(site.clone(), map);
        Ok(&self.mapfiles[site])
    }

    pub fn sync_all(&mut self, now: SimTime) -> Result<(), VoError> {
        let sites: Vec<SiteId> = self.site_vos.keys().cloned().collect();
        for s in sites {
            self.sync_mapfile(&s, now)?;
        }
        Ok(())
    }

    pub fn mapfile(&self, site: &SiteId) -> Option<&GridMapfile> {
        self.mapfiles.get(site)
    }

    /// Ok iff the proxy is valid now and its DN appears in the site's last
    /// synchronised mapfile.
    pub fn authorize(&self, site: &SiteId, proxy: &Proxy, now: SimTime) -> Result<(), Denial> {
        if !proxy.is_valid_at(now) {
            return Err(Denial::ProxyExpired);
        }
        match self.mapfiles.get(site) {
            Some(m) if m.entries.contains_key(&proxy.user_dn) => Ok(()),
            _ => Err(Denial::NotInMapfile),
        }
    }
}
