//! Storage elements with capacity accounting, and the Replica Catalogue
//! mapping logical file names to physical replicas.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::ids::{Lfn, SeId, SiteId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhysicalFile {
    pub se_id: SeId,
    pub path: String,
    pub size_bytes: u64,
    pub checksum: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DataError {
    #[error("SE {se} is full: {needed} bytes requested, {free} free")]
    SeFull { se: SeId, needed: u64, free: u64 },
    #[error("{path} already exists on {se}")]
    DuplicatePath { se: SeId, path: String },
    #[error("unknown SE `{0}`")]
    UnknownSe(SeId),
    #[error("no physical file {path} on {se}")]
    NoSuchPhysicalFile { se: SeId, path: String },
    #[error("checksum mismatch for {lfn}: catalogue has {expected:016x}, replica has {found:016x}")]
    ChecksumMismatch { lfn: Lfn, expected: u64, found: u64 },
    #[error("unknown logical file `{0}`")]
    UnknownLfn(Lfn),
    #[error("no replica of {lfn} can reach {se}")]
    NoRoute { lfn: Lfn, se: SeId },
}

#[derive(Debug, Clone)]
pub struct StorageElement {
    pub se_id: SeId,
    pub site_id: SiteId,
    pub capacity_bytes: u64,
    used_bytes: u64,
    files: BTreeMap<String, PhysicalFile>,
}

impl StorageElement {
    pub fn new(se_id: SeId, site_id: SiteId, capacity_bytes: u64) -> Self {
        StorageElement {
            se_id,
            site_id,
            capacity_bytes,
            used_bytes: 0,
            files: BTreeMap::new(),
        }
    }

    pub fn used_bytes(&self) -> u64 {
        self.used_bytes
    }

    pub fn free_bytes(&self) -> u64 {
        self.capacity_bytes - self.used_bytes
    }

    pub fn files(&self) -> impl Iterator<Item = &PhysicalFile> {
        self.files.values()
    }

    pub fn has_room(&self, size: u64) -> bool {
        size <= self.free_bytes()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Storage {
    ses: BTreeMap<SeId, StorageElement>,
}

impl Storage {
    pub fn new() -> Self {
        Storage::default()
    }

    pub fn add(&mut self, se: StorageElement) {
        self.ses.insert(se.se_id.clone(), se);
    }

    pub fn se(&self, id: &SeId) -> Option<&StorageElement> {
        self.ses.get(id)
    }

    pub fn ses(&self) -> impl Iterator<Item = &StorageElement> {
        self.ses.values()
    }

    pub fn store(&mut self, se_id: &SeId, path: &str, size_bytes: u64, checksum: u64) -> Result<(), DataError> {
        let se = self
            .ses
            .get_mut(se_id)
            .ok_or_else(|| DataError::UnknownSe(se_id.clone()))?;
        if se.files.contains_key(path) {
            return Err(DataError::DuplicatePath {
                se: se_id.clone(),
                path: path.to_string(),
            });
        }
        if !se.has_room(size_bytes) {
            return Err(DataError::SeFull {
                se: se_id.clone(),
                needed: size_bytes,
                free: se.free_bytes(),
            });
        }
        se.used_bytes += size_bytes;
        se.files.insert(
            path.to_string(),
            PhysicalFile {
                se_id: se_id.clone(),
                path: path.to_string(),
                size_bytes,
                checksum,
            },
        );
        Ok(())
    }

    pub fn file(&self, se_id: &SeId, path: &str) -> Option<&PhysicalFile> {
        self.ses.get(se_id)?.files.get(path)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Replica {
    pub se_id: SeId,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplicaEntry {
    pub lfn: Lfn,
    pub size_bytes: u64,
    pub checksum: u64,
    pub replicas: BTreeSet<Replica>,
}

/// The single, global Replica Catalogue.
#[derive(Debug, Clone)]
pub struct ReplicaCatalog {
    pub id: String,
    entries: BTreeMap<Lfn, ReplicaEntry>,
}

impl ReplicaCatalog {
    pub fn new(id: impl Into<String>) -> Self {
        ReplicaCatalog {
            id: id.into(),
            entries: BTreeMap::new(),
        }
    }

    /// Associates `lfn` with an existing physical file. All replicas of one
    /// lfn must carry the same checksum. Re-registering a known replica is a no-op.
    pub fn register(&mut self, lfn: &Lfn, se_id: &SeId, path: &str, storage: &Storage) -> Result<(), DataError> {
        let file = storage
            .file(se_id, path)
            .ok_or_else(|| DataError::NoSuchPhysicalFile {
                se: se_id.clone(),
                path: path.to_string(),
            })?;
        let replica = Replica {
            se_id: se_id.clone(),
            path: path.to_string(),
        };
        match self.entries.get_mut(lfn) {
            Some(entry) => {
                if entry.checksum != file.checksum {
                    return Err(DataError::ChecksumMismatch {
                        lfn: lfn.clone(),
                        expected: entry.checksum,
                        found: file.checksum,
                    });
                }
                entry.replicas.insert(replica);
            }
            None => {
                self.entries.insert(
                    lfn.clone(),
                    ReplicaEntry {
                        lfn: lfn.clone(),
                        size_bytes: file.size_bytes,
                        checksum: file.checksum,
                        replicas: BTreeSet::from([replica]),
                    },
                );
            }
        }
        Ok(())
    }

    /// Removes one replica; the entry disappears with its last replica.
    pub fn deregister(&mut self, lfn: &Lfn, se_id: &SeId, path: &str) -> bool {
        let Some(entry) = self.entries.get_mut(lfn) else {
            return false;
        };
        let removed = entry.replicas.remove(&Replica {
            se_id: se_id.clone(),
            path: path.to_string(),
        });
        if entry.replicas.is_empty() {
            self.entries.remove(lfn);
        }
        removed
    }

    /// Replicas ordered by (se_id, path); empty for an unknown lfn.
    pub fn lookup(&self, lfn: &Lfn) -> Vec<Replica> {
        self.entries
            .get(lfn)
            .map(|e| e.replicas.iter().cloned().collect())
            .unwrap_or_default()
    }

    pub fn entry(&self, lfn: &Lfn) -> Option<&ReplicaEntry> {
        self.entries.get(lfn)
    }

    pub fn entries(&self) -> impl Iterator<Item = &ReplicaEntry> {
        self.entries.values()
    }

    pub fn holds_on(&self, lfn: &Lfn, se_id: &SeId) -> bool {
        self.entries
            .get(lfn)
            .is_some_and(|e| e.replicas.iter().any(|r| &r.se_id == se_id))
    }

    /// `<lfn> <se_id> <path> <size> <checksum-hex>` per replica, sorted by (lfn, se_id).
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for e in self.entries.values() {
            for r in &e.replicas {
                out.push_str(&format!(
                    "{} {} {} {} {:016x}\n",
                    e.lfn, r.se_id, r.path, e.size_bytes, e.checksum
                ));
            }
        }
        out
    }
}
