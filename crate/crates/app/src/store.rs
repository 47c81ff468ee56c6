//! Local roster persistence: one JSON document per roster, replaced
//! atomically (write to a temporary file, then rename), with optimistic
//! versioning. Solve results live beside their roster.

use std::fs;
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use cohort_core::model::NetworkViolation;
use cohort_core::{validate_network, Algorithm, SocialNetwork, SolveConstraints, SolveResult};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("no roster or result with id {0}")]
    NotFound(String),
    #[error("roster {id} is at version {found}, update was based on {expected}")]
    ConflictingUpdate { id: String, expected: u64, found: u64 },
    #[error("storage is full")]
    StorageFull,
    #[error("invalid network: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidNetwork(Vec<NetworkViolation>),
    #[error("storage error: {0}")]
    Io(std::io::Error),
    #[error("corrupt document {path}: {source}")]
    Corrupt { path: PathBuf, source: serde_json::Error },
}

impl From<std::io::Error> for StoreError {
    fn from(e: std::io::Error) -> Self {
        match e.kind() {
            ErrorKind::StorageFull | ErrorKind::QuotaExceeded => StoreError::StorageFull,
            _ => StoreError::Io(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub result_id: String,
    pub algorithm: Algorithm,
    pub constraints: SolveConstraints,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roster {
    pub id: String,
    pub name: String,
    pub version: u64,
    pub network: SocialNetwork,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    #[serde(default)]
    pub history: Vec<HistoryEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RosterSummary {
    pub id: String,
    pub name: String,
    pub version: u64,
    pub participants: usize,
    pub ties: usize,
    pub updated_at: DateTime<Utc>,
}

/// Stored solve outcome together with what produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredResult {
    pub id: String,
    pub roster_id: String,
    pub roster_version: u64,
    pub constraints: SolveConstraints,
    pub result: SolveResult,
    pub deviancy_warning: bool,
}

pub struct RosterStore {
    root: PathBuf,
    write_lock: Mutex<()>,
    crash_before_rename: AtomicBool,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-')
}

impl RosterStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(root.join("rosters"))?;
        fs::create_dir_all(root.join("results"))?;
        Ok(RosterStore {
            root,
            write_lock: Mutex::new(()),
            crash_before_rename: AtomicBool::new(false),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Fault injection for tests: the next write stops after the temporary
    /// file is complete and before it replaces the document, as if the
    /// process died there.
    #[doc(hidden)]
    pub fn crash_next_write(&self) {
        self.crash_before_rename.store(true, Ordering::SeqCst);
    }

    fn roster_path(&self, id: &str) -> PathBuf {
        self.root.join("rosters").join(format!("{id}.json"))
    }

    fn result_dir(&self, id: &str) -> PathBuf {
        self.root.join("results").join(id)
    }

    fn write_atomic(&self, path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
        let dir = path.parent().expect("documents live in a directory");
        fs::create_dir_all(dir)?;
        let mut tmp = tempfile::Builder::new().prefix(".tmp-").tempfile_in(dir)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        if self.crash_before_rename.swap(false, Ordering::SeqCst) {
            // leave the orphaned temporary behind, as a real crash would
            tmp.into_temp_path().keep().map_err(|e| e.error)?;
            return Err(StoreError::Io(std::io::Error::other("simulated crash before rename")));
        }
        tmp.persist(path).map_err(|e| e.error)?;
        Ok(())
    }

    fn read<T: serde::de::DeserializeOwned>(&self, path: &Path, id: &str) -> Result<T, StoreError> {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == ErrorKind::NotFound => return Err(StoreError::NotFound(id.to_string())),
            Err(e) => return Err(e.into()),
        };
        serde_json::from_str(&text).map_err(|source| StoreError::Corrupt {
            path: path.to_path_buf(),
            source,
        })
    }

    fn save(&self, roster: &Roster) -> Result<(), StoreError> {
        let bytes = serde_json::to_vec_pretty(roster).expect("serializable roster");
        self.write_atomic(&self.roster_path(&roster.id), &bytes)
    }

    fn check(net: &SocialNetwork) -> Result<(), StoreError> {
        let v = validate_network(net);
        if v.is_empty() {
            Ok(())
        } else {
            Err(StoreError::InvalidNetwork(v))
        }
    }

    pub fn create(&self, name: &str, network: SocialNetwork) -> Result<Roster, StoreError> {
        Self::check(&network)?;
        let now = Utc::now();
        let roster = Roster {
            id: Uuid::new_v4().to_string(),
            name: name.to_string(),
            version: 1,
            network,
            created_at: now,
            updated_at: now,
            history: Vec::new(),
        };
        let _guard = self.write_lock.lock().unwrap_or_else(|e| e.into_inner());
        self.save(&roster)?;
        Ok(roster)
    }

    pub fn get(&self, id: &str) -> Result<Roster, StoreError> {
        if !valid_id(id) {
            return Err(StoreError::NotFound(id.to_string()));
        }
        self.read(&self.roster_path(id), id)
    }

    /// Summaries ordered by name, then id.
    pub fn list(&self) -> Result<Vec<RosterSummary>, StoreError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(self.root.join("rosters"))? {
            let path = entry?.path();
            let Some(id) = path.file_name().and_then(|s| s.to_str()).and_then(|s| s.strip_suffix(".json")) else {
                continue;
            };
            if !valid_id(id) {
                continue;
            }
            let r: Roster = match self.read(&path, id) {
                Ok(r) => r,
                Err(StoreError::NotFound(_)) => continue,
                Err(e) => return Err(e),
            };
            out.push(RosterSummary {
                id: r.id,
                name: r.name,
                version: r.version,
                participants: r.network.nodes.len(),
                ties: r.network.ties.len(),
                updated_at: r.updated_at,
            });
        }
        out.sort_by(|a, b| (&a.name, &a.id).cmp(&(&b.name, &b.id)));
        Ok(out)
    }

    /// Replaces name and network if `expected_version` is current.
    pub fn update(
        &self,
        id: &str,
        expected_version: u64,
        name: Option<&str>,
        network: SocialNetwork,
    ) -> Result<Roster, StoreError> {
        Self::check(&network)?;
        let _guard = self.write_lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut roster = self.get(id)?;
        if roster.version != expected_version {
            return Err(StoreError::ConflictingUpdate {
                id: id.to_string(),
                expected: expected_version,
                found: roster.version,
            });
        }
        if let Some(name) = name {
            roster.name = name.to_string();
        }
        roster.network = network;
        roster.version += 1;
        roster.updated_at = Utc::now();
        self.save(&roster)?;
        Ok(roster)
    }

    pub fn delete(&self, id: &str) -> Result<(), StoreError> {
        let _guard = self.write_lock.lock().unwrap_or_else(|e| e.into_inner());
        self.get(id)?;
        fs::remove_file(self.roster_path(id))?;
        match fs::remove_dir_all(self.result_dir(id)) {
            Err(e) if e.kind() != ErrorKind::NotFound => Err(e.into()),
            _ => Ok(()),
        }
    }

    /// Stores a result and appends it to the roster's history.
    pub fn add_result(
        &self,
        roster_id: &str,
        roster_version: u64,
        constraints: SolveConstraints,
        result: SolveResult,
    ) -> Result<StoredResult, StoreError> {
        let _guard = self.write_lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut roster = self.get(roster_id)?;
        let stored = StoredResult {
            id: Uuid::new_v4().to_string(),
            roster_id: roster_id.to_string(),
            roster_version,
            deviancy_warning: result.evaluation.success < 0.0,
            constraints,
            result,
        };
        let bytes = serde_json::to_vec_pretty(&stored).expect("serializable result");
        self.write_atomic(&self.result_dir(roster_id).join(format!("{}.json", stored.id)), &bytes)?;
        roster.history.push(HistoryEntry {
            result_id: stored.id.clone(),
            algorithm: stored.result.algorithm,
            constraints: stored.constraints.clone(),
            created_at: Utc::now(),
        });
        self.save(&roster)?;
        Ok(stored)
    }

    pub fn get_result(&self, roster_id: &str, result_id: &str) -> Result<StoredResult, StoreError> {
        self.get(roster_id)?;
        if !valid_id(result_id) {
            return Err(StoreError::NotFound(result_id.to_string()));
        }
        self.read(&self.result_dir(roster_id).join(format!("{result_id}.json")), result_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cohort_core::instance::ws_instance;

    fn store() -> (tempfile::TempDir, RosterStore) {
        let dir = tempfile::tempdir().unwrap();
        let s = RosterStore::open(dir.path()).unwrap();
        (dir, s)
    }

    #[test]
    fn create_get_list_delete() {
        let (_d, s) = store();
        let net = ws_instance(12, 1).unwrap();
        let r = s.create("spring cohort", net.clone()).unwrap();
        assert_eq!(s.get(&r.id).unwrap().network, net);
        let list = s.list().unwrap();
        assert_eq!(list.len(), 1);
        assert_eq!(list[0].participants, 12);
        s.delete(&r.id).unwrap();
        assert!(matches!(s.get(&r.id), Err(StoreError::NotFound(_))));
        assert!(matches!(s.delete(&r.id), Err(StoreError::NotFound(_))));
    }

    #[test]
    fn stale_version_conflicts() {
        let (_d, s) = store();
        let r = s.create("a", ws_instance(10, 1).unwrap()).unwrap();
        let u = s.update(&r.id, 1, Some("b"), ws_instance(10, 2).unwrap()).unwrap();
        assert_eq!(u.version, 2);
        assert!(matches!(
            s.update(&r.id, 1, None, ws_instance(10, 3).unwrap()),
            Err(StoreError::ConflictingUpdate { expected: 1, found: 2, .. })
        ));
    }

    #[test]
    fn crash_before_rename_keeps_previous_version() {
        let (_d, s) = store();
        let r = s.create("a", ws_instance(10, 1).unwrap()).unwrap();
        s.crash_next_write();
        assert!(s.update(&r.id, 1, Some("b"), ws_instance(10, 2).unwrap()).is_err());
        let after = s.get(&r.id).unwrap();
        assert_eq!(after, r);
        // the orphaned temporary does not disturb listing or later writes
        assert_eq!(s.list().unwrap().len(), 1);
        assert_eq!(s.update(&r.id, 1, None, ws_instance(10, 3).unwrap()).unwrap().version, 2);
    }

    #[test]
    fn invalid_networks_and_ids_are_rejected() {
        let (_d, s) = store();
        let mut net = ws_instance(10, 1).unwrap();
        net.ties.push(net.ties[0].clone());
        assert!(matches!(s.create("x", net), Err(StoreError::InvalidNetwork(_))));
        assert!(matches!(s.get("../etc"), Err(StoreError::NotFound(_))));
    }

    #[test]
    fn storage_full_is_classified() {
        let e: StoreError = std::io::Error::from(ErrorKind::StorageFull).into();
        assert!(matches!(e, StoreError::StorageFull));
    }
}
