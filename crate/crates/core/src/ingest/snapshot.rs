use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use super::{parse_repo_index, sha256_hex, IngestError, IngestFailure, RepoIndex};
use crate::chart::{parse_chart_archive, ChartPackage};

const INDEX_FILE: &str = "index.yaml";
const MANIFEST_FILE: &str = "manifest.json";
const ARCHIVE_DIR: &str = "archives";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotManifest {
    pub id: String,
    pub source: String,
    pub fetched_at: DateTime<Utc>,
    pub recorded_at: DateTime<Utc>,
    /// SHA-256 of every stored archive, by file name.
    pub digests: BTreeMap<String, String>,
}

/// A repository state as recorded on one UTC day.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub id: String,
    pub index: RepoIndex,
    pub packages: BTreeMap<String, ChartPackage>,
    pub content_digests: BTreeMap<String, String>,
    /// Stored archives that no longer parse.
    pub failures: Vec<IngestFailure>,
}

impl Snapshot {
    /// Snapshot id for a timestamp: its UTC date.
    pub fn id_for(at: DateTime<Utc>) -> String {
        at.date_naive().format("%Y-%m-%d").to_string()
    }

    pub fn date(&self) -> Option<NaiveDate> {
        NaiveDate::parse_from_str(&self.id, "%Y-%m-%d").ok()
    }

    /// Archive digest, falling back to the digest stated in the index.
    pub fn digest_of(&self, file_name: &str) -> Option<&str> {
        self.content_digests
            .get(file_name)
            .map(String::as_str)
            .or_else(|| self.index.entry(file_name)?.digest.as_deref())
    }

    /// Snapshot held in memory only.
    pub fn in_memory(id: &str, index: RepoIndex, archives: &BTreeMap<String, Vec<u8>>) -> Self {
        let (packages, failures) = parse_archives(archives.iter().map(|(k, v)| (k.clone(), v.clone())));
        Snapshot {
            id: id.to_string(),
            index,
            packages,
            content_digests: archives.iter().map(|(k, v)| (k.clone(), sha256_hex(v))).collect(),
            failures,
        }
    }
}

fn parse_archives(
    archives: impl Iterator<Item = (String, Vec<u8>)>,
) -> (BTreeMap<String, ChartPackage>, Vec<IngestFailure>) {
    let mut packages = BTreeMap::new();
    let mut failures = Vec::new();
    for (name, bytes) in archives {
        match parse_chart_archive(&bytes) {
            Ok(mut pkg) => {
                pkg.file_name = Some(name.clone());
                packages.insert(name, pkg);
            }
            Err(e) => failures.push(IngestFailure { location: name, reason: e.to_string() }),
        }
    }
    (packages, failures)
}

/// Directory of snapshots: `<root>/<id>/{index.yaml, manifest.json, archives/}`.
#[derive(Debug, Clone)]
pub struct SnapshotStore {
    root: PathBuf,
}

impl SnapshotStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, IngestError> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(|e| IngestError::Storage(format!("{}: {e}", root.display())))?;
        Ok(SnapshotStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Persists a snapshot dated `at`. The directory appears atomically;
    /// a second snapshot on the same UTC day is rejected.
    pub fn record(
        &self,
        index: &RepoIndex,
        index_raw: Option<&[u8]>,
        archives: &BTreeMap<String, Vec<u8>>,
        at: DateTime<Utc>,
    ) -> Result<String, IngestError> {
        let id = Snapshot::id_for(at);
        let target = self.root.join(&id);
        if target.exists() {
            return Err(IngestError::DuplicateSnapshot(id));
        }
        let storage = |e: std::io::Error| IngestError::Storage(e.to_string());
        let staging = tempfile::Builder::new().prefix(&format!(".staging-{id}-")).tempdir_in(&self.root).map_err(storage)?;
        let index_text = match index_raw {
            Some(raw) => raw.to_vec(),
            None => index.to_yaml().into_bytes(),
        };
        std::fs::write(staging.path().join(INDEX_FILE), index_text).map_err(storage)?;
        let archive_dir = staging.path().join(ARCHIVE_DIR);
        std::fs::create_dir_all(&archive_dir).map_err(storage)?;
        let mut digests = BTreeMap::new();
        for (name, bytes) in archives {
            if name.contains(['/', '\\']) || name.starts_with('.') {
                return Err(IngestError::Storage(format!("unsafe archive name {name:?}")));
            }
            std::fs::write(archive_dir.join(name), bytes).map_err(storage)?;
            digests.insert(name.clone(), sha256_hex(bytes));
        }
        let manifest = SnapshotManifest {
            id: id.clone(),
            source: index.source.clone(),
            fetched_at: index.fetched_at,
            recorded_at: Utc::now(),
            digests,
        };
        let json = serde_json::to_vec_pretty(&manifest).map_err(|e| IngestError::Storage(e.to_string()))?;
        std::fs::write(staging.path().join(MANIFEST_FILE), json).map_err(storage)?;

        let staged = staging.keep();
        if let Err(e) = std::fs::rename(&staged, &target) {
            let _ = std::fs::remove_dir_all(&staged);
            return Err(if target.exists() { IngestError::DuplicateSnapshot(id) } else { storage(e) });
        }
        Ok(id)
    }

    /// Ids of recorded snapshots in ascending order.
    pub fn list(&self) -> Result<Vec<String>, IngestError> {
        let mut ids = Vec::new();
        for entry in std::fs::read_dir(&self.root).map_err(|e| IngestError::Storage(e.to_string()))? {
            let entry = entry.map_err(|e| IngestError::Storage(e.to_string()))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if !name.starts_with('.') && entry.path().join(MANIFEST_FILE).is_file() {
                ids.push(name);
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn manifest(&self, id: &str) -> Result<SnapshotManifest, IngestError> {
        let path = self.root.join(id).join(MANIFEST_FILE);
        let bytes = std::fs::read(&path).map_err(|e| IngestError::Storage(format!("{}: {e}", path.display())))?;
        serde_json::from_slice(&bytes).map_err(|e| IngestError::Storage(format!("{}: {e}", path.display())))
    }

    /// Index and manifest only, without reading archives.
    pub fn load_index(&self, id: &str) -> Result<RepoIndex, IngestError> {
        let manifest = self.manifest(id)?;
        let raw = std::fs::read(self.root.join(id).join(INDEX_FILE)).map_err(|e| IngestError::Storage(e.to_string()))?;
        let mut index = parse_repo_index(&raw, &manifest.source)?;
        index.fetched_at = manifest.fetched_at;
        Ok(index)
    }

    pub fn load(&self, id: &str) -> Result<Snapshot, IngestError> {
        let manifest = self.manifest(id)?;
        let index = self.load_index(id)?;
        let dir = self.root.join(id).join(ARCHIVE_DIR);
        let mut archives = Vec::new();
        for name in manifest.digests.keys() {
            let bytes = std::fs::read(dir.join(name)).map_err(|e| IngestError::Storage(format!("{name}: {e}")))?;
            archives.push((name.clone(), bytes));
        }
        let (packages, failures) = parse_archives(archives.into_iter());
        Ok(Snapshot { id: id.to_string(), index, packages, content_digests: manifest.digests, failures })
    }
}
