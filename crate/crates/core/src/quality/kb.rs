use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};

use super::QualityError;
use crate::chart::StemName;
use crate::render::Overrides;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KbEntry {
    pub value: String,
    /// Not persisted; `None` for entries read from disk.
    pub learned_at: Option<DateTime<Utc>>,
}

/// Learned override values keyed by chart stem and rendered key path.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VariabilityKnowledgeBase {
    entries: BTreeMap<String, BTreeMap<String, KbEntry>>,
}

impl VariabilityKnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an entry unless one exists. Returns true if it was added.
    pub fn insert(&mut self, stem: &StemName, key_path: &str, value: &str) -> bool {
        let per_stem = self.entries.entry(stem.as_str().to_string()).or_default();
        if per_stem.contains_key(key_path) {
            return false;
        }
        per_stem.insert(key_path.to_string(), KbEntry { value: value.to_string(), learned_at: Some(Utc::now()) });
        true
    }

    pub fn get(&self, stem: &StemName, key_path: &str) -> Option<&KbEntry> {
        self.entries.get(stem.as_str())?.get(key_path)
    }

    /// Leaf overrides for one stem.
    pub fn overrides_for(&self, stem: &StemName) -> Overrides {
        self.entries
            .get(stem.as_str())
            .map(|m| m.iter().map(|(k, e)| (k.clone(), e.value.clone())).collect())
            .unwrap_or_default()
    }

    pub fn count_for(&self, stem: &StemName) -> usize {
        self.entries.get(stem.as_str()).map_or(0, BTreeMap::len)
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stems(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Drops every entry of one stem.
    pub fn reset(&mut self, stem: &StemName) -> usize {
        self.entries.remove(stem.as_str()).map_or(0, |m| m.len())
    }

    /// Flat `"<stem>|<key_path>" -> value` form.
    pub fn to_flat(&self) -> BTreeMap<String, String> {
        self.entries
            .iter()
            .flat_map(|(stem, m)| m.iter().map(move |(k, e)| (format!("{stem}|{k}"), e.value.clone())))
            .collect()
    }

    pub fn from_flat(flat: BTreeMap<String, String>) -> Result<Self, QualityError> {
        let mut kb = Self::default();
        for (key, value) in flat {
            let (stem, path) = key
                .split_once('|')
                .ok_or_else(|| QualityError::KbFormat(format!("key without stem separator: {key}")))?;
            kb.entries
                .entry(stem.to_string())
                .or_default()
                .insert(path.to_string(), KbEntry { value, learned_at: None });
        }
        Ok(kb)
    }

    /// Loads a KB file; a missing file is an empty KB.
    pub fn load(path: &Path) -> Result<Self, QualityError> {
        match std::fs::read(path) {
            Ok(bytes) => {
                let flat: BTreeMap<String, String> =
                    serde_json::from_slice(&bytes).map_err(|e| QualityError::KbFormat(e.to_string()))?;
                Self::from_flat(flat)
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(e.into()),
        }
    }

    /// Writes to a temporary file beside `path`, then renames it over.
    pub fn save(&self, path: &Path) -> Result<(), QualityError> {
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        std::fs::create_dir_all(dir)?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        serde_json::to_writer_pretty(&mut tmp, &self.to_flat()).map_err(|e| QualityError::KbFormat(e.to_string()))?;
        tmp.write_all(b"\n")?;
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| QualityError::Io(e.error))?;
        Ok(())
    }
}

/// A KB file with exclusive read-modify-write access through a lock file.
#[derive(Debug, Clone)]
pub struct KbStore {
    path: PathBuf,
    timeout: Duration,
}

struct LockGuard(PathBuf);

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.0);
    }
}

impl KbStore {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        KbStore { path: path.into(), timeout: Duration::from_secs(30) }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn load(&self) -> Result<VariabilityKnowledgeBase, QualityError> {
        VariabilityKnowledgeBase::load(&self.path)
    }

    fn lock(&self) -> Result<LockGuard, QualityError> {
        let mut lock = self.path.clone().into_os_string();
        lock.push(".lock");
        let lock = PathBuf::from(lock);
        if let Some(dir) = lock.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let start = Instant::now();
        loop {
            match std::fs::OpenOptions::new().write(true).create_new(true).open(&lock) {
                Ok(_) => return Ok(LockGuard(lock)),
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    if start.elapsed() > self.timeout {
                        return Err(QualityError::KbLocked(lock));
                    }
                    std::thread::sleep(Duration::from_millis(10));
                }
                Err(e) => return Err(e.into()),
            }
        }
    }

    /// Loads, applies `f` and saves while holding the lock.
    pub fn update<R>(
        &self,
        f: impl FnOnce(&mut VariabilityKnowledgeBase) -> Result<R, QualityError>,
    ) -> Result<R, QualityError> {
        let _guard = self.lock()?;
        let mut kb = self.load()?;
        let out = f(&mut kb)?;
        kb.save(&self.path)?;
        Ok(out)
    }
}
