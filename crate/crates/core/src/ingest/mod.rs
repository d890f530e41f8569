//! Repository indices, archive retrieval, local chart discovery and the
//! dated snapshot store.

mod fetch;
mod index;
mod local;
mod snapshot;

use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;

pub use fetch::{fetch_archive, fetch_index, fetch_verified, resolve_location, sha256_hex};
pub use index::{parse_repo_index, IndexEntry, RepoIndex};
pub use local::{ingest_local_dir, IngestFailure, LocalCharts};
pub use snapshot::{Snapshot, SnapshotManifest, SnapshotStore};

use crate::chart::ChartError;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("invalid repository index: {0}")]
    IndexParse(String),
    #[error("repository index has no entries")]
    EmptyIndex,
    #[error("cannot fetch {location}: {reason}")]
    Fetch { location: String, reason: String },
    #[error("checksum mismatch for {location}: expected {expected}, got {actual}")]
    ChecksumMismatch { location: String, expected: String, actual: String },
    #[error("a snapshot for {0} already exists")]
    DuplicateSnapshot(String),
    #[error("snapshot storage: {0}")]
    Storage(String),
    #[error("no such path: {}", .0.display())]
    NotFound(PathBuf),
    #[error(transparent)]
    Chart(#[from] ChartError),
}

/// Downloads every archive named by the index, at most `jobs` at a time.
/// Any failure aborts the whole download.
pub fn fetch_all(index: &RepoIndex, jobs: usize) -> Result<BTreeMap<String, Vec<u8>>, IngestError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| IngestError::Storage(e.to_string()))?;
    pool.install(|| {
        index
            .entries
            .par_iter()
            .filter(|e| !e.urls.is_empty())
            .map(|e| {
                let location = resolve_location(&index.source, &e.urls[0]);
                fetch_verified(&location, e.digest.as_deref()).map(|b| (e.chart.file_name.clone(), b))
            })
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{ChartMetadata, ChartPackage};

    #[test]
    fn fetch_all_reads_relative_urls_and_aborts_on_mismatch() {
        let tmp = tempfile::tempdir().unwrap();
        let meta = ChartMetadata {
            name: "redis".into(),
            version: "1.0.0".into(),
            description: None,
            maintainers: vec![],
            icon: None,
        };
        let bytes = ChartPackage::new(meta, None, vec![]).unwrap().to_archive().unwrap();
        std::fs::write(tmp.path().join("redis-1.0.0.tgz"), &bytes).unwrap();
        let digest = sha256_hex(&bytes);
        let index_text = format!(
            "apiVersion: v1\nentries:\n  redis:\n  - name: redis\n    version: 1.0.0\n    digest: {digest}\n    urls: [redis-1.0.0.tgz]\n"
        );
        std::fs::write(tmp.path().join("index.yaml"), &index_text).unwrap();
        let index = fetch_index(&tmp.path().to_string_lossy()).unwrap();
        let got = fetch_all(&index, 2).unwrap();
        assert_eq!(got["redis-1.0.0.tgz"], bytes);

        let bad = index_text.replace(&digest, "ffff");
        std::fs::write(tmp.path().join("index.yaml"), bad).unwrap();
        let index = fetch_index(&tmp.path().to_string_lossy()).unwrap();
        assert!(matches!(fetch_all(&index, 2), Err(IngestError::ChecksumMismatch { .. })));
    }
}
