use std::collections::BTreeMap;

use anyhow::{bail, Context};
use chartqa_core::chart::ChartPackage;
use chartqa_core::ingest::{
    fetch_all, fetch_index, ingest_local_dir, sha256_hex, IngestFailure, RepoIndex, Snapshot, SnapshotStore,
};
use chrono::Utc;

use crate::config::Settings;

/// Charts under analysis together with the index describing them.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub subject: String,
    pub index: RepoIndex,
    /// Sorted by archive file name.
    pub packages: Vec<ChartPackage>,
    pub archives: BTreeMap<String, Vec<u8>>,
    pub failures: Vec<IngestFailure>,
}

impl Corpus {
    pub fn load(settings: &Settings) -> anyhow::Result<Self> {
        let a = &settings.args;
        if let Some(path) = &a.path {
            return Self::from_path(path);
        }
        if let Some(url) = &a.index {
            return Self::from_index(url, settings.jobs);
        }
        if a.snapshot_store.is_some() {
            let (store, id) = open_snapshot(settings)?;
            let snap = store.load(&id)?;
            return Ok(Self::from_snapshot(format!("{}#{id}", store.root().display()), snap));
        }
        bail!("one of --path, --index or --snapshot-store is required")
    }

    pub fn from_path(path: &std::path::Path) -> anyhow::Result<Self> {
        let local = ingest_local_dir(path)?;
        let mut archives = BTreeMap::new();
        let mut packages = Vec::new();
        for (_, pkg, bytes) in local.packages {
            let bytes = match bytes {
                Some(b) => b,
                None => pkg.to_archive().with_context(|| format!("packing {}", pkg.chart_ref().file_name))?,
            };
            archives.insert(pkg.chart_ref().file_name, bytes);
            packages.push(pkg);
        }
        packages.sort_by_key(|p| p.chart_ref().file_name);
        let index = RepoIndex::from_packages(
            &path.display().to_string(),
            packages.iter().map(|p| (p, archives.get(&p.chart_ref().file_name).map(|b| sha256_hex(b)))),
        );
        Ok(Corpus { subject: path.display().to_string(), index, packages, archives, failures: local.failures })
    }

    fn from_index(url: &str, jobs: usize) -> anyhow::Result<Self> {
        let index = fetch_index(url)?;
        log::info!("{url}: {} entries", index.entries.len());
        let archives = fetch_all(&index, jobs)?;
        let snap = Snapshot::in_memory(&Snapshot::id_for(Utc::now()), index, &archives);
        let mut c = Self::from_snapshot(url.to_string(), snap);
        c.archives = archives;
        Ok(c)
    }

    fn from_snapshot(subject: String, snap: Snapshot) -> Self {
        Corpus {
            subject,
            index: snap.index,
            packages: snap.packages.into_values().collect(),
            archives: BTreeMap::new(),
            failures: snap.failures,
        }
    }
}

pub fn open_store(settings: &Settings) -> anyhow::Result<SnapshotStore> {
    let root = settings.args.snapshot_store.as_ref().context("--snapshot-store is required")?;
    Ok(SnapshotStore::open(root)?)
}

fn open_snapshot(settings: &Settings) -> anyhow::Result<(SnapshotStore, String)> {
    let store = open_store(settings)?;
    let id = match &settings.args.snapshot {
        Some(id) => id.clone(),
        None => store.list()?.pop().context("snapshot store is empty")?,
    };
    Ok((store, id))
}
