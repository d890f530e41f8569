use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::IngestError;
use crate::chart::{parse_chart_archive, parse_chart_dir, ChartPackage};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestFailure {
    pub location: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct LocalCharts {
    /// Packages with the path they were read from and, for archives, the
    /// archive bytes.
    pub packages: Vec<(PathBuf, ChartPackage, Option<Vec<u8>>)>,
    pub failures: Vec<IngestFailure>,
}

fn looks_like_chart(dir: &Path) -> bool {
    dir.join("Chart.yaml").is_file() || dir.join("values.yaml").is_file() || dir.join("templates").is_dir()
}

/// Finds unpacked chart directories and `.tgz` archives below `root`.
/// Subcharts inside a chart are part of that chart and not listed again.
pub fn ingest_local_dir(root: &Path) -> Result<LocalCharts, IngestError> {
    if !root.exists() {
        return Err(IngestError::NotFound(root.to_path_buf()));
    }
    let mut out = LocalCharts::default();
    let mut walker = WalkDir::new(root).sort_by_file_name().into_iter();
    while let Some(entry) = walker.next() {
        let entry = match entry {
            Ok(e) => e,
            Err(e) => {
                out.failures.push(IngestFailure {
                    location: e.path().map_or_else(|| root.display().to_string(), |p| p.display().to_string()),
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let path = entry.path();
        if entry.file_type().is_dir() {
            if looks_like_chart(path) {
                match parse_chart_dir(path) {
                    Ok(pkg) => out.packages.push((path.to_path_buf(), pkg, None)),
                    Err(e) => out.failures.push(IngestFailure { location: path.display().to_string(), reason: e.to_string() }),
                }
                walker.skip_current_dir();
            }
        } else if path.extension().is_some_and(|e| e == "tgz") {
            let parsed = std::fs::read(path).map_err(crate::chart::ChartError::from).and_then(|bytes| {
                let mut pkg = parse_chart_archive(&bytes)?;
                pkg.file_name = path.file_name().map(|f| f.to_string_lossy().into_owned());
                Ok((pkg, bytes))
            });
            match parsed {
                Ok((pkg, bytes)) => out.packages.push((path.to_path_buf(), pkg, Some(bytes))),
                Err(e) => out.failures.push(IngestFailure { location: path.display().to_string(), reason: e.to_string() }),
            }
        }
    }
    Ok(out)
}
