use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_yaml::Value;

use super::IngestError;
use crate::chart::{scalar_text, ChartPackage, ChartRef, Maintainer};

/// One version record of a repository index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub chart: ChartRef,
    pub maintainers: Vec<Maintainer>,
    pub urls: Vec<String>,
    pub digest: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoIndex {
    pub source: String,
    pub fetched_at: DateTime<Utc>,
    pub entries: Vec<IndexEntry>,
}

fn file_name_from_urls(urls: &[String]) -> Option<String> {
    urls.iter()
        .filter_map(|u| u.split(['?', '#']).next()?.rsplit('/').next())
        .find(|f| f.ends_with(".tgz"))
        .map(str::to_string)
}

/// Parses an index document with an `entries` mapping of chart name to
/// version records.
pub fn parse_repo_index(raw: &[u8], source: &str) -> Result<RepoIndex, IngestError> {
    let doc: Value = serde_yaml::from_slice(raw).map_err(|e| IngestError::IndexParse(e.to_string()))?;
    let entries = match doc.get("entries") {
        Some(Value::Mapping(m)) => m,
        Some(Value::Null) | None => return Err(IngestError::EmptyIndex),
        Some(_) => return Err(IngestError::IndexParse("`entries` is not a mapping".into())),
    };
    let mut out = Vec::new();
    for (key, records) in entries {
        let key = scalar_text(key).unwrap_or_default();
        let records = match records {
            Value::Sequence(s) => s,
            Value::Null => continue,
            _ => return Err(IngestError::IndexParse(format!("entries.{key} is not a list"))),
        };
        for rec in records {
            let field = |k: &str| rec.get(k).and_then(scalar_text);
            let name = field("name").unwrap_or_else(|| key.clone());
            let version = field("version")
                .ok_or_else(|| IngestError::IndexParse(format!("entries.{key}: record without version")))?;
            let urls: Vec<String> = match rec.get("urls") {
                Some(Value::Sequence(s)) => s.iter().filter_map(scalar_text).collect(),
                _ => Vec::new(),
            };
            let maintainers = match rec.get("maintainers") {
                Some(Value::Sequence(s)) => s.iter().filter_map(Maintainer::from_yaml).collect(),
                _ => Vec::new(),
            };
            let chart = match file_name_from_urls(&urls) {
                Some(f) => ChartRef::with_file_name(&name, &version, f),
                None => ChartRef::new(&name, &version),
            };
            out.push(IndexEntry { chart, maintainers, urls, digest: field("digest") });
        }
    }
    if out.is_empty() {
        return Err(IngestError::EmptyIndex);
    }
    Ok(RepoIndex { source: source.to_string(), fetched_at: Utc::now(), entries: out })
}

impl RepoIndex {
    /// Index describing local packages, with digests of their archives.
    pub fn from_packages<'a>(source: &str, packages: impl IntoIterator<Item = (&'a ChartPackage, Option<String>)>) -> Self {
        let entries = packages
            .into_iter()
            .map(|(p, digest)| {
                let chart = p.chart_ref();
                IndexEntry {
                    urls: vec![chart.file_name.clone()],
                    chart,
                    maintainers: p.metadata.maintainers.clone(),
                    digest,
                }
            })
            .collect();
        RepoIndex { source: source.to_string(), fetched_at: Utc::now(), entries }
    }

    pub fn charts(&self) -> impl Iterator<Item = &ChartRef> {
        self.entries.iter().map(|e| &e.chart)
    }

    pub fn entry(&self, file_name: &str) -> Option<&IndexEntry> {
        self.entries.iter().find(|e| e.chart.file_name == file_name)
    }

    /// Index document in the usual `apiVersion`/`entries` layout.
    pub fn to_yaml(&self) -> String {
        let mut entries: indexmap::IndexMap<&str, Vec<Value>> = Default::default();
        for e in &self.entries {
            let mut rec = serde_yaml::Mapping::new();
            rec.insert("name".into(), e.chart.name.clone().into());
            rec.insert("version".into(), e.chart.version.clone().into());
            rec.insert("urls".into(), Value::Sequence(e.urls.iter().cloned().map(Value::from).collect()));
            if let Some(d) = &e.digest {
                rec.insert("digest".into(), d.clone().into());
            }
            if !e.maintainers.is_empty() {
                rec.insert("maintainers".into(), serde_yaml::to_value(&e.maintainers).expect("maintainers serialize"));
            }
            entries.entry(e.chart.name.as_str()).or_default().push(Value::Mapping(rec));
        }
        let mut doc = serde_yaml::Mapping::new();
        doc.insert("apiVersion".into(), "v1".into());
        doc.insert("entries".into(), serde_yaml::to_value(entries).expect("entries serialize"));
        serde_yaml::to_string(&doc).expect("index serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const INDEX: &str = "apiVersion: v1\nentries:\n  redis:\n  - name: redis\n    version: 1.0.0\n    urls: [https://example.org/charts/redis-1.0.0.tgz]\n    digest: abc\n    maintainers:\n    - {name: Ann, email: ann@example.org}\n  - name: redis\n    version: 1.1.0\n    urls: [https://example.org/charts/redis-1.1.0.tgz]\n  mysql:\n  - version: 0.3.2\n";

    #[test]
    fn parses_records() {
        let idx = parse_repo_index(INDEX.as_bytes(), "https://example.org/charts").unwrap();
        assert_eq!(idx.entries.len(), 3);
        let stems: std::collections::BTreeSet<_> = idx.charts().map(|c| c.stem.as_str()).collect();
        assert_eq!(stems.len(), 2);
        let r = idx.entry("redis-1.0.0.tgz").unwrap();
        assert_eq!(r.maintainers, vec![Maintainer::new(Some("Ann"), Some("ann@example.org"))]);
        assert_eq!(r.digest.as_deref(), Some("abc"));
        let m = idx.entry("mysql-0.3.2.tgz").unwrap();
        assert!(m.maintainers.is_empty());
        assert_eq!(m.chart.name, "mysql");
    }

    #[test]
    fn record_count_matches_yaml_oracle() {
        let doc: Value = serde_yaml::from_str(INDEX).unwrap();
        let expected: usize =
            doc["entries"].as_mapping().unwrap().values().map(|v| v.as_sequence().unwrap().len()).sum();
        assert_eq!(parse_repo_index(INDEX.as_bytes(), "x").unwrap().entries.len(), expected);
    }

    #[test]
    fn errors() {
        assert!(matches!(parse_repo_index(b"apiVersion: v1\nentries: {}\n", "x"), Err(IngestError::EmptyIndex)));
        assert!(matches!(parse_repo_index(b"apiVersion: v1\n", "x"), Err(IngestError::EmptyIndex)));
        assert!(matches!(parse_repo_index(b"entries: [1", "x"), Err(IngestError::IndexParse(_))));
        assert!(matches!(parse_repo_index(b"entries: {a: [{name: a}]}", "x"), Err(IngestError::IndexParse(_))));
    }

    #[test]
    fn yaml_round_trip() {
        let idx = parse_repo_index(INDEX.as_bytes(), "x").unwrap();
        let back = parse_repo_index(idx.to_yaml().as_bytes(), "x").unwrap();
        assert_eq!(back.entries, idx.entries);
    }
}
