//! Chart domain types: references, maintainers, metadata and unpacked
//! packages, plus corpus-level metrics over chart references.

mod archive;
mod stem;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_yaml::Value;

pub use archive::{parse_chart_archive, parse_chart_dir, parse_chart_files};
pub use stem::{mangle_stem, StemName};

use crate::yaml::ValueTree;

#[derive(Debug, thiserror::Error)]
pub enum ChartError {
    #[error("malformed archive: {0}")]
    MalformedArchive(String),
    #[error("chart has no Chart.yaml")]
    MissingMetadata,
    #[error("invalid Chart.yaml: {0}")]
    MetadataParseError(String),
    #[error("invalid values.yaml: {0}")]
    ValuesParseError(String),
    #[error("empty chart corpus")]
    EmptyCorpus,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Identifies one chart archive: a (name, version) pair and its file name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ChartRef {
    pub name: String,
    pub version: String,
    pub file_name: String,
    pub stem: StemName,
}

impl ChartRef {
    /// Reference with the conventional `name-version.tgz` file name.
    pub fn new(name: impl Into<String>, version: impl Into<String>) -> Self {
        let name = name.into();
        let version = version.into();
        let file_name = if version.is_empty() {
            format!("{name}.tgz")
        } else {
            format!("{name}-{version}.tgz")
        };
        Self::with_file_name(name, version, file_name)
    }

    /// Reference with an explicit file name; a missing `.tgz` suffix is added.
    pub fn with_file_name(
        name: impl Into<String>,
        version: impl Into<String>,
        file_name: impl Into<String>,
    ) -> Self {
        let mut file_name = file_name.into();
        if !file_name.ends_with(".tgz") {
            file_name.push_str(".tgz");
        }
        let stem = mangle_stem(&file_name);
        ChartRef { name: name.into(), version: version.into(), file_name, stem }
    }

    /// Recovers name and version from a `name-version.tgz` file name.
    pub fn from_file_name(file_name: &str) -> Self {
        let (name, version) = stem::split_name_version(file_name);
        Self::with_file_name(name, version, file_name)
    }

    /// File name without the `.tgz` suffix.
    pub fn base_name(&self) -> &str {
        self.file_name.strip_suffix(".tgz").unwrap_or(&self.file_name)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Maintainer {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub email: Option<String>,
}

impl Maintainer {
    pub fn new(name: Option<&str>, email: Option<&str>) -> Self {
        Maintainer { name: name.map(str::to_string), email: email.map(str::to_string) }
    }

    /// A record with neither a usable name nor a usable e-mail.
    pub fn is_blank(&self) -> bool {
        let blank = |v: &Option<String>| v.as_deref().is_none_or(|s| s.trim().is_empty());
        blank(&self.name) && blank(&self.email)
    }

    pub(crate) fn from_yaml(v: &Value) -> Option<Self> {
        let map = v.as_mapping()?;
        let field = |k: &str| map.get(k).and_then(scalar_text);
        Some(Maintainer { name: field("name"), email: field("email") })
    }
}

/// Contents of `Chart.yaml` that the analyses consume. Unknown fields are
/// tolerated and dropped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChartMetadata {
    pub name: String,
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default)]
    pub maintainers: Vec<Maintainer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub icon: Option<String>,
}

/// Text of a scalar YAML node; numbers and booleans use their plain form so
/// `version: 1.0` yields `"1.0"`.
pub(crate) fn scalar_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Tagged(t) => scalar_text(&t.value),
        _ => None,
    }
}

impl ChartMetadata {
    pub fn parse(text: &str) -> Result<Self, ChartError> {
        let doc: Value =
            serde_yaml::from_str(text).map_err(|e| ChartError::MetadataParseError(e.to_string()))?;
        let map = doc
            .as_mapping()
            .ok_or_else(|| ChartError::MetadataParseError("not a mapping".into()))?;
        let required = |k: &str| {
            map.get(k)
                .and_then(scalar_text)
                .filter(|s| !s.trim().is_empty())
                .ok_or_else(|| ChartError::MetadataParseError(format!("missing `{k}`")))
        };
        let optional = |k: &str| map.get(k).and_then(scalar_text);
        let maintainers = match map.get("maintainers") {
            Some(Value::Sequence(seq)) => seq.iter().filter_map(Maintainer::from_yaml).collect(),
            _ => Vec::new(),
        };
        Ok(ChartMetadata {
            name: required("name")?,
            version: required("version")?,
            description: optional("description"),
            maintainers,
            icon: optional("icon"),
        })
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("metadata serializes")
    }
}

/// One template file, path relative to the chart root (`templates/...`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub path: String,
    pub body: String,
}

impl Template {
    pub fn new(path: impl Into<String>, body: impl Into<String>) -> Self {
        Template { path: path.into(), body: body.into() }
    }

    /// Manifest templates are YAML files that do not start with `_`.
    pub fn is_manifest(&self) -> bool {
        let file = self.path.rsplit('/').next().unwrap_or(&self.path);
        !file.starts_with('_') && (file.ends_with(".yaml") || file.ends_with(".yml"))
    }
}

/// An unpacked chart.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPackage {
    /// Top-level directory name inside the archive.
    pub root: String,
    /// Archive file name when known; otherwise derived from metadata.
    pub file_name: Option<String>,
    pub metadata: ChartMetadata,
    pub values: ValueTree,
    /// `values.yaml` as stored, needed for byte-exact rewrites.
    pub values_raw: Option<String>,
    pub templates: Vec<Template>,
    pub requirements: Vec<ChartRef>,
    /// Every other file keyed by relative path, including the original
    /// `Chart.yaml` bytes, subcharts and docs.
    pub files: BTreeMap<String, Vec<u8>>,
}

impl ChartPackage {
    /// Package built from parts, mostly for fixtures.
    pub fn new(metadata: ChartMetadata, values_raw: Option<&str>, templates: Vec<Template>) -> Result<Self, ChartError> {
        let values = archive::parse_values(values_raw)?;
        Ok(ChartPackage {
            root: metadata.name.clone(),
            file_name: None,
            metadata,
            values,
            values_raw: values_raw.map(str::to_string),
            templates,
            requirements: Vec::new(),
            files: BTreeMap::new(),
        })
    }

    pub fn chart_ref(&self) -> ChartRef {
        match &self.file_name {
            Some(f) => ChartRef::with_file_name(&self.metadata.name, &self.metadata.version, f),
            None => ChartRef::new(&self.metadata.name, &self.metadata.version),
        }
    }

    pub fn stem(&self) -> StemName {
        self.chart_ref().stem
    }

    pub fn template(&self, path: &str) -> Option<&Template> {
        self.templates.iter().find(|t| t.path == path)
    }

    /// Replaces `values.yaml` text and re-parses it.
    pub fn set_values_raw(&mut self, raw: String) -> Result<(), ChartError> {
        self.values = archive::parse_values(Some(&raw))?;
        self.values_raw = Some(raw);
        Ok(())
    }

    /// All files of the package keyed by path relative to the chart root.
    pub fn to_files(&self) -> BTreeMap<String, Vec<u8>> {
        let mut out = self.files.clone();
        out.entry("Chart.yaml".into()).or_insert_with(|| self.metadata.to_yaml().into_bytes());
        if let Some(v) = &self.values_raw {
            out.insert("values.yaml".into(), v.clone().into_bytes());
        }
        for t in &self.templates {
            out.insert(t.path.clone(), t.body.clone().into_bytes());
        }
        out
    }

    /// Packs the chart as a gzipped tar with a single top-level directory.
    pub fn to_archive(&self) -> Result<Vec<u8>, ChartError> {
        archive::pack(&self.root, &self.to_files())
    }

    /// Writes the chart under `dir/<root>/` and returns that directory.
    pub fn write_to_dir(&self, dir: &std::path::Path) -> Result<std::path::PathBuf, ChartError> {
        let root = dir.join(&self.root);
        for (path, bytes) in self.to_files() {
            let target = root.join(&path);
            if let Some(parent) = target.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(target, bytes)?;
        }
        Ok(root)
    }
}

/// Excess of chart files over distinct stems, as a fraction of the number
/// of distinct stems.
pub fn versioning_overhead(charts: &[ChartRef]) -> Result<f64, ChartError> {
    if charts.is_empty() {
        return Err(ChartError::EmptyCorpus);
    }
    let stems: BTreeSet<&StemName> = charts.iter().map(|c| &c.stem).collect();
    Ok((charts.len() - stems.len()) as f64 / stems.len() as f64)
}
