use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Component, Path};

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde_yaml::Value;

use super::{scalar_text, ChartError, ChartMetadata, ChartPackage, ChartRef, Template};
use crate::yaml::ValueTree;

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

/// Parses a gzipped chart tarball. All entries must live under one
/// top-level directory, which becomes the package root.
pub fn parse_chart_archive(archive: &[u8]) -> Result<ChartPackage, ChartError> {
    if !archive.starts_with(&GZIP_MAGIC) {
        return Err(ChartError::MalformedArchive("not gzip data".into()));
    }
    let mut tar = tar::Archive::new(GzDecoder::new(archive));
    let entries = tar.entries().map_err(|e| ChartError::MalformedArchive(e.to_string()))?;

    let mut root: Option<String> = None;
    let mut files = BTreeMap::new();
    for entry in entries {
        let mut entry = entry.map_err(|e| ChartError::MalformedArchive(e.to_string()))?;
        if !entry.header().entry_type().is_file() {
            continue;
        }
        let path = entry
            .path()
            .map_err(|e| ChartError::MalformedArchive(e.to_string()))?
            .into_owned();
        let mut parts = Vec::new();
        for c in path.components() {
            match c {
                Component::Normal(p) => parts.push(p.to_string_lossy().into_owned()),
                Component::CurDir => {}
                _ => {
                    return Err(ChartError::MalformedArchive(format!(
                        "unsafe entry path {}",
                        path.display()
                    )))
                }
            }
        }
        if parts.len() < 2 {
            return Err(ChartError::MalformedArchive(format!(
                "entry {} is outside a chart directory",
                path.display()
            )));
        }
        let top = parts.remove(0);
        match &root {
            None => root = Some(top),
            Some(r) if *r != top => {
                return Err(ChartError::MalformedArchive(format!(
                    "multiple top-level directories: {r}, {top}"
                )))
            }
            Some(_) => {}
        }
        let mut bytes = Vec::new();
        entry
            .read_to_end(&mut bytes)
            .map_err(|e| ChartError::MalformedArchive(e.to_string()))?;
        files.insert(parts.join("/"), bytes);
    }
    let root = root.ok_or_else(|| ChartError::MalformedArchive("empty archive".into()))?;
    parse_chart_files(&root, files)
}

/// Parses an unpacked chart directory (the one holding `Chart.yaml`).
pub fn parse_chart_dir(dir: &Path) -> Result<ChartPackage, ChartError> {
    let mut files = BTreeMap::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| ChartError::Io(e.into()))?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry.path().strip_prefix(dir).expect("walk stays under root");
        let rel: Vec<String> =
            rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
        files.insert(rel.join("/"), std::fs::read(entry.path())?);
    }
    let root = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "chart".into());
    parse_chart_files(&root, files)
}

/// Builds a package from its files, keyed by path relative to the chart root.
pub fn parse_chart_files(
    root: &str,
    mut files: BTreeMap<String, Vec<u8>>,
) -> Result<ChartPackage, ChartError> {
    let chart_yaml = files.get("Chart.yaml").cloned().ok_or(ChartError::MissingMetadata)?;
    let metadata = ChartMetadata::parse(&String::from_utf8_lossy(&chart_yaml))?;

    let values_raw = files
        .remove("values.yaml")
        .map(|b| String::from_utf8_lossy(&b).into_owned());
    let values = parse_values(values_raw.as_deref())?;

    let template_paths: Vec<String> =
        files.keys().filter(|p| p.starts_with("templates/")).cloned().collect();
    let templates = template_paths
        .into_iter()
        .map(|p| {
            let body = files.remove(&p).expect("key listed above");
            Template { path: p, body: String::from_utf8_lossy(&body).into_owned() }
        })
        .collect();

    let requirements = requirements(&files, &chart_yaml)?;

    Ok(ChartPackage {
        root: root.to_string(),
        file_name: None,
        metadata,
        values,
        values_raw,
        templates,
        requirements,
        files,
    })
}

pub(crate) fn parse_values(raw: Option<&str>) -> Result<ValueTree, ChartError> {
    let Some(raw) = raw else {
        return Ok(Value::Mapping(Default::default()));
    };
    let mut docs = Vec::new();
    for doc in serde_yaml::Deserializer::from_str(raw) {
        let v = serde::Deserialize::deserialize(doc)
            .map_err(|e: serde_yaml::Error| ChartError::ValuesParseError(e.to_string()))?;
        docs.push(v);
    }
    match docs.len() {
        0 => Ok(Value::Mapping(Default::default())),
        1 => match docs.pop().expect("one document") {
            Value::Null => Ok(Value::Mapping(Default::default())),
            v @ Value::Mapping(_) => Ok(v),
            _ => Err(ChartError::ValuesParseError("top level is not a mapping".into())),
        },
        n => Err(ChartError::ValuesParseError(format!("{n} documents, expected one"))),
    }
}

/// Dependencies from `requirements.yaml`, else the `dependencies` list of
/// `Chart.yaml`, else the bundled `charts/*.tgz` archives.
fn requirements(
    files: &BTreeMap<String, Vec<u8>>,
    chart_yaml: &[u8],
) -> Result<Vec<ChartRef>, ChartError> {
    let from_list = |v: &Value| -> Vec<ChartRef> {
        v.get("dependencies")
            .and_then(Value::as_sequence)
            .map(|deps| {
                deps.iter()
                    .filter_map(|d| {
                        let name = d.get("name").and_then(scalar_text)?;
                        let version = d.get("version").and_then(scalar_text).unwrap_or_default();
                        Some(ChartRef::new(name, version))
                    })
                    .collect()
            })
            .unwrap_or_default()
    };

    let req_file = files
        .iter()
        .find(|(p, _)| *p == "requirements.yaml" || *p == "requirements.yml");
    if let Some((_, raw)) = req_file {
        let v: Value = serde_yaml::from_slice(raw)
            .map_err(|e| ChartError::MetadataParseError(format!("requirements: {e}")))?;
        return Ok(from_list(&v));
    }
    if let Ok(v) = serde_yaml::from_slice::<Value>(chart_yaml) {
        let deps = from_list(&v);
        if !deps.is_empty() {
            return Ok(deps);
        }
    }
    Ok(files
        .keys()
        .filter_map(|p| p.strip_prefix("charts/"))
        .filter(|p| !p.contains('/') && p.ends_with(".tgz"))
        .map(ChartRef::from_file_name)
        .collect())
}

pub(crate) fn pack(root: &str, files: &BTreeMap<String, Vec<u8>>) -> Result<Vec<u8>, ChartError> {
    let enc = GzEncoder::new(Vec::new(), Compression::default());
    let mut builder = tar::Builder::new(enc);
    for (path, bytes) in files {
        let mut header = tar::Header::new_gnu();
        header.set_size(bytes.len() as u64);
        header.set_mode(0o644);
        header.set_mtime(0);
        header.set_cksum();
        builder.append_data(&mut header, format!("{root}/{path}"), bytes.as_slice())?;
    }
    let enc = builder.into_inner()?;
    Ok(enc.finish()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn files(entries: &[(&str, &str)]) -> BTreeMap<String, Vec<u8>> {
        entries.iter().map(|(p, b)| (p.to_string(), b.as_bytes().to_vec())).collect()
    }

    fn redis() -> BTreeMap<String, Vec<u8>> {
        files(&[
            ("Chart.yaml", "name: redis\nversion: 1.0.0\n"),
            ("values.yaml", "app: web\n"),
            ("templates/a.yaml", "name: {{ .Values.app }}\n"),
            ("templates/b.yaml", "kind: Service\n"),
        ])
    }

    #[test]
    fn minimal_chart() {
        let archive = pack("redis", &redis()).unwrap();
        let pkg = parse_chart_archive(&archive).unwrap();
        assert_eq!(pkg.metadata.name, "redis");
        assert_eq!(pkg.templates.len(), 2);
        assert!(pkg.requirements.is_empty());
        assert_eq!(pkg.templates[0].body, "name: {{ .Values.app }}\n");
        assert_eq!(pkg.root, "redis");
    }

    #[test]
    fn missing_chart_yaml() {
        let mut f = redis();
        f.remove("Chart.yaml");
        let archive = pack("redis", &f).unwrap();
        assert!(matches!(parse_chart_archive(&archive), Err(ChartError::MissingMetadata)));
    }

    #[test]
    fn not_gzip() {
        assert!(matches!(parse_chart_archive(b"hello"), Err(ChartError::MalformedArchive(_))));
        let mut bad = GZIP_MAGIC.to_vec();
        bad.extend_from_slice(b"garbage");
        assert!(matches!(parse_chart_archive(&bad), Err(ChartError::MalformedArchive(_))));
    }

    #[test]
    fn missing_values_is_empty_tree() {
        let mut f = redis();
        f.remove("values.yaml");
        let pkg = parse_chart_files("redis", f).unwrap();
        assert_eq!(pkg.values, Value::Mapping(Default::default()));
        assert_eq!(pkg.values_raw, None);
    }

    #[test]
    fn values_must_be_single_document() {
        let mut f = redis();
        f.insert("values.yaml".into(), b"a: 1\n---\nb: 2\n".to_vec());
        assert!(matches!(parse_chart_files("redis", f), Err(ChartError::ValuesParseError(_))));
    }

    #[test]
    fn requirements_and_bundled_subchart() {
        let sub = pack("common", &files(&[("Chart.yaml", "name: common\nversion: 0.1.0\n")])).unwrap();
        let mut f = redis();
        f.insert(
            "requirements.yaml".into(),
            b"dependencies:\n- name: common\n  version: 0.1.0\n  repository: file://../common\n".to_vec(),
        );
        f.insert("charts/common-0.1.0.tgz".into(), sub);
        let archive = pack("redis", &f).unwrap();

        // archive-listing oracle: the bundled subchart is really inside the tarball
        let mut listing = tar::Archive::new(GzDecoder::new(archive.as_slice()));
        let names: Vec<String> = listing
            .entries()
            .unwrap()
            .map(|e| e.unwrap().path().unwrap().to_string_lossy().into_owned())
            .collect();
        assert!(names.contains(&"redis/charts/common-0.1.0.tgz".to_string()));
        assert!(names.contains(&"redis/requirements.yaml".to_string()));

        let pkg = parse_chart_archive(&archive).unwrap();
        assert_eq!(pkg.requirements, vec![ChartRef::new("common", "0.1.0")]);
        assert!(pkg.files.contains_key("charts/common-0.1.0.tgz"));
    }

    #[test]
    fn bundled_subchart_without_requirements() {
        let mut f = redis();
        f.insert("charts/common-0.1.0.tgz".into(), vec![0]);
        let pkg = parse_chart_files("redis", f).unwrap();
        assert_eq!(pkg.requirements, vec![ChartRef::from_file_name("common-0.1.0.tgz")]);
    }

    #[test]
    fn rejects_multiple_roots() {
        let enc = GzEncoder::new(Vec::new(), Compression::default());
        let mut b = tar::Builder::new(enc);
        for p in ["a/Chart.yaml", "b/values.yaml"] {
            let mut h = tar::Header::new_gnu();
            h.set_size(1);
            h.set_cksum();
            b.append_data(&mut h, p, &b"x"[..]).unwrap();
        }
        let bytes = b.into_inner().unwrap().finish().unwrap();
        assert!(matches!(parse_chart_archive(&bytes), Err(ChartError::MalformedArchive(_))));
    }

    #[test]
    fn dir_round_trip() {
        let pkg = parse_chart_files("redis", redis()).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        let dir = pkg.write_to_dir(tmp.path()).unwrap();
        let back = parse_chart_dir(&dir).unwrap();
        assert_eq!(back.metadata, pkg.metadata);
        assert_eq!(back.templates, pkg.templates);
        assert_eq!(back.values, pkg.values);
    }
}
