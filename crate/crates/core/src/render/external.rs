use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::Command;
use std::sync::{Condvar, Mutex};

use super::{FailureCategory, Overrides, RenderError, RenderFailure, Renderer, TemplateOutput};
use crate::chart::ChartPackage;
use crate::yaml::ValueTree;

/// Environment variable naming the external renderer binary.
pub const RENDERER_ENV: &str = "CHARTQA_RENDERER";

struct Slots {
    free: Mutex<usize>,
    cond: Condvar,
}

struct SlotGuard<'a>(&'a Slots);

impl Slots {
    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().expect("slot lock");
        while *free == 0 {
            free = self.cond.wait(free).expect("slot lock");
        }
        *free -= 1;
        SlotGuard(self)
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("slot lock") += 1;
        self.0.cond.notify_one();
    }
}

/// Runs `<bin> template <release> <chart-dir> --values <file>` and splits
/// the output on its `# Source:` markers.
pub struct ExternalRenderer {
    binary: PathBuf,
    release_name: String,
    slots: Slots,
}

impl ExternalRenderer {
    pub fn new(binary: impl Into<PathBuf>) -> Self {
        let bound = std::thread::available_parallelism().map_or(4, |n| n.get());
        ExternalRenderer {
            binary: binary.into(),
            release_name: "release-name".into(),
            slots: Slots { free: Mutex::new(bound), cond: Condvar::new() },
        }
    }

    /// Binary from [`RENDERER_ENV`], falling back to `helm` on `PATH`.
    pub fn from_env() -> Self {
        Self::new(std::env::var_os(RENDERER_ENV).map_or_else(|| PathBuf::from("helm"), PathBuf::from))
    }

    /// Caps the number of concurrently running subprocesses.
    pub fn with_max_parallel(mut self, n: usize) -> Self {
        self.slots = Slots { free: Mutex::new(n.max(1)), cond: Condvar::new() };
        self
    }

    pub fn binary(&self) -> &std::path::Path {
        &self.binary
    }
}

impl Renderer for ExternalRenderer {
    fn name(&self) -> &'static str {
        "external"
    }

    fn render_templates(
        &self,
        pkg: &ChartPackage,
        values: &ValueTree,
        _value_overrides: &Overrides,
    ) -> Result<Vec<(String, TemplateOutput)>, RenderError> {
        let dir = tempfile::tempdir()?;
        let chart_dir = pkg
            .write_to_dir(dir.path())
            .map_err(|e| RenderError::Io(std::io::Error::other(e.to_string())))?;
        let values_file = dir.path().join("chartqa-values.yaml");
        std::fs::write(&values_file, serde_yaml::to_string(values).expect("values serialize"))?;

        let output = {
            let _slot = self.slots.acquire();
            Command::new(&self.binary)
                .arg("template")
                .arg(&self.release_name)
                .arg(&chart_dir)
                .arg("--values")
                .arg(&values_file)
                .output()
        };
        let output = match output {
            Ok(o) => o,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(RenderError::EngineUnavailable(format!("{} not found", self.binary.display())))
            }
            Err(e) => return Err(e.into()),
        };

        let chart_prefix = format!("{}/", pkg.metadata.name);
        if output.status.success() {
            let stdout = String::from_utf8_lossy(&output.stdout);
            let mut sections = split_sources(&stdout, &chart_prefix);
            let mut out = Vec::new();
            for t in pkg.templates.iter().filter(|t| t.is_manifest()) {
                out.push((t.path.clone(), Ok(sections.remove(&t.path).unwrap_or_default())));
            }
            out.extend(sections.into_iter().map(|(p, body)| (p, Ok(body))));
            out.sort_by(|a, b| a.0.cmp(&b.0));
            Ok(out)
        } else {
            let stderr = String::from_utf8_lossy(&output.stderr);
            Ok(parse_failures(&stderr, &chart_prefix)
                .into_iter()
                .map(|f| (f.template_path.clone(), Err(f)))
                .collect())
        }
    }
}

/// Groups output by source template. Repeated markers for one template
/// become consecutive documents of that template.
fn split_sources(text: &str, chart_prefix: &str) -> BTreeMap<String, String> {
    let mut out: BTreeMap<String, String> = BTreeMap::new();
    let mut current: Option<String> = None;
    for line in text.split_inclusive('\n') {
        if let Some(src) = line.trim_end().strip_prefix("# Source: ") {
            let path = src.strip_prefix(chart_prefix).unwrap_or(src).to_string();
            let body = out.entry(path.clone()).or_default();
            if !body.is_empty() {
                body.push_str("---\n");
            }
            current = Some(path);
        } else if line.trim_end() == "---" {
            continue;
        } else if let Some(path) = &current {
            out.get_mut(path).expect("section exists").push_str(line);
        }
    }
    out
}

fn categorize(msg: &str) -> FailureCategory {
    let m = msg.to_ascii_lowercase();
    if ["nil pointer", "no entry for key", "required", "<no value>", "missing"].iter().any(|k| m.contains(k)) {
        FailureCategory::MissingValue
    } else if ["parse error", "yaml", "unmarshal", "unexpected", "unclosed"].iter().any(|k| m.contains(k)) {
        FailureCategory::SyntaxError
    } else {
        FailureCategory::EngineUnsupported
    }
}

/// One failure per error line; the template path is taken from the
/// `template: <chart>/<path>:<line>` fragment when present.
fn parse_failures(stderr: &str, chart_prefix: &str) -> Vec<RenderFailure> {
    let mut out: Vec<RenderFailure> = Vec::new();
    for line in stderr.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let path = line
            .find("template: ")
            .map(|i| &line[i + "template: ".len()..])
            .and_then(|rest| rest.split(':').next())
            .map(|p| p.strip_prefix(chart_prefix).unwrap_or(p).to_string())
            .unwrap_or_default();
        if out.iter().any(|f| f.template_path == path) {
            continue;
        }
        out.push(RenderFailure::new(&path, categorize(line), line));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::{flatten_documents, render_chart};
    use std::os::unix::fs::PermissionsExt;

    fn script(dir: &std::path::Path, body: &str) -> PathBuf {
        let p = dir.join("fake-renderer");
        std::fs::write(&p, format!("#!/bin/sh\n{body}\n")).unwrap();
        std::fs::set_permissions(&p, std::fs::Permissions::from_mode(0o755)).unwrap();
        p
    }

    fn pkg() -> ChartPackage {
        let meta = crate::chart::ChartMetadata {
            name: "demo".into(),
            version: "0.1.0".into(),
            description: None,
            maintainers: vec![],
            icon: None,
        };
        let templates = vec![
            crate::chart::Template::new("templates/a.yaml", "a: 1"),
            crate::chart::Template::new("templates/b.yaml", "b: 1"),
        ];
        ChartPackage::new(meta, Some("k: v\n"), templates).unwrap()
    }

    #[test]
    fn splits_sources_into_documents() {
        let tmp = tempfile::tempdir().unwrap();
        let bin = script(
            tmp.path(),
            "cat <<'EOF'\n---\n# Source: demo/templates/a.yaml\na: 1\n---\n# Source: demo/templates/a.yaml\na: 2\n---\n# Source: demo/templates/b.yaml\nb: x\nEOF",
        );
        let out = render_chart(&pkg(), &Overrides::new(), &ExternalRenderer::new(bin)).unwrap();
        assert!(out.failures.is_empty());
        let flat: Vec<_> = flatten_documents(&out.manifests).into_iter().map(|p| p.0).collect();
        assert_eq!(flat, vec!["templates/a.yaml#0/a", "templates/a.yaml#1/a", "templates/b.yaml#0/b"]);
    }

    #[test]
    fn passes_merged_values() {
        let tmp = tempfile::tempdir().unwrap();
        // echoes the values file back as the rendered template
        let bin = script(tmp.path(), "echo '# Source: demo/templates/a.yaml'; cat \"$5\"");
        let mut ov = Overrides::new();
        ov.insert("extra".into(), "9".into());
        let out = render_chart(&pkg(), &ov, &ExternalRenderer::new(bin)).unwrap();
        let flat = flatten_documents(&out.manifests);
        assert_eq!(
            flat,
            vec![
                ("templates/a.yaml#0/k".to_string(), "v".to_string()),
                ("templates/a.yaml#0/extra".to_string(), "9".to_string())
            ]
        );
    }

    #[test]
    fn nonzero_exit_maps_to_failures() {
        let tmp = tempfile::tempdir().unwrap();
        let bin = script(
            tmp.path(),
            "echo 'Error: template: demo/templates/a.yaml:3:12: executing \"demo/templates/a.yaml\" at <.Values.x.y>: nil pointer evaluating interface {}.y' >&2; exit 1",
        );
        let out = render_chart(&pkg(), &Overrides::new(), &ExternalRenderer::new(bin)).unwrap();
        assert!(out.failed_entirely());
        assert_eq!(out.failures[0].template_path, "templates/a.yaml");
        assert_eq!(out.failures[0].category, FailureCategory::MissingValue);
    }

    #[test]
    fn missing_binary_is_unavailable() {
        let r = ExternalRenderer::new("/nonexistent/renderer-binary");
        let err = render_chart(&pkg(), &Overrides::new(), &r).unwrap_err();
        assert!(matches!(err, RenderError::EngineUnavailable(_)));
    }

    #[test]
    fn categories() {
        assert_eq!(categorize("error converting YAML to JSON"), FailureCategory::SyntaxError);
        assert_eq!(categorize("function \"lookup\" not defined"), FailureCategory::EngineUnsupported);
    }
}
