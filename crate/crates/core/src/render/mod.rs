//! Template rendering behind a pluggable [`Renderer`] contract.
//!
//! Engines turn each manifest template into text. [`render_chart`] owns the
//! shared tail of the pipeline: splitting multi-document output, parsing
//! each document, and injecting post-render leaf overrides.

mod builtin;
mod external;
mod flatten;
pub mod path;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_yaml::Value;

pub use builtin::BuiltinRenderer;
pub use external::{ExternalRenderer, RENDERER_ENV};
pub use flatten::{flatten_document, flatten_documents, set_leaf};

use crate::chart::ChartPackage;
use crate::yaml::{is_blank_document, split_documents, ValueTree};

#[derive(Debug, thiserror::Error)]
pub enum RenderError {
    #[error("renderer unavailable: {0}")]
    EngineUnavailable(String),
    #[error("renderer i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FailureCategory {
    MissingValue,
    SyntaxError,
    EngineUnsupported,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RenderFailure {
    pub template_path: String,
    pub reason: String,
    pub category: FailureCategory,
}

impl RenderFailure {
    pub fn new(path: &str, category: FailureCategory, reason: impl Into<String>) -> Self {
        RenderFailure { template_path: path.to_string(), reason: reason.into(), category }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedDocument {
    pub template_path: String,
    pub doc_index: usize,
    pub body: ValueTree,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RenderedManifestSet {
    pub documents: Vec<RenderedDocument>,
    /// Leaf overrides that matched a rendered key path.
    pub render_overrides_used: BTreeMap<String, String>,
}

impl RenderedManifestSet {
    /// Documents serialized in order, each preceded by a `# Source:` line.
    /// Two sets are equal document-wise iff their canonical texts are equal.
    pub fn to_canonical_yaml(&self) -> String {
        let mut out = String::new();
        for d in &self.documents {
            out.push_str("---\n");
            out.push_str(&format!("# Source: {}#{}\n", d.template_path, d.doc_index));
            out.push_str(&serde_yaml::to_string(&d.body).expect("rendered value serializes"));
        }
        out
    }
}

/// Result of one render: whatever rendered, plus per-template failures.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RenderOutcome {
    pub manifests: RenderedManifestSet,
    pub failures: Vec<RenderFailure>,
}

impl RenderOutcome {
    /// True when there were failures and nothing rendered.
    pub fn failed_entirely(&self) -> bool {
        self.manifests.documents.is_empty() && !self.failures.is_empty()
    }
}

/// Key-path → text overrides.
///
/// Keys containing `#` are rendered key paths (see [`path`]) and replace the
/// leaf after rendering. Other keys are dotted `values.yaml` paths (`a.b`)
/// and take precedence over the chart's values before rendering.
pub type Overrides = BTreeMap<String, String>;

/// Text produced for one template, or why it could not be produced.
pub type TemplateOutput = Result<String, RenderFailure>;

/// A template engine.
pub trait Renderer: Send + Sync {
    fn name(&self) -> &'static str;

    /// Renders every manifest template of `pkg` to text, with `values`
    /// already holding any value overrides.
    fn render_templates(
        &self,
        pkg: &ChartPackage,
        values: &ValueTree,
        value_overrides: &Overrides,
    ) -> Result<Vec<(String, TemplateOutput)>, RenderError>;
}

fn is_leaf_override(key: &str) -> bool {
    key.contains('#')
}

/// Applies dotted value overrides (`a.b=text`) to a values tree. Override
/// text is resolved like a plain YAML scalar.
pub fn apply_value_overrides(values: &ValueTree, overrides: &Overrides) -> ValueTree {
    let mut out = values.clone();
    for (key, text) in overrides.iter().filter(|(k, _)| !is_leaf_override(k)) {
        let mut node = &mut out;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            if !node.is_mapping() {
                *node = Value::Mapping(Default::default());
            }
            let map = node.as_mapping_mut().expect("just ensured mapping");
            let k = Value::String(part.to_string());
            if i + 1 == parts.len() {
                map.insert(k, crate::yaml::resolve_plain(text));
                break;
            }
            node = map.entry(k).or_insert(Value::Mapping(Default::default()));
        }
    }
    out
}

/// Renders a chart: value overrides go in before rendering, leaf overrides
/// are injected afterwards. Templates that fail are reported in
/// `failures`; everything else is still returned.
pub fn render_chart(
    pkg: &ChartPackage,
    overrides: &Overrides,
    engine: &dyn Renderer,
) -> Result<RenderOutcome, RenderError> {
    let values = apply_value_overrides(&pkg.values, overrides);
    let outputs = engine.render_templates(pkg, &values, overrides)?;

    let mut outcome = RenderOutcome::default();
    for (template_path, output) in outputs {
        let text = match output {
            Ok(t) => t,
            Err(f) => {
                outcome.failures.push(f);
                continue;
            }
        };
        let mut docs = Vec::new();
        let mut failed = None;
        for slice in split_documents(&text) {
            if is_blank_document(slice.text) {
                continue;
            }
            match serde_yaml::from_str::<Value>(slice.text) {
                Ok(Value::Null) => {}
                Ok(body) => docs.push(RenderedDocument {
                    template_path: template_path.clone(),
                    doc_index: slice.index,
                    body,
                }),
                Err(e) => {
                    failed = Some(RenderFailure::new(
                        &template_path,
                        FailureCategory::SyntaxError,
                        format!("rendered output is not YAML: {e}"),
                    ));
                    break;
                }
            }
        }
        match failed {
            Some(f) => outcome.failures.push(f),
            None => outcome.manifests.documents.extend(docs),
        }
    }

    for (key, text) in overrides.iter().filter(|(k, _)| is_leaf_override(k)) {
        if set_leaf(&mut outcome.manifests.documents, key, text) {
            outcome.manifests.render_overrides_used.insert(key.clone(), text.clone());
        }
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{ChartMetadata, Template};

    pub(crate) fn package(values: &str, templates: &[(&str, &str)]) -> ChartPackage {
        let meta = ChartMetadata {
            name: "demo".into(),
            version: "0.1.0".into(),
            description: None,
            maintainers: vec![],
            icon: None,
        };
        let templates = templates.iter().map(|(p, b)| Template::new(*p, *b)).collect();
        ChartPackage::new(meta, Some(values), templates).unwrap()
    }

    #[test]
    fn plain_substitution() {
        let pkg = package("app: web\n", &[("templates/t.yaml", "name: {{ .Values.app }}\n")]);
        let out = render_chart(&pkg, &Overrides::new(), &BuiltinRenderer::seeded(1)).unwrap();
        assert!(out.failures.is_empty());
        assert_eq!(out.manifests.documents.len(), 1);
        assert_eq!(out.manifests.documents[0].body, serde_yaml::from_str::<Value>("name: web").unwrap());
    }

    #[test]
    fn value_overrides_take_precedence() {
        let pkg = package("app: web\n", &[("templates/t.yaml", "name: {{ .Values.app }}\nport: {{ .Values.svc.port }}\n")]);
        let mut ov = Overrides::new();
        ov.insert("app".into(), "api".into());
        ov.insert("svc.port".into(), "8080".into());
        let out = render_chart(&pkg, &ov, &BuiltinRenderer::seeded(1)).unwrap();
        assert_eq!(
            out.manifests.documents[0].body,
            serde_yaml::from_str::<Value>("name: api\nport: 8080").unwrap()
        );
    }

    #[test]
    fn random_values_differ_between_renders() {
        let pkg = package(
            "",
            &[("templates/s.yaml", "kind: Secret\ndata:\n  password: {{ randAlphaNum 16 }}\n  user: admin\n")],
        );
        let engine = BuiltinRenderer::new();
        let a = render_chart(&pkg, &Overrides::new(), &engine).unwrap();
        let b = render_chart(&pkg, &Overrides::new(), &engine).unwrap();
        let fa = flatten_documents(&a.manifests);
        let fb = flatten_documents(&b.manifests);
        let differing: Vec<_> = fa.iter().zip(&fb).filter(|(x, y)| x != y).map(|(x, _)| x.0.clone()).collect();
        assert_eq!(differing, vec!["templates/s.yaml#0/data/password".to_string()]);
    }

    #[test]
    fn leaf_overrides_are_injected() {
        let pkg = package("", &[("templates/s.yaml", "password: {{ randAlphaNum 8 }}\n")]);
        let mut ov = Overrides::new();
        ov.insert("templates/s.yaml#0/password".into(), "fixed".into());
        ov.insert("templates/s.yaml#0/absent".into(), "x".into());
        let engine = BuiltinRenderer::new();
        let a = render_chart(&pkg, &ov, &engine).unwrap();
        let b = render_chart(&pkg, &ov, &engine).unwrap();
        assert_eq!(a.manifests.to_canonical_yaml(), b.manifests.to_canonical_yaml());
        assert_eq!(a.manifests.render_overrides_used.len(), 1);
    }

    #[test]
    fn missing_value_is_reported_and_others_render() {
        let pkg = package(
            "",
            &[("templates/a.yaml", "pw: {{ .Values.password }}\n"), ("templates/b.yaml", "ok: yes\n")],
        );
        let out = render_chart(&pkg, &Overrides::new(), &BuiltinRenderer::seeded(1)).unwrap();
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.failures[0].category, FailureCategory::MissingValue);
        assert_eq!(out.failures[0].template_path, "templates/a.yaml");
        assert_eq!(out.manifests.documents.len(), 1);
    }

    #[test]
    fn multi_document_indices() {
        let pkg = package("", &[("templates/m.yaml", "a: 1\n---\nb: 2\n")]);
        let out = render_chart(&pkg, &Overrides::new(), &BuiltinRenderer::seeded(1)).unwrap();
        let idx: Vec<usize> = out.manifests.documents.iter().map(|d| d.doc_index).collect();
        assert_eq!(idx, vec![0, 1]);
    }

    #[test]
    fn non_yaml_output_is_a_syntax_failure() {
        let pkg = package("", &[("templates/bad.yaml", "a: [1, 2\n")]);
        let out = render_chart(&pkg, &Overrides::new(), &BuiltinRenderer::seeded(1)).unwrap();
        assert_eq!(out.failures[0].category, FailureCategory::SyntaxError);
    }
}
