use std::collections::{BTreeMap, HashMap};
use std::ops::Range;

use serde::{Deserialize, Serialize};
use serde_yaml::Value;

use super::SuggestError;
use crate::chart::{ChartPackage, ChartRef};
use crate::quality::scan::{LeafStyle, SourceLeaf};
use crate::quality::{candidate, scan_package, DuplicateReport, VariabilityKnowledgeBase};
use crate::render::{render_chart, RenderOutcome, Renderer};
use crate::yaml::{CanonicalScalar, ScalarKind};

pub const SUGGESTIONS_KEY: &str = "suggestions";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occurrence {
    pub template_path: String,
    pub key_path: String,
    /// Bytes replaced in the template; quotes stay outside.
    pub span: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    /// `suggestions.varN`
    pub var_name: String,
    pub value: String,
    pub kind: ScalarKind,
    pub targets: Vec<Occurrence>,
}

impl Assignment {
    pub fn placeholder(&self) -> String {
        format!("{{{{ .Values.{} }}}}", self.var_name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedGroup {
    pub value: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewritePlan {
    pub chart: ChartRef,
    pub assignments: Vec<Assignment>,
    /// YAML appended to `values.yaml`.
    pub values_patch: String,
    /// Groups whose occurrences could not all be located.
    pub skipped: Vec<SkippedGroup>,
}

fn values_patch(assignments: &[Assignment]) -> String {
    if assignments.is_empty() {
        return String::new();
    }
    let mut out = format!("{SUGGESTIONS_KEY}:\n");
    for a in assignments {
        let key = a.var_name.rsplit('.').next().expect("dotted name");
        let scalar = CanonicalScalar::new(a.kind, a.value.clone()).to_yaml_scalar();
        out.push_str(&format!("  {key}: {scalar}\n"));
    }
    out
}

fn has_suggestions_key(values: &Value) -> bool {
    values.get(SUGGESTIONS_KEY).is_some()
}

/// Plans one `suggestions.varN` per duplicate group, largest group first.
pub fn plan_rewrite(pkg: &ChartPackage, report: &DuplicateReport) -> Result<RewritePlan, SuggestError> {
    if report.groups.is_empty() {
        return Err(SuggestError::EmptyReport);
    }
    if has_suggestions_key(&pkg.values) {
        return Err(SuggestError::ValuesConflict(SUGGESTIONS_KEY.into()));
    }
    let (scanned, _) = scan_package(pkg);
    let leaves: HashMap<&str, (&str, &SourceLeaf)> = scanned
        .iter()
        .flat_map(|(path, ls)| ls.iter().map(move |l| (l.key_path.as_str(), (path.as_str(), l))))
        .collect();

    let mut groups: Vec<_> = report.groups.iter().collect();
    groups.sort_by(|a, b| {
        b.count.cmp(&a.count).then_with(|| a.canonical_value.cmp(&b.canonical_value)).then(a.kind.cmp(&b.kind))
    });

    let mut assignments: Vec<Assignment> = Vec::new();
    let mut skipped = Vec::new();
    for g in groups {
        let located: Result<Vec<Occurrence>, String> = g
            .occurrences
            .iter()
            .map(|kp| {
                let (template_path, leaf) = leaves.get(kp.as_str()).ok_or_else(|| format!("{kp}: no such leaf"))?;
                let source = &pkg.template(template_path).expect("scanned template").body;
                if leaf.value.text != g.canonical_value || leaf.value.kind != g.kind {
                    return Err(format!("{kp}: value differs"));
                }
                if !candidate(leaf, &report.blacklist_used) || !leaf.is_verbatim(source) {
                    return Err(format!("{kp}: not a verbatim literal"));
                }
                Ok(Occurrence { template_path: template_path.to_string(), key_path: kp.clone(), span: leaf.content.clone() })
            })
            .collect();
        match located {
            Ok(targets) => assignments.push(Assignment {
                var_name: format!("{SUGGESTIONS_KEY}.var{}", assignments.len() + 1),
                value: g.canonical_value.clone(),
                kind: g.kind,
                targets,
            }),
            Err(reason) => {
                log::warn!("{}: skipping group {:?}: {reason}", report.chart.file_name, g.canonical_value);
                skipped.push(SkippedGroup { value: g.canonical_value.clone(), reason });
            }
        }
    }
    Ok(RewritePlan { chart: pkg.chart_ref(), values_patch: values_patch(&assignments), assignments, skipped })
}

fn patched_values(raw: Option<&str>, original: &Value, patch: &str) -> Result<String, SuggestError> {
    if patch.is_empty() {
        return Ok(raw.unwrap_or_default().to_string());
    }
    let raw = raw.unwrap_or_default();
    let empty = matches!(original, Value::Null) || original.as_mapping().is_some_and(|m| m.is_empty());
    let text = if empty && raw.lines().all(|l| matches!(l.trim(), "" | "{}" | "---") || l.trim_start().starts_with('#')) {
        // drop a flow `{}` so the block mapping can follow
        let kept: String = raw.split_inclusive('\n').filter(|l| l.trim() != "{}").collect();
        format!("{kept}{}{patch}", if kept.is_empty() || kept.ends_with('\n') { "" } else { "\n" })
    } else {
        format!("{raw}{}{patch}", if raw.is_empty() || raw.ends_with('\n') { "" } else { "\n" })
    };
    // the patched file must keep every original key and add the block
    let parsed: Value = serde_yaml::from_str(&text).map_err(|e| SuggestError::ValuesPatch(e.to_string()))?;
    let mut without = parsed.clone();
    if let Some(m) = without.as_mapping_mut() {
        m.remove(SUGGESTIONS_KEY);
    }
    let same = without == *original || (empty && without.as_mapping().is_some_and(|m| m.is_empty()));
    if !same || !has_suggestions_key(&parsed) {
        return Err(SuggestError::ValuesPatch("appended block does not merge into values.yaml".into()));
    }
    Ok(text)
}

impl RewritePlan {
    /// A plan that changes nothing.
    pub fn empty(chart: ChartRef) -> Self {
        RewritePlan { chart, assignments: Vec::new(), values_patch: String::new(), skipped: Vec::new() }
    }

    /// Per template, the replacements sorted by position.
    fn edits(&self) -> Result<BTreeMap<&str, Vec<(Range<usize>, String)>>, SuggestError> {
        let mut by_template: BTreeMap<&str, Vec<(Range<usize>, String)>> = BTreeMap::new();
        for a in &self.assignments {
            for t in &a.targets {
                by_template.entry(t.template_path.as_str()).or_default().push((t.span.clone(), a.placeholder()));
            }
        }
        for (path, edits) in &mut by_template {
            edits.sort_by_key(|(r, _)| (r.start, r.end));
            if edits.windows(2).any(|w| w[0].0.end > w[1].0.start) {
                return Err(SuggestError::InvalidPlan(format!("overlapping spans in {path}")));
            }
        }
        Ok(by_template)
    }

    /// The rewritten package.
    pub fn apply(&self, pkg: &ChartPackage) -> Result<ChartPackage, SuggestError> {
        let mut out = pkg.clone();
        for (path, edits) in self.edits()? {
            let t = out
                .templates
                .iter_mut()
                .find(|t| t.path == path)
                .ok_or_else(|| SuggestError::InvalidPlan(format!("no template {path}")))?;
            let mut body = String::with_capacity(t.body.len());
            let mut pos = 0;
            for (span, text) in edits {
                let prefix = t
                    .body
                    .get(pos..span.start)
                    .filter(|_| t.body.is_char_boundary(span.end) && span.end <= t.body.len())
                    .ok_or_else(|| SuggestError::InvalidPlan(format!("span {span:?} outside {path}")))?;
                body.push_str(prefix);
                body.push_str(&text);
                pos = span.end;
            }
            body.push_str(&t.body[pos..]);
            t.body = body;
        }
        if !self.values_patch.is_empty() {
            let text = patched_values(pkg.values_raw.as_deref(), &pkg.values, &self.values_patch)?;
            out.set_values_raw(text).map_err(|e| SuggestError::ValuesPatch(e.to_string()))?;
        }
        Ok(out)
    }

    /// True when every target span covers exactly a literal leaf of the
    /// assigned value in `pkg`.
    pub fn targets_located(&self, pkg: &ChartPackage) -> bool {
        let (scanned, _) = scan_package(pkg);
        let spans: HashMap<(&str, usize, usize), &SourceLeaf> = scanned
            .iter()
            .flat_map(|(p, ls)| ls.iter().map(move |l| ((p.as_str(), l.content.start, l.content.end), l)))
            .collect();
        self.assignments.iter().all(|a| {
            a.targets.iter().all(|t| {
                let Some(template) = pkg.template(&t.template_path) else { return false };
                spans.get(&(t.template_path.as_str(), t.span.start, t.span.end)).is_some_and(|l| {
                    l.value.text == a.value
                        && l.value.kind == a.kind
                        && l.style != LeafStyle::Block
                        && l.is_verbatim(&template.body)
                })
            })
        })
    }
}

fn comparable(out: &RenderOutcome) -> (String, Vec<(String, crate::render::FailureCategory)>) {
    let mut failures: Vec<_> = out.failures.iter().map(|f| (f.template_path.clone(), f.category)).collect();
    failures.sort();
    (out.manifests.to_canonical_yaml(), failures)
}

/// True when the rewritten chart renders exactly like the original under
/// the KB's overrides. Plans touching anything but located literal leaves
/// are rejected without rendering.
pub fn verify_rewrite(
    pkg: &ChartPackage,
    plan: &RewritePlan,
    kb: &VariabilityKnowledgeBase,
    engine: &dyn Renderer,
) -> Result<bool, SuggestError> {
    if !plan.targets_located(pkg) {
        return Ok(false);
    }
    let rewritten = match plan.apply(pkg) {
        Ok(p) => p,
        Err(SuggestError::InvalidPlan(_) | SuggestError::ValuesPatch(_)) => return Ok(false),
        Err(e) => return Err(e),
    };
    let overrides = kb.overrides_for(&pkg.stem());
    let before = render_chart(pkg, &overrides, engine)?;
    let after = render_chart(&rewritten, &overrides, engine)?;
    Ok(comparable(&before) == comparable(&after))
}
