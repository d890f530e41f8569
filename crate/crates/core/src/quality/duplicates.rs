use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::scan::{scan_template, SourceLeaf, TemplateUnparseable};
use super::QualityError;
use crate::chart::{ChartPackage, ChartRef};
use crate::yaml::{CanonicalScalar, ScalarKind};

pub const DEFAULT_THRESHOLD: usize = 3;
pub const DEFAULT_BLACKLIST: &[&str] = &["v1", "extensions/v1beta1", "", "true", "false", "0", "1"];
/// Values shorter than this many characters are never reported.
pub const MIN_VALUE_CHARS: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicateConfig {
    pub threshold: usize,
    pub blacklist: Vec<String>,
}

impl Default for DuplicateConfig {
    fn default() -> Self {
        DuplicateConfig {
            threshold: DEFAULT_THRESHOLD,
            blacklist: DEFAULT_BLACKLIST.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicateGroup {
    pub canonical_value: String,
    pub kind: ScalarKind,
    pub occurrences: Vec<String>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicateReport {
    pub chart: ChartRef,
    /// Ordered by count descending, then value.
    pub groups: Vec<DuplicateGroup>,
    pub total_duplicate_values: usize,
    pub threshold_used: usize,
    pub blacklist_used: Vec<String>,
    pub unparseable: Vec<TemplateUnparseable>,
}

/// Leaves that may take part in a duplicate group: literal, non-null,
/// long enough and not blacklisted.
pub(crate) fn candidate(leaf: &SourceLeaf, blacklist: &[String]) -> bool {
    !leaf.templated
        && leaf.value.kind != ScalarKind::Null
        && leaf.value.text.chars().count() >= MIN_VALUE_CHARS
        && !blacklist.contains(&leaf.value.text)
}

/// Literal leaves of every manifest template, plus the templates that
/// could not be parsed.
pub fn scan_package(pkg: &ChartPackage) -> (Vec<(String, Vec<SourceLeaf>)>, Vec<TemplateUnparseable>) {
    let mut scanned = Vec::new();
    let mut failed = Vec::new();
    for t in pkg.templates.iter().filter(|t| t.is_manifest()) {
        match scan_template(&t.path, &t.body) {
            Ok(leaves) => scanned.push((t.path.clone(), leaves)),
            Err(e) => failed.push(e),
        }
    }
    (scanned, failed)
}

/// Groups literal template values of one chart by canonical value.
pub fn detect_duplicates(pkg: &ChartPackage, config: &DuplicateConfig) -> Result<DuplicateReport, QualityError> {
    if config.threshold < 2 {
        return Err(QualityError::InvalidThreshold(config.threshold));
    }
    let (scanned, unparseable) = scan_package(pkg);
    let mut by_value: BTreeMap<CanonicalScalar, Vec<String>> = BTreeMap::new();
    for leaf in scanned.into_iter().flat_map(|(_, l)| l) {
        if candidate(&leaf, &config.blacklist) {
            by_value.entry(leaf.value).or_default().push(leaf.key_path);
        }
    }
    let mut groups: Vec<DuplicateGroup> = by_value
        .into_iter()
        .filter(|(_, occ)| occ.len() >= config.threshold)
        .map(|(value, occurrences)| DuplicateGroup {
            count: occurrences.len(),
            canonical_value: value.text,
            kind: value.kind,
            occurrences,
        })
        .collect();
    groups.sort_by(|a, b| {
        b.count.cmp(&a.count).then_with(|| a.canonical_value.cmp(&b.canonical_value)).then(a.kind.cmp(&b.kind))
    });
    Ok(DuplicateReport {
        chart: pkg.chart_ref(),
        total_duplicate_values: groups.iter().map(|g| g.count).sum(),
        groups,
        threshold_used: config.threshold,
        blacklist_used: config.blacklist.clone(),
        unparseable,
    })
}
