//! Variability learning, duplicate detection and per-chart reports.

mod duplicates;
mod kb;
pub mod scan;

use std::collections::HashMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use duplicates::{
    detect_duplicates, scan_package, DuplicateConfig, DuplicateGroup, DuplicateReport, DEFAULT_BLACKLIST,
    DEFAULT_THRESHOLD, MIN_VALUE_CHARS,
};
pub(crate) use duplicates::candidate;
pub use kb::{KbEntry, KbStore, VariabilityKnowledgeBase};

use crate::chart::{ChartPackage, ChartRef};
use crate::render::{flatten_documents, render_chart, RenderError, RenderFailure, RenderOutcome, Renderer};

#[derive(Debug, thiserror::Error)]
pub enum QualityError {
    #[error("{chart}: no template rendered ({} failures)", failures.len())]
    RenderFailed { chart: String, failures: Vec<RenderFailure> },
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("duplicate threshold must be at least 2, got {0}")]
    InvalidThreshold(usize),
    #[error("knowledge base format: {0}")]
    KbFormat(String),
    #[error("knowledge base locked: {}", .0.display())]
    KbLocked(PathBuf),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn render_checked(pkg: &ChartPackage, kb: &VariabilityKnowledgeBase, engine: &dyn Renderer) -> Result<RenderOutcome, QualityError> {
    let out = render_chart(pkg, &kb.overrides_for(&pkg.stem()), engine)?;
    if out.failed_entirely() {
        return Err(QualityError::RenderFailed { chart: pkg.chart_ref().file_name, failures: out.failures });
    }
    Ok(out)
}

struct Learned {
    paths: Vec<String>,
    failures: Vec<RenderFailure>,
}

fn learn(pkg: &ChartPackage, kb: &mut VariabilityKnowledgeBase, engine: &dyn Renderer) -> Result<Learned, QualityError> {
    let first = render_chart(pkg, &kb.overrides_for(&pkg.stem()), engine)?;
    let second = render_chart(pkg, &kb.overrides_for(&pkg.stem()), engine)?;
    if first.failed_entirely() && second.failed_entirely() {
        return Err(QualityError::RenderFailed { chart: pkg.chart_ref().file_name, failures: first.failures });
    }
    let later: HashMap<String, String> = flatten_documents(&second.manifests).into_iter().collect();
    let stem = pkg.stem();
    let mut paths = Vec::new();
    for (path, value) in flatten_documents(&first.manifests) {
        if later.get(&path).is_some_and(|v| *v != value) && kb.insert(&stem, &path, &value) {
            paths.push(path);
        }
    }
    Ok(Learned { paths, failures: first.failures })
}

/// Renders twice with known overrides and records every leaf whose value
/// differs, keeping the first render's value. Returns the new key paths.
pub fn learn_variability(
    pkg: &ChartPackage,
    kb: &mut VariabilityKnowledgeBase,
    engine: &dyn Renderer,
) -> Result<Vec<String>, QualityError> {
    learn(pkg, kb, engine).map(|l| l.paths)
}

/// One render with every override known for the chart's stem.
pub fn stabilize_render(
    pkg: &ChartPackage,
    kb: &VariabilityKnowledgeBase,
    engine: &dyn Renderer,
) -> Result<RenderOutcome, QualityError> {
    render_checked(pkg, kb, engine)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityReport {
    pub chart: ChartRef,
    pub variable_value_count: usize,
    pub duplicate: DuplicateReport,
    pub render_failures: Vec<RenderFailure>,
}

/// Variability, duplicates and render failures of one chart. The given
/// KB is only read; learning happens on a copy.
pub fn analyze_chart(
    pkg: &ChartPackage,
    kb: &VariabilityKnowledgeBase,
    config: &DuplicateConfig,
    engine: &dyn Renderer,
) -> Result<QualityReport, QualityError> {
    let duplicate = detect_duplicates(pkg, config)?;
    let mut scratch = kb.clone();
    let render_failures = match learn(pkg, &mut scratch, engine) {
        Ok(l) => l.failures,
        Err(QualityError::RenderFailed { failures, .. }) => failures,
        Err(e) => return Err(e),
    };
    Ok(QualityReport {
        chart: pkg.chart_ref(),
        variable_value_count: scratch.count_for(&pkg.stem()),
        duplicate,
        render_failures,
    })
}
