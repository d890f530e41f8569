//! Machine-readable outputs: the versioned JSON report, maintainer graphs in
//! DOT and distribution tables in CSV.

mod distributions;
mod dot;

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use distributions::{emit_distributions, heatmap_cells, Distributions, HeatmapCell};
pub use dot::{emit_dot, GraphDoc};

use crate::ecosystem::{
    ActivityCluster, ActivityProfile, ChangeSet, IrregularityReport, MaintainerSet, MaintainerSets, ResampleResult,
    TemplateMetrics, TrendTable,
};
use crate::ingest::{IngestFailure, RepoIndex};
use crate::quality::{DuplicateReport, QualityReport};
use crate::suggest::DigestSet;

pub const SCHEMA_VERSION: &str = "1.0";

/// JSON schema that every [`Report`] validates against.
pub const REPORT_SCHEMA: &str = include_str!("../../schema/report-v1.schema.json");

/// A number together with the quantity it is measured against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub base_metric: String,
    pub numerator: f64,
    pub denominator: f64,
    pub percentage: Option<f64>,
}

impl Metric {
    /// An absolute count; its own base.
    pub fn count(name: &str, value: usize) -> Self {
        let v = value as f64;
        Metric {
            name: name.into(),
            value: v,
            base_metric: name.into(),
            numerator: v,
            denominator: v,
            percentage: (value > 0).then_some(100.0),
        }
    }

    /// A count expressed as a share of a base count.
    pub fn share(name: &str, value: usize, base_metric: &str, base: usize) -> Self {
        Metric {
            name: name.into(),
            value: value as f64,
            base_metric: base_metric.into(),
            numerator: value as f64,
            denominator: base as f64,
            percentage: (base > 0).then(|| 100.0 * value as f64 / base as f64),
        }
    }

    /// A mean: `numerator / denominator`, where the denominator counts
    /// `base_metric`.
    pub fn average(name: &str, numerator: usize, denominator: usize, base_metric: &str) -> Self {
        Metric {
            name: name.into(),
            value: if denominator == 0 { 0.0 } else { numerator as f64 / denominator as f64 },
            base_metric: base_metric.into(),
            numerator: numerator as f64,
            denominator: denominator as f64,
            percentage: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statistics {
    pub test: String,
    pub n1: usize,
    pub n2: usize,
    pub median_n1: f64,
    pub median_n2: f64,
    pub result: ResampleResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivitySection {
    pub clusters: Vec<ActivityCluster>,
    pub profiles: Vec<ActivityProfile>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteSummary {
    pub chart: String,
    pub verified: bool,
    pub assignments: usize,
    pub replaced_occurrences: usize,
    pub skipped_groups: usize,
    pub diff: Option<String>,
}

/// Keys whose rendered value differed between two renders of a chart.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariabilitySummary {
    pub chart: String,
    pub keys: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Sections {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quality: Option<Vec<QualityReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duplicates: Option<Vec<DuplicateReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variability: Option<Vec<VariabilitySummary>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failures: Option<Vec<IngestFailure>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub template_metrics: Option<Vec<Metric>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub maintainer_metrics: Option<Vec<Metric>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chart_metrics: Option<Vec<Metric>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub maintainer_sets: Option<Vec<MaintainerSet>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub irregularities: Option<IrregularityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub changes: Option<Vec<ChangeSet>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub activity: Option<ActivitySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trends: Option<TrendTable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub statistics: Option<Statistics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rewrites: Option<Vec<RewriteSummary>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub digests: Option<DigestSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: String,
    pub generated_at: DateTime<Utc>,
    pub subject: String,
    pub sections: Sections,
}

impl Report {
    pub fn new(subject: &str) -> Self {
        Report { schema_version: SCHEMA_VERSION.into(), generated_at: Utc::now(), subject: subject.into(), sections: Sections::default() }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

/// Maintainer rows: counts, workload averages and maxima, alias names.
pub fn maintainer_metrics(sets: &MaintainerSets, irregularities: &IrregularityReport) -> Vec<Metric> {
    let m = &sets.metrics;
    vec![
        Metric::count("Maintainers", m.maintainers),
        Metric::count("Sets of maintainers", m.total_sets),
        Metric::average("Avg charts per maintainer", m.charts, m.maintainers, "Maintainers"),
        Metric::average("Avg charts per maintainer set", m.charts, m.total_sets, "Sets of maintainers"),
        Metric::share("Max charts per maintainer set", m.max_charts_per_set, "Charts", m.charts),
        Metric::average("Avg maintainers per set", m.maintainers, m.total_sets, "Sets of maintainers"),
        Metric::share("Max maintainers per set", m.max_maintainers_per_set, "Maintainers", m.maintainers),
        Metric::share("Irregularity: alias names", irregularities.alias_names.len(), "Unique e-mails", m.unique_emails),
    ]
}

/// Chart rows: counts, metadata irregularities and versioning overhead.
pub fn chart_metrics(index: &RepoIndex, irregularities: &IrregularityReport) -> Vec<Metric> {
    let charts = index.entries.len();
    let stems: BTreeSet<_> = index.charts().map(|c| &c.stem).collect();
    vec![
        Metric::count("Charts", charts),
        Metric::share("Unique charts", stems.len(), "Charts", charts),
        Metric::share("Versioning overhead", charts - stems.len(), "Unique charts", stems.len()),
        Metric::share("Irregularity: no maintainer", irregularities.no_maintainer.len(), "Charts", charts),
        Metric::share("Irregularity: name collision", irregularities.name_collision.len(), "Charts", charts),
        Metric::share("Irregularity: multiple versions", irregularities.multiple_versions.len(), "Charts", charts),
    ]
}

/// Totals over per-chart quality reports.
pub fn template_metrics(reports: &[QualityReport]) -> TemplateMetrics {
    let mut t = TemplateMetrics { charts: reports.len(), ..TemplateMetrics::default() };
    for r in reports {
        if r.variable_value_count > 0 {
            t.variable_charts += 1;
            t.variables += r.variable_value_count;
        }
        if !r.duplicate.groups.is_empty() {
            t.duplicate_charts += 1;
            t.duplicate_groups += r.duplicate.groups.len();
            t.duplicate_values += r.duplicate.total_duplicate_values;
        }
        let max = r.duplicate.groups.iter().map(|g| g.count).max().unwrap_or(0);
        t.max_duplicate_count = t.max_duplicate_count.max(max);
        t.chart_max_duplicate_sum += max;
        if !r.render_failures.is_empty() {
            t.unrenderable_charts += 1;
        }
    }
    t
}

pub fn template_metric_rows(t: &TemplateMetrics) -> Vec<Metric> {
    vec![
        Metric::count("Charts analysed", t.charts),
        Metric::share("Variable charts", t.variable_charts, "Charts analysed", t.charts),
        Metric::average("Variables per variable chart", t.variables, t.variable_charts, "Variable charts"),
        Metric::share("Duplicate charts", t.duplicate_charts, "Charts analysed", t.charts),
        Metric::average("Duplicate keys per chart", t.duplicate_groups, t.charts, "Charts analysed"),
        Metric::average("Duplicate values per key", t.duplicate_values, t.duplicate_groups, "Duplicate keys"),
        Metric::average("Duplicate values per chart", t.duplicate_values, t.charts, "Charts analysed"),
        Metric::count("Max duplicate values", t.max_duplicate_count),
        Metric::average("Avg max duplicate values per chart", t.chart_max_duplicate_sum, t.charts, "Charts analysed"),
        Metric::share("Unrenderable template charts", t.unrenderable_charts, "Charts analysed", t.charts),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{ChartRef, Maintainer};
    use crate::ecosystem::{compute_maintainer_sets, detect_irregularities, resampled_group_test, IdentityMode};
    use crate::ingest::IndexEntry;

    fn index() -> RepoIndex {
        let e = |n: &str, v: &str, m: &[(&str, &str)]| IndexEntry {
            chart: ChartRef::new(n, v),
            maintainers: m.iter().map(|(a, b)| Maintainer::new(Some(a), Some(b))).collect(),
            urls: vec![],
            digest: None,
        };
        RepoIndex {
            source: "t".into(),
            fetched_at: Utc::now(),
            entries: vec![
                e("a", "1.0.0", &[("ann", "ann@x")]),
                e("a", "1.1.0", &[("ann", "ann@x")]),
                e("b", "1.0.0", &[("Ann", "ann@x"), ("bob", "bob@x")]),
                e("c", "1.0.0", &[]),
            ],
        }
    }

    fn full_report() -> Report {
        let idx = index();
        let irr = detect_irregularities(&idx);
        let sets = compute_maintainer_sets(&idx, IdentityMode::Email);
        let mut r = Report::new("test");
        r.sections.maintainer_metrics = Some(maintainer_metrics(&sets, &irr));
        r.sections.chart_metrics = Some(chart_metrics(&idx, &irr));
        r.sections.maintainer_sets = Some(sets.sets.clone());
        r.sections.template_metrics = Some(template_metric_rows(&template_metrics(&[])));
        r.sections.statistics = Some(Statistics {
            test: "wilcoxon-signed-rank".into(),
            n1: 3,
            n2: 2,
            median_n1: 2.0,
            median_n2: 1.0,
            result: resampled_group_test(&[1.0, 2.0, 3.0], &[0.0, 5.0], 4, 1).unwrap(),
        });
        r.sections.irregularities = Some(irr);
        r
    }

    #[test]
    fn metric_rows() {
        let idx = index();
        let irr = detect_irregularities(&idx);
        let rows = chart_metrics(&idx, &irr);
        let overhead = rows.iter().find(|m| m.name == "Versioning overhead").unwrap();
        // 4 archives over 3 stems
        assert_eq!((overhead.numerator, overhead.denominator), (1.0, 3.0));
        let nm = rows.iter().find(|m| m.name == "Irregularity: no maintainer").unwrap();
        assert_eq!(nm.percentage, Some(25.0));
        let m = maintainer_metrics(&compute_maintainer_sets(&idx, IdentityMode::Email), &irr);
        let alias = m.iter().find(|m| m.name.contains("alias")).unwrap();
        assert_eq!((alias.value, alias.denominator), (1.0, 2.0));
    }

    #[test]
    fn report_is_schema_valid_and_stable() {
        let schema: serde_json::Value = serde_json::from_str(REPORT_SCHEMA).unwrap();
        let validator = jsonschema::validator_for(&schema).unwrap();
        let r = full_report();
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        let errors: Vec<String> = validator.iter_errors(&json).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{errors:?}");
        let mut again = full_report();
        again.generated_at = r.generated_at;
        assert_eq!(again.to_json(), r.to_json());
        assert_eq!(Report::from_json(&r.to_json()).unwrap(), r);

        let mut broken = json.clone();
        broken.as_object_mut().unwrap().remove("schema_version");
        assert!(!validator.is_valid(&broken));
    }
}
