use std::collections::BTreeSet;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{
    change_histories, compute_maintainer_sets, detect_index_changes, detect_irregularities, ChangeSet, EcosystemError,
    IdentityMode, MaintainerMetrics,
};
use crate::chart::ChartRef;
use crate::ingest::RepoIndex;

const DAYS_PER_MONTH: f64 = 30.4375;

/// How a relative change over several months becomes a monthly figure.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Total relative change divided by the number of months.
    #[default]
    Linear,
    /// Compound monthly rate.
    Geometric,
}

impl Normalization {
    /// Monthly relative change in percent; `None` when the start value is
    /// zero and the end value is not.
    pub fn monthly_change(self, start: f64, end: f64, months: u32) -> Option<f64> {
        if start == 0.0 {
            return (end == 0.0).then_some(0.0);
        }
        let m = f64::from(months.max(1));
        Some(match self {
            Normalization::Linear => (end - start) / start * 100.0 / m,
            Normalization::Geometric => ((end / start).powf(1.0 / m) - 1.0) * 100.0,
        })
    }
}

/// Whole months between two dates, at least one.
pub fn months_between(from: NaiveDate, to: NaiveDate) -> u32 {
    let days = (to - from).num_days().max(0) as f64;
    ((days / DAYS_PER_MONTH).round() as u32).max(1)
}

/// Template analysis totals over the charts of one snapshot.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateMetrics {
    pub charts: usize,
    pub variable_charts: usize,
    pub variables: usize,
    pub duplicate_charts: usize,
    pub duplicate_groups: usize,
    pub duplicate_values: usize,
    /// Largest single duplicate group.
    pub max_duplicate_count: usize,
    /// Sum over charts of each chart's largest duplicate group.
    pub chart_max_duplicate_sum: usize,
    pub unrenderable_charts: usize,
}

fn ratio(a: usize, b: usize) -> Option<f64> {
    (b != 0).then(|| a as f64 / b as f64)
}

impl TemplateMetrics {
    pub fn variable_charts_ratio(&self) -> Option<f64> {
        ratio(self.variable_charts, self.charts).map(|r| r * 100.0)
    }

    /// Variables per chart with at least one variable.
    pub fn variable_charts_intensity(&self) -> Option<f64> {
        ratio(self.variables, self.variable_charts)
    }

    pub fn duplicate_charts_ratio(&self) -> Option<f64> {
        ratio(self.duplicate_charts, self.charts).map(|r| r * 100.0)
    }

    /// Duplicate values per chart with at least one duplicate group.
    pub fn duplicate_charts_intensity(&self) -> Option<f64> {
        ratio(self.duplicate_values, self.duplicate_charts)
    }

    pub fn unrenderable_ratio(&self) -> Option<f64> {
        ratio(self.unrenderable_charts, self.charts).map(|r| r * 100.0)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IrregularityCounts {
    pub no_maintainer: usize,
    pub name_collision: usize,
    pub multiple_versions: usize,
    pub alias_names: usize,
}

/// Metrics of one snapshot that trend tables compare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotPoint {
    pub id: String,
    pub date: NaiveDate,
    pub charts: usize,
    pub unique_charts: usize,
    pub maintainers: MaintainerMetrics,
    pub irregularities: IrregularityCounts,
    pub templates: Option<TemplateMetrics>,
}

impl SnapshotPoint {
    pub fn from_index(id: &str, date: NaiveDate, index: &RepoIndex, mode: IdentityMode) -> Self {
        let irr = detect_irregularities(index);
        let stems: BTreeSet<_> = index.charts().map(|c| &c.stem).collect();
        SnapshotPoint {
            id: id.to_string(),
            date,
            charts: index.entries.len(),
            unique_charts: stems.len(),
            maintainers: compute_maintainer_sets(index, mode).metrics,
            irregularities: IrregularityCounts {
                no_maintainer: irr.no_maintainer.len(),
                name_collision: irr.name_collision.len(),
                multiple_versions: irr.multiple_versions.len(),
                alias_names: irr.alias_names.len(),
            },
            templates: None,
        }
    }
}

/// Ordered snapshot metrics with the changes between neighbours.
#[derive(Debug, Clone, Default)]
pub struct Timeline {
    points: Vec<SnapshotPoint>,
    charts: Vec<Vec<ChartRef>>,
    changes: Vec<ChangeSet>,
    last_index: Option<RepoIndex>,
}

impl Timeline {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends the next snapshot; dates must not decrease.
    pub fn push(&mut self, id: &str, date: NaiveDate, index: RepoIndex, mode: IdentityMode) -> Result<(), EcosystemError> {
        if let Some(last) = self.points.last() {
            if date < last.date {
                return Err(EcosystemError::OutOfOrder(id.to_string()));
            }
            let prev = self.last_index.as_ref().expect("index of previous point");
            self.changes.push(detect_index_changes(&last.id, prev, id, &index));
        }
        self.points.push(SnapshotPoint::from_index(id, date, &index, mode));
        self.charts.push(index.charts().cloned().collect());
        self.last_index = Some(index);
        Ok(())
    }

    pub fn set_templates(&mut self, id: &str, metrics: TemplateMetrics) -> Result<(), EcosystemError> {
        let p = self.points.iter_mut().find(|p| p.id == id).ok_or_else(|| EcosystemError::UnknownSnapshot(id.to_string()))?;
        p.templates = Some(metrics);
        Ok(())
    }

    pub fn points(&self) -> &[SnapshotPoint] {
        &self.points
    }

    pub fn changes(&self) -> &[ChangeSet] {
        &self.changes
    }

    pub fn charts_at(&self, i: usize) -> &[ChartRef] {
        &self.charts[i]
    }

    fn position(&self, id: &str) -> Result<usize, EcosystemError> {
        self.points.iter().position(|p| p.id == id).ok_or_else(|| EcosystemError::UnknownSnapshot(id.to_string()))
    }

    /// Share of charts changed at least once in `[from, to]`, in percent.
    fn changed_share(&self, from: usize, to: usize) -> f64 {
        let start = &self.charts[from];
        if start.is_empty() {
            return 0.0;
        }
        let changed = change_histories(start, &self.changes[from..to]).iter().filter(|h| h.flags.contains(&true)).count();
        100.0 * changed as f64 / start.len() as f64
    }

    /// Mean changed share over `months` consecutive windows of the range.
    fn monthly_changed_share(&self, from: usize, to: usize, months: u32) -> f64 {
        let start = self.points[from].date;
        let span = (self.points[to].date - start).num_days() as f64;
        let mut bounds = vec![from];
        for k in 1..months {
            let cut = start + chrono::Duration::days((span * f64::from(k) / f64::from(months)).round() as i64);
            let at = (from..=to).find(|&i| self.points[i].date >= cut).unwrap_or(to);
            if at > *bounds.last().unwrap() && at < to {
                bounds.push(at);
            }
        }
        bounds.push(to);
        let shares: Vec<f64> = bounds.windows(2).map(|w| self.changed_share(w[0], w[1])).collect();
        shares.iter().sum::<f64>() / shares.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrendMetric {
    Charts,
    UniqueCharts,
    Maintainers,
    MaintainerSets,
    AvgChartsPerMaintainer,
    AvgChartsPerSet,
    MaxChartsPerSet,
    AvgMaintainersPerSet,
    MaxMaintainersPerSet,
    AliasNames,
    NoMaintainer,
    NameCollision,
    MultipleVersions,
    VariableChartsRatio,
    VariableChartsIntensity,
    DuplicateChartsRatio,
    DuplicateChartsIntensity,
    UnrenderableTemplateRatio,
}

impl TrendMetric {
    pub const ALL: [TrendMetric; 18] = [
        TrendMetric::Charts,
        TrendMetric::UniqueCharts,
        TrendMetric::Maintainers,
        TrendMetric::MaintainerSets,
        TrendMetric::AvgChartsPerMaintainer,
        TrendMetric::AvgChartsPerSet,
        TrendMetric::MaxChartsPerSet,
        TrendMetric::AvgMaintainersPerSet,
        TrendMetric::MaxMaintainersPerSet,
        TrendMetric::AliasNames,
        TrendMetric::NoMaintainer,
        TrendMetric::NameCollision,
        TrendMetric::MultipleVersions,
        TrendMetric::VariableChartsRatio,
        TrendMetric::VariableChartsIntensity,
        TrendMetric::DuplicateChartsRatio,
        TrendMetric::DuplicateChartsIntensity,
        TrendMetric::UnrenderableTemplateRatio,
    ];

    pub fn value(self, p: &SnapshotPoint) -> Option<f64> {
        let m = &p.maintainers;
        let t = p.templates.as_ref();
        Some(match self {
            TrendMetric::Charts => p.charts as f64,
            TrendMetric::UniqueCharts => p.unique_charts as f64,
            TrendMetric::Maintainers => m.maintainers as f64,
            TrendMetric::MaintainerSets => m.total_sets as f64,
            TrendMetric::AvgChartsPerMaintainer => m.avg_charts_per_maintainer,
            TrendMetric::AvgChartsPerSet => m.avg_charts_per_set,
            TrendMetric::MaxChartsPerSet => m.max_charts_per_set as f64,
            TrendMetric::AvgMaintainersPerSet => m.avg_maintainers_per_set,
            TrendMetric::MaxMaintainersPerSet => m.max_maintainers_per_set as f64,
            TrendMetric::AliasNames => p.irregularities.alias_names as f64,
            TrendMetric::NoMaintainer => p.irregularities.no_maintainer as f64,
            TrendMetric::NameCollision => p.irregularities.name_collision as f64,
            TrendMetric::MultipleVersions => p.irregularities.multiple_versions as f64,
            TrendMetric::VariableChartsRatio => t?.variable_charts_ratio()?,
            TrendMetric::VariableChartsIntensity => t?.variable_charts_intensity()?,
            TrendMetric::DuplicateChartsRatio => t?.duplicate_charts_ratio()?,
            TrendMetric::DuplicateChartsIntensity => t?.duplicate_charts_intensity()?,
            TrendMetric::UnrenderableTemplateRatio => t?.unrenderable_ratio()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Period {
    pub name: String,
    pub from: String,
    pub to: String,
}

impl Period {
    pub fn new(name: &str, from: &str, to: &str) -> Self {
        Period { name: name.into(), from: from.into(), to: to.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub metric: TrendMetric,
    pub start: f64,
    pub end: f64,
    /// Monthly relative change in percent.
    pub monthly_change: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendColumn {
    pub name: String,
    pub from: String,
    pub to: String,
    pub days: i64,
    pub months: u32,
    /// Charts changed in any form, including version updates, per month
    /// as a percentage of the charts present at the start of each month.
    pub changed_charts: f64,
    pub rows: Vec<TrendRow>,
}

impl TrendColumn {
    pub fn row(&self, metric: TrendMetric) -> Option<&TrendRow> {
        self.rows.iter().find(|r| r.metric == metric)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendTable {
    pub normalization: Normalization,
    pub periods: Vec<TrendColumn>,
    /// The whole range from the first period start to the last period end.
    pub overall: Option<TrendColumn>,
}

fn column(timeline: &Timeline, name: &str, from: usize, to: usize, mode: Normalization) -> Result<TrendColumn, EcosystemError> {
    if to <= from {
        return Err(EcosystemError::EmptyPeriod(name.to_string()));
    }
    let (a, b) = (&timeline.points[from], &timeline.points[to]);
    let months = months_between(a.date, b.date);
    let rows = TrendMetric::ALL
        .into_iter()
        .filter_map(|m| {
            let (start, end) = (m.value(a)?, m.value(b)?);
            Some(TrendRow { metric: m, start, end, monthly_change: mode.monthly_change(start, end, months) })
        })
        .collect();
    Ok(TrendColumn {
        name: name.to_string(),
        from: a.id.clone(),
        to: b.id.clone(),
        days: (b.date - a.date).num_days(),
        months,
        changed_charts: timeline.monthly_changed_share(from, to, months),
        rows,
    })
}

/// Monthly-normalized metric changes for each period plus the overall range.
pub fn period_metrics(timeline: &Timeline, periods: &[Period], mode: Normalization) -> Result<TrendTable, EcosystemError> {
    let mut columns = Vec::new();
    let mut span: Option<(usize, usize)> = None;
    for p in periods {
        let (from, to) = (timeline.position(&p.from)?, timeline.position(&p.to)?);
        columns.push(column(timeline, &p.name, from, to, mode)?);
        span = Some(match span {
            None => (from, to),
            Some((f, t)) => (f.min(from), t.max(to)),
        });
    }
    let overall = match span {
        Some((f, t)) if periods.len() > 1 => Some(column(timeline, "average", f, t, mode)?),
        _ => None,
    };
    Ok(TrendTable { normalization: mode, periods: columns, overall })
}
