use std::collections::BTreeMap;

use serde::Serialize;

use crate::ecosystem::MaintainerSets;
use crate::quality::QualityReport;
use crate::suggest::DigestSet;

/// CSV tables behind the long-tail histograms and the set-size heatmap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Distributions {
    pub issues_per_email: String,
    pub values_per_chart: String,
    pub heatmap: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeatmapCell {
    pub maintainers: usize,
    pub charts: usize,
    pub sets: usize,
    pub percentage: f64,
}

/// Sets counted by (maintainers per set, charts per set). Unmaintained charts
/// form the zero-maintainer bucket.
pub fn heatmap_cells(sets: &MaintainerSets) -> Vec<HeatmapCell> {
    let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for s in &sets.sets {
        *counts.entry((s.size, s.charts.len())).or_default() += 1;
    }
    if !sets.unmaintained.is_empty() {
        *counts.entry((0, sets.unmaintained.len())).or_default() += 1;
    }
    let total: usize = counts.values().sum();
    counts
        .into_iter()
        .map(|((maintainers, charts), n)| HeatmapCell {
            maintainers,
            charts,
            sets: n,
            percentage: 100.0 * n as f64 / total as f64,
        })
        .collect()
}

fn to_csv(rows: Vec<Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

pub fn emit_distributions(
    reports: &[QualityReport],
    sets: Option<&MaintainerSets>,
    digests: Option<&DigestSet>,
) -> Distributions {
    let mut per_email: BTreeMap<usize, usize> = BTreeMap::new();
    for d in digests.into_iter().flat_map(|d| &d.digests) {
        *per_email.entry(d.issues.len()).or_default() += 1;
    }
    let mut rows = vec![vec!["issues".to_string(), "emails".to_string()]];
    rows.extend(per_email.into_iter().map(|(k, v)| vec![k.to_string(), v.to_string()]));
    let issues_per_email = to_csv(rows);

    let mut per_chart: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for r in reports {
        per_chart.entry(r.variable_value_count).or_default().0 += 1;
        per_chart.entry(r.duplicate.total_duplicate_values).or_default().1 += 1;
    }
    let mut rows = vec![vec!["values".to_string(), "variable_charts".to_string(), "duplicate_charts".to_string()]];
    rows.extend(per_chart.into_iter().map(|(k, (v, d))| vec![k.to_string(), v.to_string(), d.to_string()]));
    let values_per_chart = to_csv(rows);

    let cells = sets.map(heatmap_cells).unwrap_or_default();
    let max_m = cells.iter().map(|c| c.maintainers).max();
    let max_c = cells.iter().map(|c| c.charts).max().unwrap_or(0);
    let mut header = vec!["maintainers".to_string()];
    header.extend((1..=max_c).map(|c| format!("charts={c}")));
    let mut rows = vec![header];
    if let Some(max_m) = max_m {
        let lookup: BTreeMap<(usize, usize), usize> = cells.iter().map(|c| ((c.maintainers, c.charts), c.sets)).collect();
        for m in 0..=max_m {
            let mut row = vec![m.to_string()];
            row.extend((1..=max_c).map(|c| lookup.get(&(m, c)).copied().unwrap_or(0).to_string()));
            rows.push(row);
        }
    }
    let heatmap = to_csv(rows);

    Distributions { issues_per_email, values_per_chart, heatmap }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{ChartRef, Maintainer};
    use crate::ecosystem::{compute_maintainer_sets, IdentityMode};
    use crate::ingest::{IndexEntry, RepoIndex};

    fn sets() -> MaintainerSets {
        let e = |n: &str, ms: &[&str]| IndexEntry {
            chart: ChartRef::new(n, "1.0.0"),
            maintainers: ms.iter().map(|m| Maintainer::new(Some(m), Some(&format!("{m}@x")))).collect(),
            urls: vec![],
            digest: None,
        };
        let idx = RepoIndex {
            source: "t".into(),
            fetched_at: chrono::Utc::now(),
            entries: vec![e("a", &["ann"]), e("b", &["ann"]), e("c", &["bob", "cy"]), e("d", &[]), e("e", &["dee"])],
        };
        compute_maintainer_sets(&idx, IdentityMode::Email)
    }

    #[test]
    fn empty_corpus_yields_headers_only() {
        let d = emit_distributions(&[], None, None);
        assert_eq!(d.issues_per_email, "issues,emails\r\n");
        assert_eq!(d.values_per_chart, "values,variable_charts,duplicate_charts\r\n");
        assert_eq!(d.heatmap, "maintainers\r\n");
    }

    #[test]
    fn heatmap_counts_every_set_once() {
        let s = sets();
        let cells = heatmap_cells(&s);
        assert_eq!(cells.iter().map(|c| c.sets).sum::<usize>(), s.metrics.total_sets);
        assert!(cells.iter().any(|c| c.maintainers == 0 && c.charts == 1));
        let pct: f64 = cells.iter().map(|c| c.percentage).sum();
        assert!((pct - 100.0).abs() < 1e-9);

        let d = emit_distributions(&[], Some(&s), None);
        let mut r = csv::Reader::from_reader(d.heatmap.as_bytes());
        assert_eq!(r.headers().unwrap().len(), 3);
        let rows: Vec<Vec<String>> = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
        assert_eq!(rows, vec![vec!["0", "1", "0"], vec!["1", "1", "1"], vec!["2", "1", "0"]]);
    }
}
