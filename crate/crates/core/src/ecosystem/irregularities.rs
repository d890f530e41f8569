use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::maintainers::{normalize_email, normalize_name};
use crate::chart::{ChartRef, StemName};
use crate::ingest::RepoIndex;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AliasNames {
    pub email: String,
    pub names: BTreeSet<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IrregularityReport {
    pub no_maintainer: Vec<ChartRef>,
    pub name_collision: Vec<ChartRef>,
    pub multiple_versions: Vec<StemName>,
    pub alias_names: Vec<AliasNames>,
}

impl IrregularityReport {
    pub fn is_empty(&self) -> bool {
        self.no_maintainer.is_empty()
            && self.name_collision.is_empty()
            && self.multiple_versions.is_empty()
            && self.alias_names.is_empty()
    }

    pub fn total(&self) -> usize {
        self.no_maintainer.len() + self.name_collision.len() + self.multiple_versions.len() + self.alias_names.len()
    }
}

pub fn detect_irregularities(index: &RepoIndex) -> IrregularityReport {
    let mut report = IrregularityReport::default();
    let mut names_by_email: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut all_names = BTreeSet::new();
    let mut per_stem: BTreeMap<&StemName, usize> = BTreeMap::new();

    for e in &index.entries {
        *per_stem.entry(&e.chart.stem).or_default() += 1;
        if e.maintainers.iter().all(|m| m.is_blank()) {
            report.no_maintainer.push(e.chart.clone());
        }
        for m in &e.maintainers {
            let name = m.name.as_deref().and_then(normalize_name);
            if let Some(n) = &name {
                all_names.insert(n.clone());
            }
            if let (Some(email), Some(n)) = (m.email.as_deref().and_then(normalize_email), name) {
                names_by_email.entry(email).or_default().insert(n);
            }
        }
    }

    report.name_collision = index.entries.iter().filter(|e| all_names.contains(&e.chart.name)).map(|e| e.chart.clone()).collect();
    report.multiple_versions = per_stem.into_iter().filter(|(_, n)| *n >= 2).map(|(s, _)| s.clone()).collect();
    report.alias_names = names_by_email
        .into_iter()
        .filter(|(_, names)| names.len() >= 2)
        .map(|(email, names)| AliasNames { email, names })
        .collect();
    report.no_maintainer.sort();
    report.name_collision.sort();
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Maintainer;
    use crate::ingest::IndexEntry;

    fn entry(name: &str, version: &str, maintainers: &[(&str, &str)]) -> IndexEntry {
        IndexEntry {
            chart: ChartRef::new(name, version),
            maintainers: maintainers.iter().map(|(n, e)| Maintainer::new(Some(n), Some(e))).collect(),
            urls: vec![],
            digest: None,
        }
    }

    fn index(entries: Vec<IndexEntry>) -> RepoIndex {
        RepoIndex { source: "test".into(), fetched_at: chrono::Utc::now(), entries }
    }

    #[test]
    fn chart_named_after_maintainer() {
        let r = detect_irregularities(&index(vec![entry("x", "1.0.0", &[("x", "x@y")])]));
        assert_eq!(r.name_collision, vec![ChartRef::new("x", "1.0.0")]);
        assert!(r.no_maintainer.is_empty());
    }

    #[test]
    fn alias_grouped_by_email() {
        let idx = index(vec![
            entry("a", "1.0.0", &[("bob", "b@x")]),
            entry("b", "1.0.0", &[("bobby", "b@x")]),
            entry("c", "1.0.0", &[("carol", "c@x")]),
        ]);
        let r = detect_irregularities(&idx);
        // oracle: group-by-email over raw records
        let mut oracle: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for e in &idx.entries {
            for m in &e.maintainers {
                oracle.entry(m.email.as_deref().unwrap()).or_default().insert(m.name.as_deref().unwrap());
            }
        }
        let expected: Vec<_> = oracle.into_iter().filter(|(_, n)| n.len() >= 2).collect();
        assert_eq!(r.alias_names.len(), expected.len());
        assert_eq!(r.alias_names[0].email, expected[0].0);
        assert_eq!(r.alias_names[0].names.iter().map(String::as_str).collect::<BTreeSet<_>>(), expected[0].1);
    }

    #[test]
    fn versions_and_missing_maintainers() {
        let mut idx = index(vec![
            entry("redis", "1.0.0", &[("a", "a@x")]),
            entry("redis", "1.1.0", &[("a", "a@x")]),
            entry("mysql", "0.1.0", &[]),
        ]);
        idx.entries.push(IndexEntry { maintainers: vec![Maintainer::new(Some(" "), None)], ..entry("blank", "1.0.0", &[]) });
        let r = detect_irregularities(&idx);
        assert_eq!(r.multiple_versions.iter().map(StemName::as_str).collect::<Vec<_>>(), vec!["redis"]);
        assert_eq!(r.no_maintainer.len(), 2);
        assert_eq!(r.total(), 3);
    }
}
