use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::chart::{ChartRef, Maintainer};
use crate::ingest::RepoIndex;

/// How maintainer records are merged into identities.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdentityMode {
    /// Records sharing a normalized e-mail are one person; records without
    /// an e-mail are keyed by name.
    #[default]
    Email,
    /// Every distinct (name, e-mail) pair is its own identity.
    NameEmail,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MaintainerIdentity {
    pub key: String,
    pub names_seen: BTreeSet<String>,
    pub emails_seen: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaintainerSet {
    pub members: Vec<MaintainerIdentity>,
    /// Chart archives maintained by exactly this combination.
    pub charts: BTreeSet<ChartRef>,
    pub size: usize,
}

impl MaintainerSet {
    pub fn member_keys(&self) -> impl Iterator<Item = &str> {
        self.members.iter().map(|m| m.key.as_str())
    }

    pub fn stems(&self) -> BTreeSet<&str> {
        self.charts.iter().map(|c| c.stem.as_str()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaintainerMetrics {
    pub charts: usize,
    pub maintained_charts: usize,
    pub unmaintained_charts: usize,
    pub maintainers: usize,
    /// Maintainer sets, with the charts lacking maintainers counted as one
    /// more set when there are any.
    pub total_sets: usize,
    pub unique_emails: usize,
    pub avg_charts_per_maintainer: f64,
    pub avg_charts_per_set: f64,
    pub max_charts_per_set: usize,
    pub avg_maintainers_per_set: f64,
    pub max_maintainers_per_set: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaintainerSets {
    pub identities: Vec<MaintainerIdentity>,
    pub sets: Vec<MaintainerSet>,
    /// Charts without any usable maintainer record.
    pub unmaintained: Vec<ChartRef>,
    pub metrics: MaintainerMetrics,
}

pub(crate) fn normalize_email(e: &str) -> Option<String> {
    let e = e.trim().to_lowercase();
    (!e.is_empty()).then_some(e)
}

pub(crate) fn normalize_name(n: &str) -> Option<String> {
    let n = n.trim();
    (!n.is_empty()).then(|| n.to_string())
}

fn identity_key(m: &Maintainer, mode: IdentityMode) -> Option<String> {
    let email = m.email.as_deref().and_then(normalize_email);
    let name = m.name.as_deref().and_then(normalize_name);
    match mode {
        IdentityMode::Email => email.map(|e| format!("mailto:{e}")).or_else(|| name.map(|n| format!("name:{n}"))),
        IdentityMode::NameEmail => match (name, email) {
            (None, None) => None,
            (n, e) => Some(format!("{} <{}>", n.unwrap_or_default(), e.unwrap_or_default())),
        },
    }
}

/// Builds maintainer identities and the sets of identities that jointly
/// maintain each chart.
pub fn compute_maintainer_sets(index: &RepoIndex, mode: IdentityMode) -> MaintainerSets {
    let mut identities: BTreeMap<String, MaintainerIdentity> = BTreeMap::new();
    let mut by_combination: BTreeMap<BTreeSet<String>, BTreeSet<ChartRef>> = BTreeMap::new();
    let mut unmaintained = Vec::new();

    for entry in &index.entries {
        let mut combo = BTreeSet::new();
        for m in &entry.maintainers {
            let Some(key) = identity_key(m, mode) else { continue };
            let id = identities.entry(key.clone()).or_insert_with(|| MaintainerIdentity {
                key: key.clone(),
                names_seen: BTreeSet::new(),
                emails_seen: BTreeSet::new(),
            });
            id.names_seen.extend(m.name.as_deref().and_then(normalize_name));
            id.emails_seen.extend(m.email.as_deref().and_then(normalize_email));
            combo.insert(key);
        }
        if combo.is_empty() {
            unmaintained.push(entry.chart.clone());
        } else {
            by_combination.entry(combo).or_default().insert(entry.chart.clone());
        }
    }
    unmaintained.sort();

    let sets: Vec<MaintainerSet> = by_combination
        .into_iter()
        .map(|(keys, charts)| MaintainerSet {
            size: keys.len(),
            members: keys.iter().map(|k| identities[k].clone()).collect(),
            charts,
        })
        .collect();

    let charts = index.entries.len();
    let maintainers = identities.len();
    let total_sets = sets.len() + usize::from(!unmaintained.is_empty());
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let unique_emails: BTreeSet<&String> = identities.values().flat_map(|i| &i.emails_seen).collect();
    let metrics = MaintainerMetrics {
        charts,
        maintained_charts: charts - unmaintained.len(),
        unmaintained_charts: unmaintained.len(),
        maintainers,
        total_sets,
        unique_emails: unique_emails.len(),
        avg_charts_per_maintainer: ratio(charts, maintainers),
        avg_charts_per_set: ratio(charts, total_sets),
        max_charts_per_set: sets.iter().map(|s| s.charts.len()).chain([unmaintained.len()]).max().unwrap_or(0),
        avg_maintainers_per_set: ratio(maintainers, total_sets),
        max_maintainers_per_set: sets.iter().map(|s| s.size).max().unwrap_or(0),
    };
    MaintainerSets { identities: identities.into_values().collect(), sets, unmaintained, metrics }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::IndexEntry;
    use proptest::prelude::*;

    pub(crate) fn entry(name: &str, version: &str, maintainers: &[(&str, &str)]) -> IndexEntry {
        IndexEntry {
            chart: ChartRef::new(name, version),
            maintainers: maintainers
                .iter()
                .map(|(n, e)| Maintainer::new((!n.is_empty()).then_some(*n), (!e.is_empty()).then_some(*e)))
                .collect(),
            urls: vec![],
            digest: None,
        }
    }

    fn index(entries: Vec<IndexEntry>) -> RepoIndex {
        RepoIndex { source: "test".into(), fetched_at: chrono::Utc::now(), entries }
    }

    #[test]
    fn single_chart_single_maintainer() {
        let r = compute_maintainer_sets(&index(vec![entry("a", "1.0.0", &[("ann", "ann@x")])]), IdentityMode::Email);
        assert_eq!(r.identities.len(), 1);
        assert_eq!(r.sets.len(), 1);
        assert_eq!(r.metrics.avg_charts_per_maintainer, 1.0);
        assert_eq!(r.metrics.avg_charts_per_set, 1.0);
        assert_eq!(r.metrics.avg_maintainers_per_set, 1.0);
    }

    #[test]
    fn shared_member_in_two_sets() {
        let idx = index(vec![
            entry("a", "1.0.0", &[("m1", "m1@x"), ("m2", "m2@x")]),
            entry("b", "1.0.0", &[("m1", "m1@x")]),
        ]);
        let r = compute_maintainer_sets(&idx, IdentityMode::Email);
        assert_eq!(r.sets.len(), 2);
        let combos: BTreeSet<Vec<&str>> = r.sets.iter().map(|s| s.member_keys().collect()).collect();
        assert!(combos.contains(&vec!["mailto:m1@x"]));
        assert!(combos.contains(&vec!["mailto:m1@x", "mailto:m2@x"]));
    }

    #[test]
    fn emails_merge_case_insensitively_and_modes_differ() {
        let idx = index(vec![
            entry("a", "1.0.0", &[("Bob", "B@X.org ")]),
            entry("b", "1.0.0", &[("Bobby", "b@x.org")]),
            entry("c", "1.0.0", &[("", "")]),
            entry("d", "1.0.0", &[]),
        ]);
        let r = compute_maintainer_sets(&idx, IdentityMode::Email);
        assert_eq!(r.identities.len(), 1);
        assert_eq!(r.identities[0].names_seen.len(), 2);
        assert_eq!(r.sets.len(), 1);
        assert_eq!(r.unmaintained.len(), 2);
        assert_eq!(r.metrics.total_sets, 2);
        assert_eq!(r.metrics.max_charts_per_set, 2);
        let pairs = compute_maintainer_sets(&idx, IdentityMode::NameEmail);
        assert_eq!(pairs.identities.len(), 2);
        assert_eq!(pairs.sets.len(), 2);
    }

    fn arb_index() -> impl Strategy<Value = Vec<IndexEntry>> {
        let people = ["a", "b", "c", "d"];
        prop::collection::vec((0u8..6, prop::collection::vec((0usize..4, any::<bool>()), 0..4)), 1..12).prop_map(
            move |charts| {
                charts
                    .into_iter()
                    .enumerate()
                    .map(|(i, (v, ms))| {
                        let recs: Vec<(String, String)> = ms
                            .into_iter()
                            .map(|(p, upper)| {
                                let email = format!("{}@x", people[p]);
                                (people[p].to_string(), if upper { email.to_uppercase() } else { email })
                            })
                            .collect();
                        let refs: Vec<(&str, &str)> = recs.iter().map(|(n, e)| (n.as_str(), e.as_str())).collect();
                        entry(&format!("c{}", i % 5), &format!("1.{v}.{i}"), &refs)
                    })
                    .collect()
            },
        )
    }

    proptest! {
        #[test]
        fn sets_partition_maintained_charts(entries in arb_index()) {
            let r = compute_maintainer_sets(&index(entries.clone()), IdentityMode::Email);
            // oracle: group charts by the lowercased e-mail set of their records
            let mut groups: BTreeMap<BTreeSet<String>, usize> = BTreeMap::new();
            for e in &entries {
                let combo: BTreeSet<String> = e.maintainers.iter().filter_map(|m| m.email.as_ref()).map(|s| s.to_lowercase()).collect();
                if !combo.is_empty() {
                    *groups.entry(combo).or_default() += 1;
                }
            }
            prop_assert_eq!(r.sets.len(), groups.len());
            let total: usize = r.sets.iter().map(|s| s.charts.len()).sum();
            prop_assert_eq!(total, groups.values().sum::<usize>());
            for s in &r.sets {
                prop_assert_eq!(s.size, s.members.len());
            }
        }

        #[test]
        fn merging_is_order_independent(entries in arb_index(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let a = compute_maintainer_sets(&index(entries.clone()), IdentityMode::Email);
            let mut shuffled = entries;
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let b = compute_maintainer_sets(&index(shuffled), IdentityMode::Email);
            prop_assert_eq!(a, b);
        }
    }
}
