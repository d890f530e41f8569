use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::chart::{ChartRef, StemName};
use crate::ingest::{RepoIndex, Snapshot};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionUpdate {
    pub removed: ChartRef,
    pub added: ChartRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeSet {
    pub from_id: String,
    pub to_id: String,
    pub added: Vec<ChartRef>,
    pub removed: Vec<ChartRef>,
    pub updated: Vec<ChartRef>,
    pub vupdates: Vec<VersionUpdate>,
}

impl ChangeSet {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty() && self.updated.is_empty() && self.vupdates.is_empty()
    }
}

/// Differences between two snapshots, using stored archive digests where
/// available.
pub fn detect_changes(a: &Snapshot, b: &Snapshot) -> ChangeSet {
    let side = |s: &Snapshot| -> Vec<(ChartRef, Option<String>)> {
        s.index.entries.iter().map(|e| (e.chart.clone(), s.digest_of(&e.chart.file_name).map(str::to_string))).collect()
    };
    diff_charts(&a.id, side(a), &b.id, side(b))
}

/// Differences between two indices, using the digests they state.
pub fn detect_index_changes(from_id: &str, a: &RepoIndex, to_id: &str, b: &RepoIndex) -> ChangeSet {
    let side = |i: &RepoIndex| i.entries.iter().map(|e| (e.chart.clone(), e.digest.clone())).collect();
    diff_charts(from_id, side(a), to_id, side(b))
}

fn diff_charts(
    from_id: &str,
    a: Vec<(ChartRef, Option<String>)>,
    to_id: &str,
    b: Vec<(ChartRef, Option<String>)>,
) -> ChangeSet {
    let key = |c: &ChartRef| (c.name.clone(), c.version.clone());
    let a: BTreeMap<_, _> = a.into_iter().map(|(c, d)| (key(&c), (c, d))).collect();
    let b: BTreeMap<_, _> = b.into_iter().map(|(c, d)| (key(&c), (c, d))).collect();

    let mut updated = Vec::new();
    let mut removed_by_stem: BTreeMap<StemName, Vec<ChartRef>> = BTreeMap::new();
    let mut added_by_stem: BTreeMap<StemName, Vec<ChartRef>> = BTreeMap::new();
    for (k, (chart, digest)) in &a {
        match b.get(k) {
            Some((_, new_digest)) => {
                if let (Some(x), Some(y)) = (digest, new_digest) {
                    if !x.eq_ignore_ascii_case(y) {
                        updated.push(b[k].0.clone());
                    }
                }
            }
            None => removed_by_stem.entry(chart.stem.clone()).or_default().push(chart.clone()),
        }
    }
    for (k, (chart, _)) in &b {
        if !a.contains_key(k) {
            added_by_stem.entry(chart.stem.clone()).or_default().push(chart.clone());
        }
    }

    let mut vupdates = Vec::new();
    let mut removed = Vec::new();
    let mut added = Vec::new();
    let stems: BTreeSet<StemName> = removed_by_stem.keys().chain(added_by_stem.keys()).cloned().collect();
    for stem in stems {
        let mut rem = removed_by_stem.remove(&stem).unwrap_or_default();
        let mut add = added_by_stem.remove(&stem).unwrap_or_default();
        rem.sort_by(|x, y| x.version.cmp(&y.version).then_with(|| x.cmp(y)));
        add.sort_by(|x, y| x.version.cmp(&y.version).then_with(|| x.cmp(y)));
        let mut used = vec![false; add.len()];
        for r in rem {
            let partner = (0..add.len()).find(|&i| !used[i] && add[i].version != r.version);
            match partner {
                Some(i) => {
                    used[i] = true;
                    vupdates.push(VersionUpdate { removed: r, added: add[i].clone() });
                }
                None => removed.push(r),
            }
        }
        added.extend(add.into_iter().zip(used).filter(|(_, u)| !u).map(|(c, _)| c));
    }
    removed.sort();
    added.sort();
    ChangeSet { from_id: from_id.to_string(), to_id: to_id.to_string(), added, removed, updated, vupdates }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn side(items: &[(&str, &str, Option<&str>)]) -> Vec<(ChartRef, Option<String>)> {
        items.iter().map(|(n, v, d)| (ChartRef::new(*n, *v), d.map(str::to_string))).collect()
    }

    #[test]
    fn version_bump_is_a_vupdate() {
        let c = diff_charts("a", side(&[("redis", "1.0.0", None)]), "b", side(&[("redis", "1.0.1", None)]));
        assert_eq!(c.vupdates.len(), 1);
        assert!(c.added.is_empty() && c.removed.is_empty() && c.updated.is_empty());
    }

    #[test]
    fn identical_is_empty() {
        let s = side(&[("redis", "1.0.0", Some("aa")), ("mysql", "2.0.0", None)]);
        assert!(diff_charts("a", s.clone(), "b", s).is_empty());
    }

    #[test]
    fn digest_change_is_an_update() {
        let a = side(&[("redis", "1.0.0", Some("aa")), ("mysql", "2.0.0", Some("cc"))]);
        let b = side(&[("redis", "1.0.0", Some("bb")), ("mysql", "2.0.0", Some("CC"))]);
        let c = diff_charts("a", a.clone(), "b", b.clone());
        // oracle: direct digest comparison per (name, version)
        let expected: Vec<_> = a
            .iter()
            .zip(&b)
            .filter(|(x, y)| x.1.as_ref().unwrap().to_lowercase() != y.1.as_ref().unwrap().to_lowercase())
            .map(|(_, y)| y.0.clone())
            .collect();
        assert_eq!(c.updated, expected);
        assert!(c.vupdates.is_empty());
    }

    #[test]
    fn pairing_is_smallest_first() {
        let a = side(&[("x", "1.0.0", None), ("x", "1.1.0", None), ("y", "1.0.0", None)]);
        let b = side(&[("x", "2.0.0", None), ("x", "1.5.0", None), ("x", "3.0.0", None), ("z", "1.0.0", None)]);
        let c = diff_charts("a", a, "b", b);
        let pairs: Vec<_> = c.vupdates.iter().map(|v| (v.removed.version.as_str(), v.added.version.as_str())).collect();
        assert_eq!(pairs, vec![("1.0.0", "1.5.0"), ("1.1.0", "2.0.0")]);
        assert_eq!(c.added.iter().map(|c| c.file_name.as_str()).collect::<Vec<_>>(), vec!["x-3.0.0.tgz", "z-1.0.0.tgz"]);
        assert_eq!(c.removed, vec![ChartRef::new("y", "1.0.0")]);
    }

    #[test]
    fn same_version_under_other_name_is_not_paired() {
        let c = diff_charts("a", side(&[("magic-ns", "1.0.0", None)]), "b", side(&[("magicns", "1.0.0", None)]));
        assert!(c.vupdates.is_empty());
        assert_eq!((c.added.len(), c.removed.len()), (1, 1));
    }

    fn arb_side() -> impl Strategy<Value = Vec<(ChartRef, Option<String>)>> {
        prop::collection::btree_map((0u8..4, 0u8..5), prop::option::of(0u8..3), 0..12).prop_map(|m| {
            m.into_iter()
                .map(|((n, v), d)| (ChartRef::new(format!("c{n}"), format!("1.{v}.0")), d.map(|d| d.to_string())))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn categories_are_disjoint(a in arb_side(), b in arb_side()) {
            let raw_removed = a.iter().filter(|(c, _)| !b.iter().any(|(d, _)| d == c)).count();
            let raw_added = b.iter().filter(|(c, _)| !a.iter().any(|(d, _)| d == c)).count();
            let c = diff_charts("a", a, "b", b);
            prop_assert!(c.vupdates.len() <= raw_removed.min(raw_added));
            prop_assert_eq!(c.removed.len() + c.vupdates.len(), raw_removed);
            prop_assert_eq!(c.added.len() + c.vupdates.len(), raw_added);
            let mut seen = BTreeSet::new();
            let all = c.added.iter().chain(&c.removed).chain(&c.updated)
                .chain(c.vupdates.iter().flat_map(|v| [&v.removed, &v.added]));
            for r in all {
                prop_assert!(seen.insert((r.name.clone(), r.version.clone())));
            }
            for v in &c.vupdates {
                prop_assert_eq!(&v.removed.stem, &v.added.stem);
                prop_assert_ne!(&v.removed.version, &v.added.version);
            }
        }
    }
}
