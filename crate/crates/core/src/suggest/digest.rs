use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::chart::ChartRef;
use crate::ecosystem::IrregularityReport;
use crate::ingest::RepoIndex;
use crate::quality::DuplicateReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IssueKind {
    NoMaintainer,
    NameCollision,
    MultipleVersions,
    AliasNames,
    DuplicateValues,
}

impl IssueKind {
    pub fn as_str(self) -> &'static str {
        match self {
            IssueKind::NoMaintainer => "no-maintainer",
            IssueKind::NameCollision => "name-collision",
            IssueKind::MultipleVersions => "multiple-versions",
            IssueKind::AliasNames => "alias-names",
            IssueKind::DuplicateValues => "duplicate-values",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Issue {
    pub chart: ChartRef,
    pub kind: IssueKind,
    pub detail: String,
    pub diff_link: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssueDigest {
    pub recipient_email: String,
    pub issues: Vec<Issue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DigestSet {
    /// One digest per distinct maintainer e-mail, sorted by address.
    pub digests: Vec<IssueDigest>,
    /// Issues of charts without any maintainer e-mail.
    pub unaddressable: Vec<Issue>,
    pub unique_issues: usize,
    pub addressable_issues: usize,
    pub avg_issues_per_recipient: f64,
}

/// Diff location for a chart under `base_url`.
pub fn diff_link(base_url: &str, chart: &ChartRef) -> Option<String> {
    let base = base_url.trim_end_matches('/');
    (!base.is_empty()).then(|| format!("{base}/diffs/{}.patch", chart.base_name()))
}

fn normalized(email: &str) -> Option<String> {
    let e = email.trim().to_lowercase();
    (!e.is_empty()).then_some(e)
}

/// Groups chart and maintainer issues by recipient e-mail. An issue
/// reaches every maintainer of its chart; issues of charts nobody can be
/// mailed about go to the unaddressable list.
pub fn build_issue_digests(
    index: &RepoIndex,
    irregularities: &IrregularityReport,
    duplicate_reports: &[DuplicateReport],
    base_url: &str,
) -> DigestSet {
    let mut emails_of: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    for e in &index.entries {
        let set = emails_of.entry(e.chart.file_name.as_str()).or_default();
        set.extend(e.maintainers.iter().filter_map(|m| m.email.as_deref().and_then(normalized)));
    }
    let recipients = |c: &ChartRef| emails_of.get(c.file_name.as_str()).cloned().unwrap_or_default();

    let mut issues: Vec<(Issue, BTreeSet<String>)> = Vec::new();
    for c in &irregularities.no_maintainer {
        issues.push((
            Issue { chart: c.clone(), kind: IssueKind::NoMaintainer, detail: "no maintainer is listed".into(), diff_link: None },
            recipients(c),
        ));
    }
    for c in &irregularities.name_collision {
        issues.push((
            Issue {
                chart: c.clone(),
                kind: IssueKind::NameCollision,
                detail: format!("chart name `{}` equals a maintainer name", c.name),
                diff_link: None,
            },
            recipients(c),
        ));
    }
    for stem in &irregularities.multiple_versions {
        let charts: Vec<&ChartRef> = index.charts().filter(|c| &c.stem == stem).collect();
        let Some(first) = charts.iter().min().copied() else { continue };
        let versions: Vec<&str> = charts.iter().map(|c| c.version.as_str()).collect();
        issues.push((
            Issue {
                chart: first.clone(),
                kind: IssueKind::MultipleVersions,
                detail: format!("{} versions listed: {}", versions.len(), versions.join(", ")),
                diff_link: None,
            },
            charts.iter().flat_map(|c| recipients(c)).collect(),
        ));
    }
    for alias in &irregularities.alias_names {
        let Some(chart) = index
            .entries
            .iter()
            .filter(|e| e.maintainers.iter().any(|m| m.email.as_deref().and_then(normalized).as_deref() == Some(alias.email.as_str())))
            .map(|e| &e.chart)
            .min()
        else {
            continue;
        };
        let names: Vec<&str> = alias.names.iter().map(String::as_str).collect();
        issues.push((
            Issue {
                chart: chart.clone(),
                kind: IssueKind::AliasNames,
                detail: format!("e-mail {} is listed under several names: {}", alias.email, names.join(", ")),
                diff_link: None,
            },
            BTreeSet::from([alias.email.clone()]),
        ));
    }
    for r in duplicate_reports.iter().filter(|r| !r.groups.is_empty()) {
        issues.push((
            Issue {
                chart: r.chart.clone(),
                kind: IssueKind::DuplicateValues,
                detail: format!("{} duplicate values in {} groups", r.total_duplicate_values, r.groups.len()),
                diff_link: diff_link(base_url, &r.chart),
            },
            recipients(&r.chart),
        ));
    }

    let mut by_email: BTreeMap<String, Vec<Issue>> = BTreeMap::new();
    let mut unaddressable = Vec::new();
    let mut addressable = 0;
    for (issue, to) in &issues {
        if to.is_empty() {
            unaddressable.push(issue.clone());
            continue;
        }
        addressable += 1;
        for e in to {
            by_email.entry(e.clone()).or_default().push(issue.clone());
        }
    }
    let digests: Vec<IssueDigest> = by_email
        .into_iter()
        .map(|(recipient_email, mut issues)| {
            issues.sort();
            IssueDigest { recipient_email, issues }
        })
        .collect();
    unaddressable.sort();
    DigestSet {
        avg_issues_per_recipient: if digests.is_empty() { 0.0 } else { addressable as f64 / digests.len() as f64 },
        digests,
        unaddressable,
        unique_issues: issues.len(),
        addressable_issues: addressable,
    }
}

fn render_issues(out: &mut String, issues: &[Issue]) {
    for i in issues {
        let _ = writeln!(out, "- {} [{}]: {}", i.chart.file_name, i.kind.as_str(), i.detail);
        if let Some(link) = &i.diff_link {
            let _ = writeln!(out, "  suggested change: {link}");
        }
    }
}

impl IssueDigest {
    /// Message text with `To`, `Subject` and `Date` headers.
    pub fn to_eml(&self, from: &str, at: DateTime<Utc>) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "From: {from}");
        let _ = writeln!(out, "To: {}", self.recipient_email);
        let _ = writeln!(out, "Subject: Chart quality report: {} issue(s)", self.issues.len());
        let _ = writeln!(out, "Date: {}", at.to_rfc2822());
        let _ = writeln!(out, "MIME-Version: 1.0");
        let _ = writeln!(out, "Content-Type: text/plain; charset=utf-8");
        out.push('\n');
        out.push_str("The following issues were found in charts you maintain:\n\n");
        render_issues(&mut out, &self.issues);
        out.replace('\n', "\r\n")
    }
}

fn file_stem(email: &str) -> String {
    email.chars().map(|c| if c.is_ascii_alphanumeric() || "@._-+".contains(c) { c } else { '_' }).collect()
}

/// Writes one `.eml` file per recipient plus `unaddressable.eml` when some
/// issues have no recipient. Existing files are never overwritten.
pub fn write_outbox(dir: &Path, set: &DigestSet, from: &str, at: DateTime<Utc>) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, text: String| -> std::io::Result<()> {
        let path = dir.join(name);
        let mut f = std::fs::OpenOptions::new().write(true).create_new(true).open(&path)?;
        std::io::Write::write_all(&mut f, text.as_bytes())?;
        written.push(path);
        Ok(())
    };
    for d in &set.digests {
        put(format!("{}.eml", file_stem(&d.recipient_email)), d.to_eml(from, at))?;
    }
    if !set.unaddressable.is_empty() {
        let digest = IssueDigest { recipient_email: from.to_string(), issues: set.unaddressable.clone() };
        put("unaddressable.eml".into(), digest.to_eml(from, at))?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Maintainer;
    use crate::ecosystem::detect_irregularities;
    use crate::ingest::IndexEntry;
    use crate::quality::DuplicateGroup;
    use crate::yaml::ScalarKind;

    fn entry(name: &str, version: &str, emails: &[&str]) -> IndexEntry {
        IndexEntry {
            chart: ChartRef::new(name, version),
            maintainers: emails.iter().map(|e| Maintainer::new(Some(&e[..1]), Some(e))).collect(),
            urls: vec![],
            digest: None,
        }
    }

    fn dupes(chart: ChartRef) -> DuplicateReport {
        DuplicateReport {
            chart,
            groups: vec![DuplicateGroup { canonical_value: "httpd".into(), kind: ScalarKind::Str, occurrences: vec![], count: 3 }],
            total_duplicate_values: 3,
            threshold_used: 3,
            blacklist_used: vec![],
            unparseable: vec![],
        }
    }

    fn index(entries: Vec<IndexEntry>) -> RepoIndex {
        RepoIndex { source: "t".into(), fetched_at: Utc::now(), entries }
    }

    #[test]
    fn co_maintainers_both_receive_the_issue() {
        let idx = index(vec![entry("web", "1.0.0", &["a@x", "b@x"])]);
        let set = build_issue_digests(&idx, &detect_irregularities(&idx), &[dupes(ChartRef::new("web", "1.0.0"))], "https://q.example");
        assert_eq!(set.digests.len(), 2);
        assert_eq!(set.digests[0].issues, set.digests[1].issues);
        assert_eq!(set.digests[0].issues[0].diff_link.as_deref(), Some("https://q.example/diffs/web-1.0.0.patch"));
        assert_eq!(set.unique_issues, 1);
        assert_eq!(set.avg_issues_per_recipient, 0.5);
    }

    #[test]
    fn chart_without_maintainer_is_unaddressable() {
        let idx = index(vec![entry("lonely", "1.0.0", &[]), entry("ok", "1.0.0", &["a@x"])]);
        let set = build_issue_digests(&idx, &detect_irregularities(&idx), &[dupes(ChartRef::new("lonely", "1.0.0"))], "");
        assert!(set.digests.is_empty());
        assert_eq!(set.unaddressable.len(), 2);
        assert!(set.unaddressable.iter().all(|i| i.chart.name == "lonely" && i.diff_link.is_none()));
    }

    #[test]
    fn partition_and_average() {
        let idx = index(vec![
            entry("a", "1.0.0", &["p@x"]),
            entry("a", "1.1.0", &["q@x"]),
            entry("b", "1.0.0", &["p@x", "r@x"]),
            entry("p", "1.0.0", &["s@x"]),
            entry("c", "1.0.0", &[]),
        ]);
        let irr = detect_irregularities(&idx);
        let reports = vec![dupes(ChartRef::new("b", "1.0.0")), dupes(ChartRef::new("c", "1.0.0"))];
        let set = build_issue_digests(&idx, &irr, &reports, "");
        // every issue is delivered somewhere
        let mut delivered: BTreeSet<&Issue> = set.digests.iter().flat_map(|d| &d.issues).collect();
        delivered.extend(&set.unaddressable);
        assert_eq!(delivered.len(), set.unique_issues);
        // the duplicate issue of b reaches exactly b's maintainers
        let holders: Vec<&str> = set
            .digests
            .iter()
            .filter(|d| d.issues.iter().any(|i| i.kind == IssueKind::DuplicateValues && i.chart.name == "b"))
            .map(|d| d.recipient_email.as_str())
            .collect();
        assert_eq!(holders, vec!["p@x", "r@x"]);
        assert_eq!(set.avg_issues_per_recipient, set.addressable_issues as f64 / set.digests.len() as f64);
    }

    #[test]
    fn outbox_files() {
        let idx = index(vec![entry("web", "1.0.0", &["a@x"]), entry("nobody", "1.0.0", &[])]);
        let set = build_issue_digests(&idx, &detect_irregularities(&idx), &[dupes(ChartRef::new("web", "1.0.0"))], "");
        let dir = tempfile::tempdir().unwrap();
        let at = Utc::now();
        let files = write_outbox(dir.path(), &set, "qa@example.org", at).unwrap();
        assert_eq!(files.len(), 2);
        let text = std::fs::read_to_string(dir.path().join("a@x.eml")).unwrap();
        assert!(text.starts_with("From: qa@example.org\r\nTo: a@x\r\nSubject: "));
        assert!(text.contains("web-1.0.0.tgz [duplicate-values]"));
        assert!(write_outbox(dir.path(), &set, "qa@example.org", at).is_err());
    }
}
