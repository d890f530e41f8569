use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::ecosystem::{IrregularityReport, MaintainerSets};

/// A maintainer to chart graph in DOT syntax.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphDoc {
    pub text: String,
    pub nodes: usize,
    pub edges: usize,
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' | '\\' => {
                out.push('\\');
                out.push(c);
            }
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

struct Node {
    label: String,
    class: &'static str,
    attrs: &'static str,
}

/// Bipartite maintainer to chart graph. Every chart archive contributes its
/// own edge, so several versions of one chart show up as parallel edges. A
/// chart named like a maintainer merges into that maintainer's node, which
/// turns its edge into a self-loop.
pub fn emit_dot(sets: &MaintainerSets, irregularities: &IrregularityReport) -> GraphDoc {
    let mut nodes: BTreeMap<String, Node> = BTreeMap::new();
    let mut by_name: BTreeMap<&str, String> = BTreeMap::new();
    for id in &sets.identities {
        let node = format!("m:{}", id.key);
        let label = if id.names_seen.is_empty() {
            id.emails_seen.iter().cloned().collect::<Vec<_>>().join(" / ")
        } else {
            id.names_seen.iter().cloned().collect::<Vec<_>>().join(" / ")
        };
        for n in &id.names_seen {
            by_name.entry(n.as_str()).or_insert_with(|| node.clone());
        }
        nodes.insert(node, Node { label, class: "maintainer", attrs: "shape=ellipse" });
    }

    let colliding: BTreeSet<&str> = irregularities.name_collision.iter().map(|c| c.name.as_str()).collect();
    let chart_node = |name: &str, stem: &str, nodes: &mut BTreeMap<String, Node>| -> String {
        if colliding.contains(name) {
            if let Some(m) = by_name.get(name) {
                let n = nodes.get_mut(m).expect("maintainer node");
                n.class = "maintainer chart collision";
                n.attrs = "shape=doubleoctagon, xlabel=\"name collision\"";
                return m.clone();
            }
        }
        let id = format!("c:{stem}");
        nodes.entry(id.clone()).or_insert_with(|| Node { label: stem.to_string(), class: "chart", attrs: "shape=box" });
        id
    };

    let mut edges: Vec<(String, String, String)> = Vec::new();
    for set in &sets.sets {
        for chart in &set.charts {
            let target = chart_node(&chart.name, chart.stem.as_str(), &mut nodes);
            for key in set.member_keys() {
                edges.push((format!("m:{key}"), target.clone(), chart.version.clone()));
            }
        }
    }
    for chart in &sets.unmaintained {
        let id = chart_node(&chart.name, chart.stem.as_str(), &mut nodes);
        if let Some(n) = nodes.get_mut(&id) {
            if n.class == "chart" {
                n.attrs = "shape=box, style=dashed";
            }
        }
    }
    edges.sort();

    let mut text = String::from("digraph maintainers {\n  rankdir=LR;\n");
    for (id, n) in &nodes {
        let _ = writeln!(text, "  {} [label={}, class={}, {}];", quote(id), quote(&n.label), quote(n.class), n.attrs);
    }
    for (from, to, version) in &edges {
        let _ = writeln!(text, "  {} -> {} [label={}];", quote(from), quote(to), quote(version));
    }
    text.push_str("}\n");
    GraphDoc { text, nodes: nodes.len(), edges: edges.len() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{ChartRef, Maintainer};
    use crate::ecosystem::{compute_maintainer_sets, detect_irregularities, IdentityMode};
    use crate::ingest::{IndexEntry, RepoIndex};

    fn graph(entries: &[(&str, &str, &[(&str, &str)])]) -> GraphDoc {
        let idx = RepoIndex {
            source: "t".into(),
            fetched_at: chrono::Utc::now(),
            entries: entries
                .iter()
                .map(|(n, v, ms)| IndexEntry {
                    chart: ChartRef::new(*n, *v),
                    maintainers: ms.iter().map(|(a, b)| Maintainer::new(Some(a), Some(b))).collect(),
                    urls: vec![],
                    digest: None,
                })
                .collect(),
        };
        emit_dot(&compute_maintainer_sets(&idx, IdentityMode::Email), &detect_irregularities(&idx))
    }

    fn parses(text: &str) {
        graphviz_rust::parse(text).unwrap_or_else(|e| panic!("invalid DOT: {e}\n{text}"));
    }

    #[test]
    fn one_maintainer_one_chart() {
        let g = graph(&[("web", "1.0.0", &[("ann", "ann@x")])]);
        assert_eq!((g.nodes, g.edges), (2, 1));
        parses(&g.text);
    }

    #[test]
    fn two_versions_give_parallel_edges() {
        let g = graph(&[("web", "1.0.0", &[("ann", "ann@x")]), ("web", "1.1.0", &[("ann", "ann@x")])]);
        assert_eq!((g.nodes, g.edges), (2, 2));
        let lines: Vec<&str> = g.text.lines().filter(|l| l.contains("->")).collect();
        assert!(lines.iter().all(|l| l.contains("\"m:mailto:ann@x\" -> \"c:web\"")));
        parses(&g.text);
    }

    #[test]
    fn name_collision_collapses_into_a_self_loop() {
        let g = graph(&[("artifactory", "1.0.0", &[("artifactory", "a@x")]), ("other", "1.0.0", &[])]);
        assert_eq!(g.nodes, 2);
        assert!(g.text.contains("\"m:mailto:a@x\" -> \"m:mailto:a@x\""));
        assert!(g.text.contains("name collision"));
        assert!(g.text.contains("style=dashed"));
        parses(&g.text);
    }

    #[test]
    fn quoting_survives_odd_names() {
        let g = graph(&[("web", "1.0.0", &[("A \"quoted\" \\ name", "q@x")])]);
        parses(&g.text);
    }
}
