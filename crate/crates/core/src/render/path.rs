//! Key-path grammar for flattened documents.
//!
//! ```text
//! path    := template "#" doc segment*
//! segment := "/" key | "[" index "]"
//! ```
//!
//! Inside `key`, `~` `/` `[` `#` are written `~0` `~1` `~2` `~3`, so keys
//! such as `helm.sh/hook` survive a round trip.
//! Example: `templates/svc.yaml#0/metadata/annotations/helm.sh~1hook`.

use std::fmt::Write;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Segment {
    Key(String),
    Index(usize),
}

pub fn escape_key(key: &str) -> String {
    let mut out = String::with_capacity(key.len());
    for c in key.chars() {
        match c {
            '~' => out.push_str("~0"),
            '/' => out.push_str("~1"),
            '[' => out.push_str("~2"),
            '#' => out.push_str("~3"),
            c => out.push(c),
        }
    }
    out
}

fn unescape_key(key: &str) -> String {
    let mut out = String::with_capacity(key.len());
    let mut chars = key.chars();
    while let Some(c) = chars.next() {
        if c == '~' {
            match chars.next() {
                Some('0') => out.push('~'),
                Some('1') => out.push('/'),
                Some('2') => out.push('['),
                Some('3') => out.push('#'),
                Some(other) => {
                    out.push('~');
                    out.push(other);
                }
                None => out.push('~'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

pub fn push_segment(path: &mut String, seg: &Segment) {
    match seg {
        Segment::Key(k) => {
            path.push('/');
            path.push_str(&escape_key(k));
        }
        Segment::Index(i) => {
            let _ = write!(path, "[{i}]");
        }
    }
}

pub fn document_prefix(template: &str, doc_index: usize) -> String {
    format!("{template}#{doc_index}")
}

/// A key path split into its parts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyPath {
    pub template: String,
    pub doc_index: usize,
    pub segments: Vec<Segment>,
}

impl KeyPath {
    pub fn parse(path: &str) -> Option<KeyPath> {
        let (template, rest) = path.rsplit_once('#').filter(|(_, r)| {
            r.chars().next().is_some_and(|c| c.is_ascii_digit())
        })?;
        let digits = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
        let doc_index = rest[..digits].parse().ok()?;
        let mut segments = Vec::new();
        let mut rest = &rest[digits..];
        while !rest.is_empty() {
            if let Some(r) = rest.strip_prefix('/') {
                let end = r.find(['/', '[']).unwrap_or(r.len());
                segments.push(Segment::Key(unescape_key(&r[..end])));
                rest = &r[end..];
            } else if let Some(r) = rest.strip_prefix('[') {
                let end = r.find(']')?;
                segments.push(Segment::Index(r[..end].parse().ok()?));
                rest = &r[end + 1..];
            } else {
                return None;
            }
        }
        Some(KeyPath { template: template.to_string(), doc_index, segments })
    }
}

impl std::fmt::Display for KeyPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut s = document_prefix(&self.template, self.doc_index);
        for seg in &self.segments {
            push_segment(&mut s, seg);
        }
        f.write_str(&s)
    }
}
