//! Template sources as YAML.
//!
//! Every `{{ ... }}` directive is overwritten in place by a sentinel of the
//! same byte length, so offsets in the sanitized text are offsets in the
//! original. Lines holding nothing but directives are blanked. The result
//! is parsed with a span-aware event parser, yielding every scalar leaf
//! with its key path and source span.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use yaml_rust2::parser::{MarkedEventReceiver, Parser};
use yaml_rust2::scanner::{Marker, TScalarStyle};
use yaml_rust2::Event;

use crate::render::path::{document_prefix, push_segment, Segment};
use crate::yaml::{canonical_scalar, resolve_plain, split_documents, CanonicalScalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LeafStyle {
    Plain,
    SingleQuoted,
    DoubleQuoted,
    Block,
}

/// A scalar value in a template source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceLeaf {
    /// Key path; a repeated path gets a `~~N` suffix from its second
    /// occurrence on.
    pub key_path: String,
    pub value: CanonicalScalar,
    pub style: LeafStyle,
    /// Bytes of the whole scalar token, quotes included.
    pub span: Range<usize>,
    /// Bytes between the quotes; equal to `span` for unquoted scalars.
    pub content: Range<usize>,
    /// True when the span overlaps a directive.
    pub templated: bool,
}

impl SourceLeaf {
    /// Literal leaves whose source text is exactly their value.
    pub fn is_verbatim(&self, source: &str) -> bool {
        !self.templated
            && self.style != LeafStyle::Block
            && source.get(self.content.clone()) == Some(self.value.text.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{template_path}: {reason}")]
pub struct TemplateUnparseable {
    pub template_path: String,
    pub reason: String,
}

/// Byte ranges of all `{{ ... }}` directives. An unclosed directive runs
/// to the end of the text.
pub fn directive_ranges(src: &str) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut pos = 0;
    while let Some(i) = src[pos..].find("{{") {
        let start = pos + i;
        let end = src[start + 2..].find("}}").map_or(src.len(), |j| start + 2 + j + 2);
        out.push(start..end);
        pos = end;
    }
    out
}

/// Replaces directives with same-length sentinels and blanks
/// directive-only lines. Returns the text and the directive ranges.
pub fn sanitize(src: &str) -> (String, Vec<Range<usize>>) {
    let ranges = directive_ranges(src);
    let mut bytes = src.as_bytes().to_vec();
    for (idx, r) in ranges.iter().enumerate() {
        let mut sentinel = format!("Z{idx:x}").into_bytes().into_iter().chain(std::iter::repeat(b'z'));
        for b in &mut bytes[r.clone()] {
            if *b != b'\n' {
                *b = sentinel.next().expect("endless");
            }
        }
    }
    let mut line_start = 0;
    let mut ri = 0;
    for line in src.split_inclusive('\n') {
        let line_end = line_start + line.len();
        while ri < ranges.len() && ranges[ri].end <= line_start {
            ri += 1;
        }
        let mut touched = false;
        let only_directives = line.bytes().enumerate().all(|(k, b)| {
            let at = line_start + k;
            let inside = ranges[ri..].iter().take_while(|r| r.start < line_end).any(|r| r.contains(&at));
            touched |= inside;
            inside || b.is_ascii_whitespace()
        });
        if touched && only_directives {
            for b in &mut bytes[line_start..line_end] {
                if *b != b'\n' && *b != b'\r' {
                    *b = b' ';
                }
            }
        }
        line_start = line_end;
    }
    (String::from_utf8(bytes).expect("whole characters replaced by ASCII"), ranges)
}

#[derive(Default)]
struct Collect(Vec<(Event, Marker)>);

impl MarkedEventReceiver for Collect {
    fn on_event(&mut self, ev: Event, mark: Marker) {
        self.0.push((ev, mark));
    }
}

enum Frame {
    Map { key: Option<String>, path_len: usize },
    Seq { next: usize, path_len: usize },
}

/// Parses one template source into scalar leaves.
pub fn scan_template(template_path: &str, src: &str) -> Result<Vec<SourceLeaf>, TemplateUnparseable> {
    let (clean, ranges) = sanitize(src);
    let mut leaves = Vec::new();
    let mut seen = std::collections::HashMap::<String, usize>::new();
    for doc in split_documents(&clean) {
        let mut recv = Collect::default();
        Parser::new_from_str(doc.text).load(&mut recv, true).map_err(|e| TemplateUnparseable {
            template_path: template_path.to_string(),
            reason: format!("document {}: {e}", doc.index),
        })?;
        let byte_at: Vec<usize> = doc
            .text
            .char_indices()
            .map(|(b, _)| b)
            .chain(std::iter::once(doc.text.len()))
            .collect();

        let mut path = document_prefix(template_path, doc.index);
        let root_len = path.len();
        let mut stack: Vec<Frame> = Vec::new();
        let next_marks: Vec<usize> = recv.0.iter().skip(1).map(|(_, m)| m.index()).chain([usize::MAX]).collect();
        for ((ev, mark), next_mark) in recv.0.into_iter().zip(next_marks) {
            // position the path for a node appearing in the current frame
            let is_key = matches!(stack.last(), Some(Frame::Map { key: None, .. }));
            let enter = |stack: &mut Vec<Frame>, path: &mut String| match stack.last_mut() {
                Some(Frame::Map { key: Some(k), path_len }) => {
                    path.truncate(*path_len);
                    push_segment(path, &Segment::Key(k.clone()));
                }
                Some(Frame::Seq { next, path_len }) => {
                    path.truncate(*path_len);
                    push_segment(path, &Segment::Index(*next));
                }
                _ => path.truncate(root_len),
            };
            let leave = |stack: &mut Vec<Frame>| match stack.last_mut() {
                Some(Frame::Map { key, .. }) => *key = None,
                Some(Frame::Seq { next, .. }) => *next += 1,
                None => {}
            };
            match ev {
                Event::Scalar(text, style, _, _) if is_key => {
                    if let Some(Frame::Map { key, .. }) = stack.last_mut() {
                        *key = Some(scalar_value(&text, style).text);
                    }
                }
                Event::Scalar(text, style, _, _) => {
                    enter(&mut stack, &mut path);
                    let start = doc.offset + byte_at[mark.index().min(byte_at.len() - 1)];
                    let (span, content) = match style {
                        TScalarStyle::Literal | TScalarStyle::Folded => {
                            let next = doc.offset + byte_at[next_mark.min(byte_at.len() - 1)];
                            let end = block_end(src, start, next);
                            (start..end, start..end)
                        }
                        _ => token_extent(&clean, start, &text, style),
                    };
                    let templated = ranges.iter().any(|r| r.start < span.end && span.start < r.end);
                    let n = seen.entry(path.clone()).or_default();
                    *n += 1;
                    let key_path = if *n == 1 { path.clone() } else { format!("{path}~~{n}") };
                    leaves.push(SourceLeaf {
                        key_path,
                        value: scalar_value(&text, style),
                        style: leaf_style(style),
                        span,
                        content,
                        templated,
                    });
                    leave(&mut stack);
                }
                Event::MappingStart(..) | Event::SequenceStart(..) => {
                    if is_key {
                        // complex key
                        if let Some(Frame::Map { key, .. }) = stack.last_mut() {
                            *key = Some("?".into());
                        }
                    }
                    enter(&mut stack, &mut path);
                    let path_len = path.len();
                    stack.push(if matches!(ev, Event::MappingStart(..)) {
                        Frame::Map { key: None, path_len }
                    } else {
                        Frame::Seq { next: 0, path_len }
                    });
                }
                Event::MappingEnd | Event::SequenceEnd => {
                    stack.pop();
                    leave(&mut stack);
                }
                Event::Alias(_) => {
                    if is_key {
                        if let Some(Frame::Map { key, .. }) = stack.last_mut() {
                            *key = Some("*".into());
                        }
                    } else {
                        leave(&mut stack);
                    }
                }
                _ => {}
            }
        }
    }
    Ok(leaves)
}

fn leaf_style(style: TScalarStyle) -> LeafStyle {
    match style {
        TScalarStyle::Plain => LeafStyle::Plain,
        TScalarStyle::SingleQuoted => LeafStyle::SingleQuoted,
        TScalarStyle::DoubleQuoted => LeafStyle::DoubleQuoted,
        TScalarStyle::Literal | TScalarStyle::Folded => LeafStyle::Block,
    }
}

fn scalar_value(text: &str, style: TScalarStyle) -> CanonicalScalar {
    match style {
        TScalarStyle::Plain => canonical_scalar(&resolve_plain(text)).unwrap_or_else(|| CanonicalScalar::string(text)),
        _ => CanonicalScalar::string(text),
    }
}

/// End of a block scalar whose content starts at `start`: the last
/// non-blank line indented at least as deep as the first, before `limit`.
fn block_end(src: &str, start: usize, limit: usize) -> usize {
    let line_start = src[..start].rfind('\n').map_or(0, |i| i + 1);
    let indent = start - line_start;
    let mut end = start;
    let mut pos = line_start;
    for line in src[line_start..limit.max(start).min(src.len())].split_inclusive('\n') {
        let body = line.trim_end();
        if pos == line_start {
            end = pos + body.len();
        } else if !body.trim().is_empty() {
            if body.len() - body.trim_start().len() < indent {
                break;
            }
            end = pos + body.len();
        }
        pos += line.len();
    }
    end
}

/// Source extent of a scalar token starting at byte `start`.
fn token_extent(src: &str, start: usize, value: &str, style: TScalarStyle) -> (Range<usize>, Range<usize>) {
    let bytes = src.as_bytes();
    match style {
        TScalarStyle::DoubleQuoted => {
            let mut i = start + 1;
            while i < bytes.len() && bytes[i] != b'"' {
                i += if bytes[i] == b'\\' { 2 } else { 1 };
            }
            let end = i.min(bytes.len());
            (start..(end + 1).min(bytes.len()), start + 1..end)
        }
        TScalarStyle::SingleQuoted => {
            let mut i = start + 1;
            while i < bytes.len() {
                if bytes[i] == b'\'' {
                    if bytes.get(i + 1) == Some(&b'\'') {
                        i += 2;
                        continue;
                    }
                    break;
                }
                i += 1;
            }
            let end = i.min(bytes.len());
            (start..(end + 1).min(bytes.len()), start + 1..end)
        }
        _ => {
            // walk the value's words through the source
            let mut end = start;
            let mut cursor = start;
            for word in value.split_whitespace() {
                match src[cursor..].find(word) {
                    Some(i) => {
                        cursor += i + word.len();
                        end = cursor;
                    }
                    None => break,
                }
            }
            let first = value.split_whitespace().next();
            if style == TScalarStyle::Plain && !first.is_some_and(|w| src[start..].starts_with(w)) {
                end = start;
            }
            (start..end, start..end)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::yaml::ScalarKind;

    fn leaf<'a>(leaves: &'a [SourceLeaf], path: &str) -> &'a SourceLeaf {
        leaves.iter().find(|l| l.key_path == path).unwrap_or_else(|| panic!("no leaf {path}"))
    }

    #[test]
    fn sanitize_preserves_offsets() {
        let src = "a: {{ .Values.x }}\n{{- if .Values.y }}\nb: \"é{{ .Values.z }}\"\n{{- end }}\n";
        let (clean, ranges) = sanitize(src);
        assert_eq!(clean.len(), src.len());
        assert_eq!(ranges.len(), 4);
        assert_eq!(&clean[..18], "a: Z0zzzzzzzzzzzzz");
        assert!(clean.lines().nth(1).unwrap().trim().is_empty());
        assert!(clean.lines().nth(3).unwrap().trim().is_empty());
        assert_eq!(clean.lines().nth(2).unwrap(), "b: \"éZ2zzzzzzzzzzzzz\"");
    }

    #[test]
    fn spans_and_styles() {
        let src = "kind: Service\nmetadata:\n  name: \"web\"\n  labels: {app: 'w''x'}\nspec:\n  ports:\n  - port: 80\n    name: {{ .Values.n }}\n";
        let leaves = scan_template("templates/s.yaml", src).unwrap();
        let kind = leaf(&leaves, "templates/s.yaml#0/kind");
        assert_eq!(&src[kind.span.clone()], "Service");
        assert!(!kind.templated);
        let name = leaf(&leaves, "templates/s.yaml#0/metadata/name");
        assert_eq!(name.style, LeafStyle::DoubleQuoted);
        assert_eq!(&src[name.span.clone()], "\"web\"");
        assert_eq!(&src[name.content.clone()], "web");
        assert!(name.is_verbatim(src));
        let app = leaf(&leaves, "templates/s.yaml#0/metadata/labels/app");
        assert_eq!(app.value.text, "w'x");
        assert_eq!(&src[app.span.clone()], "'w''x'");
        assert!(!app.is_verbatim(src));
        let port = leaf(&leaves, "templates/s.yaml#0/spec/ports[0]/port");
        assert_eq!(port.value.kind, ScalarKind::Int);
        assert!(leaf(&leaves, "templates/s.yaml#0/spec/ports[0]/name").templated);
    }

    #[test]
    fn control_lines_and_partial_directives() {
        let src = "{{- if .Values.on }}\nimage: \"{{ .Values.repo }}:latest\"\npull: Always\n{{- end }}\n";
        let leaves = scan_template("t.yaml", src).unwrap();
        assert!(leaf(&leaves, "t.yaml#0/image").templated);
        let pull = leaf(&leaves, "t.yaml#0/pull");
        assert!(!pull.templated);
        assert_eq!(&src[pull.span.clone()], "Always");
    }

    #[test]
    fn block_scalars_and_multi_docs() {
        let src = "a: |\n  line one\n  {{ .Values.x }}\n---\nb: >\n  folded\n  text\nc: ok\n";
        let leaves = scan_template("t.yaml", src).unwrap();
        let a = leaf(&leaves, "t.yaml#0/a");
        assert_eq!(a.style, LeafStyle::Block);
        assert!(a.templated);
        let b = leaf(&leaves, "t.yaml#1/b");
        assert_eq!(b.value.text, "folded text\n");
        assert!(!b.templated);
        assert!(src[b.span.clone()].ends_with("text"));
        assert_eq!(&src[leaf(&leaves, "t.yaml#1/c").span.clone()], "ok");

        let guarded = "{{- if .Values.on }}\nconf: |\n  plain text\n{{- end }}\nnext: 1\n";
        let leaves = scan_template("t.yaml", guarded).unwrap();
        let conf = leaf(&leaves, "t.yaml#0/conf");
        assert!(!conf.templated);
        assert_eq!(&guarded[conf.span.clone()], "plain text");
    }

    #[test]
    fn repeated_paths_are_disambiguated() {
        let src = "{{- if .Values.a }}\nx: one\n{{- else }}\nx: two\n{{- end }}\n";
        let leaves = scan_template("t.yaml", src).unwrap();
        let paths: Vec<_> = leaves.iter().map(|l| l.key_path.as_str()).collect();
        assert_eq!(paths, vec!["t.yaml#0/x", "t.yaml#0/x~~2"]);
    }

    #[test]
    fn nested_sequences_and_null() {
        let src = "a:\n- [x, y]\n- k: ~\n";
        let leaves = scan_template("t.yaml", src).unwrap();
        let paths: Vec<_> = leaves.iter().map(|l| l.key_path.as_str()).collect();
        assert_eq!(paths, vec!["t.yaml#0/a[0][0]", "t.yaml#0/a[0][1]", "t.yaml#0/a[1]/k"]);
        assert_eq!(leaves[2].value.kind, ScalarKind::Null);
    }

    #[test]
    fn unparseable_is_reported() {
        let err = scan_template("t.yaml", "a: [1, 2\n").unwrap_err();
        assert_eq!(err.template_path, "t.yaml");
    }
}
