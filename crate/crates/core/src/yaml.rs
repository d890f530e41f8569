//! Small YAML helpers shared by the renderer, the flattener and the
//! duplicate detector: scalar canonicalization, plain-scalar resolution and
//! multi-document splitting.

use serde::{Deserialize, Serialize};
use serde_yaml::Value;

/// Parsed YAML document tree. Mapping keys are unique per level (the parser
/// rejects duplicates) and insertion order is preserved.
pub type ValueTree = Value;

/// Type class of a canonical scalar. `8080` and `"8080"` have the same text
/// but different kinds, so they never compare equal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarKind {
    Null,
    Bool,
    Int,
    Float,
    Str,
}

/// A scalar reduced to its canonical lexical form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CanonicalScalar {
    pub kind: ScalarKind,
    pub text: String,
}

impl CanonicalScalar {
    pub fn new(kind: ScalarKind, text: impl Into<String>) -> Self {
        CanonicalScalar { kind, text: text.into() }
    }

    pub fn string(text: impl Into<String>) -> Self {
        Self::new(ScalarKind::Str, text)
    }

    /// YAML source text that reproduces this scalar with the same kind when
    /// used as a mapping value.
    pub fn to_yaml_scalar(&self) -> String {
        match self.kind {
            ScalarKind::Str => {
                let out = serde_yaml::to_string(&Value::String(self.text.clone()))
                    .unwrap_or_else(|_| format!("{:?}", self.text));
                out.trim_end_matches('\n').to_string()
            }
            ScalarKind::Null => "null".to_string(),
            _ => self.text.clone(),
        }
    }
}

/// Canonical lexical form of a float: integral values keep one decimal
/// (`3.0`), everything else uses the shortest round-trip representation.
pub fn canonical_float(f: f64) -> String {
    if f.is_nan() {
        ".nan".to_string()
    } else if f.is_infinite() {
        if f > 0.0 { ".inf" } else { "-.inf" }.to_string()
    } else if f.fract() == 0.0 && f.abs() < 1e15 {
        format!("{f:.1}")
    } else {
        format!("{f}")
    }
}

/// Canonical form of a scalar value; `None` for mappings and sequences.
pub fn canonical_scalar(value: &Value) -> Option<CanonicalScalar> {
    match value {
        Value::Null => Some(CanonicalScalar::new(ScalarKind::Null, "null")),
        Value::Bool(b) => Some(CanonicalScalar::new(ScalarKind::Bool, b.to_string())),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Some(CanonicalScalar::new(ScalarKind::Int, i.to_string()))
            } else if let Some(u) = n.as_u64() {
                Some(CanonicalScalar::new(ScalarKind::Int, u.to_string()))
            } else {
                Some(CanonicalScalar::new(
                    ScalarKind::Float,
                    canonical_float(n.as_f64().unwrap_or(f64::NAN)),
                ))
            }
        }
        Value::String(s) => Some(CanonicalScalar::string(s.clone())),
        Value::Tagged(t) => canonical_scalar(&t.value),
        Value::Sequence(_) | Value::Mapping(_) => None,
    }
}

/// Resolves the text of an untagged plain scalar to a typed value using the
/// same rules the document parser applies.
pub fn resolve_plain(text: &str) -> Value {
    if text.is_empty() {
        return Value::Null;
    }
    match serde_yaml::from_str::<Value>(text) {
        Ok(v @ (Value::Null | Value::Bool(_) | Value::Number(_))) => v,
        _ => Value::String(text.to_string()),
    }
}

/// One piece of a multi-document stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DocumentSlice<'a> {
    /// Position of the piece in the stream, counting empty pieces.
    pub index: usize,
    /// Byte offset of `text` within the full stream.
    pub offset: usize,
    pub text: &'a str,
}

fn is_separator_line(line: &str) -> bool {
    let line = line.trim_end_matches(['\n', '\r']);
    match line.strip_prefix("---") {
        Some(rest) => rest.is_empty() || rest.starts_with([' ', '\t']),
        None => false,
    }
}

/// Splits a stream on `---` separators at column 0. A leading separator
/// does not open an empty piece, so `---\na: 1` has a single document at
/// index 0. The separator line itself is excluded from both neighbours;
/// any content after `--- ` on the separator line is dropped.
pub fn split_documents(text: &str) -> Vec<DocumentSlice<'_>> {
    let mut out = Vec::new();
    let mut start = 0usize;
    let mut pos = 0usize;
    for line in text.split_inclusive('\n') {
        if is_separator_line(line) {
            let piece = &text[start..pos];
            if !(out.is_empty() && is_blank_document(piece)) {
                out.push(DocumentSlice { index: out.len(), offset: start, text: piece });
            }
            start = pos + line.len();
        }
        pos += line.len();
    }
    out.push(DocumentSlice { index: out.len(), offset: start, text: &text[start..] });
    out
}

/// True if a document piece holds nothing but whitespace and comments.
pub fn is_blank_document(text: &str) -> bool {
    text.lines().all(|l| {
        let t = l.trim();
        t.is_empty() || t.starts_with('#')
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_single_document() {
        let docs = split_documents("a: 1\n");
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].text, "a: 1\n");
    }

    #[test]
    fn split_leading_separator_is_not_a_document() {
        let docs = split_documents("---\na: 1\n---\nb: 2\n");
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].index, 0);
        assert_eq!(docs[0].text, "a: 1\n");
        assert_eq!(docs[1].text, "b: 2\n");
        assert_eq!(&"---\na: 1\n---\nb: 2\n"[docs[1].offset..], "b: 2\n");
    }

    #[test]
    fn split_keeps_indented_dashes() {
        let docs = split_documents("a: |\n  ---\n  x\n");
        assert_eq!(docs.len(), 1);
    }

    #[test]
    fn split_after_comment_header() {
        let docs = split_documents("# header\n---\na: 1\n");
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].text, "a: 1\n");
    }

    #[test]
    fn plain_resolution() {
        assert_eq!(resolve_plain("true"), Value::Bool(true));
        assert_eq!(resolve_plain("8080"), Value::Number(8080.into()));
        assert_eq!(resolve_plain("~"), Value::Null);
        assert_eq!(resolve_plain("httpd-data"), Value::String("httpd-data".into()));
        assert_eq!(resolve_plain("a: b"), Value::String("a: b".into()));
    }

    #[test]
    fn canonical_forms() {
        let f = canonical_scalar(&resolve_plain("1.50")).unwrap();
        assert_eq!(f, CanonicalScalar::new(ScalarKind::Float, "1.5"));
        let b = canonical_scalar(&resolve_plain("True")).unwrap();
        assert_eq!(b.text, "true");
        assert_eq!(canonical_float(3.0), "3.0");
        let quoted = canonical_scalar(&Value::String("8080".into())).unwrap();
        let plain = canonical_scalar(&resolve_plain("8080")).unwrap();
        assert_ne!(quoted, plain);
    }

    #[test]
    fn yaml_scalar_keeps_kind() {
        let s = CanonicalScalar::string("8080");
        assert_eq!(resolve_plain_or_quoted(&s.to_yaml_scalar()), Value::String("8080".into()));
        let i = CanonicalScalar::new(ScalarKind::Int, "8080");
        assert_eq!(resolve_plain_or_quoted(&i.to_yaml_scalar()), Value::Number(8080.into()));
    }

    fn resolve_plain_or_quoted(text: &str) -> Value {
        serde_yaml::from_str(text).unwrap()
    }
}
