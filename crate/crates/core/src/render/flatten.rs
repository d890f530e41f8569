use serde_yaml::Value;

use super::path::{document_prefix, push_segment, KeyPath, Segment};
use super::{RenderedDocument, RenderedManifestSet};
use crate::yaml::canonical_scalar;

pub(crate) fn key_text(key: &Value) -> String {
    match canonical_scalar(key) {
        Some(c) => c.text,
        None => serde_yaml::to_string(key).unwrap_or_default().trim_end().to_string(),
    }
}

fn walk(value: &Value, path: &mut String, out: &mut Vec<(String, String)>) {
    match value {
        Value::Mapping(map) => {
            for (k, v) in map {
                let len = path.len();
                push_segment(path, &Segment::Key(key_text(k)));
                walk(v, path, out);
                path.truncate(len);
            }
        }
        Value::Sequence(seq) => {
            for (i, v) in seq.iter().enumerate() {
                let len = path.len();
                push_segment(path, &Segment::Index(i));
                walk(v, path, out);
                path.truncate(len);
            }
        }
        Value::Tagged(t) => walk(&t.value, path, out),
        scalar => {
            let c = canonical_scalar(scalar).expect("scalar");
            out.push((path.clone(), c.text));
        }
    }
}

/// Scalar leaves of one document, depth first in document order.
pub fn flatten_document(doc: &RenderedDocument) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut path = document_prefix(&doc.template_path, doc.doc_index);
    walk(&doc.body, &mut path, &mut out);
    out
}

/// Scalar leaves of every document as `(key_path, canonical text)` pairs.
pub fn flatten_documents(set: &RenderedManifestSet) -> Vec<(String, String)> {
    set.documents.iter().flat_map(flatten_document).collect()
}

/// Replaces the scalar at `key_path` with a string. Returns false when the
/// path does not name an existing scalar leaf.
pub fn set_leaf(docs: &mut [RenderedDocument], key_path: &str, text: &str) -> bool {
    let Some(path) = KeyPath::parse(key_path) else {
        return false;
    };
    let Some(doc) = docs
        .iter_mut()
        .find(|d| d.template_path == path.template && d.doc_index == path.doc_index)
    else {
        return false;
    };
    let mut node = &mut doc.body;
    for seg in &path.segments {
        if let Value::Tagged(t) = node {
            node = &mut t.value;
        }
        let next = match (seg, node) {
            (Segment::Key(k), Value::Mapping(map)) => {
                map.iter_mut().find(|(mk, _)| key_text(mk) == *k).map(|(_, v)| v)
            }
            (Segment::Index(i), Value::Sequence(seq)) => seq.get_mut(*i),
            _ => None,
        };
        match next {
            Some(n) => node = n,
            None => return false,
        }
    }
    if matches!(node, Value::Mapping(_) | Value::Sequence(_)) {
        return false;
    }
    *node = Value::String(text.to_string());
    true
}
