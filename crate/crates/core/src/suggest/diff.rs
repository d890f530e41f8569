use similar::TextDiff;

use super::{RewritePlan, SuggestError};
use crate::chart::ChartPackage;

fn file_diff(old: Option<&str>, new: &str, root: &str, path: &str) -> String {
    let old_text = old.unwrap_or("");
    if old_text == new {
        return String::new();
    }
    let old_name = if old.is_some() { format!("a/{root}/{path}") } else { "/dev/null".to_string() };
    let new_name = format!("b/{root}/{path}");
    TextDiff::from_lines(old_text, new)
        .unified_diff()
        .context_radius(3)
        .header(&old_name, &new_name)
        .to_string()
}

/// Unified diff turning `pkg` into the rewritten package, one file section
/// per changed file in path order.
pub fn emit_diff(pkg: &ChartPackage, plan: &RewritePlan) -> Result<String, SuggestError> {
    let rewritten = plan.apply(pkg)?;
    let mut out = String::new();
    let mut pairs: Vec<_> = pkg.templates.iter().zip(&rewritten.templates).collect();
    pairs.sort_by(|a, b| a.0.path.cmp(&b.0.path));
    for (old, new) in pairs {
        out.push_str(&file_diff(Some(&old.body), &new.body, &pkg.root, &old.path));
    }
    if let Some(new_values) = &rewritten.values_raw {
        out.push_str(&file_diff(pkg.values_raw.as_deref(), new_values, &pkg.root, "values.yaml"));
    }
    Ok(out)
}
