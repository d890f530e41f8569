//! Deduplication rewrites and maintainer notifications.
//!
//! Each duplicate group becomes a `suggestions.varN` value; its literal
//! occurrences are replaced by `{{ .Values.suggestions.varN }}`. A plan is
//! only offered when the rewritten chart renders exactly like the original.

mod diff;
mod digest;
mod plan;

pub use diff::emit_diff;
pub use digest::{build_issue_digests, diff_link, write_outbox, DigestSet, Issue, IssueDigest, IssueKind};
pub use plan::{
    plan_rewrite, verify_rewrite, Assignment, Occurrence, RewritePlan, SkippedGroup, SUGGESTIONS_KEY,
};

use crate::render::RenderError;

#[derive(Debug, thiserror::Error)]
pub enum SuggestError {
    #[error("duplicate report has no groups")]
    EmptyReport,
    #[error("values.yaml already defines `{0}`")]
    ValuesConflict(String),
    #[error("values.yaml patch: {0}")]
    ValuesPatch(String),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
