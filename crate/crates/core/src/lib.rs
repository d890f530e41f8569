//! Quality analysis for chart packages and chart repositories.
//!
//! The crate parses chart archives and repository indices, renders
//! templates, detects variable and duplicated template values, plans
//! deduplication rewrites, and computes ecosystem metrics over repository
//! snapshots.

pub mod chart;
pub mod ecosystem;
pub mod ingest;
pub mod quality;
pub mod render;
pub mod report;
pub mod suggest;
pub mod yaml;
