use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{ChangeSet, EcosystemError};
use crate::chart::ChartRef;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActivityLevel {
    RegularlyChanged,
    InfrequentlyChanged,
    Unchanged,
}

impl ActivityLevel {
    pub fn from_dcr(dcr: f64) -> Self {
        if dcr > 50.0 {
            ActivityLevel::RegularlyChanged
        } else if dcr > 0.0 {
            ActivityLevel::InfrequentlyChanged
        } else {
            ActivityLevel::Unchanged
        }
    }

    pub fn condition(self) -> &'static str {
        match self {
            ActivityLevel::RegularlyChanged => ">50",
            ActivityLevel::InfrequentlyChanged => ">0 and <=50",
            ActivityLevel::Unchanged => "0",
        }
    }
}

/// Per-interval change flags of one chart, following it across version
/// updates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeHistory {
    pub chart: ChartRef,
    pub flags: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityProfile {
    pub stem: String,
    pub chart: String,
    pub days_observed: usize,
    pub days_changed: usize,
    pub dcr: f64,
    pub level: ActivityLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityCluster {
    pub level: ActivityLevel,
    pub condition: String,
    pub mean_dcr: f64,
    pub charts: usize,
    pub percentage: f64,
}

/// Follows each of `initial` through consecutive change sets. A chart stops
/// being observed once removed; a version update continues it under the
/// new version.
pub fn change_histories(initial: &[ChartRef], changes: &[ChangeSet]) -> Vec<ChangeHistory> {
    let key = |c: &ChartRef| (c.name.clone(), c.version.clone());
    let mut lines: Vec<(ChartRef, Option<(String, String)>, Vec<bool>)> =
        initial.iter().map(|c| (c.clone(), Some(key(c)), Vec::new())).collect();
    for cs in changes {
        let updated: BTreeSet<_> = cs.updated.iter().map(key).collect();
        let removed: BTreeSet<_> = cs.removed.iter().map(key).collect();
        for (_, current, flags) in lines.iter_mut() {
            let Some(cur) = current.clone() else { continue };
            if let Some(v) = cs.vupdates.iter().find(|v| key(&v.removed) == cur) {
                flags.push(true);
                *current = Some(key(&v.added));
            } else if removed.contains(&cur) {
                *current = None;
            } else {
                flags.push(updated.contains(&cur));
            }
        }
    }
    lines.into_iter().map(|(chart, _, flags)| ChangeHistory { chart, flags }).collect()
}

pub fn classify_activity(histories: &[ChangeHistory]) -> Result<Vec<ActivityProfile>, EcosystemError> {
    histories
        .iter()
        .map(|h| {
            if h.flags.is_empty() {
                return Err(EcosystemError::EmptyHistory(h.chart.file_name.clone()));
            }
            let days_changed = h.flags.iter().filter(|&&f| f).count();
            let dcr = 100.0 * days_changed as f64 / h.flags.len() as f64;
            Ok(ActivityProfile {
                stem: h.chart.stem.to_string(),
                chart: h.chart.file_name.clone(),
                days_observed: h.flags.len(),
                days_changed,
                dcr,
                level: ActivityLevel::from_dcr(dcr),
            })
        })
        .collect()
}

/// One row per activity level, in table order.
pub fn cluster_activity(profiles: &[ActivityProfile]) -> Vec<ActivityCluster> {
    [ActivityLevel::RegularlyChanged, ActivityLevel::InfrequentlyChanged, ActivityLevel::Unchanged]
        .into_iter()
        .map(|level| {
            let members: Vec<&ActivityProfile> = profiles.iter().filter(|p| p.level == level).collect();
            let mean_dcr = if members.is_empty() { 0.0 } else { members.iter().map(|p| p.dcr).sum::<f64>() / members.len() as f64 };
            ActivityCluster {
                level,
                condition: level.condition().to_string(),
                mean_dcr,
                charts: members.len(),
                percentage: if profiles.is_empty() { 0.0 } else { 100.0 * members.len() as f64 / profiles.len() as f64 },
            }
        })
        .collect()
}
