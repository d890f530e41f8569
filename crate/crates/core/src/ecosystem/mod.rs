//! Repository-level analytics: maintainer sets, metadata irregularities,
//! snapshot differencing, activity levels, trend tables and the
//! signed-rank statistics.

mod activity;
mod changes;
mod irregularities;
mod maintainers;
mod stats;
mod trends;

pub use activity::{change_histories, classify_activity, cluster_activity, ActivityCluster, ActivityLevel, ActivityProfile, ChangeHistory};
pub use changes::{detect_changes, detect_index_changes, ChangeSet, VersionUpdate};
pub use irregularities::{detect_irregularities, AliasNames, IrregularityReport};
pub use maintainers::{compute_maintainer_sets, IdentityMode, MaintainerIdentity, MaintainerMetrics, MaintainerSet, MaintainerSets};
pub use stats::{resampled_group_test, wilcoxon_signed_rank, PValueMethod, ResampleResult, WilcoxonResult, EXACT_LIMIT, PRNG_NAME};
pub use trends::{
    months_between, period_metrics, IrregularityCounts, Normalization, Period, SnapshotPoint, TemplateMetrics, Timeline,
    TrendColumn, TrendMetric, TrendRow, TrendTable,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EcosystemError {
    #[error("all paired differences are zero")]
    AllZeroDifferences,
    #[error("samples differ in length ({x} vs {y})")]
    LengthMismatch { x: usize, y: usize },
    #[error("empty sample")]
    EmptySample,
    #[error("sample contains a non-finite value")]
    NonFinite,
    #[error("cannot draw {sample} values from {population}")]
    SampleTooLarge { sample: usize, population: usize },
    #[error("at least one iteration is required")]
    ZeroIterations,
    #[error("unknown snapshot {0}")]
    UnknownSnapshot(String),
    #[error("snapshot {0} is older than its predecessor")]
    OutOfOrder(String),
    #[error("period {0} spans fewer than two snapshots")]
    EmptyPeriod(String),
    #[error("no observations for {0}")]
    EmptyHistory(String),
}
