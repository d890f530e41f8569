use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "chartqa", version, about = "Quality analysis for chart packages and chart repositories")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// Repository index URL, `file://` URL or path.
    #[arg(long, global = true)]
    pub index: Option<String>,
    /// Directory holding unpacked charts or `.tgz` archives, or a single chart.
    #[arg(long, global = true)]
    pub path: Option<PathBuf>,
    #[arg(long, global = true)]
    pub snapshot_store: Option<PathBuf>,
    /// Snapshot id inside the store; the latest one when omitted.
    #[arg(long, global = true)]
    pub snapshot: Option<String>,
    /// Minimum occurrences of a value to count as duplicated.
    #[arg(long, global = true)]
    pub threshold: Option<usize>,
    /// Values never reported as duplicates; replaces the default list.
    #[arg(long, global = true, value_delimiter = ',')]
    pub blacklist: Option<Vec<String>>,
    #[arg(long, global = true, value_enum)]
    pub engine: Option<EngineKind>,
    #[arg(long, global = true)]
    pub renderer_bin: Option<PathBuf>,
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub iterations: Option<u64>,
    /// Output directory; standard output when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true, value_enum)]
    pub identity_mode: Option<IdentityArg>,
    /// YAML file with threshold, blacklist, engine and renderer_bin.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Variability knowledge base file.
    #[arg(long, global = true)]
    pub kb: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Builtin,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Dot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IdentityArg {
    Email,
    NameEmail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormalizationArg {
    Linear,
    Geometric,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Record the current repository state in the snapshot store.
    Snapshot,
    /// Per-chart variability, duplicates and render failures.
    Analyze,
    /// Duplicated literal values per chart.
    Dupes,
    /// Learn keys whose rendered values change between renders.
    Variability,
    /// Rewrite plans, patches and maintainer digests.
    Suggest {
        /// Base URL under which `diffs/` is published.
        #[arg(long, default_value = "")]
        base_url: String,
        #[arg(long, default_value = "chartqa@localhost")]
        from: String,
    },
    /// Maintainer sets and workload metrics.
    Authorsets,
    /// Metadata irregularities of the index.
    Irregularities,
    /// Differences and activity across stored snapshots.
    Changes {
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        to: Option<String>,
    },
    /// Monthly trend tables over stored snapshots.
    Trends {
        /// `NAME=FROM..TO` with snapshot ids; repeatable.
        #[arg(long = "period")]
        periods: Vec<String>,
        #[arg(long, value_enum, default_value = "linear")]
        normalization: NormalizationArg,
        /// Also analyze chart templates of every snapshot.
        #[arg(long)]
        templates: bool,
    },
    /// Resampled signed-rank test on two groups.
    Stats {
        /// JSON file `{"n1": [...], "n2": [...]}`.
        #[arg(long)]
        groups: PathBuf,
    },
    /// Maintainer to chart graph.
    Graph,
    /// CI check: exit 1 when duplicates or irregularities are found.
    Livecheck,
}
