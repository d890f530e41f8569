use std::path::{Path, PathBuf};

use anyhow::Context;
use chartqa_core::ecosystem::IdentityMode;
use chartqa_core::quality::DuplicateConfig;
use chartqa_core::render::{BuiltinRenderer, ExternalRenderer, Renderer, RENDERER_ENV};
use serde::Deserialize;

use crate::args::{EngineKind, Format, GlobalArgs, IdentityArg};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub threshold: Option<usize>,
    pub blacklist: Option<Vec<String>>,
    pub engine: Option<EngineKind>,
    pub renderer_bin: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        if text.trim().is_empty() {
            return Ok(FileConfig::default());
        }
        serde_yaml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Options after merging flags, the config file and the environment.
#[derive(Debug, Clone)]
pub struct Settings {
    pub args: GlobalArgs,
    pub duplicates: DuplicateConfig,
    pub engine: EngineKind,
    pub renderer_bin: Option<PathBuf>,
    pub jobs: usize,
    pub identity: IdentityMode,
}

impl Settings {
    pub fn resolve(args: GlobalArgs, env_renderer: Option<PathBuf>) -> anyhow::Result<Self> {
        let file = match &args.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let mut duplicates = DuplicateConfig::default();
        if let Some(t) = args.threshold.or(file.threshold) {
            duplicates.threshold = t;
        }
        if let Some(b) = args.blacklist.clone().or(file.blacklist) {
            duplicates.blacklist = b;
        }
        let engine = args.engine.or(file.engine).unwrap_or(EngineKind::Builtin);
        let renderer_bin = args.renderer_bin.clone().or(file.renderer_bin).or(env_renderer);
        let jobs = args.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(4, |n| n.get())).max(1);
        let identity = match args.identity_mode {
            Some(IdentityArg::NameEmail) => IdentityMode::NameEmail,
            Some(IdentityArg::Email) | None => IdentityMode::Email,
        };
        Ok(Settings { args, duplicates, engine, renderer_bin, jobs, identity })
    }

    pub fn from_env(args: GlobalArgs) -> anyhow::Result<Self> {
        Self::resolve(args, std::env::var_os(RENDERER_ENV).map(PathBuf::from))
    }

    pub fn renderer(&self) -> Box<dyn Renderer> {
        match self.engine {
            EngineKind::Builtin => Box::new(BuiltinRenderer::new()),
            EngineKind::External => Box::new(
                ExternalRenderer::new(self.renderer_bin.clone().unwrap_or_else(|| PathBuf::from("helm")))
                    .with_max_parallel(self.jobs),
            ),
        }
    }

    pub fn format(&self, default: Format) -> Format {
        self.args.format.unwrap_or(default)
    }
}
