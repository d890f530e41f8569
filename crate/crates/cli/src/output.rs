use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;

/// Destination of command output: files under `--out`, or standard output.
#[derive(Debug, Clone)]
pub struct Sink {
    dir: Option<PathBuf>,
}

impl Sink {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Sink { dir }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// Main payload: `<out>/<name>`, or standard output.
    pub fn emit(&self, name: &str, text: &str) -> anyhow::Result<()> {
        if self.dir.is_some() {
            return self.write_file(name, text);
        }
        let mut out = std::io::stdout().lock();
        out.write_all(text.as_bytes())?;
        out.flush()?;
        Ok(())
    }

    /// Side output; dropped without `--out`.
    pub fn write_file(&self, name: &str, text: &str) -> anyhow::Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        log::info!("wrote {}", path.display());
        Ok(())
    }
}
