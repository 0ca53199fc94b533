pub mod gen_data;
pub mod rank;
pub mod report;
pub mod sweep;
pub mod train;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// The output directory, created if needed.
pub(crate) fn output_dir(out: Option<&PathBuf>) -> Result<&Path> {
    let out = out.context("no output directory: pass --out or set `out` in the config")?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    Ok(out)
}

pub(crate) fn write_file(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
