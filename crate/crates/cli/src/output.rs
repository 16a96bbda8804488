//! Atomic output files and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::errors::DataError;

/// Writes `path` through a temporary sibling and a rename, so readers never
/// see a partial file.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    fill(&mut buf)?;
    let name = path.file_name().context("output path has no file name")?.to_string_lossy();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| -> Result<()> {
        let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(&buf)?;
        f.sync_all()?;
        fs::rename(&tmp, path).with_context(|| format!("renaming onto {}", path.display()))?;
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

pub fn read_input(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| DataError(format!("reading {}: {e}", path.display())).into())
}

/// Output directory plus the list of files written into it.
pub struct OutDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), written: vec![] })
    }

    pub fn write(&mut self, name: &str, fill: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        write_atomic(&self.dir.join(name), fill)?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// `manifest.txt`: one `key=value` line per setting, then the files
    /// written. No timestamps, so repeated runs give identical bytes.
    pub fn finish(mut self, command: &str, settings: &[(&str, String)]) -> Result<()> {
        let mut text = format!("tool=contact-intervals {}\ncommand={command}\n", env!("CARGO_PKG_VERSION"));
        for (k, v) in settings {
            text.push_str(&format!("{k}={v}\n"));
        }
        text.push_str(&format!("outputs={}\n", self.written.join(",")));
        self.write("manifest.txt", |buf| Ok(buf.extend_from_slice(text.as_bytes())))
    }
}
