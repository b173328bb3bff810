//! Run metadata written next to every command's outputs. It holds no clock
//! readings, so identical runs produce identical files.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub args: Vec<String>,
    pub seed: u64,
    pub workers: usize,
    pub profile: String,
    pub config: Option<FileEntry>,
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
    pub notes: Vec<String>,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| io_error(path, e))?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

pub fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Runtime(plasmo::Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn entry(path: &Path, shown: impl Into<String>) -> Result<FileEntry, CliError> {
    Ok(FileEntry {
        path: shown.into(),
        sha256: sha256_file(path)?,
    })
}

/// Collects the files a command writes, relative to the output directory.
#[derive(Debug)]
pub struct Outputs {
    pub dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    /// Writes `bytes` to `relative` under the output directory.
    pub fn write(&mut self, relative: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf, CliError> {
        let path = self.dir.join(relative);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
        self.record(relative);
        Ok(path)
    }

    /// Records a file some other routine wrote under the output directory.
    pub fn record(&mut self, relative: &str) {
        if !self.written.iter().any(|w| w == relative) {
            self.written.push(relative.to_string());
        }
    }

    pub fn entries(&self) -> Result<Vec<FileEntry>, CliError> {
        let mut names = self.written.clone();
        names.sort();
        names
            .iter()
            .map(|n| entry(&self.dir.join(n), n.clone()))
            .collect()
    }
}
