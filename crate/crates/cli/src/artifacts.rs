//! Output directory bookkeeping and the digest manifest.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST: &str = "manifest.sha256";

/// Files written so far, with their digests.
pub struct Artifacts {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

fn io(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Artifacts {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| io(&path, e))?;
        self.files
            .push((name.to_string(), digest(contents.as_bytes())));
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    /// Writes `manifest.sha256` in `sha256sum` format, sorted by name.
    pub fn finish(mut self) -> Result<Vec<String>, CliError> {
        self.files.sort();
        let body: String = self
            .files
            .iter()
            .map(|(n, d)| format!("{d}  {n}\n"))
            .collect();
        let path = self.dir.join(MANIFEST);
        fs::write(&path, body).map_err(|e| io(&path, e))?;
        Ok(self.files.into_iter().map(|(n, _)| n).collect())
    }
}
