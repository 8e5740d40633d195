//! Output directory bookkeeping and the manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::RunError;

#[derive(Serialize)]
struct FileEntry {
    path: String,
    bytes: u64,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    experiment: &'a str,
    pass: bool,
    config: &'a Value,
    versions: BTreeMap<&'static str, &'static str>,
    wall_time_s: f64,
    files: Vec<FileEntry>,
}

/// Collects files written under one experiment directory.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: PathBuf) -> Result<Self, RunError> {
        fs::create_dir_all(&root)?;
        Ok(OutputDir { root, files: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), RunError> {
        let p = self.root.join(rel);
        if let Some(d) = p.parent() {
            fs::create_dir_all(d)?;
        }
        fs::File::create(&p)?.write_all(bytes)?;
        self.files.push(rel.to_string());
        Ok(())
    }

    pub fn write_csv(&mut self, rel: &str, header: &str, rows: impl IntoIterator<Item = String>) -> Result<(), RunError> {
        let mut s = String::from(header);
        s.push('\n');
        for r in rows {
            s.push_str(&r);
            s.push('\n');
        }
        self.write(rel, s.as_bytes())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, v: &T) -> Result<(), RunError> {
        let mut s = serde_json::to_string_pretty(v)?;
        s.push('\n');
        self.write(rel, s.as_bytes())
    }

    /// Writes manifest.json listing every file with its size and sha256.
    pub fn finish(self, experiment: &str, pass: bool, config: &Value, wall_time_s: f64) -> Result<PathBuf, RunError> {
        let mut files = Vec::with_capacity(self.files.len());
        for rel in &self.files {
            let bytes = fs::read(self.root.join(rel))?;
            files.push(FileEntry {
                path: rel.clone(),
                bytes: bytes.len() as u64,
                sha256: format!("{:x}", Sha256::digest(&bytes)),
            });
        }
        let versions = BTreeMap::from([
            ("parametrix-cli", env!("CARGO_PKG_VERSION")),
            ("manifest_format", "1"),
        ]);
        let m = Manifest { experiment, pass, config, versions, wall_time_s, files };
        let p = self.root.join("manifest.json");
        let mut s = serde_json::to_string_pretty(&m)?;
        s.push('\n');
        fs::write(&p, s)?;
        Ok(p)
    }
}
