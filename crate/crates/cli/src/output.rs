//! Output directories, file inventory and the run manifest.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageTime {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub toolkit: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub stages: Vec<StageTime>,
    pub files: Vec<FileEntry>,
}

/// Collects written files and stage timings for one command invocation.
pub struct Run {
    pub dir: PathBuf,
    command: String,
    files: Vec<PathBuf>,
    stages: Vec<StageTime>,
}

impl Run {
    pub fn new(dir: PathBuf, command: &str) -> Result<Self, CliError> {
        std::fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            command: command.to_string(),
            files: Vec::new(),
            stages: Vec::new(),
        })
    }

    pub fn stage<R>(&mut self, name: &str, f: impl FnOnce() -> R) -> R {
        let t = Instant::now();
        let out = f();
        self.stages.push(StageTime {
            stage: name.to_string(),
            seconds: t.elapsed().as_secs_f64(),
        });
        out
    }

    /// Writes `rel` under the run directory through a temporary file.
    pub fn write(&mut self, rel: &str, fill: impl FnOnce(&mut Vec<u8>) -> Result<(), CliError>) -> Result<PathBuf, CliError> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut buf = Vec::new();
        fill(&mut buf)?;
        atomic_write(&path, &buf)?;
        self.files.push(path.clone());
        Ok(path)
    }

    pub fn write_json<S: Serialize>(&mut self, rel: &str, value: &S) -> Result<PathBuf, CliError> {
        self.write(rel, |b| {
            serde_json::to_writer_pretty(&mut *b, value)?;
            b.push(b'\n');
            Ok(())
        })
    }

    pub fn finish(self, config: &RunConfig) -> Result<RunManifest, CliError> {
        let mut files = Vec::new();
        let mut paths = self.files.clone();
        paths.sort();
        paths.dedup();
        for p in &paths {
            let data = std::fs::read(p)?;
            let rel = p.strip_prefix(&self.dir).unwrap_or(p).to_string_lossy().replace('\\', "/");
            files.push(FileEntry {
                path: rel,
                bytes: data.len() as u64,
                sha256: format!("{:x}", Sha256::digest(&data)),
            });
        }
        let mut echo = serde_json::to_value(config)?;
        // the output location is not part of the computation
        if let Some(obj) = echo.as_object_mut() {
            obj.remove("out");
        }
        let manifest = RunManifest {
            toolkit: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: self.command,
            config: echo,
            stages: self.stages,
            files,
        };
        let mut buf = serde_json::to_vec_pretty(&manifest)?;
        buf.push(b'\n');
        atomic_write(&self.dir.join("manifest.json"), &buf)?;
        Ok(manifest)
    }
}

pub fn atomic_write(path: &Path, data: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(data)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest, CliError> {
    let path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|_| CliError::missing(format!("no manifest at {}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// Subdirectory name for one value of an ε sweep.
pub fn eps_dir(eps: f64) -> String {
    format!("eps_{eps}")
}
