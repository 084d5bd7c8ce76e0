use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config: Option<RunConfig>,
    /// Subcommand flags beyond `--config`.
    pub flags: BTreeMap<String, String>,
    pub corpus_sha256: Option<String>,
    /// SHA-256 of every file the command wrote, keyed by file name.
    pub outputs: BTreeMap<String, String>,
    pub stages: Vec<StageTiming>,
}

impl Manifest {
    pub fn new(command: &str, config: Option<&RunConfig>) -> Self {
        Manifest {
            command: command.to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            config: config.cloned(),
            flags: BTreeMap::new(),
            corpus_sha256: None,
            outputs: BTreeMap::new(),
            stages: Vec::new(),
        }
    }

    /// Runs `f`, recording its wall-clock time under `stage`.
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.stages.push(StageTiming {
            stage: stage.to_owned(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }

    /// Hashes every regular file in `dir` except the manifest itself, then
    /// writes the manifest there.
    pub fn finish(mut self, dir: &Path) -> anyhow::Result<Manifest> {
        self.outputs = hash_dir(dir)?;
        let text = serde_json::to_string_pretty(&self)?;
        nbr_core::io::write_string(&dir.join(MANIFEST_FILE), &(text + "\n"))?;
        Ok(self)
    }

    /// Command-line arguments (without the program name) that repeat the
    /// recorded invocation; config-driven commands read the config back from
    /// the manifest at `path`.
    pub fn replay_args(&self, path: &Path) -> Vec<String> {
        let mut args = vec![self.command.clone()];
        if self.config.is_some() {
            args.push("--config".into());
            args.push(path.display().to_string());
        }
        for (flag, value) in &self.flags {
            args.push(format!("--{flag}"));
            args.push(value.clone());
        }
        args
    }

    pub fn read(path: &Path) -> anyhow::Result<Manifest> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn hash_file(path: &Path) -> anyhow::Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

pub fn hash_dir(dir: &Path) -> anyhow::Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if entry.file_type()?.is_file() && name != MANIFEST_FILE {
            out.insert(name, hash_file(&entry.path())?);
        }
    }
    Ok(out)
}

/// One digest over the named files of a prepared corpus, in order.
pub fn corpus_hash(dir: &Path, files: &[&str]) -> anyhow::Result<String> {
    let mut h = Sha256::new();
    for f in files {
        let bytes = fs::read(dir.join(f)).with_context(|| format!("reading {}", dir.join(f).display()))?;
        h.update(f.as_bytes());
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}
