//! Stage directories, hashed outputs and completion stamps.
//!
//! Text artifacts start with a `# config_hash=<hex>` line; JSON artifacts are
//! wrapped in an envelope carrying the same hash. Each stage directory ends
//! with `stage.json`, listing the SHA-256 of every output and of the upstream
//! stamp, which is what makes reruns no-ops.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{content_hash, Stage};
use crate::CliError;

const STAMP: &str = "stage.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stamp {
    pub stage: String,
    pub config_hash: String,
    /// Hash of the upstream stamp file, if any.
    pub upstream: Option<String>,
    /// Output path (relative to the stage dir) → content hash.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub config_hash: String,
    pub data: T,
}

pub struct Store {
    pub root: PathBuf,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

impl Store {
    pub fn new(root: PathBuf) -> Self {
        Self { root }
    }

    pub fn dir(&self, stage: Stage) -> PathBuf {
        self.root.join(stage.name())
    }

    fn read_stamp(&self, stage: Stage) -> Option<(Stamp, String)> {
        let bytes = fs::read(self.dir(stage).join(STAMP)).ok()?;
        let stamp = serde_json::from_slice(&bytes).ok()?;
        Some((stamp, content_hash(&bytes)))
    }

    /// Stamp hash of `stage` after checking that its outputs belong to
    /// `expected` and are intact; failures name the stage to rerun.
    pub fn require(&self, stage: Stage, expected: &str) -> Result<String, CliError> {
        let Some((stamp, hash)) = self.read_stamp(stage) else {
            return Err(CliError::Dependency(format!(
                "stage `{0}` has not completed in {1}; run `--stage {0}` first",
                stage.name(),
                self.root.display()
            )));
        };
        if stamp.config_hash != expected {
            return Err(CliError::Dependency(format!(
                "outputs of stage `{0}` were produced by config hash {1}, the current config gives {2}; rerun `--stage {0}`",
                stage.name(),
                &stamp.config_hash[..12],
                &expected[..12]
            )));
        }
        if let Some(bad) = self.first_corrupt(stage, &stamp) {
            return Err(CliError::Dependency(format!(
                "output `{bad}` of stage `{0}` is missing or modified; rerun `--stage {0}`",
                stage.name()
            )));
        }
        Ok(hash)
    }

    fn first_corrupt(&self, stage: Stage, stamp: &Stamp) -> Option<String> {
        let dir = self.dir(stage);
        stamp
            .outputs
            .iter()
            .find(|(p, h)| fs::read(dir.join(p)).map(|b| content_hash(&b) != **h).unwrap_or(true))
            .map(|(p, _)| p.clone())
    }

    /// True when `stage` already holds intact outputs for these inputs.
    pub fn up_to_date(&self, stage: Stage, config_hash: &str, upstream: Option<&str>) -> bool {
        match self.read_stamp(stage) {
            Some((s, _)) => {
                s.config_hash == config_hash
                    && s.upstream.as_deref() == upstream
                    && self.first_corrupt(stage, &s).is_none()
            }
            None => false,
        }
    }

    /// Clears the stage directory (removing any stale stamp first).
    pub fn begin(&self, stage: Stage) -> Result<StageWriter, CliError> {
        let dir = self.dir(stage);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        }
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        Ok(StageWriter {
            stage,
            dir,
            outputs: BTreeMap::new(),
        })
    }
}

pub struct StageWriter {
    stage: Stage,
    pub dir: PathBuf,
    outputs: BTreeMap<String, String>,
}

impl StageWriter {
    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(rel);
        if let Some(p) = path.parent() {
            fs::create_dir_all(p).map_err(|e| io_err(p, e))?;
        }
        fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
        self.outputs.insert(rel.to_string(), content_hash(bytes));
        Ok(())
    }

    /// Records a file written elsewhere (e.g. in parallel) under the stage dir.
    pub fn record(&mut self, rel: &str, hash: String) {
        self.outputs.insert(rel.to_string(), hash);
    }

    pub fn write_text(&mut self, rel: &str, config_hash: &str, body: &[u8]) -> Result<(), CliError> {
        self.write(rel, &with_header(config_hash, body))
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, config_hash: &str, data: &T) -> Result<(), CliError> {
        let env = Envelope {
            config_hash: config_hash.to_string(),
            data,
        };
        let mut bytes = serde_json::to_vec_pretty(&env).map_err(|e| CliError::Runtime(e.to_string()))?;
        bytes.push(b'\n');
        self.write(rel, &bytes)
    }

    pub fn finish(self, config_hash: &str, upstream: Option<String>) -> Result<(), CliError> {
        let stamp = Stamp {
            stage: self.stage.name().to_string(),
            config_hash: config_hash.to_string(),
            upstream,
            outputs: self.outputs,
        };
        let path = self.dir.join(STAMP);
        let bytes = serde_json::to_vec_pretty(&stamp).map_err(|e| CliError::Runtime(e.to_string()))?;
        fs::write(&path, bytes).map_err(|e| io_err(&path, e))
    }
}

pub fn with_header(config_hash: &str, body: &[u8]) -> Vec<u8> {
    let mut out = format!("# config_hash={config_hash}\n").into_bytes();
    out.extend_from_slice(body);
    out
}

/// Body of a text artifact after checking its header hash.
pub fn read_text(path: &Path, config_hash: &str) -> Result<Vec<u8>, CliError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let want = format!("# config_hash={config_hash}\n");
    match bytes.strip_prefix(want.as_bytes()) {
        Some(body) => Ok(body.to_vec()),
        None => Err(CliError::Dependency(format!(
            "{} does not carry config hash {}",
            path.display(),
            &config_hash[..12]
        ))),
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path, config_hash: &str) -> Result<T, CliError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let env: Envelope<T> = serde_json::from_slice(&bytes).map_err(|e| io_err(path, e))?;
    if env.config_hash != config_hash {
        return Err(CliError::Dependency(format!(
            "{} carries config hash {}, expected {}",
            path.display(),
            &env.config_hash[..12.min(env.config_hash.len())],
            &config_hash[..12]
        )));
    }
    Ok(env.data)
}
