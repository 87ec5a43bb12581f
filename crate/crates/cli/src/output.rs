use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

pub const MANIFEST_SCHEMA: u32 = 1;

/// Git-style content hash: SHA-256 over `blob <len>\0<bytes>`.
pub fn blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Replaces `path` atomically: write to a temp file in the same directory,
/// then rename over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let fail = |e: std::io::Error| CliError::input(format!("cannot write {}: {e}", path.display()));
    std::fs::create_dir_all(dir).map_err(fail)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

/// Record of one run: the config echo and a hash per input and output file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: u32,
    pub tool: String,
    pub version: String,
    pub rng: String,
    pub command: String,
    pub config: RunConfig,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    /// Free-form facts about the run, e.g. excluded counts.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, serde_json::Value>,
}

/// Collects output files, then writes them and a `manifest.json`.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
    manifest: Manifest,
}

impl Outputs {
    pub fn new(dir: PathBuf, command: &str, config: &RunConfig) -> Self {
        Outputs {
            dir,
            files: Vec::new(),
            manifest: Manifest {
                schema: MANIFEST_SCHEMA,
                tool: "resamplab".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                rng: resamplab::rng::RNG_ALGORITHM.into(),
                command: command.into(),
                config: config.clone(),
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
                notes: BTreeMap::new(),
            },
        }
    }

    pub fn input(&mut self, label: &Path, bytes: &[u8]) {
        self.manifest.inputs.insert(label.display().to_string(), blob_hash(bytes));
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("notes are plain data");
        self.manifest.notes.insert(key.into(), v);
    }

    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.manifest.outputs.insert(name.into(), blob_hash(&bytes));
        self.files.push((name.into(), bytes));
    }

    pub fn add_json(&mut self, name: &str, value: &impl Serialize) {
        let mut bytes = serde_json::to_vec_pretty(value).expect("reports serialize");
        bytes.push(b'\n');
        self.add(name, bytes);
    }

    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        for (name, bytes) in &self.files {
            write_atomic(&self.dir.join(name), bytes)?;
        }
        let mut manifest = serde_json::to_vec_pretty(&self.manifest).expect("manifest serializes");
        manifest.push(b'\n');
        let path = self.dir.join("manifest.json");
        write_atomic(&path, &manifest)?;
        self.files.clear();
        Ok(path)
    }
}
