//! Run manifests: what ran, on which inputs, and what it wrote.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments after the program name, as given.
    pub args: Vec<String>,
    /// Fully resolved configuration.
    pub config: serde_json::Value,
    /// SHA-256 of every input file, keyed by path.
    pub inputs: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub tool_version: String,
    /// SHA-256 of every output file, keyed by file name.
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_bytes(&bytes))
}

/// Collects inputs and outputs of one command run.
#[derive(Debug)]
pub struct Recorder {
    out_dir: PathBuf,
    manifest: RunManifest,
}

impl Recorder {
    pub fn new(command: &str, args: &[String], out_dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
        Ok(Self {
            out_dir: out_dir.to_path_buf(),
            manifest: RunManifest {
                command: command.into(),
                args: args.to_vec(),
                config: serde_json::Value::Null,
                inputs: BTreeMap::new(),
                seed: None,
                tool_version: env!("CARGO_PKG_VERSION").into(),
                outputs: BTreeMap::new(),
            },
        })
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let h = sha256_file(path)?;
        self.manifest.inputs.insert(path.display().to_string(), h);
        Ok(())
    }

    pub fn config(&mut self, config: &impl Serialize) {
        self.manifest.config = serde_json::to_value(config).expect("configs serialize");
    }

    pub fn seed(&mut self, seed: u64) {
        self.manifest.seed = Some(seed);
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.manifest.outputs.insert(name.into(), sha256_bytes(contents));
        Ok(path)
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("outputs serialize");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Records a file some other writer already produced.
    pub fn written(&mut self, name: &str) -> Result<(), CliError> {
        let h = sha256_file(&self.path(name))?;
        self.manifest.outputs.insert(name.into(), h);
        Ok(())
    }

    pub fn finish(self) -> Result<RunManifest, CliError> {
        let path = self.out_dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(self.manifest)
    }
}

pub fn read_manifest(path: &Path) -> Result<RunManifest, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::parse(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(sha256_bytes(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn recorder_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = Recorder::new("eval", &["eval".into()], dir.path()).unwrap();
        r.seed(7);
        r.write("a.txt", b"abc").unwrap();
        let m = r.finish().unwrap();
        assert_eq!(read_manifest(&dir.path().join(MANIFEST_FILE)).unwrap(), m);
        assert_eq!(m.outputs["a.txt"], sha256_bytes(b"abc"));
    }
}
