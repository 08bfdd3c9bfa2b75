//! Run manifests: what was run, with which effective flags, on which
//! inputs, producing which outputs.
//!
//! ```text
//! manifest.command = simulate
//! manifest.command_line = blocktime simulate --validators 175 ...
//! manifest.tool_version = 0.1.0
//! manifest.seed = 7
//! config.validators = 175
//! ...
//! output.samples.path = out.csv
//! output.samples.sha256 = 3b1f...
//! ```
//!
//! No timestamps are recorded, so reruns give identical manifests.

use std::path::{Path, PathBuf};

use bft_blocktime::kv::KeyValues;
use sha2::{Digest, Sha256};

use crate::{io_err, CliError, Result};

/// A named file and its SHA-256.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileDigest {
    pub name: String,
    pub path: PathBuf,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(name: &str, path: &Path) -> Result<Self> {
        Ok(Self {
            name: name.to_string(),
            path: path.to_path_buf(),
            sha256: sha256_file(path)?,
        })
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunManifest {
    pub command: String,
    pub command_line: String,
    pub tool_version: String,
    /// Only commands that draw random numbers have one.
    pub seed: Option<u64>,
    /// Effective flags, keyed by long flag name.
    pub config: KeyValues,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

impl RunManifest {
    pub fn new(command: &str, command_line: &str, seed: Option<u64>, config: KeyValues) -> Self {
        Self {
            command: command.to_string(),
            command_line: command_line.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, name: &str, path: &Path) -> Result<()> {
        self.inputs.push(FileDigest::of(name, path)?);
        Ok(())
    }

    pub fn output(&mut self, name: &str, path: &Path) -> Result<()> {
        self.outputs.push(FileDigest::of(name, path)?);
        Ok(())
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("manifest.command", &self.command);
        kv.set("manifest.command_line", &self.command_line);
        kv.set("manifest.tool_version", &self.tool_version);
        if let Some(seed) = self.seed {
            kv.set("manifest.seed", seed);
        }
        kv.extend_prefixed("config", &self.config);
        for (side, files) in [("input", &self.inputs), ("output", &self.outputs)] {
            for f in files {
                kv.set(format!("{side}.{}.path", f.name), f.path.display());
                kv.set(format!("{side}.{}.sha256", f.name), &f.sha256);
            }
        }
        kv
    }

    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let bad = |e: bft_blocktime::kv::KvError| CliError::Usage(format!("manifest: {e}"));
        let mut m = Self {
            command: kv.require("manifest.command").map_err(bad)?.to_string(),
            command_line: kv.require("manifest.command_line").map_err(bad)?.to_string(),
            tool_version: kv.require("manifest.tool_version").map_err(bad)?.to_string(),
            seed: kv.parse_value("manifest.seed").map_err(bad)?,
            config: KeyValues::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        };
        for (key, value) in kv.iter() {
            if let Some(flag) = key.strip_prefix("config.") {
                m.config.set(flag, value);
                continue;
            }
            let (side, rest) = match key.split_once('.') {
                Some(("input", rest)) => (0, rest),
                Some(("output", rest)) => (1, rest),
                _ => continue,
            };
            let Some(name) = rest.strip_suffix(".path") else {
                continue;
            };
            let digest = kv
                .require(&format!("{}.{name}.sha256", ["input", "output"][side]))
                .map_err(bad)?;
            let list = if side == 0 { &mut m.inputs } else { &mut m.outputs };
            list.push(FileDigest {
                name: name.to_string(),
                path: PathBuf::from(value),
                sha256: digest.to_string(),
            });
        }
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_kv().to_string()).map_err(|e| io_err(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_kv(&crate::config::read_kv(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("a.csv");
        std::fs::write(&file, "abc").unwrap();
        let mut cfg = KeyValues::new();
        cfg.set("runs", 10);
        cfg.set("delta-t", 0.0011);
        let mut m = RunManifest::new("simulate", "blocktime simulate --runs 10", Some(3), cfg);
        m.output("samples", &file).unwrap();
        let back = RunManifest::from_kv(&KeyValues::parse(&m.to_kv().to_string()).unwrap()).unwrap();
        assert_eq!(back, m);
        // sha256("abc")
        assert_eq!(
            m.outputs[0].sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
