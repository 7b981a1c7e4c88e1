//! Run manifests written beside every output file.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
struct InputHash {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Versions {
    cli: &'static str,
    library: &'static str,
    datastore_format: u32,
}

#[derive(Debug, Serialize)]
struct Manifest<'a, C: Serialize> {
    command: &'a str,
    output: String,
    inputs: &'a [InputHash],
    config: &'a C,
    seed: Option<u64>,
    versions: Versions,
}

pub struct Run<'a, C: Serialize> {
    pub command: &'a str,
    pub config: &'a C,
    pub seed: Option<u64>,
    inputs: Vec<InputHash>,
}

impl<'a, C: Serialize> Run<'a, C> {
    /// Hashes every input file up front so the manifest reflects what was read.
    pub fn new(command: &'a str, config: &'a C, seed: Option<u64>, inputs: &[&Path]) -> Result<Self> {
        let inputs = inputs
            .iter()
            .map(|p| {
                let bytes = std::fs::read(p).with_context(|| format!("reading {}", p.display()))?;
                Ok(InputHash {
                    path: p.display().to_string(),
                    sha256: hex(&Sha256::digest(&bytes)),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Run { command, config, seed, inputs })
    }

    pub fn write(&self, output: &Path) -> Result<PathBuf> {
        let manifest = Manifest {
            command: self.command,
            output: output.display().to_string(),
            inputs: &self.inputs,
            config: self.config,
            seed: self.seed,
            versions: Versions {
                cli: env!("CARGO_PKG_VERSION"),
                library: skillknn::VERSION,
                datastore_format: skillknn::datastore::VERSION,
            },
        };
        let path = manifest_path(output);
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
