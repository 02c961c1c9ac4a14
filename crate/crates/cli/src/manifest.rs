//! Run manifests: every subcommand records its arguments, parameters,
//! tolerances and output hashes so a run can be reproduced bit-identically.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<blowuplab_core::ModelParams>,
    pub settings: BTreeMap<String, serde_json::Value>,
    pub outputs: BTreeMap<String, String>,
    pub wall_seconds: f64,
}

pub struct ManifestBuilder {
    manifest: Manifest,
    started: Instant,
    out_dir: PathBuf,
}

impl ManifestBuilder {
    pub fn new(out_dir: &Path) -> ManifestBuilder {
        ManifestBuilder {
            manifest: Manifest {
                tool: "blowuplab".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                command: std::env::args().collect(),
                params: None,
                settings: BTreeMap::new(),
                outputs: BTreeMap::new(),
                wall_seconds: 0.0,
            },
            started: Instant::now(),
            out_dir: out_dir.to_path_buf(),
        }
    }

    pub fn params(&mut self, p: blowuplab_core::ModelParams) -> &mut Self {
        self.manifest.params = Some(p);
        self
    }

    pub fn setting(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.manifest
            .settings
            .insert(key.to_string(), serde_json::to_value(value).unwrap());
        self
    }

    /// Write a file under the output directory and record its hash.
    pub fn emit(&mut self, name: &str, contents: &str) -> anyhow::Result<PathBuf> {
        std::fs::create_dir_all(&self.out_dir)?;
        let path = self.out_dir.join(name);
        std::fs::write(&path, contents)?;
        let mut h = Sha256::new();
        h.update(contents.as_bytes());
        self.manifest
            .outputs
            .insert(name.to_string(), format!("sha256:{:x}", h.finalize()));
        Ok(path)
    }

    pub fn finish(mut self) -> anyhow::Result<()> {
        self.manifest.wall_seconds = self.started.elapsed().as_secs_f64();
        let text = serde_json::to_string_pretty(&self.manifest)?;
        std::fs::create_dir_all(&self.out_dir)?;
        std::fs::write(self.out_dir.join("manifest.json"), text)?;
        Ok(())
    }
}
