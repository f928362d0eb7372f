//! Provenance sidecars: every artifact directory records the config hash
//! and seeds that produced it, and evaluation refuses to mix lineages.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use flankwear_core::{Error, Result};

use crate::config::PipelineConfig;

pub const LINEAGE_FILE: &str = "lineage.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lineage {
    /// Name of the stage that wrote the directory.
    pub stage: String,
    /// SHA-256 of the effective configuration.
    pub config_hash: String,
    /// All seeds feeding this pipeline, by role.
    pub seeds: BTreeMap<String, u64>,
}

impl Lineage {
    pub fn for_stage(stage: &str, cfg: &PipelineConfig) -> Self {
        let mut seeds = BTreeMap::new();
        seeds.insert("rig".to_string(), cfg.rig.seed);
        seeds.insert("quantizer".to_string(), cfg.quantizer.seed);
        seeds.insert("training".to_string(), cfg.training.seed);
        seeds.insert("tuner".to_string(), cfg.tuner.seed);
        Lineage {
            stage: stage.to_string(),
            config_hash: cfg.hash(),
            seeds,
        }
    }
}

/// Writes `lineage.json` into `dir`, creating the directory if needed.
pub fn write_lineage(dir: &Path, stage: &str, cfg: &PipelineConfig) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(LINEAGE_FILE);
    let mut s = serde_json::to_string_pretty(&Lineage::for_stage(stage, cfg))
        .map_err(|e| Error::Internal(format!("lineage serialization failed: {e}")))?;
    s.push('\n');
    fs::write(&path, s).map_err(|e| Error::io(&path, e))
}

pub fn read_lineage(dir: &Path) -> Result<Lineage> {
    let path = dir.join(LINEAGE_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(&path, e.line(), e.to_string()))
}

/// Verifies that the artifacts in `dir` were produced by this exact
/// configuration.
pub fn check_lineage(dir: &Path, cfg: &PipelineConfig) -> Result<Lineage> {
    let lineage = read_lineage(dir)?;
    let current = cfg.hash();
    if lineage.config_hash != current {
        return Err(Error::Lineage(format!(
            "{} was produced by config {} (stage {}), but the current config hashes to {}; \
             regenerate the artifacts or restore the original config",
            dir.display(),
            &lineage.config_hash[..12.min(lineage.config_hash.len())],
            lineage.stage,
            &current[..12]
        )));
    }
    Ok(lineage)
}
