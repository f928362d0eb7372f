//! Pipeline configuration: one TOML document validated as a whole.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use flankwear_core::dataset::{default_regions, RegionSpec, SplitSpec};
use flankwear_core::features::{SpectralBand, FEATURE_LABELS, SPW_LABELS};
use flankwear_core::ingest::{DEFAULT_DETECT_RATIO, DEFAULT_DETECT_WINDOW};
use flankwear_core::neural::Hyperparameters;
use flankwear_core::synthrig::RigConfig;
use flankwear_core::tuner::SearchSpace;
use flankwear_core::{Error, Result};

/// How cutting segments are isolated from the continuous recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentationMode {
    /// Trust the hole markers shipped with the recording.
    Markers,
    /// Detect cutting extents from the thrust-force envelope.
    Threshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmentationConfig {
    pub mode: SegmentationMode,
    pub window_samples: usize,
    pub threshold_ratio: f64,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig {
            mode: SegmentationMode::Markers,
            window_samples: DEFAULT_DETECT_WINDOW,
            threshold_ratio: DEFAULT_DETECT_RATIO,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    /// Trailing moving-average window, in holes.
    pub moving_average_window: usize,
    /// Feature columns kept for modeling; the rest are dropped after
    /// smoothing. Order follows the extraction layout, not this list.
    pub selected: Vec<String>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            moving_average_window: 200,
            selected: FEATURE_LABELS
                .iter()
                .filter(|l| !SPW_LABELS.contains(l))
                .map(|l| l.to_string())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuantizerConfig {
    /// Uniform jitter applied to interpolated wear values, micrometers.
    pub jitter_um: f64,
    /// Gaussian noise on sampled wear measurements, micrometers.
    pub measurement_noise_um: f64,
    pub seed: u64,
}

impl Default for QuantizerConfig {
    fn default() -> Self {
        QuantizerConfig {
            jitter_um: 0.0,
            measurement_noise_um: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    /// Window length in holes.
    pub timestep: usize,
    pub split: SplitSpec,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            timestep: 20,
            split: SplitSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TunerConfig {
    pub n_trials: usize,
    /// Cumulative epoch targets per rung.
    pub rungs: Vec<usize>,
    pub keep_fraction: f64,
    pub seed: u64,
    /// Region the search trains on; defaults to the first configured one.
    pub region: Option<String>,
    pub space: SearchSpace,
}

impl Default for TunerConfig {
    fn default() -> Self {
        TunerConfig {
            n_trials: 16,
            rungs: vec![5, 20, 100],
            keep_fraction: 0.5,
            seed: 7,
            region: None,
            space: SearchSpace::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Root directory all artifacts are written under.
    pub root: PathBuf,
    /// Worker threads for per-region stages and tuner trials.
    pub threads: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            root: PathBuf::from("out"),
            threads: 3,
        }
    }
}

/// The whole pipeline configuration. Loaded from one TOML file, validated
/// before any stage runs; unknown keys anywhere are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub rig: RigConfig,
    pub band: SpectralBand,
    pub segmentation: SegmentationConfig,
    pub features: FeatureConfig,
    pub quantizer: QuantizerConfig,
    pub dataset: DatasetConfig,
    pub regions: Vec<RegionSpec>,
    pub training: Hyperparameters,
    pub tuner: TunerConfig,
    pub output: OutputConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            rig: RigConfig::default(),
            band: SpectralBand::default(),
            segmentation: SegmentationConfig::default(),
            features: FeatureConfig::default(),
            quantizer: QuantizerConfig::default(),
            dataset: DatasetConfig::default(),
            regions: default_regions(),
            training: Hyperparameters::default(),
            tuner: TunerConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.rig.validate()?;
        self.band.validate_for(self.rig.sampling_rate_hz)?;

        if self.segmentation.window_samples == 0 {
            return Err(Error::Config("segmentation.window_samples must be >= 1".into()));
        }
        if !(self.segmentation.threshold_ratio > 0.0 && self.segmentation.threshold_ratio < 1.0) {
            return Err(Error::Config(format!(
                "segmentation.threshold_ratio must lie in (0, 1), got {}",
                self.segmentation.threshold_ratio
            )));
        }

        if self.features.moving_average_window == 0 {
            return Err(Error::Config("features.moving_average_window must be >= 1".into()));
        }
        if self.features.selected.is_empty() {
            return Err(Error::Config("features.selected must not be empty".into()));
        }
        let mut seen = BTreeSet::new();
        for label in &self.features.selected {
            if !FEATURE_LABELS.contains(&label.as_str()) {
                return Err(Error::Config(format!(
                    "features.selected contains unknown column {label:?} (known: {})",
                    FEATURE_LABELS.join(", ")
                )));
            }
            if !seen.insert(label.as_str()) {
                return Err(Error::Config(format!(
                    "features.selected lists {label:?} twice"
                )));
            }
        }

        if self.quantizer.jitter_um < 0.0 || !self.quantizer.jitter_um.is_finite() {
            return Err(Error::Config(format!(
                "quantizer.jitter_um must be finite and >= 0, got {}",
                self.quantizer.jitter_um
            )));
        }
        if self.quantizer.measurement_noise_um < 0.0
            || !self.quantizer.measurement_noise_um.is_finite()
        {
            return Err(Error::Config(format!(
                "quantizer.measurement_noise_um must be finite and >= 0, got {}",
                self.quantizer.measurement_noise_um
            )));
        }

        if self.dataset.timestep == 0 {
            return Err(Error::Config("dataset.timestep must be >= 1".into()));
        }
        self.dataset.split.validate()?;

        if self.regions.is_empty() {
            return Err(Error::Config("at least one region must be configured".into()));
        }
        flankwear_core::dataset::validate_regions(&self.regions)?;
        for r in &self.regions {
            if r.end_hole > self.rig.n_holes {
                return Err(Error::Config(format!(
                    "region {:?} ends at hole {} but the rig only drills {}",
                    r.name, r.end_hole, self.rig.n_holes
                )));
            }
            if r.len() < self.dataset.timestep {
                return Err(Error::Config(format!(
                    "region {:?} spans {} holes, fewer than timestep {}",
                    r.name,
                    r.len(),
                    self.dataset.timestep
                )));
            }
        }

        self.training.validate()?;

        if self.tuner.n_trials == 0 {
            return Err(Error::Config("tuner.n_trials must be >= 1".into()));
        }
        if self.tuner.rungs.is_empty()
            || self.tuner.rungs[0] == 0
            || self.tuner.rungs.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::Config(format!(
                "tuner.rungs must be positive and strictly increasing, got {:?}",
                self.tuner.rungs
            )));
        }
        if !(self.tuner.keep_fraction > 0.0 && self.tuner.keep_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "tuner.keep_fraction must lie in (0, 1], got {}",
                self.tuner.keep_fraction
            )));
        }
        if let Some(name) = &self.tuner.region {
            if !self.regions.iter().any(|r| &r.name == name) {
                return Err(Error::Config(format!(
                    "tuner.region {name:?} is not a configured region"
                )));
            }
        }
        self.tuner.space.validate()?;

        if self.output.root.as_os_str().is_empty() {
            return Err(Error::Config("output.root must not be empty".into()));
        }
        if self.output.threads == 0 {
            return Err(Error::Config("output.threads must be >= 1".into()));
        }
        Ok(())
    }

    /// The columns to drop so only `features.selected` remain.
    pub fn dropped_feature_labels(&self) -> Vec<&'static str> {
        FEATURE_LABELS
            .iter()
            .copied()
            .filter(|l| !self.features.selected.iter().any(|s| s == l))
            .collect()
    }

    /// Region specs after an optional `--region` filter.
    pub fn selected_regions(&self, filter: Option<&str>) -> Result<Vec<RegionSpec>> {
        match filter {
            None => Ok(self.regions.clone()),
            Some(name) => {
                let found: Vec<RegionSpec> = self
                    .regions
                    .iter()
                    .filter(|r| r.name == name)
                    .cloned()
                    .collect();
                if found.is_empty() {
                    return Err(Error::Config(format!(
                        "unknown region {name:?}; configured regions: {}",
                        self.regions
                            .iter()
                            .map(|r| r.name.as_str())
                            .collect::<Vec<_>>()
                            .join(", ")
                    )));
                }
                Ok(found)
            }
        }
    }

    /// The region the tuner trains on.
    pub fn tuner_region(&self, filter: Option<&str>) -> Result<RegionSpec> {
        if let Some(name) = filter {
            return Ok(self.selected_regions(Some(name))?.remove(0));
        }
        if let Some(name) = &self.tuner.region {
            return Ok(self.selected_regions(Some(name))?.remove(0));
        }
        Ok(self.regions[0].clone())
    }

    /// SHA-256 over the canonical JSON encoding of the effective config.
    ///
    /// The `output` section is excluded: where artifacts land and how many
    /// threads computed them never changes their content, so two runs that
    /// differ only there share a hash (and lineage checks accept both).
    pub fn hash(&self) -> String {
        let mut canonical_cfg = self.clone();
        canonical_cfg.output = OutputConfig::default();
        let canonical =
            serde_json::to_string(&canonical_cfg).expect("config serialization cannot fail");
        let digest = Sha256::digest(canonical.as_bytes());
        let mut hex = String::with_capacity(64);
        for b in digest {
            hex.push_str(&format!("{b:02x}"));
        }
        hex
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| Error::Internal(format!("config echo serialization failed: {e}")))
    }
}

/// Values that win over the config file (and over environment variables).
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out_root: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
}

/// Environment variable naming the output root, overriding the file value.
pub const ENV_OUT_ROOT: &str = "FLANKWEAR_OUT_ROOT";
/// Environment variable setting the worker thread count.
pub const ENV_THREADS: &str = "FLANKWEAR_THREADS";

/// Loads, layers (file < environment < flags), and validates a config.
pub fn load_config(path: &Path, overrides: &Overrides) -> Result<PipelineConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg: PipelineConfig = toml::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;

    if let Ok(v) = std::env::var(ENV_OUT_ROOT) {
        if v.is_empty() {
            return Err(Error::Config(format!("{ENV_OUT_ROOT} is set but empty")));
        }
        cfg.output.root = PathBuf::from(v);
    }
    if let Ok(v) = std::env::var(ENV_THREADS) {
        cfg.output.threads = v.parse().map_err(|_| {
            Error::Config(format!("{ENV_THREADS} must be a positive integer, got {v:?}"))
        })?;
    }

    if let Some(root) = &overrides.out_root {
        cfg.output.root = root.clone();
    }
    if let Some(threads) = overrides.threads {
        cfg.output.threads = threads;
    }
    if let Some(seed) = overrides.seed {
        cfg.training.seed = seed;
    }

    cfg.validate()?;
    Ok(cfg)
}
