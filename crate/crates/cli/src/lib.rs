//! Drill-wear prediction pipeline: synthetic signal generation, feature
//! extraction, wear-target preparation, LSTM training, hyperparameter
//! search, and evaluation, wired as reproducible stages behind one binary.

pub mod commands;
pub mod config;
pub mod lineage;

pub use commands::{
    cmd_build, cmd_evaluate, cmd_extract, cmd_pipeline, cmd_quantize, cmd_segment, cmd_simulate,
    cmd_train, cmd_tune, HoleRecord, PipelineReport, RegionEvalReport, Workspace,
};
pub use config::{load_config, Overrides, PipelineConfig, SegmentationMode};
pub use lineage::{check_lineage, read_lineage, write_lineage, Lineage, LINEAGE_FILE};
