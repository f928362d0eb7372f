//! Pipeline stage commands. Each one reads declared inputs, writes
//! declared artifacts plus a lineage sidecar, and returns a one-line
//! summary for the terminal.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use flankwear_core::dataset::{
    apply_scaler, fit_scaler, load_dataset_dir, make_windows, slice_region, split,
    export_dataset_dir, RegionSpec, WindowedDataset,
};
use flankwear_core::eval::EvalReport;
use flankwear_core::features::{
    extract_features, export_features, load_features, moving_average, select_features,
};
use flankwear_core::ingest::{detect_cutting_extents, load_markers, load_recording, segment_by_markers};
use flankwear_core::neural::{init_model, load_model, predict, save_model, train};
use flankwear_core::synthrig::{
    export_measurements, export_recording, generate_wear_curve, sample_wear_measurements,
    synthesize_recording,
};
use flankwear_core::tuner::{export_leaderboard, export_search_report, run_search};
use flankwear_core::wear::{load_curve, load_measurements, quantize, wear_at, QuantizedWearCurve};
use flankwear_core::{Error, Result};

use crate::config::{PipelineConfig, SegmentationMode};
use crate::lineage::{check_lineage, write_lineage};

/// Artifact layout under the output root.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub root: PathBuf,
}

impl Workspace {
    pub fn new(cfg: &PipelineConfig) -> Self {
        Workspace {
            root: cfg.output.root.clone(),
        }
    }

    pub fn raw_dir(&self) -> PathBuf {
        self.root.join("raw")
    }
    pub fn recording_csv(&self) -> PathBuf {
        self.raw_dir().join("recording.csv")
    }
    pub fn measurements_csv(&self) -> PathBuf {
        self.raw_dir().join("measurements.csv")
    }
    pub fn truth_csv(&self) -> PathBuf {
        self.raw_dir().join("true-wear.csv")
    }
    pub fn segments_dir(&self) -> PathBuf {
        self.root.join("segments")
    }
    pub fn markers_csv(&self) -> PathBuf {
        self.segments_dir().join("markers.csv")
    }
    pub fn features_dir(&self) -> PathBuf {
        self.root.join("features")
    }
    pub fn features_raw_csv(&self) -> PathBuf {
        self.features_dir().join("raw.csv")
    }
    pub fn features_smoothed_csv(&self) -> PathBuf {
        self.features_dir().join("smoothed.csv")
    }
    pub fn features_selected_csv(&self) -> PathBuf {
        self.features_dir().join("selected.csv")
    }
    pub fn wear_dir(&self) -> PathBuf {
        self.root.join("wear")
    }
    pub fn curve_csv(&self) -> PathBuf {
        self.wear_dir().join("curve.csv")
    }
    pub fn dataset_dir(&self, region: &str) -> PathBuf {
        self.root.join("dataset").join(region)
    }
    pub fn model_dir(&self, region: &str) -> PathBuf {
        self.root.join("model").join(region)
    }
    pub fn eval_dir(&self, region: &str) -> PathBuf {
        self.root.join("eval").join(region)
    }
    pub fn tune_dir(&self, region: &str) -> PathBuf {
        self.root.join("tune").join(region)
    }
    pub fn report_json(&self) -> PathBuf {
        self.root.join("report.json")
    }
    pub fn effective_config_toml(&self) -> PathBuf {
        self.root.join("effective-config.toml")
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes the fully resolved configuration next to the artifacts so every
/// run carries its own provenance.
pub fn echo_config(cfg: &PipelineConfig) -> Result<()> {
    let ws = Workspace::new(cfg);
    ensure_dir(&ws.root)?;
    let path = ws.effective_config_toml();
    fs::write(&path, cfg.to_toml()?).map_err(|e| Error::io(&path, e))?;
    write_lineage(&ws.root, "config", cfg)
}

// ---------------------------------------------------------------------------
// Stage commands
// ---------------------------------------------------------------------------

/// Generates the synthetic drilling campaign: raw three-channel recording,
/// hole markers, periodic wear measurements, and the ground-truth curve.
pub fn cmd_simulate(cfg: &PipelineConfig) -> Result<String> {
    let ws = Workspace::new(cfg);
    ensure_dir(&ws.raw_dir())?;
    echo_config(cfg)?;

    let curve = generate_wear_curve(&cfg.rig)?;
    let rec = synthesize_recording(&cfg.rig, &curve)?;
    export_recording(&rec, &ws.recording_csv())?;

    let measurements = sample_wear_measurements(
        &curve,
        cfg.rig.wear_measure_interval,
        cfg.quantizer.measurement_noise_um,
        cfg.rig.seed,
    )?;
    export_measurements(&measurements, &ws.measurements_csv())?;

    let mut truth = String::from("hole_index,wear_um\n");
    for (i, w) in curve.wear_um.iter().enumerate() {
        truth.push_str(&format!("{i},{w}\n"));
    }
    fs::write(ws.truth_csv(), truth).map_err(|e| Error::io(ws.truth_csv(), e))?;

    write_lineage(&ws.raw_dir(), "simulate", cfg)?;
    Ok(format!(
        "simulate: {} holes, {} samples/channel, {} wear measurements -> {}",
        cfg.rig.n_holes,
        rec.im.len(),
        measurements.len(),
        ws.raw_dir().display()
    ))
}

/// Isolates per-hole cutting extents, either trusting the recorded markers
/// or re-detecting them from the thrust-force envelope.
pub fn cmd_segment(cfg: &PipelineConfig) -> Result<String> {
    let ws = Workspace::new(cfg);
    let rec = load_recording(&ws.recording_csv(), cfg.rig.sampling_rate_hz)?;
    let (markers, how) = match cfg.segmentation.mode {
        SegmentationMode::Markers => (rec.hole_markers.clone(), "markers"),
        SegmentationMode::Threshold => (
            detect_cutting_extents(
                &rec,
                cfg.segmentation.window_samples,
                cfg.segmentation.threshold_ratio,
            )?,
            "threshold",
        ),
    };
    ensure_dir(&ws.segments_dir())?;
    flankwear_core::synthrig::export_markers(&markers, &ws.markers_csv())?;
    write_lineage(&ws.segments_dir(), "segment", cfg)?;
    Ok(format!(
        "segment: {} cutting segments via {how} -> {}",
        markers.len(),
        ws.markers_csv().display()
    ))
}

/// Extracts the per-hole statistical features, smooths them with the
/// trailing moving average, and drops the unselected columns.
pub fn cmd_extract(cfg: &PipelineConfig) -> Result<String> {
    let ws = Workspace::new(cfg);
    let mut rec = load_recording(&ws.recording_csv(), cfg.rig.sampling_rate_hz)?;
    rec.hole_markers = load_markers(&ws.markers_csv())?;
    rec.validate()?;
    let segments = segment_by_markers(&rec)?;

    let raw = extract_features(&segments, &cfg.band)?;
    ensure_dir(&ws.features_dir())?;
    export_features(&raw, &ws.features_raw_csv())?;

    let smoothed = moving_average(&raw, cfg.features.moving_average_window)?;
    export_features(&smoothed, &ws.features_smoothed_csv())?;

    let selected = select_features(&smoothed, &cfg.dropped_feature_labels())?;
    export_features(&selected, &ws.features_selected_csv())?;

    write_lineage(&ws.features_dir(), "extract", cfg)?;
    Ok(format!(
        "extract: {} rows x {} features, kept {} after selection -> {}",
        raw.n_rows(),
        raw.n_cols(),
        selected.n_cols(),
        ws.features_dir().display()
    ))
}

/// Expands the sparse wear measurements into a per-hole target curve.
pub fn cmd_quantize(cfg: &PipelineConfig) -> Result<String> {
    let ws = Workspace::new(cfg);
    let measurements = load_measurements(&ws.measurements_csv())?;
    let curve = quantize(
        &measurements,
        cfg.rig.n_holes,
        cfg.quantizer.jitter_um,
        cfg.quantizer.seed,
    )?;
    ensure_dir(&ws.wear_dir())?;
    flankwear_core::wear::export_curve(&curve, &ws.curve_csv())?;
    write_lineage(&ws.wear_dir(), "quantize", cfg)?;
    Ok(format!(
        "quantize: {} per-hole wear values from {} anchors -> {}",
        curve.len(),
        curve.anchor_indices.len(),
        ws.curve_csv().display()
    ))
}

fn build_one_region(cfg: &PipelineConfig, region: &RegionSpec) -> Result<usize> {
    let ws = Workspace::new(cfg);
    let features = load_features(&ws.features_selected_csv(), true)?;
    let curve = load_curve(&ws.curve_csv())?;
    let (matrix, wear) = slice_region(&features, &curve, region)?;
    let windows = make_windows(&matrix, &wear, cfg.dataset.timestep)?;
    let (train_raw, val_raw, test_raw) = split(&windows, &cfg.dataset.split)?;
    let scaler = fit_scaler(&train_raw)?;
    let train_s = apply_scaler(&train_raw, &scaler)?;
    let val_s = apply_scaler(&val_raw, &scaler)?;
    let test_s = apply_scaler(&test_raw, &scaler)?;
    let dir = ws.dataset_dir(&region.name);
    export_dataset_dir(&dir, &train_s, &val_s, &test_s, &scaler)?;
    write_lineage(&dir, "build", cfg)?;
    Ok(windows.n_samples)
}

/// Builds the windowed, split, scaled datasets for the selected regions.
pub fn cmd_build(cfg: &PipelineConfig, region_filter: Option<&str>) -> Result<String> {
    let regions = cfg.selected_regions(region_filter)?;
    let mut parts = Vec::new();
    for region in &regions {
        let n = build_one_region(cfg, region)?;
        parts.push(format!("{} {} windows", region.name, n));
    }
    Ok(format!(
        "build: {} -> {}",
        parts.join(", "),
        Workspace::new(cfg).root.join("dataset").display()
    ))
}

fn train_one_region(cfg: &PipelineConfig, region: &RegionSpec) -> Result<String> {
    let ws = Workspace::new(cfg);
    let dir = ws.dataset_dir(&region.name);
    let (train_set, val_set, _test, scaler) = load_dataset_dir(&dir)?;
    let model = init_model(&cfg.training, train_set.n_features)?;
    let (mut trained, report) = train(model, &train_set, &val_set)?;
    trained.scaler = Some(scaler);

    let mdir = ws.model_dir(&region.name);
    ensure_dir(&mdir)?;
    save_model(&trained, &mdir.join("model.json"))?;
    let mut rj = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Internal(format!("training report serialization failed: {e}")))?;
    rj.push('\n');
    let rpath = mdir.join("train-report.json");
    fs::write(&rpath, rj).map_err(|e| Error::io(&rpath, e))?;
    write_lineage(&mdir, "train", cfg)?;
    Ok(format!(
        "{} best val loss {:.5} at epoch {}/{}",
        region.name,
        report.best_val_loss(),
        report.best_epoch,
        report.stopped_epoch
    ))
}

/// Trains one model per selected region, regions in parallel when threads
/// allow; each model is single-threaded for determinism.
pub fn cmd_train(cfg: &PipelineConfig, region_filter: Option<&str>) -> Result<String> {
    let regions = cfg.selected_regions(region_filter)?;
    let parts = for_regions(&regions, cfg.output.threads, |r| train_one_region(cfg, r))?;
    Ok(format!("train: {}", parts.join("; ")))
}

/// Runs the hyperparameter search on one region's dataset.
pub fn cmd_tune(cfg: &PipelineConfig, region_filter: Option<&str>) -> Result<String> {
    let region = cfg.tuner_region(region_filter)?;
    let ws = Workspace::new(cfg);
    let (train_set, val_set, _test, _scaler) = load_dataset_dir(&ws.dataset_dir(&region.name))?;
    let outcome = run_search(
        &cfg.tuner.space,
        &train_set,
        &val_set,
        cfg.tuner.n_trials,
        &cfg.tuner.rungs,
        cfg.tuner.keep_fraction,
        cfg.tuner.seed,
        cfg.output.threads,
    )?;
    let dir = ws.tune_dir(&region.name);
    ensure_dir(&dir)?;
    export_search_report(&outcome, &dir.join("search.json"))?;
    export_leaderboard(&outcome, &dir.join("leaderboard.csv"))?;
    write_lineage(&dir, "tune", cfg)?;
    Ok(format!(
        "tune: {} trials on {}, winner trial {} val loss {:.5}, epochs {}/{} planned -> {}",
        cfg.tuner.n_trials,
        region.name,
        outcome.best.trial,
        outcome.best.best_val_loss,
        outcome.epochs_consumed,
        outcome.planned_epochs,
        dir.display()
    ))
}

/// One hole's measured versus predicted wear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoleRecord {
    pub hole_index: usize,
    pub measured_um: f64,
    pub predicted_um: f64,
}

/// Evaluation of one region's model on its test split, with the per-hole
/// records behind the headline number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionEvalReport {
    pub region: String,
    pub n_test: usize,
    pub mape_percent: f64,
    pub mae_um: f64,
    pub max_abs_err_um: f64,
    pub records: Vec<HoleRecord>,
}

fn split_records(
    model: &flankwear_core::neural::LstmModel,
    ds: &WindowedDataset,
    curve: &QuantizedWearCurve,
) -> Result<Vec<HoleRecord>> {
    let predicted = predict(model, ds)?;
    ds.hole_of_sample
        .iter()
        .zip(predicted)
        .map(|(&hole, p)| {
            Ok(HoleRecord {
                hole_index: hole,
                measured_um: wear_at(curve, hole)?,
                predicted_um: p,
            })
        })
        .collect()
}

fn evaluate_one_region(cfg: &PipelineConfig, region: &RegionSpec) -> Result<RegionEvalReport> {
    let ws = Workspace::new(cfg);
    let ddir = ws.dataset_dir(&region.name);
    let mdir = ws.model_dir(&region.name);
    check_lineage(&ddir, cfg)?;
    check_lineage(&mdir, cfg)?;

    let (train_set, val_set, test_set, _scaler) = load_dataset_dir(&ddir)?;
    let model = load_model(&mdir.join("model.json"))?;
    let curve = load_curve(&ws.curve_csv())?;

    let train_records = split_records(&model, &train_set, &curve)?;
    let val_records = split_records(&model, &val_set, &curve)?;
    let test_records = split_records(&model, &test_set, &curve)?;

    let edir = ws.eval_dir(&region.name);
    ensure_dir(&edir)?;
    let mut plot = String::from("hole_index,measured_um,predicted_um,split\n");
    for (records, name) in [
        (&train_records, "train"),
        (&val_records, "val"),
        (&test_records, "test"),
    ] {
        for r in records {
            plot.push_str(&format!(
                "{},{},{},{}\n",
                r.hole_index, r.measured_um, r.predicted_um, name
            ));
        }
    }
    let ppath = edir.join("plot.csv");
    fs::write(&ppath, plot).map_err(|e| Error::io(&ppath, e))?;

    let measured: Vec<f64> = test_records.iter().map(|r| r.measured_um).collect();
    let predicted: Vec<f64> = test_records.iter().map(|r| r.predicted_um).collect();
    let metrics = EvalReport::compute(&measured, &predicted)?;
    let report = RegionEvalReport {
        region: region.name.clone(),
        n_test: test_records.len(),
        mape_percent: metrics.mape_percent,
        mae_um: metrics.mae_um,
        max_abs_err_um: metrics.max_abs_err_um,
        records: test_records,
    };
    let mut ej = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Internal(format!("evaluation report serialization failed: {e}")))?;
    ej.push('\n');
    let epath = edir.join("eval.json");
    fs::write(&epath, ej).map_err(|e| Error::io(&epath, e))?;
    write_lineage(&edir, "evaluate", cfg)?;
    Ok(report)
}

/// Evaluates trained models on their test splits; refuses artifacts whose
/// lineage does not match the current configuration.
pub fn cmd_evaluate(cfg: &PipelineConfig, region_filter: Option<&str>) -> Result<String> {
    let regions = cfg.selected_regions(region_filter)?;
    let reports = for_regions(&regions, 1, |r| evaluate_one_region(cfg, r))?;
    let parts: Vec<String> = reports
        .iter()
        .map(|r| format!("{} MAPE {:.2}% over {} test holes", r.region, r.mape_percent, r.n_test))
        .collect();
    Ok(format!("evaluate: {}", parts.join("; ")))
}

/// Combined output of a full pipeline run: the per-region evaluations
/// under the config hash that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineReport {
    pub config_hash: String,
    pub regions: Vec<RegionEvalReport>,
}

/// Runs every stage end to end: one shared simulation, segmentation,
/// extraction, and quantization pass, then per-region dataset building,
/// training, and evaluation (regions in parallel when threads allow), and
/// finally the combined report.
pub fn cmd_pipeline(cfg: &PipelineConfig) -> Result<String> {
    cmd_simulate(cfg)?;
    cmd_segment(cfg)?;
    cmd_extract(cfg)?;
    cmd_quantize(cfg)?;

    let regions = cfg.selected_regions(None)?;
    let reports = for_regions(&regions, cfg.output.threads, |r| {
        build_one_region(cfg, r)?;
        train_one_region(cfg, r)?;
        evaluate_one_region(cfg, r)
    })?;

    let ws = Workspace::new(cfg);
    let report = PipelineReport {
        config_hash: cfg.hash(),
        regions: reports,
    };
    let mut rj = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Internal(format!("pipeline report serialization failed: {e}")))?;
    rj.push('\n');
    let rpath = ws.report_json();
    fs::write(&rpath, rj).map_err(|e| Error::io(&rpath, e))?;

    let parts: Vec<String> = report
        .regions
        .iter()
        .map(|r| format!("{} {:.2}%", r.region, r.mape_percent))
        .collect();
    Ok(format!(
        "pipeline: test MAPE {} -> {}",
        parts.join(", "),
        rpath.display()
    ))
}

/// Runs `f` over the regions, in parallel when `threads > 1`, always
/// reducing results in region order so concurrency never changes output.
fn for_regions<T: Send>(
    regions: &[RegionSpec],
    threads: usize,
    f: impl Fn(&RegionSpec) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    if threads <= 1 || regions.len() <= 1 {
        return regions.iter().map(f).collect();
    }
    let n_workers = threads.min(regions.len());
    let chunk = regions.len().div_ceil(n_workers);
    let mut slots: Vec<Option<Result<T>>> = regions.iter().map(|_| None).collect();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for (regs, out) in regions.chunks(chunk).zip(slots.chunks_mut(chunk)) {
            let f = &f;
            handles.push(scope.spawn(move || {
                for (r, slot) in regs.iter().zip(out.iter_mut()) {
                    *slot = Some(f(r));
                }
            }));
        }
        for h in handles {
            h.join().expect("region worker panicked");
        }
    });
    slots
        .into_iter()
        .map(|s| s.expect("every region slot is filled"))
        .collect()
}
