//! Region slicing, sliding-window dataset construction, chronological
//! splitting, and min-max scaling.
//!
//! The smoothed feature table is cut into trend regions, each region becomes
//! overlapping windows of `timestep` consecutive holes (the target is the
//! wear at the window's last hole), the windows are split
//! train/validation/test in chronological order, and all values are min-max
//! scaled with statistics fitted on the training split only. Windows are
//! built per region, so no window ever crosses a region boundary.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, FeatureRow};
use crate::wear::QuantizedWearCurve;

/// Default window length: each prediction sees the past 20 holes.
pub const DEFAULT_TIMESTEP: usize = 20;

/// A named half-open range `[start_hole, end_hole)` of the campaign.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub name: String,
    pub start_hole: usize,
    pub end_hole: usize,
}

impl RegionSpec {
    pub fn new(name: impl Into<String>, start_hole: usize, end_hole: usize) -> Self {
        RegionSpec {
            name: name.into(),
            start_hole,
            end_hole,
        }
    }

    pub fn len(&self) -> usize {
        self.end_hole - self.start_hole
    }

    pub fn is_empty(&self) -> bool {
        self.end_hole <= self.start_hole
    }

    pub fn validate(&self) -> Result<()> {
        if self.start_hole >= self.end_hole {
            return Err(Error::Config(format!(
                "region {:?} requires start < end, got [{}, {})",
                self.name, self.start_hole, self.end_hole
            )));
        }
        Ok(())
    }
}

/// The three low-variance trend regions used by the reference campaign; the
/// tail after hole 1800 is discarded.
pub fn default_regions() -> Vec<RegionSpec> {
    vec![
        RegionSpec::new("region1", 200, 800),
        RegionSpec::new("region2", 800, 1400),
        RegionSpec::new("region3", 1400, 1800),
    ]
}

/// Checks each region and their pairwise disjointness.
pub fn validate_regions(regions: &[RegionSpec]) -> Result<()> {
    if regions.is_empty() {
        return Err(Error::Config("at least one region is required".into()));
    }
    for r in regions {
        r.validate()?;
    }
    for (i, a) in regions.iter().enumerate() {
        for b in &regions[i + 1..] {
            if a.start_hole < b.end_hole && b.start_hole < a.end_hole {
                return Err(Error::Config(format!(
                    "regions {:?} and {:?} overlap",
                    a.name, b.name
                )));
            }
            if a.name == b.name {
                return Err(Error::Config(format!("duplicate region name {:?}", a.name)));
            }
        }
    }
    Ok(())
}

/// Train/validation/test fractions; must be positive and sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_frac: 0.75,
            val_frac: 0.15,
            test_frac: 0.10,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("train_frac", self.train_frac),
            ("val_frac", self.val_frac),
            ("test_frac", self.test_frac),
        ] {
            if v <= 0.0 || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let sum = self.train_frac + self.val_frac + self.test_frac;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

/// Sliding windows over consecutive holes: `inputs` is a flat
/// `n_samples x timestep x n_features` array; `targets[i]` is the wear at
/// the last hole of window `i`, recorded in `hole_of_sample[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
    pub hole_of_sample: Vec<usize>,
    pub n_samples: usize,
    pub timestep: usize,
    pub n_features: usize,
    pub feature_names: Vec<String>,
}

impl WindowedDataset {
    /// The `timestep x n_features` input block of one window.
    pub fn input(&self, sample: usize) -> &[f64] {
        let w = self.timestep * self.n_features;
        &self.inputs[sample * w..(sample + 1) * w]
    }

    /// One timestep row within one window.
    pub fn input_step(&self, sample: usize, step: usize) -> &[f64] {
        let w = self.timestep * self.n_features;
        let off = sample * w + step * self.n_features;
        &self.inputs[off..off + self.n_features]
    }

    pub fn validate(&self) -> Result<()> {
        let want = self.n_samples * self.timestep * self.n_features;
        if self.inputs.len() != want {
            return Err(Error::Dimension(format!(
                "inputs hold {} values, expected {} ({} x {} x {})",
                self.inputs.len(),
                want,
                self.n_samples,
                self.timestep,
                self.n_features
            )));
        }
        if self.targets.len() != self.n_samples || self.hole_of_sample.len() != self.n_samples {
            return Err(Error::Dimension(format!(
                "targets/holes hold {}/{} values, expected {}",
                self.targets.len(),
                self.hole_of_sample.len(),
                self.n_samples
            )));
        }
        if self.feature_names.len() != self.n_features {
            return Err(Error::Dimension(format!(
                "{} feature names for {} features",
                self.feature_names.len(),
                self.n_features
            )));
        }
        Ok(())
    }
}

/// Per-feature and target min-max statistics fitted on a training split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl MinMax {
    pub fn is_degenerate(&self) -> bool {
        self.max == self.min
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalerParams {
    pub features: Vec<MinMax>,
    pub target: MinMax,
}

impl ScalerParams {
    /// Indices of constant feature columns, which scale to 0.
    pub fn degenerate_features(&self) -> Vec<usize> {
        self.features
            .iter()
            .enumerate()
            .filter(|(_, m)| m.is_degenerate())
            .map(|(i, _)| i)
            .collect()
    }
}

/// Selects the rows with `start_hole <= hole_index < end_hole` and the wear
/// values aligned to them.
pub fn slice_region(
    features: &FeatureMatrix,
    wear: &QuantizedWearCurve,
    region: &RegionSpec,
) -> Result<(FeatureMatrix, Vec<f64>)> {
    region.validate()?;
    features.validate()?;
    let rows: Vec<FeatureRow> = features
        .rows
        .iter()
        .filter(|r| r.hole_index >= region.start_hole && r.hole_index < region.end_hole)
        .cloned()
        .collect();
    if rows.is_empty() {
        return Err(Error::Region(format!(
            "region {:?} [{}, {}) selects no feature rows",
            region.name, region.start_hole, region.end_hole
        )));
    }
    let mut aligned = Vec::with_capacity(rows.len());
    for r in &rows {
        aligned.push(crate::wear::wear_at(wear, r.hole_index)?);
    }
    Ok((
        FeatureMatrix {
            rows,
            column_names: features.column_names.clone(),
            smoothed: features.smoothed,
        },
        aligned,
    ))
}

/// Builds the sliding windows: window `i` covers feature rows
/// `[i, i+timestep)` and predicts the wear at row `i+timestep-1`, so
/// `n_samples = rows - timestep + 1`.
pub fn make_windows(
    features: &FeatureMatrix,
    wear: &[f64],
    timestep: usize,
) -> Result<WindowedDataset> {
    features.validate()?;
    if timestep < 1 {
        return Err(Error::Config("timestep must be >= 1".into()));
    }
    let rows = features.n_rows();
    if wear.len() != rows {
        return Err(Error::Dimension(format!(
            "{} wear values for {} feature rows",
            wear.len(),
            rows
        )));
    }
    if rows < timestep {
        return Err(Error::Dimension(format!(
            "{rows} rows cannot form a {timestep}-step window"
        )));
    }
    let n_features = features.n_cols();
    let n_samples = rows - timestep + 1;
    let mut inputs = Vec::with_capacity(n_samples * timestep * n_features);
    let mut targets = Vec::with_capacity(n_samples);
    let mut holes = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        for row in &features.rows[i..i + timestep] {
            inputs.extend_from_slice(&row.values);
        }
        let last = &features.rows[i + timestep - 1];
        targets.push(wear[i + timestep - 1]);
        holes.push(last.hole_index);
    }
    let ds = WindowedDataset {
        inputs,
        targets,
        hole_of_sample: holes,
        n_samples,
        timestep,
        n_features,
        feature_names: features.column_names.clone(),
    };
    ds.validate()?;
    Ok(ds)
}

fn take_range(ds: &WindowedDataset, lo: usize, hi: usize) -> WindowedDataset {
    let w = ds.timestep * ds.n_features;
    WindowedDataset {
        inputs: ds.inputs[lo * w..hi * w].to_vec(),
        targets: ds.targets[lo..hi].to_vec(),
        hole_of_sample: ds.hole_of_sample[lo..hi].to_vec(),
        n_samples: hi - lo,
        timestep: ds.timestep,
        n_features: ds.n_features,
        feature_names: ds.feature_names.clone(),
    }
}

/// Splits chronologically into contiguous train/validation/test runs.
///
/// Validation and test sizes are `floor(n * frac)`; the remainder joins the
/// training split, which always comes earliest.
pub fn split(
    ds: &WindowedDataset,
    spec: &SplitSpec,
) -> Result<(WindowedDataset, WindowedDataset, WindowedDataset)> {
    ds.validate()?;
    spec.validate()?;
    let n = ds.n_samples;
    if n < 10 {
        return Err(Error::Dataset(format!(
            "need at least 10 windows to split, got {n}"
        )));
    }
    let n_val = (n as f64 * spec.val_frac).floor() as usize;
    let n_test = (n as f64 * spec.test_frac).floor() as usize;
    let n_train_floor = (n as f64 * spec.train_frac).floor() as usize;
    let n_train = n - n_val - n_test;
    debug_assert!(n_train >= n_train_floor);
    let train = take_range(ds, 0, n_train);
    let val = take_range(ds, n_train, n_train + n_val);
    let test = take_range(ds, n_train + n_val, n);
    Ok((train, val, test))
}

/// Fits per-feature and target min-max statistics over the training split
/// only.
pub fn fit_scaler(train: &WindowedDataset) -> Result<ScalerParams> {
    train.validate()?;
    if train.n_samples == 0 {
        return Err(Error::Dataset("cannot fit a scaler on an empty split".into()));
    }
    let f = train.n_features;
    let mut features = vec![
        MinMax {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        };
        f
    ];
    for chunk in train.inputs.chunks_exact(f) {
        for (c, &v) in chunk.iter().enumerate() {
            features[c].min = features[c].min.min(v);
            features[c].max = features[c].max.max(v);
        }
    }
    let mut target = MinMax {
        min: f64::INFINITY,
        max: f64::NEG_INFINITY,
    };
    for &t in &train.targets {
        target.min = target.min.min(t);
        target.max = target.max.max(t);
    }
    Ok(ScalerParams { features, target })
}

fn scale_value(v: f64, m: &MinMax) -> f64 {
    if m.is_degenerate() {
        0.0
    } else {
        (v - m.min) / (m.max - m.min)
    }
}

/// Applies `x' = (x - min) / (max - min)` to every feature entry and target.
/// Constant columns map to 0. Values outside the fitted range (validation
/// and test splits) legitimately fall outside `[0, 1]`.
pub fn apply_scaler(ds: &WindowedDataset, p: &ScalerParams) -> Result<WindowedDataset> {
    ds.validate()?;
    if p.features.len() != ds.n_features {
        return Err(Error::Dimension(format!(
            "scaler has {} feature stats, dataset has {} features",
            p.features.len(),
            ds.n_features
        )));
    }
    let f = ds.n_features;
    let mut out = ds.clone();
    for chunk in out.inputs.chunks_exact_mut(f) {
        for (c, v) in chunk.iter_mut().enumerate() {
            *v = scale_value(*v, &p.features[c]);
        }
    }
    for t in out.targets.iter_mut() {
        *t = scale_value(*t, &p.target);
    }
    Ok(out)
}

/// Maps scaled targets back to micrometers: `y = y' * (max - min) + min`.
pub fn inverse_scale_target(y_scaled: &[f64], p: &ScalerParams) -> Result<Vec<f64>> {
    if p.target.is_degenerate() {
        return Err(Error::Scaling(
            "target scaler is degenerate (max == min); cannot invert".into(),
        ));
    }
    Ok(y_scaled
        .iter()
        .map(|&y| y * (p.target.max - p.target.min) + p.target.min)
        .collect())
}

// ---------------------------------------------------------------------------
// Dataset directory I/O
// ---------------------------------------------------------------------------

/// Writes one split as `sample,step,<features...>,target,hole` rows.
pub fn export_split(ds: &WindowedDataset, path: &Path) -> Result<()> {
    ds.validate()?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "sample,step,{},target,hole", ds.feature_names.join(","))
        .map_err(|e| Error::io(path, e))?;
    for s in 0..ds.n_samples {
        for step in 0..ds.timestep {
            write!(w, "{s},{step}").map_err(|e| Error::io(path, e))?;
            for v in ds.input_step(s, step) {
                write!(w, ",{v}").map_err(|e| Error::io(path, e))?;
            }
            writeln!(w, ",{},{}", ds.targets[s], ds.hole_of_sample[s])
                .map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Loads one split written by [`export_split`].
pub fn load_split(path: &Path) -> Result<WindowedDataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let header = header.map_err(|e| Error::io(path, e))?;
    let cols: Vec<&str> = header.trim_end().split(',').collect();
    if cols.len() < 5 || cols[0] != "sample" || cols[1] != "step" {
        return Err(Error::parse(
            path,
            1,
            "expected header sample,step,<features...>,target,hole",
        ));
    }
    if cols[cols.len() - 2] != "target" || cols[cols.len() - 1] != "hole" {
        return Err(Error::parse(path, 1, "last columns must be target,hole"));
    }
    let feature_names: Vec<String> = cols[2..cols.len() - 2].iter().map(|s| s.to_string()).collect();
    let n_features = feature_names.len();

    let mut inputs = Vec::new();
    let mut targets: Vec<f64> = Vec::new();
    let mut holes: Vec<usize> = Vec::new();
    let mut timestep = 0usize;
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n_features + 4 {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected {} fields, found {}", n_features + 4, fields.len()),
            ));
        }
        let bad = |what: &str, f: &str| Error::parse(path, line_no, format!("invalid {what}: {f:?}"));
        let sample: usize = fields[0].trim().parse().map_err(|_| bad("sample", fields[0]))?;
        let step: usize = fields[1].trim().parse().map_err(|_| bad("step", fields[1]))?;
        let target: f64 = fields[n_features + 2]
            .trim()
            .parse()
            .map_err(|_| bad("target", fields[n_features + 2]))?;
        let hole: usize = fields[n_features + 3]
            .trim()
            .parse()
            .map_err(|_| bad("hole", fields[n_features + 3]))?;

        if sample == targets.len() && step == 0 {
            targets.push(target);
            holes.push(hole);
            if sample == 1 {
                timestep = inputs.len() / n_features;
            }
        } else if sample + 1 == targets.len() {
            if targets[sample] != target || holes[sample] != hole {
                return Err(Error::parse(
                    path,
                    line_no,
                    "target/hole differ within one sample",
                ));
            }
        } else {
            return Err(Error::parse(
                path,
                line_no,
                format!("unexpected sample {sample} step {step}"),
            ));
        }
        for fld in &fields[2..2 + n_features] {
            inputs.push(fld.trim().parse().map_err(|_| bad("feature", fld))?);
        }
    }
    let n_samples = targets.len();
    if n_samples == 0 {
        return Err(Error::parse(path, 1, "split holds no samples"));
    }
    if timestep == 0 {
        // Single-sample file: every row belongs to sample 0.
        timestep = inputs.len() / n_features;
    }
    let ds = WindowedDataset {
        inputs,
        targets,
        hole_of_sample: holes,
        n_samples,
        timestep,
        n_features,
        feature_names,
    };
    ds.validate()?;
    Ok(ds)
}

/// Writes `train.csv`, `val.csv`, `test.csv`, and `scaler.json` into `dir`.
pub fn export_dataset_dir(
    dir: &Path,
    train: &WindowedDataset,
    val: &WindowedDataset,
    test: &WindowedDataset,
    scaler: &ScalerParams,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    export_split(train, &dir.join("train.csv"))?;
    export_split(val, &dir.join("val.csv"))?;
    export_split(test, &dir.join("test.csv"))?;
    let path = dir.join("scaler.json");
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, scaler)
        .map_err(|e| Error::Dataset(format!("cannot encode scaler: {e}")))?;
    w.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
    w.flush().map_err(|e| Error::io(&path, e))
}

/// Loads a directory written by [`export_dataset_dir`].
pub fn load_dataset_dir(
    dir: &Path,
) -> Result<(WindowedDataset, WindowedDataset, WindowedDataset, ScalerParams)> {
    let train = load_split(&dir.join("train.csv"))?;
    let val = load_split(&dir.join("val.csv"))?;
    let test = load_split(&dir.join("test.csv"))?;
    let path = dir.join("scaler.json");
    let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
    let scaler: ScalerParams = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::Dataset(format!("cannot decode {}: {e}", path.display())))?;
    Ok((train, val, test, scaler))
}
