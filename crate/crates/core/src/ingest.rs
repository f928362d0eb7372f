//! Recording CSV loading and per-hole cutting-segment isolation.
//!
//! Raw recordings interleave cutting bursts with between-hole motion that
//! carries no wear information. This module loads the `sample_index,Im,Fz,Tz`
//! CSV written by the generator (plus its marker sidecar when present) and
//! isolates one [`CuttingSegment`] per hole, either by trusting the markers
//! or by detecting bursts with a relative short-window RMS threshold.
//!
//! Detected extents use the same `hole_index,start_sample,end_sample` schema
//! as the marker sidecar and can be exported with
//! [`crate::synthrig::export_markers`].

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::synthrig::{markers_sidecar_path, HoleMarker, RawRecording};

/// Default short-window length for burst detection (0.1 s at 500 Hz).
pub const DEFAULT_DETECT_WINDOW: usize = 50;
/// Default detection threshold as a fraction of the peak window RMS.
pub const DEFAULT_DETECT_RATIO: f64 = 0.25;

/// Samples recorded while one hole was being cut, all channels aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct CuttingSegment {
    pub hole_index: usize,
    pub im: Vec<f64>,
    pub fz: Vec<f64>,
    pub tz: Vec<f64>,
    pub sampling_rate_hz: f64,
}

impl CuttingSegment {
    pub fn len(&self) -> usize {
        self.im.len()
    }

    pub fn is_empty(&self) -> bool {
        self.im.is_empty()
    }

    fn validate(&self) -> Result<()> {
        if self.im.len() != self.fz.len() || self.im.len() != self.tz.len() {
            return Err(Error::Dimension(format!(
                "segment {} has ragged channels: Im={}, Fz={}, Tz={}",
                self.hole_index,
                self.im.len(),
                self.fz.len(),
                self.tz.len()
            )));
        }
        if self.im.len() < 2 {
            return Err(Error::Validation(format!(
                "segment {} has {} samples; at least 2 required",
                self.hole_index,
                self.im.len()
            )));
        }
        Ok(())
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).map_err(|e| Error::io(path, e))?,
    ))
}

fn parse_field<T: std::str::FromStr>(
    field: &str,
    what: &str,
    path: &Path,
    line: usize,
) -> Result<T> {
    field
        .trim()
        .parse::<T>()
        .map_err(|_| Error::parse(path, line, format!("invalid {what}: {field:?}")))
}

fn parse_finite(field: &str, what: &str, path: &Path, line: usize) -> Result<f64> {
    let v: f64 = parse_field(field, what, path, line)?;
    if !v.is_finite() {
        return Err(Error::parse(path, line, format!("non-finite {what}: {field:?}")));
    }
    Ok(v)
}

fn expect_header(actual: &str, expected: &str, path: &Path) -> Result<()> {
    if actual.trim_end() != expected {
        return Err(Error::parse(
            path,
            1,
            format!("expected header {expected:?}, found {actual:?}"),
        ));
    }
    Ok(())
}

/// Loads a `sample_index,Im,Fz,Tz` recording CSV.
///
/// The sampling rate is not stored in the CSV and must be supplied by the
/// caller's configuration. When the `*.markers.csv` sidecar exists next to
/// the file its markers are loaded and validated; otherwise the recording
/// carries no markers.
pub fn load_recording(path: &Path, sampling_rate_hz: f64) -> Result<RawRecording> {
    if sampling_rate_hz <= 0.0 || sampling_rate_hz.is_nan() {
        return Err(Error::Config(format!(
            "sampling_rate_hz must be > 0, got {sampling_rate_hz}"
        )));
    }
    let mut lines = open(path)?.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    expect_header(&header.map_err(|e| Error::io(path, e))?, "sample_index,Im,Fz,Tz", path)?;

    let mut im = Vec::new();
    let mut fz = Vec::new();
    let mut tz = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let mut next = |what: &str| {
            fields
                .next()
                .ok_or_else(|| Error::parse(path, line_no, format!("missing {what} field")))
        };
        let sample_index: usize = parse_field(next("sample_index")?, "sample_index", path, line_no)?;
        if sample_index != im.len() {
            return Err(Error::parse(
                path,
                line_no,
                format!("sample_index {} out of order, expected {}", sample_index, im.len()),
            ));
        }
        im.push(parse_finite(next("Im")?, "Im", path, line_no)?);
        fz.push(parse_finite(next("Fz")?, "Fz", path, line_no)?);
        tz.push(parse_finite(next("Tz")?, "Tz", path, line_no)?);
        if let Some(extra) = fields.next() {
            return Err(Error::parse(
                path,
                line_no,
                format!("unexpected extra field: {extra:?}"),
            ));
        }
    }

    let sidecar = markers_sidecar_path(path);
    let hole_markers = if sidecar.exists() {
        load_markers(&sidecar)?
    } else {
        Vec::new()
    };

    let rec = RawRecording {
        im,
        fz,
        tz,
        sampling_rate_hz,
        hole_markers,
    };
    rec.validate()?;
    Ok(rec)
}

/// Loads a `hole_index,start_sample,end_sample` marker CSV.
pub fn load_markers(path: &Path) -> Result<Vec<HoleMarker>> {
    let mut lines = open(path)?.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    expect_header(
        &header.map_err(|e| Error::io(path, e))?,
        "hole_index,start_sample,end_sample",
        path,
    )?;
    let mut out = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected 3 fields, found {}", fields.len()),
            ));
        }
        out.push(HoleMarker {
            hole_index: parse_field(fields[0], "hole_index", path, line_no)?,
            start_sample: parse_field(fields[1], "start_sample", path, line_no)?,
            end_sample: parse_field(fields[2], "end_sample", path, line_no)?,
        });
    }
    Ok(out)
}

fn slice_segment(rec: &RawRecording, m: &HoleMarker, hole_index: usize) -> Result<CuttingSegment> {
    let seg = CuttingSegment {
        hole_index,
        im: rec.im[m.start_sample..m.end_sample].to_vec(),
        fz: rec.fz[m.start_sample..m.end_sample].to_vec(),
        tz: rec.tz[m.start_sample..m.end_sample].to_vec(),
        sampling_rate_hz: rec.sampling_rate_hz,
    };
    seg.validate()?;
    Ok(seg)
}

/// Slices one segment per marker, ordered by `hole_index`.
///
/// Fails with a segmentation error when the recording carries no markers;
/// callers should fall back to [`segment_by_threshold`] in that case.
pub fn segment_by_markers(rec: &RawRecording) -> Result<Vec<CuttingSegment>> {
    rec.validate()?;
    if rec.hole_markers.is_empty() {
        return Err(Error::Segmentation(
            "recording has no hole markers; detect segments with segment_by_threshold".into(),
        ));
    }
    let mut markers = rec.hole_markers.clone();
    markers.sort_by_key(|m| m.hole_index);
    for pair in markers.windows(2) {
        if pair[0].hole_index == pair[1].hole_index {
            return Err(Error::Validation(format!(
                "duplicate hole_index {} in markers",
                pair[0].hole_index
            )));
        }
    }
    markers
        .iter()
        .map(|m| slice_segment(rec, m, m.hole_index))
        .collect()
}

/// Detects cutting extents on the thrust-force channel.
///
/// A trailing window RMS is computed for every sample; samples whose window
/// RMS exceeds `threshold_ratio` times the global maximum window RMS are
/// marked as cutting, and contiguous cutting runs shorter than
/// `window_samples` are dropped. The threshold is relative, so the result is
/// invariant under positive rescaling of the channel. An all-quiet recording
/// yields no extents.
pub fn detect_cutting_extents(
    rec: &RawRecording,
    window_samples: usize,
    threshold_ratio: f64,
) -> Result<Vec<HoleMarker>> {
    if window_samples < 1 {
        return Err(Error::Config("window_samples must be >= 1".into()));
    }
    if !(threshold_ratio > 0.0 && threshold_ratio < 1.0) {
        return Err(Error::Config(format!(
            "threshold_ratio must lie in (0, 1), got {threshold_ratio}"
        )));
    }
    rec.validate()?;
    let n = rec.len();
    if n == 0 {
        return Ok(Vec::new());
    }

    // Trailing window RMS via a prefix sum of squares; the window is
    // truncated at the start of the recording.
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0f64);
    for &x in &rec.fz {
        prefix.push(prefix.last().unwrap() + x * x);
    }
    let mut wrms = Vec::with_capacity(n);
    let mut max_wrms = 0.0f64;
    for i in 0..n {
        let k = window_samples.min(i + 1);
        let sum = (prefix[i + 1] - prefix[i + 1 - k]).max(0.0);
        let r = (sum / k as f64).sqrt();
        max_wrms = max_wrms.max(r);
        wrms.push(r);
    }
    if max_wrms == 0.0 {
        return Ok(Vec::new());
    }

    let threshold = threshold_ratio * max_wrms;
    let mut extents = Vec::new();
    let mut run_start: Option<usize> = None;
    // Runs one index past the end so a run still open at the last sample is
    // flushed: `get` returns None there, closing it like a quiet sample would.
    for i in 0..=n {
        let cutting = wrms.get(i).is_some_and(|&r| r > threshold);
        match (run_start, cutting) {
            (None, true) => run_start = Some(i),
            (Some(s), false) => {
                if i - s >= window_samples {
                    extents.push(HoleMarker {
                        hole_index: extents.len(),
                        start_sample: s,
                        end_sample: i,
                    });
                }
                run_start = None;
            }
            _ => {}
        }
    }
    Ok(extents)
}

/// Detects cutting bursts and slices one segment per detected run, numbered
/// in order of appearance.
pub fn segment_by_threshold(
    rec: &RawRecording,
    window_samples: usize,
    threshold_ratio: f64,
) -> Result<Vec<CuttingSegment>> {
    let extents = detect_cutting_extents(rec, window_samples, threshold_ratio)?;
    extents
        .iter()
        .map(|m| slice_segment(rec, m, m.hole_index))
        .collect()
}
