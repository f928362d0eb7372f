//! Densification of sparse wear measurements into a per-hole wear curve.
//!
//! Microscope wear readings exist only every few dozen holes; the predictor
//! needs a target for every hole. Interior holes between consecutive
//! measurements get a linear interpolant plus bounded seeded variation,
//! measured holes keep their exact values, and holes past the last
//! measurement extend it flat.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{self, stream};
use crate::synthrig::WearMeasurement;

/// A wear value for every hole, anchored bit-exactly at the measured holes.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedWearCurve {
    pub wear_um: Vec<f64>,
    pub anchor_indices: Vec<usize>,
}

impl QuantizedWearCurve {
    pub fn len(&self) -> usize {
        self.wear_um.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wear_um.is_empty()
    }

    pub fn is_anchor(&self, hole_index: usize) -> bool {
        self.anchor_indices.binary_search(&hole_index).is_ok()
    }
}

/// Expands measurements to one value per hole.
///
/// Interior holes between consecutive anchors `(a, b)` get the linear
/// interpolant plus a uniform variation in `[-jitter_um, +jitter_um]`,
/// clamped into `[min(a, b), max(a, b)]` and to `>= 0`; anchor holes keep
/// their measured values bit-exactly; holes after the last anchor repeat it.
/// The variation stream is a pure function of `seed`.
pub fn quantize(
    measurements: &[WearMeasurement],
    n_holes: usize,
    jitter_um: f64,
    seed: u64,
) -> Result<QuantizedWearCurve> {
    if measurements.len() < 2 {
        return Err(Error::Config(format!(
            "quantization needs at least 2 measurements, got {}",
            measurements.len()
        )));
    }
    if jitter_um < 0.0 || !jitter_um.is_finite() {
        return Err(Error::Config(format!(
            "jitter_um must be finite and >= 0, got {jitter_um}"
        )));
    }
    for pair in measurements.windows(2) {
        if pair[1].hole_index <= pair[0].hole_index {
            return Err(Error::Validation(format!(
                "measurements not sorted by hole_index: {} then {}",
                pair[0].hole_index, pair[1].hole_index
            )));
        }
    }
    for m in measurements {
        if m.wear_um < 0.0 || !m.wear_um.is_finite() {
            return Err(Error::Validation(format!(
                "measurement at hole {} has invalid wear {}",
                m.hole_index, m.wear_um
            )));
        }
    }
    if measurements[0].hole_index != 0 {
        return Err(Error::Validation(format!(
            "first measurement must be at hole 0, got hole {}",
            measurements[0].hole_index
        )));
    }
    let last = measurements.last().unwrap();
    if last.hole_index >= n_holes {
        return Err(Error::Validation(format!(
            "measurement at hole {} is outside the {}-hole campaign",
            last.hole_index, n_holes
        )));
    }

    let mut rng = rng::stream_rng(seed, stream::QUANTIZE);
    let mut wear = vec![0.0f64; n_holes];
    let mut anchors = Vec::with_capacity(measurements.len());

    for pair in measurements.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        wear[a.hole_index] = a.wear_um;
        let lo = a.wear_um.min(b.wear_um);
        let hi = a.wear_um.max(b.wear_um);
        let span = (b.hole_index - a.hole_index) as f64;
        for (off, w) in wear[a.hole_index + 1..b.hole_index].iter_mut().enumerate() {
            let t = (off + 1) as f64 / span;
            let base = a.wear_um + (b.wear_um - a.wear_um) * t;
            let jitter = if jitter_um > 0.0 {
                rng.random_range(-jitter_um..=jitter_um)
            } else {
                0.0
            };
            *w = (base + jitter).clamp(lo, hi).max(0.0);
        }
    }
    wear[last.hole_index] = last.wear_um;
    wear[last.hole_index + 1..].fill(last.wear_um);
    for m in measurements {
        anchors.push(m.hole_index);
    }

    Ok(QuantizedWearCurve {
        wear_um: wear,
        anchor_indices: anchors,
    })
}

/// Bounds-checked accessor.
pub fn wear_at(curve: &QuantizedWearCurve, hole_index: usize) -> Result<f64> {
    curve
        .wear_um
        .get(hole_index)
        .copied()
        .ok_or_else(|| {
            Error::Index(format!(
                "hole {} out of range for a {}-hole curve",
                hole_index,
                curve.len()
            ))
        })
}

/// Writes a curve as `hole_index,wear_um,is_anchor`.
pub fn export_curve(curve: &QuantizedWearCurve, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "hole_index,wear_um,is_anchor").map_err(|e| Error::io(path, e))?;
    for (h, v) in curve.wear_um.iter().enumerate() {
        let anchor = u8::from(curve.is_anchor(h));
        writeln!(w, "{h},{v},{anchor}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Loads a `hole_index,wear_um,is_anchor` curve CSV.
pub fn load_curve(path: &Path) -> Result<QuantizedWearCurve> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let header = header.map_err(|e| Error::io(path, e))?;
    if header.trim_end() != "hole_index,wear_um,is_anchor" {
        return Err(Error::parse(
            path,
            1,
            format!("expected header hole_index,wear_um,is_anchor, found {header:?}"),
        ));
    }
    let mut wear = Vec::new();
    let mut anchors = Vec::new();
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
        let hole: usize = fields[0].trim().parse().map_err(|_| {
            Error::parse(path, line_no, format!("invalid hole_index: {:?}", fields[0]))
        })?;
        if hole != wear.len() {
            return Err(Error::parse(
                path,
                line_no,
                format!("hole_index {} out of order, expected {}", hole, wear.len()),
            ));
        }
        let v: f64 = fields[1].trim().parse().map_err(|_| {
            Error::parse(path, line_no, format!("invalid wear_um: {:?}", fields[1]))
        })?;
        match fields[2].trim() {
            "0" => {}
            "1" => anchors.push(hole),
            other => {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("is_anchor must be 0 or 1, found {other:?}"),
                ))
            }
        }
        wear.push(v);
    }
    Ok(QuantizedWearCurve {
        wear_um: wear,
        anchor_indices: anchors,
    })
}

/// Loads a `hole_index,wear_um` measurement CSV.
pub fn load_measurements(path: &Path) -> Result<Vec<WearMeasurement>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let header = header.map_err(|e| Error::io(path, e))?;
    if header.trim_end() != "hole_index,wear_um" {
        return Err(Error::parse(
            path,
            1,
            format!("expected header hole_index,wear_um, found {header:?}"),
        ));
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected 2 fields, found {}", fields.len()),
            ));
        }
        out.push(WearMeasurement {
            hole_index: fields[0].trim().parse().map_err(|_| {
                Error::parse(path, line_no, format!("invalid hole_index: {:?}", fields[0]))
            })?,
            wear_um: fields[1].trim().parse().map_err(|_| {
                Error::parse(path, line_no, format!("invalid wear_um: {:?}", fields[1]))
            })?,
        });
    }
    Ok(out)
}
