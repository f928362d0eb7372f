//! Synthetic drilling-rig signal generator.
//!
//! Produces multi-channel recordings (spindle motor current `Im`, thrust
//! force `Fz`, cutting torque `Tz`) that mimic a drilling test campaign: a
//! sequence of cutting bursts separated by low-amplitude non-cutting gaps,
//! plus a ground-truth flank wear curve and sparse microscope-style wear
//! measurements. Everything is a pure function of configuration and seed.
//!
//! The signal model is deliberately minimal: per hole, each channel is a
//! wear-dependent DC offset, sinusoids at the spindle rotation frequency and
//! the flute-passing frequency, Gaussian white noise, and exponential
//! entry/exit transients. The real rig's electrical-noise and vibration
//! magnitudes are unknown, so the amplitude defaults here are assumptions;
//! every coefficient is a config field rather than a hidden constant.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, stream};

/// Amplitude model for one sensor channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelModel {
    /// DC amplitude during cutting at zero wear, in the channel's unit.
    pub base: f64,
    /// DC amplitude added per micrometer of flank wear.
    pub per_um: f64,
    /// Standard deviation of the white noise during cutting.
    pub noise_std: f64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        ChannelModel {
            base: 1.0,
            per_um: 0.0,
            noise_std: 0.0,
        }
    }
}

/// Shape and disturbance parameters of the synthetic signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignalModel {
    /// Spindle motor current channel (A).
    pub im: ChannelModel,
    /// Thrust force channel (N).
    pub fz: ChannelModel,
    /// Cutting torque channel (N·m).
    pub tz: ChannelModel,
    /// Amplitude of the spindle-frequency sinusoid, as a fraction of the
    /// channel's zero-wear base amplitude.
    pub spindle_harmonic_frac: f64,
    /// Amplitude of the flute-passing sinusoid, as a fraction of the
    /// channel base. Kept above `spindle_harmonic_frac` so the flute line
    /// dominates the cutting spectrum.
    pub flute_harmonic_frac: f64,
    /// Peak amplitude of the entry/exit transients, as a fraction of the
    /// channel base.
    pub transient_frac: f64,
    /// Decay time constant of the transients, seconds.
    pub transient_tau_s: f64,
    /// Length of the non-cutting gap between holes, seconds.
    pub gap_seconds: f64,
    /// Noise level in the gaps, as a fraction of each channel's cutting
    /// noise std.
    pub gap_noise_ratio: f64,
    /// Relative per-hole variation of the wear-curve increments (0 disables).
    pub curve_noise: f64,
}

impl Default for SignalModel {
    fn default() -> Self {
        SignalModel {
            im: ChannelModel {
                base: 4.0,
                per_um: 0.02,
                noise_std: 0.05,
            },
            fz: ChannelModel {
                base: 120.0,
                per_um: 1.2,
                noise_std: 2.0,
            },
            tz: ChannelModel {
                base: 2.0,
                per_um: 0.015,
                noise_std: 0.03,
            },
            spindle_harmonic_frac: 0.05,
            flute_harmonic_frac: 0.15,
            transient_frac: 0.5,
            transient_tau_s: 0.05,
            gap_seconds: 0.5,
            gap_noise_ratio: 0.1,
            curve_noise: 0.25,
        }
    }
}

/// Configuration of the synthetic drilling campaign.
///
/// The defaults reproduce the reference rig: 500 Hz sampling, 2400 rpm,
/// 400 mm/min feed through a 25 mm workpiece, 1901 holes, flank wear
/// measured every 48 holes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RigConfig {
    pub sampling_rate_hz: f64,
    pub spindle_speed_rpm: f64,
    pub feed_mm_per_min: f64,
    pub hole_depth_mm: f64,
    pub n_holes: usize,
    pub wear_measure_interval: usize,
    pub flutes: u32,
    pub seed: u64,
    pub signal: SignalModel,
}

impl Default for RigConfig {
    fn default() -> Self {
        RigConfig {
            sampling_rate_hz: 500.0,
            spindle_speed_rpm: 2400.0,
            feed_mm_per_min: 400.0,
            hole_depth_mm: 25.0,
            n_holes: 1901,
            wear_measure_interval: 48,
            flutes: 2,
            seed: 0,
            signal: SignalModel::default(),
        }
    }
}

impl RigConfig {
    /// Number of samples recorded while the tool is actually cutting one hole.
    ///
    /// With the defaults this is `round(25 / 400 * 60 * 500) = 1875`.
    pub fn cutting_samples_per_hole(&self) -> usize {
        (self.hole_depth_mm / self.feed_mm_per_min * 60.0 * self.sampling_rate_hz).round() as usize
    }

    /// Number of samples in each non-cutting gap.
    pub fn gap_samples(&self) -> usize {
        (self.signal.gap_seconds * self.sampling_rate_hz).round() as usize
    }

    /// Spindle rotation frequency in Hz.
    pub fn spindle_hz(&self) -> f64 {
        self.spindle_speed_rpm / 60.0
    }

    /// Flute-passing frequency in Hz.
    pub fn flute_hz(&self) -> f64 {
        f64::from(self.flutes) * self.spindle_hz()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sampling_rate_hz <= 0.0 || self.sampling_rate_hz.is_nan() {
            return Err(Error::Config(format!(
                "sampling_rate_hz must be > 0, got {}",
                self.sampling_rate_hz
            )));
        }
        if self.n_holes < 1 {
            return Err(Error::Config("n_holes must be >= 1".into()));
        }
        if self.wear_measure_interval < 1 {
            return Err(Error::Config("wear_measure_interval must be >= 1".into()));
        }
        if self.feed_mm_per_min <= 0.0
            || self.feed_mm_per_min.is_nan()
            || self.hole_depth_mm <= 0.0
            || self.hole_depth_mm.is_nan()
        {
            return Err(Error::Config(
                "feed_mm_per_min and hole_depth_mm must be > 0".into(),
            ));
        }
        if self.flutes == 0 {
            return Err(Error::Config("flutes must be >= 1".into()));
        }
        if self.cutting_samples_per_hole() < 2 {
            return Err(Error::Config(
                "cutting phase must span at least 2 samples".into(),
            ));
        }
        let s = &self.signal;
        for (name, v) in [
            ("spindle_harmonic_frac", s.spindle_harmonic_frac),
            ("flute_harmonic_frac", s.flute_harmonic_frac),
            ("transient_frac", s.transient_frac),
            ("gap_noise_ratio", s.gap_noise_ratio),
            ("curve_noise", s.curve_noise),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite and >= 0")));
            }
        }
        if s.transient_tau_s <= 0.0
            || s.transient_tau_s.is_nan()
            || s.gap_seconds < 0.0
            || s.gap_seconds.is_nan()
        {
            return Err(Error::Config(
                "transient_tau_s must be > 0 and gap_seconds >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Per-hole true flank wear in micrometers; non-decreasing by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthWearCurve {
    pub wear_um: Vec<f64>,
}

/// One microscope-style wear measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WearMeasurement {
    pub hole_index: usize,
    pub wear_um: f64,
}

/// Location of one hole's cutting phase within a recording, `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoleMarker {
    pub hole_index: usize,
    pub start_sample: usize,
    pub end_sample: usize,
}

/// A multi-channel raw recording spanning many holes and the gaps between
/// them.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecording {
    pub im: Vec<f64>,
    pub fz: Vec<f64>,
    pub tz: Vec<f64>,
    pub sampling_rate_hz: f64,
    pub hole_markers: Vec<HoleMarker>,
}

impl RawRecording {
    pub fn len(&self) -> usize {
        self.im.len()
    }

    pub fn is_empty(&self) -> bool {
        self.im.is_empty()
    }

    /// Checks the structural invariants: equal channel lengths and disjoint,
    /// strictly increasing, in-bounds markers.
    pub fn validate(&self) -> Result<()> {
        if self.im.len() != self.fz.len() || self.im.len() != self.tz.len() {
            return Err(Error::Dimension(format!(
                "channel lengths differ: Im={}, Fz={}, Tz={}",
                self.im.len(),
                self.fz.len(),
                self.tz.len()
            )));
        }
        let mut prev_end = 0usize;
        for (i, m) in self.hole_markers.iter().enumerate() {
            if m.start_sample >= m.end_sample {
                return Err(Error::Validation(format!(
                    "marker {} is empty or inverted: [{}, {})",
                    i, m.start_sample, m.end_sample
                )));
            }
            if i > 0 && m.start_sample < prev_end {
                return Err(Error::Validation(format!(
                    "marker {} overlaps its predecessor (start {} < previous end {})",
                    i, m.start_sample, prev_end
                )));
            }
            if m.end_sample > self.len() {
                return Err(Error::Validation(format!(
                    "marker {} ends at {} beyond recording length {}",
                    i,
                    m.end_sample,
                    self.len()
                )));
            }
            prev_end = m.end_sample;
        }
        Ok(())
    }
}

/// Generates the ground-truth wear curve: rapid initial wear, a near-linear
/// steady phase, and an accelerating final phase, with seeded per-hole
/// increment variation that keeps the curve non-decreasing.
pub fn generate_wear_curve(cfg: &RigConfig) -> Result<GroundTruthWearCurve> {
    cfg.validate()?;
    let n = cfg.n_holes;

    // Three-phase parametric base curve over x in [0, 1].
    let base = |x: f64| -> f64 {
        let w0 = 5.0;
        let initial = 35.0 * (1.0 - (-x / 0.06).exp());
        let steady = 80.0 * x;
        let accel = 45.0 * (((x - 1.0) / 0.10).exp() - (-1.0f64 / 0.10).exp());
        w0 + initial + steady + accel
    };

    let mut rng = rng::stream_rng(cfg.seed, stream::WEAR_CURVE);
    let normal = Normal::new(0.0, 1.0).map_err(|e| Error::Internal(e.to_string()))?;

    let span = if n > 1 { (n - 1) as f64 } else { 1.0 };
    let mut wear = Vec::with_capacity(n);
    wear.push(base(0.0));
    for h in 1..n {
        let x0 = (h - 1) as f64 / span;
        let x1 = h as f64 / span;
        let incr = base(x1) - base(x0);
        let factor = if cfg.signal.curve_noise > 0.0 {
            (1.0 + cfg.signal.curve_noise * normal.sample(&mut rng)).max(0.0)
        } else {
            1.0
        };
        let prev = *wear.last().unwrap();
        wear.push(prev + incr * factor);
    }
    Ok(GroundTruthWearCurve { wear_um: wear })
}

/// Renders the wear curve into a raw multi-channel recording.
///
/// Layout: a leading gap, then for each hole a cutting burst followed by a
/// gap. `hole_markers` record the true cutting extents `[start, end)`.
pub fn synthesize_recording(cfg: &RigConfig, wear: &GroundTruthWearCurve) -> Result<RawRecording> {
    cfg.validate()?;
    if wear.wear_um.len() != cfg.n_holes {
        return Err(Error::Dimension(format!(
            "wear curve has {} values but config declares {} holes",
            wear.wear_um.len(),
            cfg.n_holes
        )));
    }

    let burst = cfg.cutting_samples_per_hole();
    let gap = cfg.gap_samples();
    let total = gap + cfg.n_holes * (burst + gap);
    let fs = cfg.sampling_rate_hz;
    let s = &cfg.signal;

    let mut im = Vec::with_capacity(total);
    let mut fz = Vec::with_capacity(total);
    let mut tz = Vec::with_capacity(total);
    let mut markers = Vec::with_capacity(cfg.n_holes);

    let mut rng = rng::stream_rng(cfg.seed, stream::RECORDING);
    let normal = Normal::new(0.0, 1.0).map_err(|e| Error::Internal(e.to_string()))?;

    let channels = [s.im, s.fz, s.tz];
    let spindle_w = 2.0 * std::f64::consts::PI * cfg.spindle_hz();
    let flute_w = 2.0 * std::f64::consts::PI * cfg.flute_hz();
    let tau = s.transient_tau_s;

    let push_gap = |im: &mut Vec<f64>, fz: &mut Vec<f64>, tz: &mut Vec<f64>,
                        rng: &mut rand_chacha::ChaCha8Rng| {
        for _ in 0..gap {
            let mut v = [0.0f64; 3];
            for (c, ch) in channels.iter().enumerate() {
                let std = ch.noise_std * s.gap_noise_ratio;
                v[c] = if std > 0.0 {
                    std * normal.sample(rng)
                } else {
                    0.0
                };
            }
            im.push(v[0]);
            fz.push(v[1]);
            tz.push(v[2]);
        }
    };

    push_gap(&mut im, &mut fz, &mut tz, &mut rng);
    for (hole, &w) in wear.wear_um.iter().enumerate() {
        let start = im.len();
        for i in 0..burst {
            let t = i as f64 / fs;
            // Shared unit-amplitude waveform; scaled per channel below.
            let harmonics = s.spindle_harmonic_frac * (spindle_w * t).sin()
                + s.flute_harmonic_frac * (flute_w * t).sin();
            let transient = s.transient_frac
                * ((-(i as f64) / (tau * fs)).exp() + (-((burst - 1 - i) as f64) / (tau * fs)).exp());
            let mut v = [0.0f64; 3];
            for (c, ch) in channels.iter().enumerate() {
                let dc = ch.base + ch.per_um * w;
                let mut x = dc + ch.base * (harmonics + transient);
                if ch.noise_std > 0.0 {
                    x += ch.noise_std * normal.sample(&mut rng);
                }
                v[c] = x;
            }
            im.push(v[0]);
            fz.push(v[1]);
            tz.push(v[2]);
        }
        markers.push(HoleMarker {
            hole_index: hole,
            start_sample: start,
            end_sample: im.len(),
        });
        push_gap(&mut im, &mut fz, &mut tz, &mut rng);
    }

    let rec = RawRecording {
        im,
        fz,
        tz,
        sampling_rate_hz: fs,
        hole_markers: markers,
    };
    rec.validate()?;
    Ok(rec)
}

/// Samples sparse wear measurements from the true curve: one per interval
/// boundary (holes `0, k, 2k, ...`), each the true wear plus seeded zero-mean
/// Gaussian noise clamped non-negative. Holes past the last boundary are
/// always within one interval of it and receive their values through the
/// quantizer's flat extrapolation, so no extra final-hole measurement is
/// taken. The default campaign (1901 holes, interval 48) yields 40
/// measurements at holes 0..=1872.
pub fn sample_wear_measurements(
    wear: &GroundTruthWearCurve,
    interval: usize,
    noise_um: f64,
    seed: u64,
) -> Result<Vec<WearMeasurement>> {
    if interval < 1 {
        return Err(Error::Config("measurement interval must be >= 1".into()));
    }
    if noise_um < 0.0 || noise_um.is_nan() {
        return Err(Error::Config("noise_um must be >= 0".into()));
    }
    let mut rng = rng::stream_rng(seed, stream::MEASUREMENT);
    let normal = Normal::new(0.0, 1.0).map_err(|e| Error::Internal(e.to_string()))?;
    let mut out = Vec::new();
    for hole in (0..wear.wear_um.len()).step_by(interval) {
        let noise = if noise_um > 0.0 {
            noise_um * normal.sample(&mut rng)
        } else {
            0.0
        };
        out.push(WearMeasurement {
            hole_index: hole,
            wear_um: (wear.wear_um[hole] + noise).max(0.0),
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// CSV export
// ---------------------------------------------------------------------------

/// Path of the hole-marker sidecar for a recording CSV:
/// `recording.csv` -> `recording.markers.csv`.
pub fn markers_sidecar_path(recording: &Path) -> PathBuf {
    let stem = recording
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    recording.with_file_name(format!("{stem}.markers.csv"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

/// Writes a recording as `sample_index,Im,Fz,Tz` plus, when the recording
/// carries markers, the `hole_index,start_sample,end_sample` sidecar.
/// Numeric fields use the shortest decimal text that round-trips the exact
/// double value.
pub fn export_recording(rec: &RawRecording, path: &Path) -> Result<()> {
    rec.validate()?;
    let mut w = create(path)?;
    writeln!(w, "sample_index,Im,Fz,Tz").map_err(|e| Error::io(path, e))?;
    for i in 0..rec.len() {
        writeln!(w, "{},{},{},{}", i, rec.im[i], rec.fz[i], rec.tz[i])
            .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    if !rec.hole_markers.is_empty() {
        export_markers(&rec.hole_markers, &markers_sidecar_path(path))?;
    }
    Ok(())
}

/// Writes hole markers (or detected segment extents) as
/// `hole_index,start_sample,end_sample`.
pub fn export_markers(markers: &[HoleMarker], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "hole_index,start_sample,end_sample").map_err(|e| Error::io(path, e))?;
    for m in markers {
        writeln!(w, "{},{},{}", m.hole_index, m.start_sample, m.end_sample)
            .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes wear measurements as `hole_index,wear_um`.
pub fn export_measurements(measurements: &[WearMeasurement], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "hole_index,wear_um").map_err(|e| Error::io(path, e))?;
    for m in measurements {
        writeln!(w, "{},{}", m.hole_index, m.wear_um).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
