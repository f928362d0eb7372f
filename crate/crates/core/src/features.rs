//! Per-hole statistical features, moving-average smoothing, and
//! trend-sensitivity-based feature selection.
//!
//! Each cutting segment yields, per channel, the root mean square, the
//! population standard deviation, and the band-limited spectral power,
//! giving 9 columns per hole in a fixed order. The spectral-power columns
//! are flat with respect to wear in this setup and are dropped by default,
//! leaving the 6 columns the predictor trains on.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::CuttingSegment;

/// The 9 feature column labels in extraction order.
pub const FEATURE_LABELS: [&str; 9] = [
    "Im_RMS", "Im_STD", "Im_SPW", "Fz_RMS", "Fz_STD", "Fz_SPW", "Tz_RMS", "Tz_STD", "Tz_SPW",
];

/// The spectral-power columns dropped by the default feature selection.
pub const SPW_LABELS: [&str; 3] = ["Im_SPW", "Fz_SPW", "Tz_SPW"];

/// Frequency band over which spectral power is accumulated, `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralBand {
    pub omega_start_hz: f64,
    pub omega_end_hz: f64,
}

impl Default for SpectralBand {
    fn default() -> Self {
        // Skips the DC/near-DC trend; reaches the Nyquist bin at 500 Hz.
        SpectralBand {
            omega_start_hz: 10.0,
            omega_end_hz: 250.0,
        }
    }
}

impl SpectralBand {
    /// Configuration-level validation: the band must sit below Nyquist.
    pub fn validate_for(&self, sampling_rate_hz: f64) -> Result<()> {
        if !(self.omega_start_hz >= 0.0 && self.omega_start_hz < self.omega_end_hz) {
            return Err(Error::Config(format!(
                "spectral band requires 0 <= start < end, got [{}, {})",
                self.omega_start_hz, self.omega_end_hz
            )));
        }
        let nyquist = sampling_rate_hz / 2.0;
        if self.omega_end_hz > nyquist || nyquist.is_nan() {
            return Err(Error::Config(format!(
                "spectral band end {} Hz exceeds Nyquist {nyquist} Hz",
                self.omega_end_hz
            )));
        }
        Ok(())
    }
}

/// One hole's feature values, aligned with a label list.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub hole_index: usize,
    pub values: Vec<f64>,
}

/// A rectangular per-hole feature table with labeled columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: Vec<FeatureRow>,
    pub column_names: Vec<String>,
    pub smoothed: bool,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn column_index(&self, label: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == label)
    }

    /// Copies one column by label.
    pub fn column(&self, label: &str) -> Result<Vec<f64>> {
        let idx = self
            .column_index(label)
            .ok_or_else(|| Error::Config(format!("unknown feature column {label:?}")))?;
        Ok(self.rows.iter().map(|r| r.values[idx]).collect())
    }

    /// Checks rectangularity and strictly increasing hole order.
    pub fn validate(&self) -> Result<()> {
        for row in &self.rows {
            if row.values.len() != self.column_names.len() {
                return Err(Error::Dimension(format!(
                    "row for hole {} has {} values, expected {}",
                    row.hole_index,
                    row.values.len(),
                    self.column_names.len()
                )));
            }
        }
        for pair in self.rows.windows(2) {
            if pair[1].hole_index <= pair[0].hole_index {
                return Err(Error::Validation(format!(
                    "hole_index not strictly increasing at {} -> {}",
                    pair[0].hole_index, pair[1].hole_index
                )));
            }
        }
        Ok(())
    }
}

/// Root mean square, `sqrt(mean(y^2))`.
pub fn rms(y: &[f64]) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::Dimension("rms of an empty sequence".into()));
    }
    let sum_sq: f64 = y.iter().map(|&x| x * x).sum();
    Ok((sum_sq / y.len() as f64).sqrt())
}

/// Population standard deviation (divisor N), `sqrt(mean((y - mean)^2))`.
pub fn std(y: &[f64]) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::Dimension("std of an empty sequence".into()));
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n;
    Ok(var.sqrt())
}

fn check_band_for_op(band: &SpectralBand, fs: f64) -> Result<()> {
    if fs <= 0.0 || fs.is_nan() {
        return Err(Error::Config(format!("sampling rate must be > 0, got {fs}")));
    }
    if !(band.omega_start_hz >= 0.0 && band.omega_start_hz < band.omega_end_hz) {
        return Err(Error::Domain(format!(
            "spectral band requires 0 <= start < end, got [{}, {})",
            band.omega_start_hz, band.omega_end_hz
        )));
    }
    // Bands reaching past Nyquist up to the full sampling rate are allowed
    // here so conservation checks can cover every bin; configs are held to
    // the stricter sub-Nyquist rule by SpectralBand::validate_for.
    if band.omega_end_hz > fs {
        return Err(Error::Domain(format!(
            "spectral band end {} Hz exceeds sampling rate {} Hz",
            band.omega_end_hz, fs
        )));
    }
    Ok(())
}

fn band_power_of_spectrum(spectrum: &[Complex<f64>], band: &SpectralBand, fs: f64) -> f64 {
    let n = spectrum.len() as f64;
    let mut acc = 0.0;
    for (k, c) in spectrum.iter().enumerate() {
        let freq = k as f64 * fs / n;
        if freq >= band.omega_start_hz && freq < band.omega_end_hz {
            acc += c.norm_sqr();
        }
    }
    0.5 * acc
}

fn band_power_with(fft: &Arc<dyn Fft<f64>>, y: &[f64], band: &SpectralBand, fs: f64) -> f64 {
    let mut buf: Vec<Complex<f64>> = y.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fft.process(&mut buf);
    band_power_of_spectrum(&buf, band, fs)
}

/// Band-limited spectral power, `0.5 * sum(|Y(k)|^2)` over the bins whose
/// frequency `k*fs/N` lies in `[omega_start, omega_end)`.
///
/// `Y` is the unnormalized forward transform `Y(k) = sum_n y_n e^(-j2πkn/N)`,
/// so the full-range band `[0, fs)` satisfies `sum |Y(k)|^2 = N * sum y^2`.
pub fn spectral_power(y: &[f64], band: &SpectralBand, fs: f64) -> Result<f64> {
    if y.len() < 2 {
        return Err(Error::Dimension(format!(
            "spectral power needs at least 2 samples, got {}",
            y.len()
        )));
    }
    check_band_for_op(band, fs)?;
    let fft = FftPlanner::new().plan_fft_forward(y.len());
    Ok(band_power_with(&fft, y, band, fs))
}

/// Computes the 9 features per segment, rows in hole order.
pub fn extract_features(segments: &[CuttingSegment], band: &SpectralBand) -> Result<FeatureMatrix> {
    if segments.is_empty() {
        return Err(Error::Dimension("no segments to extract features from".into()));
    }
    let mut planner = FftPlanner::new();
    let mut rows = Vec::with_capacity(segments.len());
    for seg in segments {
        let attach = |e: Error| match e {
            Error::Dimension(m) => Error::Dimension(format!("hole {}: {m}", seg.hole_index)),
            Error::Domain(m) => Error::Domain(format!("hole {}: {m}", seg.hole_index)),
            other => other,
        };
        if seg.len() < 2 {
            return Err(Error::Dimension(format!(
                "hole {}: segment has {} samples; at least 2 required",
                seg.hole_index,
                seg.len()
            )));
        }
        check_band_for_op(band, seg.sampling_rate_hz).map_err(attach)?;
        let fft = planner.plan_fft_forward(seg.len());
        let mut values = Vec::with_capacity(9);
        for channel in [&seg.im, &seg.fz, &seg.tz] {
            values.push(rms(channel).map_err(attach)?);
            values.push(std(channel).map_err(attach)?);
            values.push(band_power_with(&fft, channel, band, seg.sampling_rate_hz));
        }
        rows.push(FeatureRow {
            hole_index: seg.hole_index,
            values,
        });
    }
    let m = FeatureMatrix {
        rows,
        column_names: FEATURE_LABELS.iter().map(|s| s.to_string()).collect(),
        smoothed: false,
    };
    m.validate()?;
    Ok(m)
}

/// Trailing (causal) moving average per column; the window is truncated at
/// the start, so the row count is unchanged.
pub fn moving_average(m: &FeatureMatrix, window: usize) -> Result<FeatureMatrix> {
    m.validate()?;
    if window < 1 {
        return Err(Error::Config("moving-average window must be >= 1".into()));
    }
    if window > m.n_rows() {
        return Err(Error::Dimension(format!(
            "moving-average window {} exceeds row count {}",
            window,
            m.n_rows()
        )));
    }
    let n = m.n_rows();
    let cols = m.n_cols();
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let lo = (i + 1).saturating_sub(window);
        let k = (i + 1 - lo) as f64;
        let mut values = Vec::with_capacity(cols);
        for c in 0..cols {
            let sum: f64 = m.rows[lo..=i].iter().map(|r| r.values[c]).sum();
            values.push(sum / k);
        }
        rows.push(FeatureRow {
            hole_index: m.rows[i].hole_index,
            values,
        });
    }
    Ok(FeatureMatrix {
        rows,
        column_names: m.column_names.clone(),
        smoothed: true,
    })
}

/// Drops the named columns, preserving the order of the remainder.
pub fn select_features(m: &FeatureMatrix, drop: &[&str]) -> Result<FeatureMatrix> {
    m.validate()?;
    for label in drop {
        if m.column_index(label).is_none() {
            return Err(Error::Config(format!(
                "cannot drop unknown feature column {label:?}"
            )));
        }
    }
    let keep: Vec<usize> = (0..m.n_cols())
        .filter(|&c| !drop.contains(&m.column_names[c].as_str()))
        .collect();
    let rows = m
        .rows
        .iter()
        .map(|r| FeatureRow {
            hole_index: r.hole_index,
            values: keep.iter().map(|&c| r.values[c]).collect(),
        })
        .collect();
    Ok(FeatureMatrix {
        rows,
        column_names: keep.iter().map(|&c| m.column_names[c].clone()).collect(),
        smoothed: m.smoothed,
    })
}

/// Absolute Pearson correlation between a feature column and the wear curve;
/// a zero-variance input yields 0 with a logged warning.
pub fn trend_sensitivity(column: &[f64], wear: &[f64]) -> Result<f64> {
    if column.len() != wear.len() {
        return Err(Error::Dimension(format!(
            "length mismatch: column {} vs wear {}",
            column.len(),
            wear.len()
        )));
    }
    if column.len() < 3 {
        return Err(Error::Dimension(format!(
            "trend sensitivity needs at least 3 points, got {}",
            column.len()
        )));
    }
    let n = column.len() as f64;
    let mx = column.iter().sum::<f64>() / n;
    let my = wear.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in column.iter().zip(wear) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        log::warn!("trend sensitivity of a zero-variance input, reporting 0");
        return Ok(0.0);
    }
    Ok((sxy / (sxx * syy).sqrt()).abs())
}

// ---------------------------------------------------------------------------
// CSV export / load
// ---------------------------------------------------------------------------

/// Writes a feature matrix as `hole_index,<labels...>` with full-precision
/// decimals.
pub fn export_features(m: &FeatureMatrix, path: &Path) -> Result<()> {
    m.validate()?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "hole_index,{}", m.column_names.join(",")).map_err(|e| Error::io(path, e))?;
    for row in &m.rows {
        write!(w, "{}", row.hole_index).map_err(|e| Error::io(path, e))?;
        for v in &row.values {
            write!(w, ",{v}").map_err(|e| Error::io(path, e))?;
        }
        writeln!(w).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Loads a feature matrix; column labels come from the header. The smoothed
/// flag is not stored in the CSV (the CLI encodes it in the filename), so the
/// caller supplies it.
pub fn load_features(path: &Path, smoothed: bool) -> Result<FeatureMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let header = header.map_err(|e| Error::io(path, e))?;
    let mut cols = header.trim_end().split(',');
    if cols.next() != Some("hole_index") {
        return Err(Error::parse(path, 1, "first column must be hole_index"));
    }
    let column_names: Vec<String> = cols.map(|s| s.to_string()).collect();
    if column_names.is_empty() {
        return Err(Error::parse(path, 1, "no feature columns in header"));
    }

    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != column_names.len() + 1 {
            return Err(Error::parse(
                path,
                line_no,
                format!(
                    "expected {} fields, found {}",
                    column_names.len() + 1,
                    fields.len()
                ),
            ));
        }
        let hole_index: usize = fields[0].trim().parse().map_err(|_| {
            Error::parse(path, line_no, format!("invalid hole_index: {:?}", fields[0]))
        })?;
        let mut values = Vec::with_capacity(column_names.len());
        for f in &fields[1..] {
            let v: f64 = f.trim().parse().map_err(|_| {
                Error::parse(path, line_no, format!("invalid feature value: {f:?}"))
            })?;
            values.push(v);
        }
        rows.push(FeatureRow { hole_index, values });
    }
    let m = FeatureMatrix {
        rows,
        column_names,
        smoothed,
    };
    m.validate()?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    /// Brute-force DFT magnitude-squared at one bin, used as the oracle for
    /// the transform-backed implementation.
    fn dft_bin_power(y: &[f64], k: usize) -> f64 {
        let n = y.len() as f64;
        let mut re = 0.0;
        let mut im = 0.0;
        for (i, &x) in y.iter().enumerate() {
            let phi = -2.0 * std::f64::consts::PI * (k as f64) * (i as f64) / n;
            re += x * phi.cos();
            im += x * phi.sin();
        }
        re * re + im * im
    }

    fn oracle_band_power(y: &[f64], band: &SpectralBand, fs: f64) -> f64 {
        let n = y.len() as f64;
        let mut acc = 0.0;
        for k in 0..y.len() {
            let freq = k as f64 * fs / n;
            if freq >= band.omega_start_hz && freq < band.omega_end_hz {
                acc += dft_bin_power(y, k);
            }
        }
        0.5 * acc
    }

    fn full_band(fs: f64) -> SpectralBand {
        SpectralBand {
            omega_start_hz: 0.0,
            omega_end_hz: fs,
        }
    }

    fn random_signal(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = crate::rng::seeded_rng(seed);
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn segment_from(im: Vec<f64>, fz: Vec<f64>, tz: Vec<f64>) -> CuttingSegment {
        CuttingSegment {
            hole_index: 0,
            im,
            fz,
            tz,
            sampling_rate_hz: 500.0,
        }
    }

    #[test]
    fn rms_of_constant_is_magnitude() {
        assert_eq!(rms(&[-2.5; 17]).unwrap(), 2.5);
    }

    #[test]
    fn rms_pinned_value() {
        let v = rms(&[3.0, -4.0]).unwrap();
        assert!((v - 3.5355339059327378).abs() < 1e-15);
        assert_eq!(v, (12.5f64).sqrt());
    }

    #[test]
    fn rms_empty_rejected() {
        assert!(matches!(rms(&[]), Err(Error::Dimension(_))));
    }

    #[test]
    fn std_of_constant_is_zero() {
        assert_eq!(std(&[7.25; 9]).unwrap(), 0.0);
    }

    #[test]
    fn std_pinned_value() {
        assert_eq!(std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]).unwrap(), 2.0);
    }

    #[test]
    fn spectral_power_of_zero_signal() {
        assert_eq!(
            spectral_power(&[0.0; 64], &SpectralBand::default(), 500.0).unwrap(),
            0.0
        );
    }

    #[test]
    fn spectral_power_impulse_half_band() {
        let band = SpectralBand {
            omega_start_hz: 0.0,
            omega_end_hz: 2.0,
        };
        assert_eq!(spectral_power(&[1.0, 0.0, 0.0, 0.0], &band, 4.0).unwrap(), 1.0);
    }

    #[test]
    fn spectral_power_matches_oracle() {
        for (i, &len) in [2usize, 3, 16, 37, 128, 255].iter().enumerate() {
            let y = random_signal(len, 100 + i as u64);
            for band in [
                full_band(500.0),
                SpectralBand::default(),
                SpectralBand {
                    omega_start_hz: 40.0,
                    omega_end_hz: 120.0,
                },
            ] {
                let ours = spectral_power(&y, &band, 500.0).unwrap();
                let oracle = oracle_band_power(&y, &band, 500.0);
                let scale = oracle.abs().max(1.0);
                assert!(
                    (ours - oracle).abs() / scale < 1e-9,
                    "len {len}, band [{}, {}): {ours} vs {oracle}",
                    band.omega_start_hz,
                    band.omega_end_hz
                );
            }
        }
    }

    #[test]
    fn spectral_power_band_validation() {
        let y = [1.0, 2.0, 3.0];
        let bad = SpectralBand {
            omega_start_hz: 100.0,
            omega_end_hz: 600.0,
        };
        assert!(matches!(
            spectral_power(&y, &bad, 500.0),
            Err(Error::Domain(_))
        ));
        let inverted = SpectralBand {
            omega_start_hz: 10.0,
            omega_end_hz: 5.0,
        };
        assert!(matches!(
            spectral_power(&y, &inverted, 500.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn band_type_invariant_is_sub_nyquist() {
        assert!(full_band(500.0).validate_for(500.0).is_err());
        assert!(SpectralBand::default().validate_for(500.0).is_ok());
        assert!(SpectralBand::default().validate_for(400.0).is_err());
    }

    #[test]
    fn extraction_shape_and_composition() {
        let im = random_signal(40, 1);
        let fz = random_signal(40, 2);
        let tz = random_signal(40, 3);
        let seg = segment_from(im.clone(), fz.clone(), tz.clone());
        let band = SpectralBand::default();
        let m = extract_features(std::slice::from_ref(&seg), &band).unwrap();
        assert_eq!(m.n_rows(), 1);
        assert_eq!(m.n_cols(), 9);
        assert_eq!(m.column_names, FEATURE_LABELS.to_vec());
        let row = &m.rows[0].values;
        assert_eq!(row[0], rms(&im).unwrap());
        assert_eq!(row[1], std(&im).unwrap());
        assert_eq!(row[2], spectral_power(&im, &band, 500.0).unwrap());
        assert_eq!(row[3], rms(&fz).unwrap());
        assert_eq!(row[5], spectral_power(&fz, &band, 500.0).unwrap());
        assert_eq!(row[6], rms(&tz).unwrap());
        assert_eq!(row[8], spectral_power(&tz, &band, 500.0).unwrap());
    }

    #[test]
    fn extraction_rejects_empty_input() {
        assert!(matches!(
            extract_features(&[], &SpectralBand::default()),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn moving_average_window_one_is_identity() {
        let seg = segment_from(random_signal(10, 4), random_signal(10, 5), random_signal(10, 6));
        let m = extract_features(&[seg], &SpectralBand::default()).unwrap();
        let out = moving_average(&m, 1).unwrap();
        assert_eq!(out.rows, m.rows);
        assert!(out.smoothed);
    }

    #[test]
    fn moving_average_constant_column_unchanged() {
        let rows = (0..30)
            .map(|i| FeatureRow {
                hole_index: i,
                values: vec![3.75],
            })
            .collect();
        let m = FeatureMatrix {
            rows,
            column_names: vec!["Fz_RMS".into()],
            smoothed: false,
        };
        let out = moving_average(&m, 7).unwrap();
        for r in &out.rows {
            assert_eq!(r.values[0], 3.75);
        }
    }

    #[test]
    fn moving_average_matches_slice_oracle() {
        let n = 300;
        let mut rng = crate::rng::seeded_rng(9);
        let rows: Vec<FeatureRow> = (0..n)
            .map(|i| FeatureRow {
                hole_index: i,
                values: (0..4).map(|_| rng.random_range(-10.0..300.0)).collect(),
            })
            .collect();
        let m = FeatureMatrix {
            rows,
            column_names: vec!["a".into(), "b".into(), "c".into(), "d".into()],
            smoothed: false,
        };
        let window = 200;
        let out = moving_average(&m, window).unwrap();
        for i in 0..n {
            let lo = (i + 1).saturating_sub(window);
            for c in 0..4 {
                let slice: Vec<f64> = m.rows[lo..=i].iter().map(|r| r.values[c]).collect();
                let mean = slice.iter().sum::<f64>() / slice.len() as f64;
                let got = out.rows[i].values[c];
                assert!(
                    (got - mean).abs() <= 1e-12 * mean.abs().max(1.0),
                    "row {i} col {c}: {got} vs {mean}"
                );
            }
        }
    }

    #[test]
    fn moving_average_commutes_with_scaling() {
        let seg = segment_from(random_signal(25, 7), random_signal(25, 8), random_signal(25, 9));
        let segs: Vec<CuttingSegment> = (0..25)
            .map(|i| CuttingSegment {
                hole_index: i,
                ..seg.clone()
            })
            .collect();
        let m = extract_features(&segs, &SpectralBand::default()).unwrap();
        let mut scaled = m.clone();
        for r in scaled.rows.iter_mut() {
            for v in r.values.iter_mut() {
                *v *= 4.0;
            }
        }
        let a = moving_average(&m, 6).unwrap();
        let b = moving_average(&scaled, 6).unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            for (va, vb) in ra.values.iter().zip(&rb.values) {
                assert_eq!(va * 4.0, *vb);
            }
        }
    }

    #[test]
    fn moving_average_window_larger_than_rows_rejected() {
        let m = FeatureMatrix {
            rows: vec![FeatureRow {
                hole_index: 0,
                values: vec![1.0],
            }],
            column_names: vec!["a".into()],
            smoothed: false,
        };
        assert!(matches!(moving_average(&m, 2), Err(Error::Dimension(_))));
    }

    #[test]
    fn select_drop_nothing_is_identity() {
        let seg = segment_from(random_signal(12, 10), random_signal(12, 11), random_signal(12, 12));
        let m = extract_features(&[seg], &SpectralBand::default()).unwrap();
        assert_eq!(select_features(&m, &[]).unwrap(), m);
    }

    #[test]
    fn select_drops_spw_columns() {
        let seg = segment_from(random_signal(12, 13), random_signal(12, 14), random_signal(12, 15));
        let m = extract_features(&[seg], &SpectralBand::default()).unwrap();
        let out = select_features(&m, &SPW_LABELS).unwrap();
        assert_eq!(
            out.column_names,
            vec!["Im_RMS", "Im_STD", "Fz_RMS", "Fz_STD", "Tz_RMS", "Tz_STD"]
        );
        assert_eq!(out.rows[0].values.len(), 6);
        assert_eq!(out.rows[0].values[0], m.rows[0].values[0]);
        assert_eq!(out.rows[0].values[2], m.rows[0].values[3]);
        assert_eq!(out.rows[0].values[5], m.rows[0].values[7]);
        // The labels are gone now, so dropping again must fail.
        assert!(matches!(
            select_features(&out, &SPW_LABELS),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn trend_sensitivity_pinned_cases() {
        let wear: Vec<f64> = (0..50).map(|i| 5.0 + 0.3 * i as f64).collect();
        let identity = trend_sensitivity(&wear, &wear).unwrap();
        assert!((identity - 1.0).abs() < 1e-12);
        let negated: Vec<f64> = wear.iter().map(|w| -w).collect();
        let inv = trend_sensitivity(&negated, &wear).unwrap();
        assert!((inv - 1.0).abs() < 1e-12);
        let flat = vec![2.0; 50];
        assert_eq!(trend_sensitivity(&flat, &wear).unwrap(), 0.0);
    }

    #[test]
    fn features_csv_round_trip() {
        let seg = segment_from(random_signal(30, 16), random_signal(30, 17), random_signal(30, 18));
        let segs: Vec<CuttingSegment> = (0..5)
            .map(|i| CuttingSegment {
                hole_index: i * 3,
                ..seg.clone()
            })
            .collect();
        let m = extract_features(&segs, &SpectralBand::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        export_features(&m, &path).unwrap();
        let loaded = load_features(&path, false).unwrap();
        assert_eq!(loaded, m);
    }

    proptest! {
        #[test]
        fn rms_std_mean_identity(y in prop::collection::vec(-1.0e3f64..1.0e3, 1..200)) {
            let r = rms(&y).unwrap();
            let s = std(&y).unwrap();
            let mean = y.iter().sum::<f64>() / y.len() as f64;
            let lhs = r * r;
            let rhs = s * s + mean * mean;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }

        #[test]
        fn rms_matches_two_pass_oracle(y in prop::collection::vec(-1.0e3f64..1.0e3, 1..500)) {
            let ours = rms(&y).unwrap();
            let oracle = {
                let mut acc = 0.0f64;
                for &x in &y { acc += x * x; }
                (acc / y.len() as f64).sqrt()
            };
            prop_assert!((ours - oracle).abs() <= 1e-12 * oracle.abs().max(1.0));
        }

        #[test]
        fn parseval_full_band(seed in 0u64..5000, len in 2usize..128) {
            let y = random_signal(len, seed);
            let fs = 500.0;
            let total = 2.0 * spectral_power(&y, &full_band(fs), fs).unwrap();
            let time_energy = (y.len() as f64) * y.iter().map(|x| x * x).sum::<f64>();
            prop_assert!((total - time_energy).abs() <= 1e-9 * time_energy.abs().max(1.0));
        }

        #[test]
        fn band_power_additive_over_partition(seed in 0u64..5000, len in 2usize..96, cut in 1u32..10) {
            let y = random_signal(len, seed);
            let fs = 500.0;
            let split = fs * f64::from(cut) / 10.0;
            let low = SpectralBand { omega_start_hz: 0.0, omega_end_hz: split };
            let high = SpectralBand { omega_start_hz: split, omega_end_hz: fs };
            let parts = spectral_power(&y, &low, fs).unwrap() + spectral_power(&y, &high, fs).unwrap();
            let whole = spectral_power(&y, &full_band(fs), fs).unwrap();
            prop_assert!((parts - whole).abs() <= 1e-9 * whole.abs().max(1.0));
        }
    }

    #[test]
    fn synthetic_spectrum_dominated_by_flute_line() {
        use crate::synthrig::{self, RigConfig};
        let cfg = RigConfig {
            n_holes: 2,
            seed: 5,
            ..RigConfig::default()
        };
        let curve = synthrig::generate_wear_curve(&cfg).unwrap();
        let rec = synthrig::synthesize_recording(&cfg, &curve).unwrap();
        let m = rec.hole_markers[0];
        let fz = &rec.fz[m.start_sample..m.end_sample];
        let n = fz.len();
        assert_eq!(n, 1875);

        let fft = FftPlanner::new().plan_fft_forward(n);
        let mut buf: Vec<Complex<f64>> = fz.iter().map(|&x| Complex::new(x, 0.0)).collect();
        fft.process(&mut buf);
        // Spindle 40 Hz and flute-passing 80 Hz land exactly on bins 150 and
        // 300 of a 1875-sample segment at 500 Hz.
        let spindle_bin = 150;
        let flute_bin = 300;
        let flute_power = buf[flute_bin].norm_sqr();
        let spindle_power = buf[spindle_bin].norm_sqr();
        assert!(flute_power > 2.0 * spindle_power);
        // The flute line dominates every non-DC, non-transient bin up to
        // Nyquist (the entry/exit transients only fill the lowest bins).
        let first_clean_bin = 40;
        for (k, c) in buf.iter().enumerate().take(n / 2).skip(first_clean_bin) {
            if k != flute_bin {
                assert!(
                    flute_power > c.norm_sqr(),
                    "bin {k} rivals the flute line"
                );
            }
        }
    }
}
