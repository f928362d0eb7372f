//! End-to-end library flows over a small synthetic campaign: every stage is
//! exercised against the stage before it rather than in isolation.

use flankwear_core::dataset::{
    apply_scaler, fit_scaler, inverse_scale_target, make_windows, slice_region, split, RegionSpec,
    SplitSpec,
};
use flankwear_core::features::{
    extract_features, moving_average, select_features, trend_sensitivity, SpectralBand,
};
use flankwear_core::ingest::{
    detect_cutting_extents, load_markers, load_recording, segment_by_markers, segment_by_threshold,
};
use flankwear_core::neural::{
    init_model, predict, train, validation_mae, Activation, Hyperparameters, Regularizer,
};
use flankwear_core::synthrig::{
    export_markers, export_recording, generate_wear_curve, sample_wear_measurements,
    synthesize_recording, RigConfig, SignalModel,
};
use flankwear_core::wear::{quantize, wear_at};

/// A campaign small enough to run in well under a second: 160 holes of
/// 250 cutting samples each, wear measured every 8 holes.
fn small_rig() -> RigConfig {
    RigConfig {
        hole_depth_mm: 5.0,
        feed_mm_per_min: 600.0,
        n_holes: 160,
        wear_measure_interval: 8,
        seed: 42,
        signal: SignalModel {
            gap_seconds: 0.1,
            ..SignalModel::default()
        },
        ..RigConfig::default()
    }
}

fn band() -> SpectralBand {
    SpectralBand {
        omega_start_hz: 10.0,
        omega_end_hz: 250.0,
    }
}

#[test]
fn marker_and_threshold_segmentation_agree() {
    let cfg = small_rig();
    let wear = generate_wear_curve(&cfg).unwrap();
    let rec = synthesize_recording(&cfg, &wear).unwrap();

    let by_markers = segment_by_markers(&rec).unwrap();
    assert_eq!(by_markers.len(), cfg.n_holes);
    // The trailing-RMS detector can smear each boundary by up to one window,
    // so keep the window well under both the hole and the gap length.
    let window = 20;
    let detected = detect_cutting_extents(&rec, window, 0.25).unwrap();
    assert_eq!(detected.len(), cfg.n_holes, "threshold detector miscounted holes");

    for (marker, det) in rec.hole_markers.iter().zip(&detected) {
        assert_eq!(marker.hole_index, det.hole_index);
        let start_err = marker.start_sample.abs_diff(det.start_sample);
        let end_err = marker.end_sample.abs_diff(det.end_sample);
        assert!(
            start_err <= window && end_err <= window,
            "hole {}: marker [{}, {}) vs detected [{}, {})",
            marker.hole_index,
            marker.start_sample,
            marker.end_sample,
            det.start_sample,
            det.end_sample
        );
        let overlap = marker.end_sample.min(det.end_sample) as f64
            - marker.start_sample.max(det.start_sample) as f64;
        let union = marker.end_sample.max(det.end_sample) as f64
            - marker.start_sample.min(det.start_sample) as f64;
        assert!(
            overlap / union >= 0.85,
            "hole {}: extents only overlap by {:.2}",
            marker.hole_index,
            overlap / union
        );
    }

    // Both paths must hand downstream stages the same segment shapes.
    let by_threshold = segment_by_threshold(&rec, window, 0.25).unwrap();
    for (seg, det) in by_threshold.iter().zip(&detected) {
        assert_eq!(seg.len(), det.end_sample - det.start_sample);
        assert_eq!(seg.hole_index, det.hole_index);
    }
}

#[test]
fn smoothed_features_track_the_wear_trend() {
    let cfg = small_rig();
    let truth = generate_wear_curve(&cfg).unwrap();
    let rec = synthesize_recording(&cfg, &truth).unwrap();
    let segments = segment_by_markers(&rec).unwrap();
    let raw = extract_features(&segments, &band()).unwrap();
    let smoothed = moving_average(&raw, 20).unwrap();
    assert_eq!(smoothed.n_rows(), raw.n_rows());

    // Wear raises the thrust-force DC level, so the smoothed RMS must move
    // with the ground-truth curve far more strongly than the band-limited
    // spectral power, which only sees the (wear-independent) harmonics.
    let rms_sens = trend_sensitivity(&smoothed.column("Fz_RMS").unwrap(), &truth.wear_um).unwrap();
    let spw_sens = trend_sensitivity(&smoothed.column("Fz_SPW").unwrap(), &truth.wear_um).unwrap();
    assert!(
        rms_sens > 0.95,
        "smoothed Fz_RMS should follow the wear curve, sensitivity {rms_sens:.3}"
    );
    assert!(
        rms_sens > spw_sens.abs(),
        "RMS ({rms_sens:.3}) should out-track spectral power ({spw_sens:.3})"
    );

    // Selection drops the requested columns and keeps row alignment.
    let selected = select_features(&smoothed, &["Im_SPW", "Fz_SPW", "Tz_SPW"]).unwrap();
    assert_eq!(selected.n_cols(), 6);
    assert_eq!(selected.n_rows(), smoothed.n_rows());
    assert!(selected.column_index("Fz_SPW").is_none());
    let before = smoothed.column("Fz_RMS").unwrap();
    let after = selected.column("Fz_RMS").unwrap();
    assert_eq!(before, after, "selection must not disturb kept columns");
}

#[test]
fn quantized_curve_interpolates_between_anchors() {
    let cfg = small_rig();
    let truth = generate_wear_curve(&cfg).unwrap();
    let measurements =
        sample_wear_measurements(&truth, cfg.wear_measure_interval, 0.0, cfg.seed).unwrap();
    assert_eq!(measurements.len(), 20);

    // Jitter-free: anchors bit-exact, interior exactly linear.
    let curve = quantize(&measurements, cfg.n_holes, 0.0, 7).unwrap();
    assert_eq!(curve.len(), cfg.n_holes);
    for m in &measurements {
        assert_eq!(wear_at(&curve, m.hole_index).unwrap(), m.wear_um);
        assert!(curve.is_anchor(m.hole_index));
    }
    let (a, b) = (&measurements[3], &measurements[4]);
    for hole in a.hole_index + 1..b.hole_index {
        let t = (hole - a.hole_index) as f64 / (b.hole_index - a.hole_index) as f64;
        let expected = a.wear_um + t * (b.wear_um - a.wear_um);
        let got = wear_at(&curve, hole).unwrap();
        assert!(
            (got - expected).abs() < 1e-12,
            "hole {hole}: interpolant {expected} vs {got}"
        );
    }

    // With jitter: anchors still exact, interior bounded by its bracket.
    let jittered = quantize(&measurements, cfg.n_holes, 3.0, 7).unwrap();
    for m in &measurements {
        assert_eq!(wear_at(&jittered, m.hole_index).unwrap(), m.wear_um);
    }
    for pair in measurements.windows(2) {
        let lo = pair[0].wear_um.min(pair[1].wear_um);
        let hi = pair[0].wear_um.max(pair[1].wear_um);
        for hole in pair[0].hole_index..=pair[1].hole_index {
            let v = wear_at(&jittered, hole).unwrap();
            assert!(
                (lo..=hi).contains(&v),
                "hole {hole}: {v} escapes its anchor bracket [{lo}, {hi}]"
            );
        }
    }
}

/// Runs the campaign through features and wear and returns the scaled
/// train/val/test splits plus the scaler, as the model stages consume them.
fn prepared_splits() -> (
    flankwear_core::dataset::WindowedDataset,
    flankwear_core::dataset::WindowedDataset,
    flankwear_core::dataset::WindowedDataset,
    flankwear_core::dataset::ScalerParams,
) {
    let cfg = small_rig();
    let truth = generate_wear_curve(&cfg).unwrap();
    let rec = synthesize_recording(&cfg, &truth).unwrap();
    let segments = segment_by_markers(&rec).unwrap();
    let raw = extract_features(&segments, &band()).unwrap();
    let smoothed = moving_average(&raw, 20).unwrap();
    let selected = select_features(&smoothed, &["Im_SPW", "Fz_SPW", "Tz_SPW"]).unwrap();
    let measurements =
        sample_wear_measurements(&truth, cfg.wear_measure_interval, 0.0, cfg.seed).unwrap();
    let curve = quantize(&measurements, cfg.n_holes, 0.0, 7).unwrap();

    let region = RegionSpec::new("mid", 10, 150);
    let (feats, wear_aligned) = slice_region(&selected, &curve, &region).unwrap();
    let windows = make_windows(&feats, &wear_aligned, 6).unwrap();
    let (train_raw, val_raw, test_raw) = split(&windows, &SplitSpec::default()).unwrap();
    let scaler = fit_scaler(&train_raw).unwrap();
    (
        apply_scaler(&train_raw, &scaler).unwrap(),
        apply_scaler(&val_raw, &scaler).unwrap(),
        apply_scaler(&test_raw, &scaler).unwrap(),
        scaler,
    )
}

#[test]
fn train_split_scaling_is_unit_interval_and_invertible() {
    let (train_s, val_s, test_s, scaler) = prepared_splits();
    assert_eq!(
        train_s.n_samples + val_s.n_samples + test_s.n_samples,
        135,
        "140 region rows at timestep 6 make 135 windows"
    );

    // Training statistics define the scale, so the training split must fill
    // [0, 1] exactly in every non-degenerate column and in the target.
    for f in 0..train_s.n_features {
        let col: Vec<f64> = (0..train_s.n_samples)
            .flat_map(|s| (0..train_s.timestep).map(move |t| (s, t)))
            .map(|(s, t)| train_s.input_step(s, t)[f])
            .collect();
        let (min, max) = col
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        assert!(min >= 0.0 && max <= 1.0 + 1e-12, "feature {f}: [{min}, {max}]");
        assert!((min - 0.0).abs() < 1e-12 && (max - 1.0).abs() < 1e-12);
    }
    // Later splits may drift outside the training envelope but stay finite.
    for v in val_s.inputs.iter().chain(&test_s.inputs) {
        assert!(v.is_finite());
    }

    let back = inverse_scale_target(&train_s.targets, &scaler).unwrap();
    let span = scaler.target.max - scaler.target.min;
    for (orig, round) in train_s
        .targets
        .iter()
        .map(|t| scaler.target.min + t * span)
        .zip(&back)
    {
        assert!((orig - round).abs() < 1e-9);
    }
}

#[test]
fn short_training_run_learns_and_round_trips_through_disk() {
    let (train_s, val_s, test_s, scaler) = prepared_splits();
    let hp = Hyperparameters {
        n_layers: 1,
        units_per_layer: vec![16],
        activation: Activation::Tanh,
        dropout_rate: 0.0,
        recurrent_dropout_rate: 0.0,
        regularizer: Regularizer::L2,
        regularizer_factor: 1e-4,
        learning_rate: 1e-3,
        max_epochs: 15,
        patience: 15,
        batch_size: 16,
        seed: 5,
    };
    let model = init_model(&hp, train_s.n_features).unwrap();
    let untrained_val = validation_mae(&model, &val_s).unwrap();
    let (mut trained, report) = train(model, &train_s, &val_s).unwrap();
    assert!(report.stopped_epoch <= 15);
    assert!(
        report.best_val_loss() < untrained_val,
        "training did not improve validation MAE: {} -> {}",
        untrained_val,
        report.best_val_loss()
    );

    trained.scaler = Some(scaler);
    let preds = predict(&trained, &test_s).unwrap();
    assert_eq!(preds.len(), test_s.n_samples);
    assert!(preds.iter().all(|p| p.is_finite()));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    flankwear_core::neural::save_model(&trained, &path).unwrap();
    let reloaded = flankwear_core::neural::load_model(&path).unwrap();
    assert_eq!(
        predict(&reloaded, &test_s).unwrap(),
        preds,
        "serialized model must predict bit-identically"
    );
}

#[test]
fn recording_survives_the_csv_round_trip() {
    let cfg = RigConfig {
        n_holes: 12,
        ..small_rig()
    };
    let truth = generate_wear_curve(&cfg).unwrap();
    let rec = synthesize_recording(&cfg, &truth).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("recording.csv");
    export_recording(&rec, &path).unwrap();
    export_markers(
        &rec.hole_markers,
        &flankwear_core::synthrig::markers_sidecar_path(&path),
    )
    .unwrap();

    let mut loaded = load_recording(&path, cfg.sampling_rate_hz).unwrap();
    loaded.hole_markers =
        load_markers(&flankwear_core::synthrig::markers_sidecar_path(&path)).unwrap();
    assert_eq!(loaded.hole_markers, rec.hole_markers);
    assert_eq!(loaded.len(), rec.len());
    assert_eq!(loaded.im, rec.im, "spindle current must round-trip bit-exactly");
    assert_eq!(loaded.fz, rec.fz);
    assert_eq!(loaded.tz, rec.tz);

    // The round-tripped recording is fully usable downstream.
    let segments = segment_by_markers(&loaded).unwrap();
    assert_eq!(segments.len(), cfg.n_holes);
    assert_eq!(segments[0].len(), cfg.cutting_samples_per_hole());
}
