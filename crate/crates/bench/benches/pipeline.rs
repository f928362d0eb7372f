//! Benchmarks for the pipeline's hot paths: per-segment feature
//! extraction, smoothing, wear densification, and the LSTM's forward and
//! training steps at the production model size.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use flankwear_core::dataset::{make_windows, slice_region, split, RegionSpec};
use flankwear_core::features::{
    extract_features, moving_average, rms, spectral_power, std as std_dev, SpectralBand,
};
use flankwear_core::ingest::segment_by_markers;
use flankwear_core::neural::{backward, forward, init_model, Hyperparameters, Trainer};
use flankwear_core::synthrig::{
    generate_wear_curve, synthesize_recording, RigConfig, WearMeasurement,
};
use flankwear_core::wear::quantize;

/// A small but realistic campaign: default signal model, fewer holes.
fn small_rig(n_holes: usize) -> RigConfig {
    RigConfig {
        n_holes,
        wear_measure_interval: 10,
        ..RigConfig::default()
    }
}

fn segment_features(c: &mut Criterion) {
    let cfg = small_rig(8);
    let wear = generate_wear_curve(&cfg).unwrap();
    let rec = synthesize_recording(&cfg, &wear).unwrap();
    let segments = segment_by_markers(&rec).unwrap();
    let y = segments[3].fz.clone();
    let band = SpectralBand::default();
    assert_eq!(y.len(), 1875);

    c.bench_function("rms_1875", |b| b.iter(|| rms(black_box(&y)).unwrap()));
    c.bench_function("std_1875", |b| b.iter(|| std_dev(black_box(&y)).unwrap()));
    c.bench_function("spectral_power_1875", |b| {
        b.iter(|| spectral_power(black_box(&y), &band, 500.0).unwrap())
    });
    c.bench_function("extract_features_8_holes", |b| {
        b.iter(|| extract_features(black_box(&segments), &band).unwrap())
    });
}

fn smoothing_and_wear(c: &mut Criterion) {
    let cfg = small_rig(200);
    let wear = generate_wear_curve(&cfg).unwrap();
    let rec = synthesize_recording(&cfg, &wear).unwrap();
    let segments = segment_by_markers(&rec).unwrap();
    let features = extract_features(&segments, &SpectralBand::default()).unwrap();

    c.bench_function("moving_average_200x9_window_20", |b| {
        b.iter(|| moving_average(black_box(&features), 20).unwrap())
    });

    let measurements: Vec<WearMeasurement> = (0..40)
        .map(|i| WearMeasurement {
            hole_index: i * 48,
            wear_um: 5.0 + i as f64 * 4.0,
        })
        .collect();
    c.bench_function("quantize_40_anchors_to_1901", |b| {
        b.iter(|| quantize(black_box(&measurements), 1901, 1.5, 9).unwrap())
    });
}

fn network_steps(c: &mut Criterion) {
    let hp = Hyperparameters::default();
    let model = init_model(&hp, 6).unwrap();
    let timestep = 20;
    let window: Vec<f64> = (0..timestep * 6).map(|i| (i as f64 * 0.37).sin() * 0.5).collect();

    c.bench_function("lstm_forward_2x64_t20", |b| {
        b.iter(|| forward(black_box(&model), black_box(&window), timestep, false, 0).unwrap())
    });

    let caches: Vec<_> = (0..8)
        .map(|i| {
            forward(&model, &window, timestep, true, 1000 + i)
                .unwrap()
                .1
        })
        .collect();
    let targets: Vec<f64> = (0..8).map(|i| 0.1 * i as f64).collect();
    c.bench_function("lstm_backward_batch8_2x64_t20", |b| {
        b.iter(|| backward(black_box(&model), black_box(&caches), &targets).unwrap())
    });
}

fn training_epoch(c: &mut Criterion) {
    let cfg = small_rig(200);
    let wear = generate_wear_curve(&cfg).unwrap();
    let rec = synthesize_recording(&cfg, &wear).unwrap();
    let segments = segment_by_markers(&rec).unwrap();
    let features = extract_features(&segments, &SpectralBand::default()).unwrap();
    let smoothed = moving_average(&features, 20).unwrap();
    let measurements: Vec<WearMeasurement> = (0..20)
        .map(|i| WearMeasurement {
            hole_index: i * 10,
            wear_um: 5.0 + i as f64 * 8.0,
        })
        .collect();
    let curve = quantize(&measurements, 200, 0.0, 3).unwrap();
    let region = RegionSpec::new("bench", 0, 200);
    let (matrix, wear_col) = slice_region(&smoothed, &curve, &region).unwrap();
    let windows = make_windows(&matrix, &wear_col, 20).unwrap();
    let (tr, va, _te) = split(&windows, &Default::default()).unwrap();

    let hp = Hyperparameters {
        n_layers: 1,
        units_per_layer: vec![32],
        ..Hyperparameters::default()
    };
    c.bench_function("train_epoch_1x32_135_windows", |b| {
        b.iter(|| {
            let mut t = Trainer::new(init_model(&hp, tr.n_features).unwrap()).unwrap();
            t.run_until(black_box(&tr), &va, 1, false).unwrap();
            t.best_val_loss()
        })
    });
}

criterion_group!(
    benches,
    segment_features,
    smoothing_and_wear,
    network_steps,
    training_epoch
);
criterion_main!(benches);
