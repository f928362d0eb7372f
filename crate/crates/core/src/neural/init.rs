//! Seeded weight initialization.
//!
//! Kernels get Glorot-style uniform entries with per-gate fan counts; the
//! recurrent matrices get one orthogonal block per gate from a QR
//! factorization of a seeded Gaussian matrix; biases start at zero except
//! the forget-gate slice, which starts at 1.0 so early training does not
//! forget. All draws come from one stream derived from the model seed, in a
//! fixed order, so equal (hyperparameters, seed) produce bit-identical
//! models.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng::{self, stream};

use super::types::{Hyperparameters, LayerWeights, LstmModel};

fn glorot_uniform(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize, len: usize) -> Vec<f64> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..len).map(|_| rng.random_range(-bound..bound)).collect()
}

/// QR-orthogonalizes a square row-major matrix in place via Householder
/// reflections, returning Q with the sign convention that R's diagonal is
/// non-negative.
fn orthogonalize(a: &mut [f64], n: usize) {
    debug_assert_eq!(a.len(), n * n);
    // Accumulate Q^T by applying each reflection to an identity matrix in
    // the same order as to A.
    let mut qt = vec![0.0f64; n * n];
    for i in 0..n {
        qt[i * n + i] = 1.0;
    }
    let mut v = vec![0.0f64; n];
    for k in 0..n {
        // Householder vector for column k of the trailing submatrix.
        let mut norm_sq = 0.0;
        for i in k..n {
            let x = a[i * n + k];
            v[i] = x;
            norm_sq += x * x;
        }
        let norm = norm_sq.sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if v[k] >= 0.0 { -norm } else { norm };
        v[k] -= alpha;
        let v_norm_sq: f64 = (k..n).map(|i| v[i] * v[i]).sum();
        if v_norm_sq == 0.0 {
            continue;
        }
        // Apply H = I - 2vv^T / (v^T v) to A (columns k..) and to Q^T (all
        // columns).
        for j in k..n {
            let dot: f64 = (k..n).map(|i| v[i] * a[i * n + j]).sum();
            let scale = 2.0 * dot / v_norm_sq;
            for i in k..n {
                a[i * n + j] -= scale * v[i];
            }
        }
        for j in 0..n {
            let dot: f64 = (k..n).map(|i| v[i] * qt[i * n + j]).sum();
            let scale = 2.0 * dot / v_norm_sq;
            for i in k..n {
                qt[i * n + j] -= scale * v[i];
            }
        }
    }
    // Q = (Q^T)^T, with column j negated wherever R[j][j] < 0. A now holds
    // R, so capture the diagonal signs before overwriting it with Q.
    let signs: Vec<f64> = (0..n)
        .map(|j| if a[j * n + j] < 0.0 { -1.0 } else { 1.0 })
        .collect();
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = signs[j] * qt[j * n + i];
        }
    }
}

fn orthogonal_gate_block(rng: &mut ChaCha8Rng, units: usize) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal is well formed");
    let mut m: Vec<f64> = (0..units * units).map(|_| normal.sample(rng)).collect();
    orthogonalize(&mut m, units);
    m
}

/// Builds a freshly initialized model for the given input width.
pub fn init_model(hp: &Hyperparameters, input_dim: usize) -> Result<LstmModel> {
    hp.validate()?;
    if input_dim == 0 {
        return Err(Error::Config("input_dim must be >= 1".into()));
    }
    let mut rng = rng::stream_rng(hp.seed, stream::MODEL_INIT);

    let mut layers = Vec::with_capacity(hp.n_layers);
    let mut in_dim = input_dim;
    for &units in &hp.units_per_layer {
        let rows = 4 * units;
        let w = glorot_uniform(&mut rng, in_dim, units, rows * in_dim);
        let mut u = Vec::with_capacity(rows * units);
        for _ in 0..4 {
            u.extend(orthogonal_gate_block(&mut rng, units));
        }
        let mut b = vec![0.0f64; rows];
        b[units..2 * units].fill(1.0);
        let layer = LayerWeights {
            input_dim: in_dim,
            units,
            w,
            u,
            b,
        };
        layer.validate()?;
        layers.push(layer);
        in_dim = units;
    }

    let top_units = in_dim;
    let w_out = glorot_uniform(&mut rng, top_units, 1, top_units);
    let model = LstmModel {
        layers,
        w_out,
        b_out: 0.0,
        hp: hp.clone(),
        scaler: None,
    };
    model.validate()?;
    Ok(model)
}
