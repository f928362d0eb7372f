//! Loss and exact gradients via backpropagation through time.

use crate::error::{Error, Result};

use super::forward::Cache;
use super::types::{LstmModel, Regularizer};

/// Gradient of the loss with respect to every model parameter, mirroring
/// the model's shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrads>,
    pub w_out: Vec<f64>,
    pub b_out: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub w: Vec<f64>,
    pub u: Vec<f64>,
    pub b: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(model: &LstmModel) -> Self {
        Gradients {
            layers: model
                .layers
                .iter()
                .map(|l| LayerGrads {
                    w: vec![0.0; l.w.len()],
                    u: vec![0.0; l.u.len()],
                    b: vec![0.0; l.b.len()],
                })
                .collect(),
            w_out: vec![0.0; model.w_out.len()],
            b_out: 0.0,
        }
    }

    /// Flattens in the same order as [`LstmModel::params_flat`].
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.u);
            out.extend_from_slice(&l.b);
        }
        out.extend_from_slice(&self.w_out);
        out.push(self.b_out);
        out
    }
}

/// The kernel regularization term: `factor * sum|W|` (L1) or
/// `factor * sum W^2` (L2) over input-to-hidden matrices only.
pub fn regularizer_term(model: &LstmModel) -> f64 {
    let factor = model.hp.regularizer_factor;
    if factor == 0.0 {
        return 0.0;
    }
    let sum: f64 = model
        .layers
        .iter()
        .flat_map(|l| l.w.iter())
        .map(|&w| match model.hp.regularizer {
            Regularizer::L1 => w.abs(),
            Regularizer::L2 => w * w,
        })
        .sum();
    factor * sum
}

/// Mean absolute error plus the kernel regularization term.
pub fn loss(predictions: &[f64], targets: &[f64], model: &LstmModel) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Dimension("loss of an empty batch".into()));
    }
    let mae = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / predictions.len() as f64;
    Ok(mae + regularizer_term(model))
}

/// MAE subgradient with the value at zero defined as 0.
#[inline]
fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `out[c] += sum_r mat[r][c] * d[r]` for a row-major matrix.
#[inline]
fn matvec_t_acc(out: &mut [f64], mat: &[f64], d: &[f64]) {
    let cols = out.len();
    for (r, &dr) in d.iter().enumerate() {
        if dr == 0.0 {
            continue;
        }
        let row = &mat[r * cols..(r + 1) * cols];
        for (o, m) in out.iter_mut().zip(row) {
            *o += dr * m;
        }
    }
}

fn check_cache(model: &LstmModel, cache: &Cache) -> Result<()> {
    if cache.input_dim != model.input_dim()
        || cache.steps.len() != model.layers.len()
        || cache
            .steps
            .iter()
            .zip(&model.layers)
            .any(|(s, l)| s.len() != cache.timestep || s.iter().any(|st| st.h.len() != l.units))
        || cache
            .masks_x
            .iter()
            .zip(&model.layers)
            .any(|(m, l)| m.len() != l.input_dim)
    {
        return Err(Error::Internal(
            "stale forward cache: shapes do not match the model".into(),
        ));
    }
    Ok(())
}

/// Computes the exact gradient of [`loss`] over one batch.
///
/// `caches` must come from training-mode forward passes of this model over
/// the batch windows; their dropout masks are reused so the gradient matches
/// the loss the forward pass actually realized. Targets pair with caches by
/// index. The data term is averaged over the batch; the regularizer term is
/// added once.
pub fn backward(model: &LstmModel, caches: &[Cache], targets: &[f64]) -> Result<Gradients> {
    if caches.len() != targets.len() {
        return Err(Error::Dimension(format!(
            "{} caches for {} targets",
            caches.len(),
            targets.len()
        )));
    }
    if caches.is_empty() {
        return Err(Error::Dimension("backward over an empty batch".into()));
    }
    for cache in caches {
        check_cache(model, cache)?;
    }

    let n = caches.len() as f64;
    let n_layers = model.layers.len();
    let act = model.hp.activation;
    let mut g = Gradients::zeros_like(model);

    let mut x_buf: Vec<f64> = Vec::new();
    let mut hprev_buf: Vec<f64> = Vec::new();

    for (cache, &target) in caches.iter().zip(targets) {
        let t_steps = cache.timestep;
        let dpred = sign0(cache.prediction - target) / n;

        // Dense head.
        let h_final = &cache.steps[n_layers - 1][t_steps - 1].h;
        for (gw, h) in g.w_out.iter_mut().zip(h_final) {
            *gw += dpred * h;
        }
        g.b_out += dpred;

        if dpred == 0.0 {
            continue;
        }

        // Gradients flowing backward in time per layer.
        let mut dh_carry: Vec<Vec<f64>> =
            model.layers.iter().map(|l| vec![0.0; l.units]).collect();
        let mut dc_carry: Vec<Vec<f64>> =
            model.layers.iter().map(|l| vec![0.0; l.units]).collect();

        for t in (0..t_steps).rev() {
            // Gradient w.r.t. the hidden sequence of the layer below,
            // produced while walking layers top-down within this step.
            let mut dx_below: Option<Vec<f64>> = None;
            for l in (0..n_layers).rev() {
                let layer = &model.layers[l];
                let u = layer.units;
                let st = &cache.steps[l][t];

                let mut dh = std::mem::take(&mut dh_carry[l]);
                if l == n_layers - 1 && t == t_steps - 1 {
                    for (d, w) in dh.iter_mut().zip(&model.w_out) {
                        *d += dpred * w;
                    }
                }
                if let Some(dx) = dx_below.take() {
                    for (d, v) in dh.iter_mut().zip(dx) {
                        *d += v;
                    }
                }

                let mut dc = std::mem::take(&mut dc_carry[l]);
                for k in 0..u {
                    dc[k] += dh[k] * st.o[k] * act.derivative_from_output(st.act_c[k]);
                }

                // Pre-activation gradients, gate blocks stacked [i, f, g, o].
                let mut da = vec![0.0f64; 4 * u];
                for k in 0..u {
                    let c_prev = if t > 0 { cache.steps[l][t - 1].c[k] } else { 0.0 };
                    da[k] = dc[k] * st.g[k] * st.i[k] * (1.0 - st.i[k]);
                    da[u + k] = dc[k] * c_prev * st.f[k] * (1.0 - st.f[k]);
                    da[2 * u + k] = dc[k] * st.i[k] * act.derivative_from_output(st.g[k]);
                    da[3 * u + k] = dh[k] * st.act_c[k] * st.o[k] * (1.0 - st.o[k]);
                }

                // The inputs the forward pass actually used.
                x_buf.clear();
                if l == 0 {
                    let row = &cache.window[t * cache.input_dim..(t + 1) * cache.input_dim];
                    x_buf.extend(row.iter().zip(&cache.masks_x[0]).map(|(v, m)| v * m));
                } else {
                    let below = &cache.steps[l - 1][t].h;
                    x_buf.extend(below.iter().zip(&cache.masks_x[l]).map(|(v, m)| v * m));
                }
                hprev_buf.clear();
                if t > 0 {
                    let hp = &cache.steps[l][t - 1].h;
                    hprev_buf.extend(hp.iter().zip(&cache.masks_h[l]).map(|(v, m)| v * m));
                }

                let gl = &mut g.layers[l];
                let d_in = layer.input_dim;
                for (r, &dar) in da.iter().enumerate() {
                    if dar == 0.0 {
                        continue;
                    }
                    let wrow = &mut gl.w[r * d_in..(r + 1) * d_in];
                    for (gw, x) in wrow.iter_mut().zip(&x_buf) {
                        *gw += dar * x;
                    }
                    if t > 0 {
                        let urow = &mut gl.u[r * u..(r + 1) * u];
                        for (gu, h) in urow.iter_mut().zip(&hprev_buf) {
                            *gu += dar * h;
                        }
                    }
                    gl.b[r] += dar;
                }

                // Downstream gradients, chained through the dropout masks.
                if l > 0 {
                    let mut dx = vec![0.0f64; d_in];
                    matvec_t_acc(&mut dx, &layer.w, &da);
                    for (d, m) in dx.iter_mut().zip(&cache.masks_x[l]) {
                        *d *= m;
                    }
                    dx_below = Some(dx);
                }
                if t > 0 {
                    let mut dhp = vec![0.0f64; u];
                    matvec_t_acc(&mut dhp, &layer.u, &da);
                    for (d, m) in dhp.iter_mut().zip(&cache.masks_h[l]) {
                        *d *= m;
                    }
                    dh_carry[l] = dhp;
                    let mut dcp = dc;
                    for (d, f) in dcp.iter_mut().zip(&st.f) {
                        *d *= f;
                    }
                    dc_carry[l] = dcp;
                } else {
                    dh_carry[l] = vec![0.0; u];
                    dc_carry[l] = vec![0.0; u];
                }
            }
        }
    }

    // Kernel regularizer gradients, added once per batch.
    let factor = model.hp.regularizer_factor;
    if factor > 0.0 {
        for (gl, l) in g.layers.iter_mut().zip(&model.layers) {
            for (gw, &w) in gl.w.iter_mut().zip(&l.w) {
                *gw += match model.hp.regularizer {
                    Regularizer::L1 => factor * sign0(w),
                    Regularizer::L2 => 2.0 * factor * w,
                };
            }
        }
    }

    Ok(g)
}
