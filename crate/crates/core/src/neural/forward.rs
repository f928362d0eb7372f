//! Forward pass with per-sequence caching for backpropagation.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

use super::types::LstmModel;

/// Post-activation state of one layer at one timestep.
#[derive(Debug, Clone)]
pub struct StepState {
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub c: Vec<f64>,
    pub act_c: Vec<f64>,
    pub h: Vec<f64>,
}

/// Everything the backward pass needs about one sequence's forward run.
#[derive(Debug, Clone)]
pub struct Cache {
    pub window: Vec<f64>,
    pub timestep: usize,
    pub input_dim: usize,
    pub training: bool,
    /// Per layer: inverted-dropout mask over that layer's input vector,
    /// fixed for the whole sequence. All ones outside training.
    pub masks_x: Vec<Vec<f64>>,
    /// Per layer: mask over the recurrent state entering the step, fixed
    /// for the whole sequence.
    pub masks_h: Vec<Vec<f64>>,
    /// `[layer][timestep]` states.
    pub steps: Vec<Vec<StepState>>,
    pub prediction: f64,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `out[r] += sum_c mat[r][c] * x[c]` for a row-major matrix.
#[inline]
pub(super) fn matvec_acc(out: &mut [f64], mat: &[f64], x: &[f64]) {
    let cols = x.len();
    for (r, acc) in out.iter_mut().enumerate() {
        let row = &mat[r * cols..(r + 1) * cols];
        let mut sum = 0.0;
        for (m, v) in row.iter().zip(x) {
            sum += m * v;
        }
        *acc += sum;
    }
}

fn dropout_mask(rng: &mut rand_chacha::ChaCha8Rng, len: usize, rate: f64) -> Vec<f64> {
    if rate == 0.0 {
        return vec![1.0; len];
    }
    let keep_scale = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| {
            if rng.random::<f64>() < rate {
                0.0
            } else {
                keep_scale
            }
        })
        .collect()
}

/// Runs one window through the network.
///
/// The window is `timestep x input_dim`, row per step. During training,
/// inverted-dropout masks are drawn once per sequence from `dropout_seed`
/// and applied to every layer input (rate `dropout_rate`) and to the
/// recurrent state (rate `recurrent_dropout_rate`); outside training no
/// masks and no rescaling apply and `dropout_seed` is ignored. The
/// prediction is a dense readout of the top layer's final hidden state.
pub fn forward(
    model: &LstmModel,
    window: &[f64],
    timestep: usize,
    training: bool,
    dropout_seed: u64,
) -> Result<(f64, Cache)> {
    let input_dim = model.input_dim();
    if timestep == 0 {
        return Err(Error::Dimension("window must have at least 1 step".into()));
    }
    if window.len() != timestep * input_dim {
        return Err(Error::Dimension(format!(
            "window holds {} values, model expects {} ({} steps x {} features)",
            window.len(),
            timestep * input_dim,
            timestep,
            input_dim
        )));
    }

    let n_layers = model.layers.len();
    let mut masks_x = Vec::with_capacity(n_layers);
    let mut masks_h = Vec::with_capacity(n_layers);
    if training {
        let mut rng = rng::seeded_rng(dropout_seed);
        for l in &model.layers {
            masks_x.push(dropout_mask(&mut rng, l.input_dim, model.hp.dropout_rate));
            masks_h.push(dropout_mask(
                &mut rng,
                l.units,
                model.hp.recurrent_dropout_rate,
            ));
        }
    } else {
        for l in &model.layers {
            masks_x.push(vec![1.0; l.input_dim]);
            masks_h.push(vec![1.0; l.units]);
        }
    }

    let act = model.hp.activation;
    let mut steps: Vec<Vec<StepState>> = (0..n_layers)
        .map(|_| Vec::with_capacity(timestep))
        .collect();
    let mut x_buf: Vec<f64> = Vec::new();
    let mut hprev_buf: Vec<f64> = Vec::new();

    for t in 0..timestep {
        for (l, layer) in model.layers.iter().enumerate() {
            let u = layer.units;

            // Masked input: the window row for layer 0, the lower layer's
            // hidden state above it.
            x_buf.clear();
            if l == 0 {
                let row = &window[t * input_dim..(t + 1) * input_dim];
                x_buf.extend(row.iter().zip(&masks_x[0]).map(|(v, m)| v * m));
            } else {
                let below = &steps[l - 1][t].h;
                x_buf.extend(below.iter().zip(&masks_x[l]).map(|(v, m)| v * m));
            }

            let mut a = layer.b.clone();
            matvec_acc(&mut a, &layer.w, &x_buf);
            if t > 0 {
                let hp = &steps[l][t - 1].h;
                hprev_buf.clear();
                hprev_buf.extend(hp.iter().zip(&masks_h[l]).map(|(v, m)| v * m));
                matvec_acc(&mut a, &layer.u, &hprev_buf);
            }

            let mut state = StepState {
                i: Vec::with_capacity(u),
                f: Vec::with_capacity(u),
                g: Vec::with_capacity(u),
                o: Vec::with_capacity(u),
                c: Vec::with_capacity(u),
                act_c: Vec::with_capacity(u),
                h: Vec::with_capacity(u),
            };
            for k in 0..u {
                let gi = sigmoid(a[k]);
                let gf = sigmoid(a[u + k]);
                let gg = act.apply(a[2 * u + k]);
                let go = sigmoid(a[3 * u + k]);
                let c_prev = if t > 0 { steps[l][t - 1].c[k] } else { 0.0 };
                let c = gf * c_prev + gi * gg;
                let ac = act.apply(c);
                state.i.push(gi);
                state.f.push(gf);
                state.g.push(gg);
                state.o.push(go);
                state.c.push(c);
                state.act_c.push(ac);
                state.h.push(go * ac);
            }
            steps[l].push(state);
        }
    }

    let h_final = &steps[n_layers - 1][timestep - 1].h;
    let mut pred = model.b_out;
    for (w, h) in model.w_out.iter().zip(h_final) {
        pred += w * h;
    }

    Ok((
        pred,
        Cache {
            window: window.to_vec(),
            timestep,
            input_dim,
            training,
            masks_x,
            masks_h,
            steps,
            prediction: pred,
        },
    ))
}
