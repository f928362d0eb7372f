//! Model configuration, weight containers, and training reports.

use serde::{Deserialize, Serialize};

use crate::dataset::ScalerParams;
use crate::error::{Error, Result};

/// Nonlinearity applied to the cell candidate and the cell output; the three
/// sigmoid gates are fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the activation's output value.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Kernel regularizer kind; applied to the input-to-hidden matrices only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularizer {
    L1,
    L2,
}

/// Training and architecture knobs for one model. Fields omitted from a
/// serialized form fall back to the reference defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyperparameters {
    pub n_layers: usize,
    pub units_per_layer: Vec<usize>,
    pub activation: Activation,
    pub dropout_rate: f64,
    pub recurrent_dropout_rate: f64,
    pub regularizer: Regularizer,
    pub regularizer_factor: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
}

/// Validation-loss improvements smaller than this do not reset the early
/// stopping counter.
pub const MIN_DELTA: f64 = 1e-4;

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        if !(1..=10).contains(&self.n_layers) {
            return Err(Error::Config(format!(
                "n_layers must lie in [1, 10], got {}",
                self.n_layers
            )));
        }
        if self.units_per_layer.len() != self.n_layers {
            return Err(Error::Config(format!(
                "units_per_layer lists {} layers but n_layers is {}",
                self.units_per_layer.len(),
                self.n_layers
            )));
        }
        for (l, &u) in self.units_per_layer.iter().enumerate() {
            if !(16..=128).contains(&u) {
                return Err(Error::Config(format!(
                    "layer {l} has {u} units, allowed range is [16, 128]"
                )));
            }
        }
        for (name, v) in [
            ("dropout_rate", self.dropout_rate),
            ("recurrent_dropout_rate", self.recurrent_dropout_rate),
        ] {
            if !(0.0..=0.5).contains(&v) {
                return Err(Error::Config(format!(
                    "{name} must lie in [0.0, 0.5], got {v}"
                )));
            }
        }
        if !(1e-4..=1e-2).contains(&self.learning_rate) {
            return Err(Error::Config(format!(
                "learning_rate must lie in [1e-4, 1e-2], got {}",
                self.learning_rate
            )));
        }
        if self.regularizer_factor < 0.0 || !self.regularizer_factor.is_finite() {
            return Err(Error::Config(format!(
                "regularizer_factor must be finite and >= 0, got {}",
                self.regularizer_factor
            )));
        }
        if self.max_epochs < 1 {
            return Err(Error::Config("max_epochs must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for Hyperparameters {
    /// The known-good reference configuration: 2 x 64 tanh, dropout 0.1,
    /// L2 1e-4, learning rate 1e-3.
    fn default() -> Self {
        Hyperparameters {
            n_layers: 2,
            units_per_layer: vec![64, 64],
            activation: Activation::Tanh,
            dropout_rate: 0.1,
            recurrent_dropout_rate: 0.0,
            regularizer: Regularizer::L2,
            regularizer_factor: 1e-4,
            learning_rate: 1e-3,
            max_epochs: 100,
            patience: 10,
            batch_size: 32,
            seed: 7,
        }
    }
}

/// One LSTM layer's parameters. Matrices are row-major with the gate blocks
/// stacked vertically in the order input, forget, cell candidate, output:
/// row `gate * units + unit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerWeights {
    pub input_dim: usize,
    pub units: usize,
    /// Input-to-hidden kernel, `4*units x input_dim`.
    pub w: Vec<f64>,
    /// Hidden-to-hidden recurrent matrix, `4*units x units`.
    pub u: Vec<f64>,
    /// Bias, `4*units`.
    pub b: Vec<f64>,
}

/// Index of each gate's block within the stacked rows.
pub mod gate {
    pub const INPUT: usize = 0;
    pub const FORGET: usize = 1;
    pub const CANDIDATE: usize = 2;
    pub const OUTPUT: usize = 3;
    pub const NAMES: [&str; 4] = ["i", "f", "g", "o"];
}

impl LayerWeights {
    pub fn validate(&self) -> Result<()> {
        let rows = 4 * self.units;
        if self.w.len() != rows * self.input_dim
            || self.u.len() != rows * self.units
            || self.b.len() != rows
        {
            return Err(Error::Dimension(format!(
                "layer weight shapes inconsistent: W {} (want {}), U {} (want {}), b {} (want {})",
                self.w.len(),
                rows * self.input_dim,
                self.u.len(),
                rows * self.units,
                self.b.len(),
                rows
            )));
        }
        Ok(())
    }
}

/// A stacked LSTM with a scalar dense head.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    pub layers: Vec<LayerWeights>,
    /// Dense head weights over the top layer's final hidden state.
    pub w_out: Vec<f64>,
    pub b_out: f64,
    pub hp: Hyperparameters,
    /// Attached when the model is trained on scaled data; required by
    /// physical-unit prediction.
    pub scaler: Option<ScalerParams>,
}

impl LstmModel {
    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim
    }

    pub fn top_units(&self) -> usize {
        self.layers.last().map(|l| l.units).unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        self.hp.validate()?;
        if self.layers.is_empty() {
            return Err(Error::Dimension("model has no layers".into()));
        }
        if self.layers.len() != self.hp.n_layers {
            return Err(Error::Dimension(format!(
                "model has {} layers but hyperparameters declare {}",
                self.layers.len(),
                self.hp.n_layers
            )));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            layer.validate()?;
            if layer.units != self.hp.units_per_layer[l] {
                return Err(Error::Dimension(format!(
                    "layer {l} has {} units but hyperparameters declare {}",
                    layer.units, self.hp.units_per_layer[l]
                )));
            }
            if l > 0 && layer.input_dim != self.layers[l - 1].units {
                return Err(Error::Dimension(format!(
                    "layer {l} expects {} inputs but layer {} emits {}",
                    layer.input_dim,
                    l - 1,
                    self.layers[l - 1].units
                )));
            }
        }
        if self.w_out.len() != self.top_units() {
            return Err(Error::Dimension(format!(
                "dense head has {} weights for {} top units",
                self.w_out.len(),
                self.top_units()
            )));
        }
        Ok(())
    }

    /// Total number of trainable parameters.
    pub fn n_params(&self) -> usize {
        let mut n = self.w_out.len() + 1;
        for l in &self.layers {
            n += l.w.len() + l.u.len() + l.b.len();
        }
        n
    }

    /// Copies every parameter into one flat vector in a fixed order:
    /// per layer W, U, b; then w_out, b_out.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.u);
            out.extend_from_slice(&l.b);
        }
        out.extend_from_slice(&self.w_out);
        out.push(self.b_out);
        out
    }

    /// Writes a flat vector produced by [`params_flat`](Self::params_flat)
    /// back into the model.
    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::Dimension(format!(
                "flat vector holds {} values, model has {} parameters",
                flat.len(),
                self.n_params()
            )));
        }
        let mut off = 0;
        for l in self.layers.iter_mut() {
            let (nw, nu, nb) = (l.w.len(), l.u.len(), l.b.len());
            l.w.copy_from_slice(&flat[off..off + nw]);
            off += nw;
            l.u.copy_from_slice(&flat[off..off + nu]);
            off += nu;
            l.b.copy_from_slice(&flat[off..off + nb]);
            off += nb;
        }
        let w = self.w_out.len();
        self.w_out.copy_from_slice(&flat[off..off + w]);
        self.b_out = flat[off + w];
        Ok(())
    }

    /// Human-readable path of one flat-vector index, e.g.
    /// `layer1.U[f][3][7]` or `dense.w[5]`.
    pub fn param_name(&self, mut index: usize) -> String {
        for (li, l) in self.layers.iter().enumerate() {
            for (mat, len, cols) in [
                ("W", l.w.len(), l.input_dim),
                ("U", l.u.len(), l.units),
                ("b", l.b.len(), 1),
            ] {
                if index < len {
                    let row = index / cols;
                    let col = index % cols;
                    let g = gate::NAMES[row / l.units];
                    let unit = row % l.units;
                    return if mat == "b" {
                        format!("layer{li}.b[{g}][{unit}]")
                    } else {
                        format!("layer{li}.{mat}[{g}][{unit}][{col}]")
                    };
                }
                index -= len;
            }
        }
        if index < self.w_out.len() {
            return format!("dense.w[{index}]");
        }
        "dense.b".to_string()
    }
}

/// Epoch-by-epoch record of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Objective on the training set per epoch (data MAE plus the kernel
    /// regularizer at epoch end), in scaled units.
    pub train_loss: Vec<f64>,
    /// Plain MAE on the validation set per epoch, scaled units, no
    /// regularizer, no dropout.
    pub val_loss: Vec<f64>,
    /// Number of epochs actually run (1-based count).
    pub stopped_epoch: usize,
    /// 1-based epoch with the lowest validation loss; its weights are the
    /// ones restored into the model.
    pub best_epoch: usize,
    /// Informational only; excluded from serialized reports so artifacts
    /// stay byte-identical across reruns.
    #[serde(default, skip_serializing)]
    pub wall_time_s: f64,
}

impl TrainReport {
    pub fn best_val_loss(&self) -> f64 {
        self.val_loss[self.best_epoch - 1]
    }
}
