//! Stacked LSTM regressor built directly on f64 arrays: forward pass,
//! backpropagation through time, Adam, early-stopped training, gradient
//! verification, and JSON persistence.

pub mod adam;
pub mod backward;
pub mod forward;
pub mod gradcheck;
pub mod init;
pub mod serialize;
pub mod train;
pub mod types;

pub use adam::AdamState;
pub use backward::{backward, loss, regularizer_term, Gradients};
pub use forward::{forward, Cache};
pub use gradcheck::{check_gradients, check_gradients_robust, synthetic_batch, GradCheckReport};
pub use init::init_model;
pub use serialize::{load_model, save_model, MODEL_FORMAT_VERSION};
pub use train::{train, validation_mae, Trainer};
pub use types::{
    Activation, Hyperparameters, LayerWeights, LstmModel, Regularizer, TrainReport, MIN_DELTA,
};

use crate::dataset::{inverse_scale_target, WindowedDataset};
use crate::error::{Error, Result};

/// Runs the model over every window of an already-scaled dataset and
/// returns predictions in original target units (micrometers), using the
/// scaler stored with the model.
pub fn predict(model: &LstmModel, ds: &WindowedDataset) -> Result<Vec<f64>> {
    let scaler = model
        .scaler
        .as_ref()
        .ok_or_else(|| Error::Config("model has no scaler attached; predictions cannot be mapped back to micrometers".into()))?;
    ds.validate()?;
    if ds.n_features != model.input_dim() {
        return Err(Error::Dimension(format!(
            "model expects {} input features, dataset has {}",
            model.input_dim(),
            ds.n_features
        )));
    }
    let mut scaled = Vec::with_capacity(ds.n_samples);
    for i in 0..ds.n_samples {
        let (p, _) = forward(model, ds.input(i), ds.timestep, false, 0)?;
        scaled.push(p);
    }
    inverse_scale_target(&scaled, scaler)
}
