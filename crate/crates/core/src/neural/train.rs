//! Mini-batch training with Adam, per-epoch shuffling, and early stopping.

use std::time::Instant;

use rand::seq::SliceRandom as _;

use crate::dataset::WindowedDataset;
use crate::error::{Error, Result};
use crate::rng::{derive_seed_n, stream};

use super::adam::AdamState;
use super::backward::{backward, regularizer_term};
use super::forward::forward;
use super::types::{LstmModel, TrainReport, MIN_DELTA};

/// Early-stopping bookkeeping, separated from the training loop so its
/// counting rules can be exercised directly.
///
/// Two trackers run side by side:
/// * a strict arg-min of the validation loss, which decides whose weights
///   are restored at the end (`best_epoch`), and
/// * a patience counter that only resets when the loss improves on its own
///   best by more than [`MIN_DELTA`]; once it reaches `patience`
///   consecutive non-improving epochs, training stops.
///
/// A perfectly flat validation loss therefore stops after
/// `patience + 1` epochs (the first observation arms the monitor, the next
/// `patience` exhaust it) while keeping epoch 1 as the best.
#[derive(Debug, Clone)]
pub(crate) struct StopMonitor {
    patience: usize,
    monitor_best: f64,
    wait: usize,
    best_val: f64,
    best_epoch: usize,
}

impl StopMonitor {
    pub(crate) fn new(patience: usize) -> Self {
        StopMonitor {
            patience,
            monitor_best: f64::INFINITY,
            wait: 0,
            best_val: f64::INFINITY,
            best_epoch: 0,
        }
    }

    /// Records one epoch's validation loss. Returns
    /// `(new_strict_best, out_of_patience)`.
    pub(crate) fn observe(&mut self, epoch: usize, val_loss: f64) -> (bool, bool) {
        let improved_strict = val_loss < self.best_val;
        if improved_strict {
            self.best_val = val_loss;
            self.best_epoch = epoch;
        }
        if val_loss < self.monitor_best - MIN_DELTA {
            self.monitor_best = val_loss;
            self.wait = 0;
        } else {
            self.wait += 1;
        }
        (improved_strict, self.wait >= self.patience)
    }

    pub(crate) fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub(crate) fn best_val(&self) -> f64 {
        self.best_val
    }
}

/// Mean absolute error of the model over a dataset in inference mode.
pub fn validation_mae(model: &LstmModel, ds: &WindowedDataset) -> Result<f64> {
    if ds.n_samples == 0 {
        return Err(Error::Dataset("validation over an empty dataset".into()));
    }
    let mut sum = 0.0;
    for i in 0..ds.n_samples {
        let (pred, _) = forward(model, ds.input(i), ds.timestep, false, 0)?;
        sum += (pred - ds.targets[i]).abs();
    }
    Ok(sum / ds.n_samples as f64)
}

/// A training run that can be paused and resumed at epoch granularity,
/// carrying its optimizer moments and early-stopping counters across calls.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub model: LstmModel,
    pub adam: AdamState,
    pub epochs_done: usize,
    pub history_train: Vec<f64>,
    pub history_val: Vec<f64>,
    monitor: StopMonitor,
    best_params: Option<Vec<f64>>,
    pub stopped_early: bool,
    wall_time_s: f64,
}

impl Trainer {
    pub fn new(model: LstmModel) -> Result<Self> {
        model.validate()?;
        let n = model.n_params();
        let patience = model.hp.patience;
        Ok(Trainer {
            model,
            adam: AdamState::new(n),
            epochs_done: 0,
            history_train: Vec::new(),
            history_val: Vec::new(),
            monitor: StopMonitor::new(patience),
            best_params: None,
            stopped_early: false,
            wall_time_s: 0.0,
        })
    }

    /// Lowest validation loss seen so far (infinite before the first epoch).
    pub fn best_val_loss(&self) -> f64 {
        self.monitor.best_val()
    }

    pub fn best_epoch(&self) -> usize {
        self.monitor.best_epoch()
    }

    /// Total wall-clock seconds spent inside [`Trainer::run_until`].
    pub fn wall_time_s(&self) -> f64 {
        self.wall_time_s
    }

    /// Runs whole epochs until `target_epoch` epochs have been completed in
    /// total. With `early_stopping` the patience rule may end the run
    /// sooner; without it the counters still advance but never interrupt,
    /// which is what lets a later call enable stopping over the full
    /// history. Returns the number of epochs this call executed.
    pub fn run_until(
        &mut self,
        train_set: &WindowedDataset,
        val_set: &WindowedDataset,
        target_epoch: usize,
        early_stopping: bool,
    ) -> Result<usize> {
        train_set.validate()?;
        val_set.validate()?;
        if train_set.n_samples == 0 {
            return Err(Error::Dataset("training set is empty".into()));
        }
        if train_set.n_features != self.model.input_dim()
            || val_set.n_features != self.model.input_dim()
        {
            return Err(Error::Dimension(format!(
                "model expects {} input features, dataset has {}/{}",
                self.model.input_dim(),
                train_set.n_features,
                val_set.n_features
            )));
        }
        if self.stopped_early {
            return Ok(0);
        }
        let started = Instant::now();
        let hp = self.model.hp.clone();
        let n = train_set.n_samples;
        let mut ran = 0usize;

        while self.epochs_done < target_epoch {
            let epoch = self.epochs_done + 1;

            let mut order: Vec<usize> = (0..n).collect();
            let mut shuffle_rng = crate::rng::seeded_rng(derive_seed_n(
                hp.seed,
                &[stream::SHUFFLE, epoch as u64],
            ));
            order.shuffle(&mut shuffle_rng);

            let mut abs_err_sum = 0.0;
            let mut position = 0u64;
            for chunk in order.chunks(hp.batch_size) {
                let mut caches = Vec::with_capacity(chunk.len());
                let mut targets = Vec::with_capacity(chunk.len());
                for &idx in chunk {
                    let dropout_seed =
                        derive_seed_n(hp.seed, &[stream::DROPOUT, epoch as u64, position]);
                    let (pred, cache) = forward(
                        &self.model,
                        train_set.input(idx),
                        train_set.timestep,
                        true,
                        dropout_seed,
                    )?;
                    abs_err_sum += (pred - train_set.targets[idx]).abs();
                    caches.push(cache);
                    targets.push(train_set.targets[idx]);
                    position += 1;
                }
                let grads = backward(&self.model, &caches, &targets)?;
                let mut params = self.model.params_flat();
                self.adam
                    .step(&mut params, &grads.flat(), hp.learning_rate)?;
                self.model.set_params_flat(&params)?;
            }

            let train_loss = abs_err_sum / n as f64 + regularizer_term(&self.model);
            let val_loss = validation_mae(&self.model, val_set)?;
            self.epochs_done = epoch;
            ran += 1;
            self.history_train.push(train_loss);
            self.history_val.push(val_loss);

            let (improved, out_of_patience) = self.monitor.observe(epoch, val_loss);
            if improved {
                self.best_params = Some(self.model.params_flat());
            }
            if early_stopping && out_of_patience {
                self.stopped_early = true;
                break;
            }
        }

        self.wall_time_s += started.elapsed().as_secs_f64();
        Ok(ran)
    }

    /// Restores the weights of the best epoch and reports the run.
    pub fn finalize(mut self) -> Result<(LstmModel, TrainReport)> {
        if self.epochs_done == 0 {
            return Err(Error::Internal("finalize before any training epoch".into()));
        }
        if let Some(best) = &self.best_params {
            self.model.set_params_flat(best)?;
        }
        let report = TrainReport {
            train_loss: self.history_train,
            val_loss: self.history_val,
            stopped_epoch: self.epochs_done,
            best_epoch: self.monitor.best_epoch(),
            wall_time_s: self.wall_time_s,
        };
        Ok((self.model, report))
    }
}

/// Trains to `max_epochs` with early stopping and best-weight restoration.
pub fn train(
    model: LstmModel,
    train_set: &WindowedDataset,
    val_set: &WindowedDataset,
) -> Result<(LstmModel, TrainReport)> {
    let max_epochs = model.hp.max_epochs;
    let mut trainer = Trainer::new(model)?;
    trainer.run_until(train_set, val_set, max_epochs, true)?;
    trainer.finalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::init::init_model;
    use crate::neural::types::Hyperparameters;
    use rand::Rng as _;

    #[test]
    fn flat_validation_loss_stops_after_patience_plus_one() {
        let mut m = StopMonitor::new(10);
        let mut stopped_at = None;
        for epoch in 1..=40 {
            let (_, stop) = m.observe(epoch, 0.5);
            if stop {
                stopped_at = Some(epoch);
                break;
            }
        }
        assert_eq!(stopped_at, Some(11));
        assert_eq!(m.best_epoch(), 1);
    }

    #[test]
    fn steady_improvement_never_stops() {
        let mut m = StopMonitor::new(10);
        for epoch in 1..=100 {
            let (improved, stop) = m.observe(epoch, 1.0 - 0.001 * epoch as f64);
            assert!(improved);
            assert!(!stop, "stopped at epoch {epoch}");
        }
        assert_eq!(m.best_epoch(), 100);
    }

    #[test]
    fn sub_threshold_improvement_still_exhausts_patience() {
        // Losses fall by 5e-6 per epoch: every epoch is a strict best, but
        // the cumulative drop stays below the 1e-4 gate for the whole
        // patience window, so the monitor runs out at epoch 11 while the
        // restored epoch is the latest one.
        let mut m = StopMonitor::new(10);
        let mut stopped_at = None;
        for epoch in 1..=40 {
            let (improved, stop) = m.observe(epoch, 1.0 - 5e-6 * epoch as f64);
            assert!(improved);
            if stop {
                stopped_at = Some(epoch);
                break;
            }
        }
        assert_eq!(stopped_at, Some(11));
        assert_eq!(m.best_epoch(), 11);
    }

    #[test]
    fn late_improvement_resets_patience() {
        let mut m = StopMonitor::new(3);
        assert!(!m.observe(1, 1.0).1);
        assert!(!m.observe(2, 1.0).1);
        assert!(!m.observe(3, 1.0).1);
        // Clear improvement resets the counter...
        assert!(!m.observe(4, 0.9).1);
        assert!(!m.observe(5, 0.9).1);
        assert!(!m.observe(6, 0.9).1);
        // ...and it takes another full window to run out again.
        assert!(m.observe(7, 0.9).1);
    }

    /// A small learnable dataset: target is a noiseless linear readout of
    /// the last step of each window.
    fn toy_sets(n_train: usize, n_val: usize, timestep: usize) -> (WindowedDataset, WindowedDataset) {
        let f = 3;
        let mut rng = crate::rng::seeded_rng(42);
        let mut make = |n: usize| {
            let mut inputs = Vec::with_capacity(n * timestep * f);
            let mut targets = Vec::with_capacity(n);
            for _ in 0..n {
                let mut window = Vec::with_capacity(timestep * f);
                for _ in 0..timestep * f {
                    window.push(rng.random_range(0.0..1.0));
                }
                let last = &window[(timestep - 1) * f..];
                targets.push(0.5 * last[0] + 0.3 * last[1] - 0.2 * last[2]);
                inputs.extend_from_slice(&window);
            }
            WindowedDataset {
                inputs,
                targets,
                hole_of_sample: (0..n).collect(),
                n_samples: n,
                timestep,
                n_features: f,
                feature_names: vec!["a".into(), "b".into(), "c".into()],
            }
        };
        (make(n_train), make(n_val))
    }

    fn toy_hp() -> Hyperparameters {
        Hyperparameters {
            n_layers: 1,
            units_per_layer: vec![16],
            dropout_rate: 0.0,
            recurrent_dropout_rate: 0.0,
            regularizer_factor: 0.0,
            max_epochs: 6,
            batch_size: 4,
            seed: 7,
            ..Hyperparameters::default()
        }
    }

    #[test]
    fn training_reduces_loss_and_is_deterministic() {
        let (tr, va) = toy_sets(24, 8, 5);
        let hp = toy_hp();
        let run = || {
            let model = init_model(&hp, 3).unwrap();
            train(model, &tr, &va).unwrap()
        };
        let (m1, r1) = run();
        let (m2, r2) = run();
        assert_eq!(m1.params_flat(), m2.params_flat());
        assert_eq!(r1.train_loss, r2.train_loss);
        assert_eq!(r1.val_loss, r2.val_loss);
        assert!(*r1.val_loss.last().unwrap() < r1.val_loss[0] * 1.05);
        assert!(r1.best_val_loss() <= r1.val_loss[0]);
        assert_eq!(r1.stopped_epoch, 6);
    }

    #[test]
    fn restored_weights_match_best_epoch_params() {
        let (tr, va) = toy_sets(24, 8, 5);
        let mut hp = toy_hp();
        hp.max_epochs = 8;
        let init = init_model(&hp, 3).unwrap();

        let (finished, report) = train(init.clone(), &tr, &va).unwrap();

        // Replay training up to the reported best epoch with stopping
        // disabled: the live weights there must be the restored ones.
        let mut replay = Trainer::new(init).unwrap();
        replay
            .run_until(&tr, &va, report.best_epoch, false)
            .unwrap();
        assert_eq!(finished.params_flat(), replay.model.params_flat());
    }

    #[test]
    fn pause_and_resume_matches_straight_run() {
        let (tr, va) = toy_sets(20, 6, 4);
        let hp = toy_hp();
        let init = init_model(&hp, 3).unwrap();

        let mut straight = Trainer::new(init.clone()).unwrap();
        straight.run_until(&tr, &va, 5, false).unwrap();

        let mut paused = Trainer::new(init).unwrap();
        paused.run_until(&tr, &va, 2, false).unwrap();
        assert_eq!(paused.epochs_done, 2);
        paused.run_until(&tr, &va, 5, false).unwrap();

        assert_eq!(straight.model.params_flat(), paused.model.params_flat());
        assert_eq!(straight.history_val, paused.history_val);
        assert_eq!(straight.adam, paused.adam);
    }

    #[test]
    fn partial_final_batch_is_consumed() {
        // 10 samples with batch size 4 leaves a trailing batch of 2; the
        // epoch must still visit every sample exactly once.
        let (tr, va) = toy_sets(10, 4, 4);
        let hp = toy_hp();
        let mut t = Trainer::new(init_model(&hp, 3).unwrap()).unwrap();
        t.run_until(&tr, &va, 1, false).unwrap();
        assert_eq!(t.epochs_done, 1);
        assert_eq!(t.history_train.len(), 1);
        assert!(t.history_train[0].is_finite());
    }

    #[test]
    fn feature_count_mismatch_rejected() {
        let (tr, va) = toy_sets(12, 4, 4);
        let hp = toy_hp();
        let mut t = Trainer::new(init_model(&hp, 5).unwrap()).unwrap();
        assert!(matches!(
            t.run_until(&tr, &va, 1, false),
            Err(Error::Dimension(_))
        ));
    }
}
