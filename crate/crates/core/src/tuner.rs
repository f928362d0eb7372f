//! Random hyperparameter search with single-bracket successive halving.
//!
//! Every trial trains to the first rung's epoch budget; the best
//! `keep_fraction` advance, resuming from their saved weights and optimizer
//! state, until the final rung runs with full early stopping. With a fixed
//! master seed the whole search is reproducible, including across thread
//! counts: per-trial seeds are derived by counter and results are reduced
//! in trial-index order.

use std::fs;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::WindowedDataset;
use crate::error::{Error, Result};
use crate::neural::init::init_model;
use crate::neural::train::Trainer;
use crate::neural::types::{Activation, Hyperparameters, Regularizer};
use crate::rng::{derive_seed_n, seeded_rng, stream};

/// Ranges that sampled configurations are drawn from. Bounds must sit
/// inside the global [`Hyperparameters`] invariants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSpace {
    pub min_layers: usize,
    pub max_layers: usize,
    pub min_units: usize,
    pub max_units: usize,
    pub activations: Vec<Activation>,
    pub max_dropout: f64,
    pub max_recurrent_dropout: f64,
    pub regularizers: Vec<Regularizer>,
    pub factor_grid: Vec<f64>,
    pub learning_rate_min: f64,
    pub learning_rate_max: f64,
    /// Carried verbatim into every sampled configuration.
    pub batch_size: usize,
    pub patience: usize,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            min_layers: 1,
            max_layers: 10,
            min_units: 16,
            max_units: 128,
            activations: vec![Activation::Relu, Activation::Tanh],
            max_dropout: 0.5,
            max_recurrent_dropout: 0.5,
            regularizers: vec![Regularizer::L1, Regularizer::L2],
            factor_grid: vec![1e-5, 1e-4, 1e-3, 1e-2],
            learning_rate_min: 1e-4,
            learning_rate_max: 1e-2,
            batch_size: 32,
            patience: 10,
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        if self.min_layers < 1 || self.min_layers > self.max_layers || self.max_layers > 10 {
            return Err(Error::Config(format!(
                "layer range [{}, {}] must sit inside [1, 10]",
                self.min_layers, self.max_layers
            )));
        }
        if self.min_units < 16 || self.min_units > self.max_units || self.max_units > 128 {
            return Err(Error::Config(format!(
                "unit range [{}, {}] must sit inside [16, 128]",
                self.min_units, self.max_units
            )));
        }
        if self.activations.is_empty() || self.regularizers.is_empty() {
            return Err(Error::Config(
                "activation and regularizer choices must be non-empty".into(),
            ));
        }
        for (name, v) in [
            ("max_dropout", self.max_dropout),
            ("max_recurrent_dropout", self.max_recurrent_dropout),
        ] {
            if !(0.0..=0.5).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 0.5], got {v}")));
            }
        }
        if self.factor_grid.is_empty()
            || self.factor_grid.iter().any(|f| !f.is_finite() || *f < 0.0)
        {
            return Err(Error::Config(
                "regularizer factor grid must be non-empty, finite, non-negative".into(),
            ));
        }
        if !(self.learning_rate_min >= 1e-4
            && self.learning_rate_min <= self.learning_rate_max
            && self.learning_rate_max <= 1e-2)
        {
            return Err(Error::Config(format!(
                "learning-rate range [{}, {}] must sit inside [1e-4, 1e-2]",
                self.learning_rate_min, self.learning_rate_max
            )));
        }
        if self.batch_size == 0 || self.patience == 0 {
            return Err(Error::Config(
                "batch_size and patience must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Draws one configuration. Uniform over the discrete choices and dropout
/// ranges, log-uniform over the learning rate; the same seed always yields
/// the same configuration. The draw order is fixed: depth, per-layer
/// widths, activation, dropout, recurrent dropout, regularizer kind,
/// factor, learning rate.
pub fn sample_config(space: &SearchSpace, rng_seed: u64) -> Result<Hyperparameters> {
    space.validate()?;
    let mut rng = seeded_rng(rng_seed);
    let n_layers = rng.random_range(space.min_layers..=space.max_layers);
    let units_per_layer: Vec<usize> = (0..n_layers)
        .map(|_| rng.random_range(space.min_units..=space.max_units))
        .collect();
    let activation = space.activations[rng.random_range(0..space.activations.len())];
    let dropout_rate = if space.max_dropout > 0.0 {
        rng.random_range(0.0..=space.max_dropout)
    } else {
        0.0
    };
    let recurrent_dropout_rate = if space.max_recurrent_dropout > 0.0 {
        rng.random_range(0.0..=space.max_recurrent_dropout)
    } else {
        0.0
    };
    let regularizer = space.regularizers[rng.random_range(0..space.regularizers.len())];
    let regularizer_factor = space.factor_grid[rng.random_range(0..space.factor_grid.len())];
    let learning_rate = rng
        .random_range(space.learning_rate_min.ln()..=space.learning_rate_max.ln())
        .exp()
        .clamp(space.learning_rate_min, space.learning_rate_max);

    let hp = Hyperparameters {
        n_layers,
        units_per_layer,
        activation,
        dropout_rate,
        recurrent_dropout_rate,
        regularizer,
        regularizer_factor,
        learning_rate,
        max_epochs: 100,
        patience: space.patience,
        batch_size: space.batch_size,
        seed: rng_seed,
    };
    hp.validate()?;
    Ok(hp)
}

/// One trial's outcome. Wall time is informational and excluded from
/// determinism comparisons.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub config: Hyperparameters,
    pub best_val_loss: f64,
    /// Validation loss this trial held when the first rung's budget was
    /// exhausted, before any halving decision.
    pub rung0_val_loss: f64,
    pub epochs_run: usize,
    /// Informational; kept out of the JSON report (the CSV leaderboard
    /// carries timing) so reports stay byte-identical across reruns.
    #[serde(default, skip_serializing)]
    pub wall_time_s: f64,
    /// Index of the highest rung this trial entered (0-based).
    pub last_rung: usize,
    pub stopped_early: bool,
}

/// Full search outcome: the winner, every trial in index order, and the
/// budget ledger.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best: TrialResult,
    pub trials: Vec<TrialResult>,
    /// Cumulative epoch targets, as passed in.
    pub rung_targets: Vec<usize>,
    /// Trials entering each rung.
    pub trials_per_rung: Vec<usize>,
    /// `sum over rungs of trials_per_rung[r] * (target[r] - target[r-1])`.
    pub planned_epochs: usize,
    /// Actual epochs executed over all trials; below `planned_epochs` only
    /// when final-rung early stopping ended a trial before its target.
    pub epochs_consumed: usize,
    /// Median of all trials' validation losses as of the first rung.
    pub rung0_median_val_loss: f64,
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("comparable losses"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Runs the search: `n_trials` random configurations through the `rungs`
/// schedule of cumulative epoch targets, keeping the best `keep_fraction`
/// (by lowest validation loss, ties to lower index) after each rung.
/// `threads` > 1 trains the trials of a rung concurrently without changing
/// any output.
#[allow(clippy::too_many_arguments)]
pub fn run_search(
    space: &SearchSpace,
    train: &WindowedDataset,
    val: &WindowedDataset,
    n_trials: usize,
    rungs: &[usize],
    keep_fraction: f64,
    master_seed: u64,
    threads: usize,
) -> Result<SearchOutcome> {
    space.validate()?;
    if n_trials == 0 {
        return Err(Error::Config("n_trials must be at least 1".into()));
    }
    if rungs.is_empty() {
        return Err(Error::Config("the rung schedule must not be empty".into()));
    }
    if rungs[0] == 0 || rungs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!(
            "rung epoch targets must be positive and strictly increasing, got {rungs:?}"
        )));
    }
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::Config(format!(
            "keep_fraction must lie in (0, 1], got {keep_fraction}"
        )));
    }
    let threads = threads.max(1);

    let mut configs = Vec::with_capacity(n_trials);
    let mut trainers: Vec<Option<Trainer>> = Vec::with_capacity(n_trials);
    for i in 0..n_trials {
        let trial_seed = derive_seed_n(master_seed, &[stream::TUNER, i as u64]);
        let hp = sample_config(space, trial_seed)?;
        let model = init_model(&hp, train.n_features)?;
        configs.push(hp);
        trainers.push(Some(Trainer::new(model)?));
    }

    let mut alive: Vec<usize> = (0..n_trials).collect();
    let mut trials_per_rung = Vec::with_capacity(rungs.len());
    let mut planned_epochs = 0usize;
    let mut last_rung_of = vec![0usize; n_trials];
    let mut rung0_losses = Vec::new();
    let mut prev_target = 0usize;

    for (r, &target) in rungs.iter().enumerate() {
        let is_final = r + 1 == rungs.len();
        trials_per_rung.push(alive.len());
        planned_epochs += alive.len() * (target - prev_target);
        for &i in &alive {
            last_rung_of[i] = r;
        }

        // Train every live trial to the cumulative target, possibly in
        // parallel; trainers go back to their slots so reduction order is
        // the trial index regardless of scheduling.
        let mut work: Vec<(usize, Trainer)> = alive
            .iter()
            .map(|&i| (i, trainers[i].take().expect("live trial has a trainer")))
            .collect();
        if threads == 1 || work.len() == 1 {
            for (_, t) in work.iter_mut() {
                t.run_until(train, val, target, is_final)?;
            }
        } else {
            let n_workers = threads.min(work.len());
            let chunk_len = work.len().div_ceil(n_workers);
            let mut failure: Option<Error> = None;
            let chunks: Vec<&mut [(usize, Trainer)]> = work.chunks_mut(chunk_len).collect();
            std::thread::scope(|scope| {
                let handles: Vec<_> = chunks
                    .into_iter()
                    .map(|chunk| {
                        scope.spawn(move || -> Result<()> {
                            for (_, t) in chunk.iter_mut() {
                                t.run_until(train, val, target, is_final)?;
                            }
                            Ok(())
                        })
                    })
                    .collect();
                for h in handles {
                    if let Err(e) = h.join().expect("search worker panicked") {
                        failure.get_or_insert(e);
                    }
                }
            });
            if let Some(e) = failure {
                return Err(e);
            }
        }
        for (i, t) in work {
            trainers[i] = Some(t);
        }

        if r == 0 {
            rung0_losses = alive
                .iter()
                .map(|&i| trainers[i].as_ref().unwrap().best_val_loss())
                .collect();
        }

        if !is_final {
            let keep = ((alive.len() as f64) * keep_fraction).ceil() as usize;
            let mut ranked = alive.clone();
            ranked.sort_by(|&a, &b| {
                let la = trainers[a].as_ref().unwrap().best_val_loss();
                let lb = trainers[b].as_ref().unwrap().best_val_loss();
                la.partial_cmp(&lb)
                    .expect("comparable losses")
                    .then(a.cmp(&b))
            });
            ranked.truncate(keep.max(1));
            ranked.sort_unstable();
            alive = ranked;
        }
        prev_target = target;
    }

    let mut epochs_consumed = 0usize;
    let trials: Vec<TrialResult> = (0..n_trials)
        .map(|i| {
            let t = trainers[i].as_ref().unwrap();
            epochs_consumed += t.epochs_done;
            TrialResult {
                trial: i,
                config: configs[i].clone(),
                best_val_loss: t.best_val_loss(),
                rung0_val_loss: rung0_losses[i],
                epochs_run: t.epochs_done,
                wall_time_s: t.wall_time_s(),
                last_rung: last_rung_of[i],
                stopped_early: t.stopped_early,
            }
        })
        .collect();

    let final_rung = rungs.len() - 1;
    let best = trials
        .iter()
        .filter(|t| t.last_rung == final_rung)
        .min_by(|a, b| {
            a.best_val_loss
                .partial_cmp(&b.best_val_loss)
                .expect("comparable losses")
                .then(a.trial.cmp(&b.trial))
        })
        .expect("at least one trial reaches the final rung")
        .clone();

    Ok(SearchOutcome {
        best,
        trials,
        rung_targets: rungs.to_vec(),
        trials_per_rung,
        planned_epochs,
        epochs_consumed,
        rung0_median_val_loss: median(rung0_losses),
    })
}

/// Writes the full outcome as pretty JSON.
pub fn export_search_report(outcome: &SearchOutcome, path: &Path) -> Result<()> {
    let mut s = serde_json::to_string_pretty(outcome)
        .map_err(|e| Error::Internal(format!("search report serialization failed: {e}")))?;
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Writes a `trial,val_loss,epochs,seconds` leaderboard, best first.
pub fn export_leaderboard(outcome: &SearchOutcome, path: &Path) -> Result<()> {
    let mut rows: Vec<&TrialResult> = outcome.trials.iter().collect();
    rows.sort_by(|a, b| {
        a.best_val_loss
            .partial_cmp(&b.best_val_loss)
            .expect("comparable losses")
            .then(a.trial.cmp(&b.trial))
    });
    let mut out = String::from("trial,val_loss,epochs,seconds\n");
    for t in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            t.trial, t.best_val_loss, t.epochs_run, t.wall_time_s
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
