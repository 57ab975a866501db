//! Minibatch gradient descent on the reconstruction loss (BLORC).
//!
//! Each epoch reshuffles the pairs with a generator seeded from
//! `(rng_seed, epoch)`, so a run resumed at epoch `e` draws the same batches
//! as an uninterrupted one. Sample gradients inside a batch are computed in
//! parallel and summed in batch order, which keeps results independent of
//! the thread count.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::data::{common_length, TrainingPair};
use crate::denoise::{AdmmParams, AdmmSystem, WarmStart};
use crate::gradient::{sample_gradient_with, GradientOptions, SampleGradient};
use crate::{defaults, io, seeds, Error, Matrix, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// `I` (rectangular identity when W is not square).
    Identity,
    Zeros,
    /// I.i.d. `N(0, scale²)` entries drawn from the init stream.
    RandomGaussian { scale: f64 },
    FromFile(PathBuf),
}

impl Init {
    pub fn build(&self, rows: usize, n: usize, seed: u64) -> Result<Matrix> {
        let w = match self {
            Init::Identity => Matrix::identity(rows, n),
            Init::Zeros => Matrix::zeros(rows, n),
            Init::RandomGaussian { scale } => {
                if !(scale.is_finite() && *scale >= 0.0) {
                    return Err(Error::invalid(format!("init scale must be nonnegative, got {scale}")));
                }
                let mut rng = seeds::rng(seeds::derive(seed, seeds::PURPOSE_INIT, 0));
                Matrix::from_fn(rows, n, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
            }
            Init::FromFile(path) => io::load_matrix_csv(path)?,
        };
        if w.ncols() != n {
            return Err(Error::invalid(format!(
                "initial W has {} columns, signals have length {n}",
                w.ncols()
            )));
        }
        Ok(w)
    }
}

/// What to do when a sample's lower-level solve fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FailurePolicy {
    /// Drop the sample from its batch mean and log a warning.
    #[default]
    Skip,
    Abort,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub sign_threshold: f64,
    /// Lower-level weight; 1 lets the scale of W carry the regularization.
    pub beta: f64,
    pub admm: AdmmParams,
    pub rng_seed: u64,
    pub init: Init,
    /// Rows of W; `None` means square.
    pub rows: Option<usize>,
    /// Validation loss is logged at epoch 0 and every this many epochs;
    /// 0 turns it off.
    pub validation_every: usize,
    pub failure_policy: FailurePolicy,
    /// Resume each sample's ADMM from its previous solution.
    pub warm_start: bool,
    pub rel_tol: Option<f64>,
    pub checkpoint_dir: Option<PathBuf>,
    /// Save W every this many epochs (0: only at the end).
    pub checkpoint_every: usize,
    /// Number of epochs already done; shuffles continue from here.
    pub start_epoch: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: defaults::BATCH_SIZE,
            epochs: defaults::EPOCHS,
            learning_rate: defaults::LEARNING_RATE,
            sign_threshold: defaults::SIGN_THRESHOLD,
            beta: 1.0,
            admm: AdmmParams::default(),
            rng_seed: 0,
            init: Init::Identity,
            rows: None,
            validation_every: 10,
            failure_policy: FailurePolicy::Skip,
            warm_start: true,
            rel_tol: None,
            checkpoint_dir: None,
            checkpoint_every: 0,
            start_epoch: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.sign_threshold > 0.0 && self.sign_threshold.is_finite()) {
            return Err(Error::invalid(format!("sign_threshold must be positive, got {}", self.sign_threshold)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid(format!("beta must be positive, got {}", self.beta)));
        }
        if self.rows == Some(0) {
            return Err(Error::invalid("W needs at least one row"));
        }
        self.admm.validate()
    }

    fn gradient_options(&self) -> GradientOptions {
        GradientOptions {
            beta: self.beta,
            gamma: self.sign_threshold,
            rel_tol: self.rel_tol,
            admm: self.admm,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub first_epoch: usize,
    /// Training loss at the initial W, over the whole training set.
    pub initial_loss: f64,
    /// Mean of the per-sample losses seen during each epoch.
    pub train_loss: Vec<f64>,
    /// `(epoch, loss)`; epoch `first_epoch` is the initial W.
    pub val_loss: Vec<(usize, f64)>,
    pub epoch_seconds: Vec<f64>,
    /// Samples per epoch with some `|[Wx*]_i|` near the threshold.
    pub boundary_warnings: Vec<usize>,
    /// Samples per epoch dropped by [`FailurePolicy::Skip`].
    pub skipped: Vec<usize>,
}

impl TrainLog {
    pub fn final_loss(&self) -> Option<f64> {
        self.train_loss.last().copied()
    }

    /// `epoch,train_loss,val_loss`. The first row is the initial W; empty
    /// fields mean "not measured".
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss\n");
        let val = |e: usize| {
            self.val_loss
                .iter()
                .find(|(ve, _)| *ve == e)
                .map_or(String::new(), |(_, v)| v.to_string())
        };
        let _ = writeln!(out, "{},{},{}", self.first_epoch, self.initial_loss, val(self.first_epoch));
        for (i, loss) in self.train_loss.iter().enumerate() {
            let e = self.first_epoch + i + 1;
            let _ = writeln!(out, "{e},{loss},{}", val(e));
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Mean of `½‖x*(W, y) − x‖²` over `pairs` with `β = 1`.
pub fn evaluate_loss(w: &Matrix, pairs: &[TrainingPair], params: &AdmmParams) -> Result<f64> {
    evaluate_loss_beta(w, 1.0, pairs, params)
}

pub fn evaluate_loss_beta(w: &Matrix, beta: f64, pairs: &[TrainingPair], params: &AdmmParams) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::invalid("no pairs to evaluate"));
    }
    let n = common_length(pairs)?;
    if w.ncols() != n {
        return Err(Error::invalid(format!("W has {} columns, signals have length {n}", w.ncols())));
    }
    let system = AdmmSystem::new(w, params.rho)?;
    let losses = pairs
        .par_iter()
        .map(|p| {
            let r = system.solve(&p.y_noisy, beta, params, None)?;
            Ok(0.5 * (r.x_star - &p.x_clean).norm_squared())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Trains from `config.init`.
pub fn blorc_train(
    dataset: &[TrainingPair],
    config: &TrainConfig,
    validation: Option<&[TrainingPair]>,
) -> Result<(Matrix, TrainLog)> {
    config.validate()?;
    let n = common_length(dataset)?;
    let w0 = config.init.build(config.rows.unwrap_or(n), n, config.rng_seed)?;
    blorc_train_from(w0, dataset, config, validation)
}

/// Trains from an explicit starting W (used for resuming).
pub fn blorc_train_from(
    mut w: Matrix,
    dataset: &[TrainingPair],
    config: &TrainConfig,
    validation: Option<&[TrainingPair]>,
) -> Result<(Matrix, TrainLog)> {
    config.validate()?;
    let n = common_length(dataset)?;
    if w.ncols() != n {
        return Err(Error::invalid(format!("W has {} columns, signals have length {n}", w.ncols())));
    }
    if let Some(v) = validation {
        if common_length(v)? != n {
            return Err(Error::invalid("validation signals differ in length from training signals"));
        }
    }
    let opts = config.gradient_options();
    let policy = config.failure_policy;
    let mut log = TrainLog {
        first_epoch: config.start_epoch,
        initial_loss: mean_loss(&w, dataset, config)?,
        ..TrainLog::default()
    };
    let validate_now = |e: usize| config.validation_every > 0 && (e - config.start_epoch).is_multiple_of(config.validation_every);
    if let Some(v) = validation.filter(|_| validate_now(config.start_epoch)) {
        log.val_loss.push((config.start_epoch, mean_loss(&w, v, config)?));
    }
    if let Some(dir) = &config.checkpoint_dir {
        std::fs::create_dir_all(dir)?;
    }

    let mut warm: Vec<Option<WarmStart>> = vec![None; dataset.len()];
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for epoch in config.start_epoch..config.start_epoch + config.epochs {
        let started = Instant::now();
        let mut shuffle = seeds::rng(seeds::derive(config.rng_seed, seeds::PURPOSE_SHUFFLE, epoch as u64));
        order.sort_unstable();
        order.shuffle(&mut shuffle);

        let mut loss_sum = 0.0;
        let mut counted = 0usize;
        let mut boundary = 0usize;
        let mut skipped = 0usize;
        for batch in order.chunks(config.batch_size) {
            let system = AdmmSystem::new(&w, config.admm.rho)?;
            let results: Vec<Result<SampleGradient>> = batch
                .par_iter()
                .map(|&i| {
                    let start = if config.warm_start { warm[i].as_ref() } else { None };
                    sample_gradient_with(&system, &dataset[i], &opts, start)
                })
                .collect();
            let mut grad_sum = Matrix::zeros(w.nrows(), w.ncols());
            let mut used = 0usize;
            for (&i, r) in batch.iter().zip(results) {
                match r {
                    Ok(sg) => {
                        grad_sum += &sg.grad_w;
                        loss_sum += sg.loss;
                        counted += 1;
                        used += 1;
                        if sg.sign_pattern.ambiguous > 0 {
                            boundary += 1;
                        }
                        if config.warm_start {
                            warm[i] = Some(sg.warm_start);
                        }
                    }
                    Err(e) if policy == FailurePolicy::Skip => {
                        log::warn!("epoch {epoch}: skipping sample {i}: {e}");
                        skipped += 1;
                        warm[i] = None;
                    }
                    Err(e) => return Err(e),
                }
            }
            if used > 0 {
                w -= grad_sum * (config.learning_rate / used as f64);
            }
        }
        if !w.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid(format!("W became non-finite in epoch {epoch}; lower the learning rate")));
        }

        let done = epoch + 1;
        let epoch_loss = if counted > 0 { loss_sum / counted as f64 } else { f64::NAN };
        log.train_loss.push(epoch_loss);
        log.boundary_warnings.push(boundary);
        log.skipped.push(skipped);
        if let Some(v) = validation.filter(|_| validate_now(done)) {
            log.val_loss.push((done, mean_loss(&w, v, config)?));
        }
        log.epoch_seconds.push(started.elapsed().as_secs_f64());
        log::info!(
            "epoch {done}: train loss {epoch_loss:.6e}, {boundary} near-threshold, {skipped} skipped, {:.2}s",
            started.elapsed().as_secs_f64()
        );
        if let Some(dir) = &config.checkpoint_dir {
            let last = done == config.start_epoch + config.epochs;
            if last || (config.checkpoint_every > 0 && done % config.checkpoint_every == 0) {
                io::save_matrix_csv(&checkpoint_path(dir, done), &w)?;
                log.save_csv(&dir.join("train_log.csv"))?;
            }
        }
    }
    Ok((w, log))
}

/// `<dir>/W_epoch00012.csv`.
pub fn checkpoint_path(dir: &Path, epoch: usize) -> PathBuf {
    dir.join(format!("W_epoch{epoch:05}.csv"))
}

/// Loss over `pairs` honoring the failure policy.
fn mean_loss(w: &Matrix, pairs: &[TrainingPair], config: &TrainConfig) -> Result<f64> {
    let system = AdmmSystem::new(w, config.admm.rho)?;
    let results: Vec<Result<f64>> = pairs
        .par_iter()
        .map(|p| {
            let r = system.solve(&p.y_noisy, config.beta, &config.admm, None)?;
            Ok(0.5 * (r.x_star - &p.x_clean).norm_squared())
        })
        .collect();
    let mut sum = 0.0;
    let mut count = 0usize;
    for r in results {
        match r {
            Ok(v) => {
                sum += v;
                count += 1;
            }
            Err(e) if config.failure_policy == FailurePolicy::Skip => log::warn!("loss evaluation skipped a sample: {e}"),
            Err(e) => return Err(e),
        }
    }
    if count == 0 {
        return Err(Error::invalid("every loss evaluation failed"));
    }
    Ok(sum / count as f64)
}
