//! Subcommand implementations.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, ValueEnum};
use rand::Rng;
use serde::{Deserialize, Serialize};
use tlearn::baselines::{
    dct_matrix, finite_difference_matrix, golden_section_lambda, unsupervised_orthogonal_learn, UnsupervisedConfig,
};
use tlearn::data::{add_noise_image, extract_patches, SignalSpec, TrainingPair};
use tlearn::denoise::AdmmSystem;
use tlearn::eval::{denoise_image, denoise_testset, noise_sweep, EvalReport, SweepData};
use tlearn::gradient::{gradcheck_instance, GradcheckConfig};
use tlearn::io::{self, PgmFormat};
use tlearn::train::{blorc_train, blorc_train_from, checkpoint_path, TrainConfig};
use tlearn::{defaults, seeds, Matrix};

use crate::config::{init_from, merge, resolve_sigma, AdmmArgs, GoldenArgs, InitKind, PolicyArg};

fn need<T: Clone>(v: &Option<T>, name: &str) -> Result<T> {
    v.clone().with_context(|| format!("missing required setting `{name}`"))
}

/// Pairs from a dataset directory. Vector entries are used as they are;
/// image entries are cut into `patch × patch` patch pairs.
fn load_pairs(dir: &Path, patch: usize, stride: usize) -> Result<Vec<TrainingPair>> {
    let entries = io::load_dataset_entries(dir).with_context(|| format!("loading dataset {}", dir.display()))?;
    ensure!(!entries.is_empty(), "dataset {} is empty", dir.display());
    let is_vector = |m: &Matrix| m.nrows() == 1 || m.ncols() == 1;
    if entries.iter().all(|e| is_vector(&e.clean)) {
        return Ok(io::load_dataset(dir)?);
    }
    let mut pairs = Vec::new();
    for e in &entries {
        let (_, xs) = extract_patches(&e.clean, patch, stride).with_context(|| format!("entry {}", e.id))?;
        let (_, ys) = extract_patches(&e.noisy, patch, stride)?;
        for (x, y) in xs.into_iter().zip(ys) {
            pairs.push(TrainingPair::new(x, y)?);
        }
    }
    Ok(pairs)
}

#[derive(ValueEnum, Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum DataKind {
    Piecewise,
    Dct,
    ImagePatches,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct GenDataArgs {
    #[arg(long, value_enum)]
    pub kind: Option<DataKind>,
    /// Signal length (1D kinds)
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of pairs, or of images for image-patches
    #[arg(long)]
    pub count: Option<usize>,
    /// Noise standard deviation for signals normalized to peak 1
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Noise standard deviation on the 0-255 scale
    #[arg(long)]
    pub sigma255: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fewest pieces (piecewise) or harmonics (dct)
    #[arg(long)]
    pub min_parts: Option<usize>,
    #[arg(long)]
    pub max_parts: Option<usize>,
    #[arg(long)]
    pub image_side: Option<usize>,
    #[arg(long)]
    pub patch: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
}

/// Two-level stripes with random width and orientation.
fn striped_image(side: usize, seed: u64) -> Matrix {
    let mut rng = seeds::rng(seed);
    let width = rng.random_range(2..=8usize);
    let vertical = rng.random::<bool>();
    let (lo, hi) = (rng.random_range(0.1..0.4), rng.random_range(0.6..0.9));
    Matrix::from_fn(side, side, |r, c| {
        let t = if vertical { c } else { r };
        if (t / width) % 2 == 0 {
            lo
        } else {
            hi
        }
    })
}

pub fn gen_data(flags: &GenDataArgs, cfg: Option<&Path>) -> Result<()> {
    let a = merge(flags, cfg)?;
    let out = need(&a.out, "out")?;
    let kind = a.kind.unwrap_or(DataKind::Piecewise);
    let count = a.count.unwrap_or(defaults::PAIR_COUNT);
    let seed = a.seed.unwrap_or(defaults::ROOT_SEED);
    let sigma = resolve_sigma(a.sigma, a.sigma255, defaults::SIGMA)?;
    ensure!(count > 0, "count must be positive");

    let pairs = match kind {
        DataKind::Piecewise | DataKind::Dct => {
            let n = a.n.unwrap_or(defaults::SIGNAL_LEN);
            let mut spec = match kind {
                DataKind::Piecewise => SignalSpec::piecewise(n, sigma),
                _ => SignalSpec::dct(n, sigma),
            };
            spec.min_parts = a.min_parts.unwrap_or(spec.min_parts);
            spec.max_parts = a.max_parts.unwrap_or(spec.max_parts);
            spec.generate(seed, 0, count)?
        }
        DataKind::ImagePatches => {
            let side = a.image_side.unwrap_or(defaults::IMAGE_SIDE);
            let (p, stride) = (
                a.patch.unwrap_or(defaults::PATCH_SIDE),
                a.stride.unwrap_or(defaults::PATCH_STRIDE),
            );
            let mut images = Vec::with_capacity(count);
            let mut pairs = Vec::new();
            for i in 0..count as u64 {
                let clean = striped_image(side, seeds::derive(seed, seeds::PURPOSE_DATA, i));
                let noisy = add_noise_image(&clean, sigma, seeds::derive(seed, seeds::PURPOSE_NOISE, i))?;
                let (_, xs) = extract_patches(&clean, p, stride)?;
                let (_, ys) = extract_patches(&noisy, p, stride)?;
                for (x, y) in xs.into_iter().zip(ys) {
                    pairs.push(TrainingPair::new(x, y)?);
                }
                images.push((format!("image{i:05}"), clean, noisy));
            }
            io::save_image_dataset(&out.join("images"), &images, PgmFormat::Binary)?;
            pairs
        }
    };
    io::save_dataset(&out, &pairs)?;
    eprintln!(
        "wrote {} pairs of length {} (sigma {sigma}) to {}",
        pairs.len(),
        pairs[0].len(),
        out.display()
    );
    Ok(())
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct TrainArgs {
    /// Training dataset directory
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Validation dataset directory
    #[arg(long)]
    pub val_data: Option<PathBuf>,
    /// Output directory for W, checkpoints and the training log
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Total epochs, counting any already done before a resume
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub sign_threshold: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, value_enum)]
    pub init: Option<InitKind>,
    /// Standard deviation for --init random
    #[arg(long)]
    pub init_scale: Option<f64>,
    #[arg(long)]
    pub init_file: Option<PathBuf>,
    /// Rows of W (default: square)
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub validation_every: Option<usize>,
    #[arg(long, value_enum)]
    pub failure_policy: Option<PolicyArg>,
    #[arg(long)]
    pub warm_start: Option<bool>,
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// Checkpoint to continue from (a W_epochNNNNN.csv file)
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Epochs already done by the checkpoint (default: from its file name)
    #[arg(long)]
    pub start_epoch: Option<usize>,
    /// Relative rank cutoff for W0
    #[arg(long)]
    pub rel_tol: Option<f64>,
    /// Patch side when the dataset holds images
    #[arg(long)]
    pub patch: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[command(flatten)]
    #[serde(default)]
    pub admm: AdmmArgs,
}

fn epoch_from_name(path: &Path) -> Option<usize> {
    path.file_stem()?.to_str()?.strip_prefix("W_epoch")?.parse().ok()
}

pub fn train(flags: &TrainArgs, cfg: Option<&Path>) -> Result<()> {
    let a = merge(flags, cfg)?;
    let data = need(&a.data, "data")?;
    let out = need(&a.out, "out")?;
    let (p, stride) = (
        a.patch.unwrap_or(defaults::PATCH_SIDE),
        a.stride.unwrap_or(defaults::PATCH_STRIDE),
    );
    let pairs = load_pairs(&data, p, stride)?;
    let val = a.val_data.as_deref().map(|d| load_pairs(d, p, stride)).transpose()?;
    let d = TrainConfig::default();
    let mut config = TrainConfig {
        batch_size: a.batch_size.unwrap_or(d.batch_size),
        epochs: a.epochs.unwrap_or(d.epochs),
        learning_rate: a.learning_rate.unwrap_or(d.learning_rate),
        sign_threshold: a.sign_threshold.unwrap_or(d.sign_threshold),
        beta: a.beta.unwrap_or(d.beta),
        admm: a.admm.params()?,
        rng_seed: a.seed.unwrap_or(defaults::ROOT_SEED),
        init: init_from(a.init, a.init_scale, a.init_file.as_deref())?,
        rows: a.rows,
        validation_every: a.validation_every.unwrap_or(d.validation_every),
        failure_policy: a.failure_policy.map_or(d.failure_policy, Into::into),
        warm_start: a.warm_start.unwrap_or(d.warm_start),
        rel_tol: a.rel_tol,
        checkpoint_dir: Some(out.clone()),
        checkpoint_every: a.checkpoint_every.unwrap_or(0),
        start_epoch: 0,
    };
    let started = Instant::now();
    let (w, log) = match &a.resume {
        Some(path) => {
            let start = match a.start_epoch.or_else(|| epoch_from_name(path)) {
                Some(s) => s,
                None => bail!("cannot tell the epoch of {}; pass --start-epoch", path.display()),
            };
            ensure!(start < config.epochs, "checkpoint is at epoch {start}, nothing left of {}", config.epochs);
            config.epochs -= start;
            config.start_epoch = start;
            let w0 = io::load_matrix_csv(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
            blorc_train_from(w0, &pairs, &config, val.as_deref())?
        }
        None => blorc_train(&pairs, &config, val.as_deref())?,
    };
    io::save_matrix_csv(&out.join("W.csv"), &w)?;
    log.save_csv(&out.join("train_log.csv"))?;
    let last = config.start_epoch + config.epochs;
    eprintln!(
        "trained {}x{} W on {} pairs for {} epochs in {:.1}s: loss {:.6e} -> {:.6e}; saved {} and {}",
        w.nrows(),
        w.ncols(),
        pairs.len(),
        config.epochs,
        started.elapsed().as_secs_f64(),
        log.initial_loss,
        log.final_loss().unwrap_or(f64::NAN),
        out.join("W.csv").display(),
        checkpoint_path(&out, last).display()
    );
    Ok(())
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct GradcheckArgs {
    /// Signal lengths to check
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Instances per size
    #[arg(long)]
    pub count: Option<usize>,
    /// Seed of the first instance
    #[arg(long)]
    pub seed: Option<u64>,
    /// Central-difference step
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Sign threshold (default 20 steps)
    #[arg(long)]
    pub gamma: Option<f64>,
    /// CSV report path
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn gradcheck(flags: &GradcheckArgs, cfg: Option<&Path>) -> Result<()> {
    let a = merge(flags, cfg)?;
    let out = need(&a.out, "out")?;
    let sizes = a.sizes.clone().unwrap_or_else(|| defaults::GRADCHECK_SIZES.to_vec());
    let count = a.count.unwrap_or(defaults::GRADCHECK_INSTANCES);
    let first = a.seed.unwrap_or(defaults::ROOT_SEED);
    ensure!(!sizes.is_empty() && count > 0, "nothing to check");
    let mut csv = String::from("n,seed,max_abs_err,blorc_time_ms,fd_time_ms\n");
    for &n in &sizes {
        let mut config = GradcheckConfig::new(n);
        if let Some(step) = a.step {
            ensure!(step > 0.0, "step must be positive");
            config.step = step;
            config.opts.gamma = defaults::GRADCHECK_GAMMA_STEPS * step;
        }
        if let Some(g) = a.gamma {
            config.opts.gamma = g;
        }
        config.sigma = a.sigma.unwrap_or(config.sigma);
        let (mut worst, mut boundary) = (0.0f64, Vec::new());
        let mut analytic_ms = 0.0;
        for seed in first..first + count as u64 {
            let r = gradcheck_instance(&config, seed)?;
            let _ = writeln!(csv, "{},{},{},{},{}", r.n, r.seed, r.max_abs_err, r.analytic_ms, r.fd_ms);
            analytic_ms += r.analytic_ms;
            if r.boundary {
                boundary.push(seed);
            } else {
                worst = worst.max(r.max_abs_err);
            }
        }
        eprintln!(
            "n={n}: max abs error {worst:.3e} over {} instances, mean analytic time {:.3} ms, {} near the threshold {boundary:?}",
            count - boundary.len(),
            analytic_ms / count as f64,
            boundary.len()
        );
    }
    fs::write(&out, csv).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct DenoiseArgs {
    /// W as CSV
    #[arg(long)]
    pub transform: Option<PathBuf>,
    /// Signals as CSV rows, or an image (.pgm, or .csv with --image)
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output path; .pgm writes an image, anything else CSV
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Treat a CSV input as an image
    #[arg(long)]
    pub image: Option<bool>,
    /// Patch side (default: square root of the column count of W)
    #[arg(long)]
    pub patch: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[command(flatten)]
    #[serde(default)]
    pub admm: AdmmArgs,
}

fn has_ext(p: &Path, ext: &str) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

pub fn denoise(flags: &DenoiseArgs, cfg: Option<&Path>) -> Result<()> {
    let a = merge(flags, cfg)?;
    let tpath = need(&a.transform, "transform")?;
    let input = need(&a.input, "input")?;
    let out = need(&a.out, "out")?;
    let w = io::load_matrix_csv(&tpath).with_context(|| format!("loading transform {}", tpath.display()))?;
    let beta = a.beta.unwrap_or(1.0);
    let params = a.admm.params()?;
    let is_image = has_ext(&input, "pgm") || a.image.unwrap_or(false);
    let result = if is_image {
        let img = io::load_image(&input)?;
        let p = match a.patch {
            Some(p) => p,
            None => {
                let p = (w.ncols() as f64).sqrt().round() as usize;
                ensure!(p * p == w.ncols(), "W has {} columns, not a square patch size", w.ncols());
                p
            }
        };
        let stride = a.stride.unwrap_or(defaults::PATCH_STRIDE.min(p));
        denoise_image(&w, &img, p, stride, beta, &params)?
    } else {
        let signals = io::load_matrix_csv(&input)?;
        ensure!(
            signals.ncols() == w.ncols(),
            "signals have length {} but W has {} columns",
            signals.ncols(),
            w.ncols()
        );
        let system = AdmmSystem::new(&w, params.rho)?;
        let mut out_m = Matrix::zeros(signals.nrows(), signals.ncols());
        for r in 0..signals.nrows() {
            let x = system.solve(&signals.row(r).transpose(), beta, &params, None)?.x_star;
            out_m.set_row(r, &x.transpose());
        }
        out_m
    };
    if has_ext(&out, "pgm") {
        io::save_pgm(&out, &result, PgmFormat::Binary)?;
    } else {
        io::save_matrix_csv(&out, &result)?;
    }
    eprintln!(
        "denoised {} ({}x{}) with a {}x{} transform into {}",
        input.display(),
        result.nrows(),
        result.ncols(),
        w.nrows(),
        w.ncols(),
        out.display()
    );
    Ok(())
}

#[derive(ValueEnum, Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    /// Finite differences
    Tv,
    Dct,
    /// Orthogonal transform learned from clean tuning signals
    Unsupervised,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct EvalArgs {
    /// Test dataset directory
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Learned W as CSV
    #[arg(long)]
    pub transform: Option<PathBuf>,
    /// Weight applied to the learned W
    #[arg(long)]
    pub beta: Option<f64>,
    /// Baselines to tune by golden-section search and report
    #[arg(long, value_enum, value_delimiter = ',')]
    pub baselines: Option<Vec<Baseline>>,
    /// Dataset used to tune baseline weights (and learn the unsupervised one)
    #[arg(long)]
    pub tune_data: Option<PathBuf>,
    /// Output directory for reports
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub patch: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[command(flatten)]
    #[serde(default)]
    pub admm: AdmmArgs,
    #[command(flatten)]
    #[serde(default)]
    pub golden: GoldenArgs,
}

pub fn eval(flags: &EvalArgs, cfg: Option<&Path>) -> Result<()> {
    let a = merge(flags, cfg)?;
    let data = need(&a.data, "data")?;
    let out = need(&a.out, "out")?;
    let (p, stride) = (
        a.patch.unwrap_or(defaults::PATCH_SIDE),
        a.stride.unwrap_or(defaults::PATCH_STRIDE),
    );
    let test = load_pairs(&data, p, stride)?;
    let n = test[0].len();
    let params = a.admm.params()?;
    let baselines = a.baselines.clone().unwrap_or_default();
    ensure!(
        a.transform.is_some() || !baselines.is_empty(),
        "nothing to evaluate: give a transform and/or baselines"
    );
    let mut reports: Vec<EvalReport> = Vec::new();
    if let Some(tpath) = &a.transform {
        let w = io::load_matrix_csv(tpath).with_context(|| format!("loading transform {}", tpath.display()))?;
        let mut r = denoise_testset(&w, a.beta.unwrap_or(1.0), &test, &params)?;
        r.transform_id = "learned".into();
        reports.push(r);
    }
    if !baselines.is_empty() {
        let tune_dir = need(&a.tune_data, "tune_data")?;
        let tune = load_pairs(&tune_dir, p, stride)?;
        ensure!(tune[0].len() == n, "tuning and test signals differ in length");
        let spec = a.golden.spec()?;
        for b in baselines {
            let (id, w) = match b {
                Baseline::Tv => ("tv", finite_difference_matrix(n)?),
                Baseline::Dct => ("dct", dct_matrix(n)?),
                Baseline::Unsupervised => {
                    let clean: Vec<_> = tune.iter().map(|t| t.x_clean.clone()).collect();
                    let r = unsupervised_orthogonal_learn(&clean, &UnsupervisedConfig::default(), None)?;
                    ("unsupervised", r.w)
                }
            };
            let lambda = golden_section_lambda(&w, &tune, &spec, &params)?;
            log::info!("{id}: lambda {:.6} after {} evaluations", lambda.argmin, lambda.evaluations);
            let mut r = denoise_testset(&w, lambda.argmin, &test, &params)?;
            r.transform_id = id.into();
            reports.push(r);
        }
    }
    fs::create_dir_all(&out)?;
    let mut summary = String::from("transform,beta,mean_psnr,noisy_psnr,mean_loss\n");
    println!("{:<14}{:>12}{:>12}{:>12}{:>14}", "transform", "beta", "PSNR dB", "noisy dB", "mean loss");
    for r in &reports {
        r.save_csv(&out.join(format!("{}_report.csv", r.transform_id)))?;
        let _ = writeln!(
            summary,
            "{},{},{},{},{}",
            r.transform_id,
            r.beta,
            r.mean_psnr(),
            r.mean_noisy_psnr(),
            r.mean_loss()
        );
        println!(
            "{:<14}{:>12.6}{:>12.3}{:>12.3}{:>14.6e}",
            r.transform_id,
            r.beta,
            r.mean_psnr(),
            r.mean_noisy_psnr(),
            r.mean_loss()
        );
    }
    fs::write(out.join("summary.csv"), summary)?;
    Ok(())
}

#[derive(ValueEnum, Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum SignalArg {
    Piecewise,
    Dct,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct SweepArgs {
    /// Noise levels (normalized)
    #[arg(long, value_delimiter = ',')]
    pub sigmas: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub kind: Option<SignalArg>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub train_count: Option<usize>,
    #[arg(long)]
    pub test_count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long, value_enum)]
    pub init: Option<InitKind>,
    #[arg(long)]
    pub init_scale: Option<f64>,
    #[arg(long)]
    pub init_file: Option<PathBuf>,
    /// Output directory; one sub-directory per sigma
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(default)]
    pub admm: AdmmArgs,
}

pub fn sweep_noise(flags: &SweepArgs, cfg: Option<&Path>) -> Result<()> {
    let a = merge(flags, cfg)?;
    let out = need(&a.out, "out")?;
    let sigmas = a.sigmas.clone().unwrap_or_else(|| defaults::SWEEP_SIGMAS.to_vec());
    for &s in &sigmas {
        resolve_sigma(Some(s), None, 0.0)?;
    }
    let n = a.n.unwrap_or(32);
    let signal = match a.kind.unwrap_or(SignalArg::Piecewise) {
        SignalArg::Piecewise => SignalSpec::piecewise(n, 0.0),
        SignalArg::Dct => SignalSpec::dct(n, 0.0),
    };
    let seed = a.seed.unwrap_or(defaults::ROOT_SEED);
    let data = SweepData {
        signal,
        train_count: a.train_count.unwrap_or(defaults::SWEEP_TRAIN_PAIRS),
        test_count: a.test_count.unwrap_or(defaults::SWEEP_TEST_PAIRS),
        seed,
    };
    let d = TrainConfig::default();
    let config = TrainConfig {
        batch_size: a.batch_size.unwrap_or(d.batch_size),
        epochs: a.epochs.unwrap_or(d.epochs),
        learning_rate: a.learning_rate.unwrap_or(d.learning_rate),
        admm: a.admm.params()?,
        rng_seed: seed,
        init: init_from(a.init, a.init_scale, a.init_file.as_deref())?,
        validation_every: 0,
        ..d
    };
    fs::create_dir_all(&out)?;
    let points = noise_sweep(&sigmas, &config, &data, Some(&out))?;
    for p in &points {
        eprintln!(
            "sigma {}: |W|_F {:.4}, final loss {:.4e}, PSNR {:.2} dB (noisy {:.2} dB)",
            p.sigma,
            p.w.norm(),
            p.log.final_loss().unwrap_or(f64::NAN),
            p.report.mean_psnr(),
            p.report.mean_noisy_psnr()
        );
    }
    Ok(())
}
