//! Denoising quality: PSNR, test-set and patch-image pipelines, the
//! noise-level sweep and row-matching against reference transforms.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::data::{aggregate_patches, common_length, extract_patches, SignalSpec, TrainingPair};
use crate::denoise::{AdmmParams, AdmmSystem};
use crate::train::{blorc_train, TrainConfig, TrainLog};
use crate::{defaults, io, Error, Matrix, Result, Vector};

/// `10·log10(peak² / MSE)` in dB; `+∞` when the two agree exactly.
pub fn psnr(reference: &[f64], estimate: &[f64], peak: f64) -> Result<f64> {
    if reference.len() != estimate.len() {
        return Err(Error::invalid(format!(
            "PSNR of arrays with {} and {} entries",
            reference.len(),
            estimate.len()
        )));
    }
    if reference.is_empty() {
        return Err(Error::invalid("PSNR of empty arrays"));
    }
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::invalid(format!("peak must be positive, got {peak}")));
    }
    let mse = reference
        .iter()
        .zip(estimate)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / reference.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// Same-shape matrix variant of [`psnr`].
pub fn psnr_image(reference: &Matrix, estimate: &Matrix, peak: f64) -> Result<f64> {
    if reference.shape() != estimate.shape() {
        return Err(Error::invalid(format!(
            "PSNR of images shaped {:?} and {:?}",
            reference.shape(),
            estimate.shape()
        )));
    }
    psnr(reference.as_slice(), estimate.as_slice(), peak)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub transform_id: String,
    pub beta: f64,
    pub sigma: Option<f64>,
    /// Per-sample PSNR of the denoised signal; `+∞` marks exact recovery.
    pub psnr: Vec<f64>,
    pub noisy_psnr: Vec<f64>,
    /// Per-sample `½‖x* − x‖²`.
    pub loss: Vec<f64>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

impl EvalReport {
    pub fn mean_psnr(&self) -> f64 {
        mean(&self.psnr)
    }

    pub fn mean_noisy_psnr(&self) -> f64 {
        mean(&self.noisy_psnr)
    }

    pub fn mean_loss(&self) -> f64 {
        mean(&self.loss)
    }

    pub fn len(&self) -> usize {
        self.psnr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psnr.is_empty()
    }

    /// One row per sample: `index,psnr,noisy_psnr,loss`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,psnr,noisy_psnr,loss\n");
        for i in 0..self.len() {
            let _ = writeln!(out, "{i},{},{},{}", self.psnr[i], self.noisy_psnr[i], self.loss[i]);
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Summary table for terminals.
    pub fn to_table(&self) -> String {
        let sigma = self.sigma.map_or("-".to_string(), |s| format!("{s}"));
        let mut out = String::new();
        let _ = writeln!(out, "transform   {}", self.transform_id);
        let _ = writeln!(out, "beta        {}", self.beta);
        let _ = writeln!(out, "sigma       {sigma}");
        let _ = writeln!(out, "signals     {}", self.len());
        let _ = writeln!(out, "mean PSNR   {:.3} dB", self.mean_psnr());
        let _ = writeln!(out, "noisy PSNR  {:.3} dB", self.mean_noisy_psnr());
        let _ = writeln!(out, "mean loss   {:.6e}", self.mean_loss());
        out
    }
}

/// Denoises every `y` with `(W, β)` and scores it against `x`.
pub fn denoise_testset(w: &Matrix, beta: f64, pairs: &[TrainingPair], params: &AdmmParams) -> Result<EvalReport> {
    if pairs.is_empty() {
        return Err(Error::invalid("empty test set"));
    }
    let n = common_length(pairs)?;
    if w.ncols() != n {
        return Err(Error::invalid(format!("W has {} columns, signals have length {n}", w.ncols())));
    }
    let system = AdmmSystem::new(w, params.rho)?;
    let rows = pairs
        .par_iter()
        .map(|p| {
            let x = system.solve(&p.y_noisy, beta, params, None)?.x_star;
            Ok((
                psnr(p.x_clean.as_slice(), x.as_slice(), defaults::PSNR_PEAK)?,
                psnr(p.x_clean.as_slice(), p.y_noisy.as_slice(), defaults::PSNR_PEAK)?,
                0.5 * (x - &p.x_clean).norm_squared(),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport {
        transform_id: String::new(),
        beta,
        sigma: None,
        psnr: rows.iter().map(|r| r.0).collect(),
        noisy_psnr: rows.iter().map(|r| r.1).collect(),
        loss: rows.iter().map(|r| r.2).collect(),
    })
}

/// Denoises each `p×p` patch against `W_stack` (columns = p²) and averages
/// overlapping estimates.
pub fn denoise_image(
    w_stack: &Matrix,
    image_noisy: &Matrix,
    p: usize,
    stride: usize,
    beta: f64,
    params: &AdmmParams,
) -> Result<Matrix> {
    if w_stack.ncols() != p * p {
        return Err(Error::invalid(format!(
            "W_stack has {} columns, {p}x{p} patches need {}",
            w_stack.ncols(),
            p * p
        )));
    }
    crate::linalg::check_finite(image_noisy, "image")?;
    let (grid, patches) = extract_patches(image_noisy, p, stride)?;
    let system = AdmmSystem::new(w_stack, params.rho)?;
    let denoised = patches
        .par_iter()
        .map(|y| Ok(system.solve(y, beta, params, None)?.x_star))
        .collect::<Result<Vec<Vector>>>()?;
    aggregate_patches(&grid, &denoised)
}

/// Data for one sweep point: training set `0..train_count` and test set
/// right after it, both drawn from `seed` at the point's σ.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepData {
    pub signal: SignalSpec,
    pub train_count: usize,
    pub test_count: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub sigma: f64,
    pub w: Matrix,
    pub log: TrainLog,
    pub report: EvalReport,
}

/// Trains and evaluates one transform per noise level. With `out_dir`,
/// each point's W, training log and report land in `sigma_<σ>/`.
pub fn noise_sweep(
    sigmas: &[f64],
    base_config: &TrainConfig,
    data: &SweepData,
    out_dir: Option<&Path>,
) -> Result<Vec<SweepPoint>> {
    if sigmas.is_empty() {
        return Err(Error::invalid("noise sweep needs at least one sigma"));
    }
    if data.train_count == 0 || data.test_count == 0 {
        return Err(Error::invalid("noise sweep needs training and test pairs"));
    }
    let mut points = Vec::with_capacity(sigmas.len());
    for &sigma in sigmas {
        let spec = SignalSpec { sigma, ..data.signal.clone() };
        let train = spec.generate(data.seed, 0, data.train_count)?;
        let test = spec.generate(data.seed, data.train_count as u64, data.test_count)?;
        log::info!("sweep: sigma {sigma}, {} training pairs", train.len());
        let (w, log) = blorc_train(&train, base_config, None)?;
        let mut report = denoise_testset(&w, base_config.beta, &test, &base_config.admm)?;
        report.transform_id = format!("learned_sigma_{sigma}");
        report.sigma = Some(sigma);
        if let Some(dir) = out_dir {
            let d = dir.join(format!("sigma_{sigma}"));
            std::fs::create_dir_all(&d)?;
            io::save_matrix_csv(&d.join("W.csv"), &w)?;
            log.save_csv(&d.join("train_log.csv"))?;
            report.save_csv(&d.join("report.csv"))?;
        }
        points.push(SweepPoint { sigma, w, log, report });
    }
    if let Some(dir) = out_dir {
        let mut summary = String::from("sigma,frobenius_norm,final_train_loss,mean_psnr,noisy_psnr\n");
        for pt in &points {
            let _ = writeln!(
                summary,
                "{},{},{},{},{}",
                pt.sigma,
                pt.w.norm(),
                pt.log.final_loss().unwrap_or(f64::NAN),
                pt.report.mean_psnr(),
                pt.report.mean_noisy_psnr()
            );
        }
        std::fs::write(dir.join("summary.csv"), summary)?;
    }
    Ok(points)
}

/// Mean absolute normalized correlation after greedily pairing rows of `w`
/// with rows of `reference`, strongest pair first, each row used once.
///
/// Only the column counts must agree; `min(rows)` pairs are formed. Zero
/// rows correlate 0 with everything.
pub fn filter_correlation(w: &Matrix, reference: &Matrix) -> Result<f64> {
    if w.ncols() != reference.ncols() {
        return Err(Error::invalid(format!(
            "cannot match rows of length {} and {}",
            w.ncols(),
            reference.ncols()
        )));
    }
    let pairs = w.nrows().min(reference.nrows());
    if pairs == 0 {
        return Err(Error::invalid("filter_correlation needs at least one row on each side"));
    }
    let unit_rows = |m: &Matrix| -> Vec<Option<Vector>> {
        (0..m.nrows())
            .map(|i| {
                let r: Vector = m.row(i).transpose();
                let norm = r.norm();
                (norm > 0.0).then(|| r / norm)
            })
            .collect()
    };
    let (a, b) = (unit_rows(w), unit_rows(reference));
    let mut cand: Vec<(f64, usize, usize)> = Vec::with_capacity(a.len() * b.len());
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            let c = match (ai, bj) {
                (Some(u), Some(v)) => u.dot(v).abs().min(1.0),
                _ => 0.0,
            };
            cand.push((c, i, j));
        }
    }
    // ties resolve by index so the result is deterministic
    cand.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut total = 0.0;
    let mut matched = 0;
    for (c, i, j) in cand {
        if matched == pairs {
            break;
        }
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            total += c;
            matched += 1;
        }
    }
    Ok(total / pairs as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::finite_difference_matrix;
    use crate::data::add_noise_image;
    use crate::seeds;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn psnr_examples() {
        let a = [0.1, 0.2, 0.3];
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
        let x = [0.0; 4];
        let y = [0.1, -0.1, 0.1, -0.1];
        assert!((psnr(&x, &y, 1.0).unwrap() - 20.0).abs() < 1e-12);
        assert!((psnr(&x, &y, 2.0).unwrap() - (20.0 + 20.0 * 2f64.log10())).abs() < 1e-12);
        assert!(psnr(&a, &x, 1.0).is_err());
        assert!(psnr(&a, &a, 0.0).is_err());
        assert!(psnr_image(&Matrix::zeros(2, 3), &Matrix::zeros(3, 2), 1.0).is_err());
    }

    #[test]
    fn noisy_psnr_of_piecewise_signals_near_twenty_db() {
        let pairs = SignalSpec::piecewise(64, 0.1).generate(3, 0, 200).unwrap();
        let m = mean(
            &pairs
                .iter()
                .map(|p| psnr(p.x_clean.as_slice(), p.y_noisy.as_slice(), 1.0).unwrap())
                .collect::<Vec<_>>(),
        );
        // σ = 0.1 at peak 1 gives 20 dB; the mean of log-MSE sits slightly above
        assert!((m - 20.0).abs() < 0.5, "{m}");
    }

    #[test]
    fn zero_transform_reports_noisy_psnr() {
        let pairs = SignalSpec::piecewise(16, 0.1).generate(8, 0, 6).unwrap();
        let r = denoise_testset(&Matrix::zeros(16, 16), 1.0, &pairs, &AdmmParams::default()).unwrap();
        assert_eq!(r.psnr, r.noisy_psnr);
        assert_eq!(r.len(), 6);
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 7);
        assert!(r.to_table().contains("mean PSNR"));
    }

    #[test]
    fn zero_stack_returns_image_bit_exactly() {
        let mut rng = seeds::rng(4);
        let img = Matrix::from_fn(20, 23, |_, _| rng.random::<f64>());
        let out = denoise_image(&Matrix::zeros(10, 16), &img, 4, 3, 1.0, &AdmmParams::default()).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn whole_image_patch_matches_vector_denoise() {
        // column-major storage of a 1×n image equals the vector itself
        let pair = SignalSpec::piecewise(9, 0.1).pair(2, 0).unwrap();
        let img = Matrix::from_row_slice(3, 3, pair.y_noisy.as_slice());
        let w = finite_difference_matrix(9).unwrap() * 0.2;
        let params = AdmmParams::default();
        let out = denoise_image(&w, &img, 3, 3, 1.0, &params).unwrap();
        let x = AdmmSystem::new(&w, params.rho).unwrap().solve(&pair.y_noisy, 1.0, &params, None).unwrap().x_star;
        let expected = Matrix::from_row_slice(3, 3, x.as_slice());
        assert!((out - expected).amax() <= 1e-15);
    }

    #[test]
    fn image_stack_width_checked() {
        let img = Matrix::zeros(8, 8);
        assert!(denoise_image(&Matrix::zeros(3, 15), &img, 4, 4, 1.0, &AdmmParams::default()).is_err());
    }

    #[test]
    fn tv_patch_denoising_improves_striped_image() {
        let clean = Matrix::from_fn(24, 24, |_, c| if (c / 4) % 2 == 0 { 0.2 } else { 0.8 });
        let noisy = add_noise_image(&clean, 0.1, 5).unwrap();
        let d = finite_difference_matrix(16).unwrap() * 0.1;
        let out = denoise_image(&d, &noisy, 4, 3, 1.0, &AdmmParams::default()).unwrap();
        assert!(psnr_image(&clean, &out, 1.0).unwrap() > psnr_image(&clean, &noisy, 1.0).unwrap());
    }

    #[test]
    fn filter_correlation_examples() {
        let d = finite_difference_matrix(8).unwrap();
        assert!((filter_correlation(&d, &d).unwrap() - 1.0).abs() < 1e-15);
        let mut shuffled = d.clone();
        shuffled.swap_rows(0, 5);
        shuffled.row_mut(2).neg_mut();
        assert!((filter_correlation(&shuffled, &d).unwrap() - 1.0).abs() < 1e-15);
        // identity rows meet each difference row at 1/√2
        let c = filter_correlation(&Matrix::identity(8, 8), &d).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(filter_correlation(&Matrix::zeros(7, 8), &d).unwrap(), 0.0);
        assert!(filter_correlation(&Matrix::zeros(3, 4), &d).is_err());
    }

    #[test]
    fn random_gaussian_vs_tv_correlation_is_pinned() {
        let mut rng = seeds::rng(2024);
        let w = Matrix::from_fn(32, 32, |_, _| rng.sample::<f64, _>(StandardNormal));
        let c = filter_correlation(&w, &finite_difference_matrix(32).unwrap()).unwrap();
        // brute-force greedy matching as an independent oracle; value pinned from it
        let oracle = brute_force_greedy(&w, &finite_difference_matrix(32).unwrap());
        assert!((c - oracle).abs() < 1e-12);
        assert!((c - 0.364_979_147_335_289).abs() < 1e-12, "{c}");
    }

    /// Repeated global-maximum search without presorting.
    fn brute_force_greedy(w: &Matrix, r: &Matrix) -> f64 {
        let mut a: Vec<usize> = (0..w.nrows()).collect();
        let mut b: Vec<usize> = (0..r.nrows()).collect();
        let corr = |i: usize, j: usize| {
            let (u, v) = (w.row(i), r.row(j));
            (u.dot(&v) / (u.norm() * v.norm())).abs()
        };
        let mut total = 0.0;
        let pairs = a.len().min(b.len());
        for _ in 0..pairs {
            let mut best = (-1.0, 0, 0);
            for (ia, &i) in a.iter().enumerate() {
                for (jb, &j) in b.iter().enumerate() {
                    let c = corr(i, j);
                    if c > best.0 {
                        best = (c, ia, jb);
                    }
                }
            }
            total += best.0;
            a.remove(best.1);
            b.remove(best.2);
        }
        total / pairs as f64
    }

    #[test]
    fn sweep_writes_artifacts_per_sigma() {
        let dir = tempfile::tempdir().unwrap();
        let data = SweepData {
            signal: SignalSpec::piecewise(8, 0.0),
            train_count: 6,
            test_count: 3,
            seed: 1,
        };
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 3,
            ..TrainConfig::default()
        };
        let pts = noise_sweep(&[0.05, 0.2], &cfg, &data, Some(dir.path())).unwrap();
        assert_eq!(pts.len(), 2);
        for s in ["sigma_0.05", "sigma_0.2"] {
            for f in ["W.csv", "train_log.csv", "report.csv"] {
                assert!(dir.path().join(s).join(f).exists(), "{s}/{f}");
            }
        }
        assert!(dir.path().join("summary.csv").exists());
        assert!(noise_sweep(&[], &cfg, &data, None).is_err());
    }

    #[test]
    fn zero_noise_zero_init_sweep_stays_at_zero() {
        let data = SweepData {
            signal: SignalSpec::piecewise(8, 0.0),
            train_count: 6,
            test_count: 2,
            seed: 3,
        };
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 2,
            init: crate::train::Init::Zeros,
            ..TrainConfig::default()
        };
        let pts = noise_sweep(&[0.0], &cfg, &data, None).unwrap();
        assert!(pts[0].w.iter().all(|&v| v == 0.0));
        assert!(pts[0].log.train_loss.iter().all(|&l| l == 0.0));
    }

    proptest! {
        #[test]
        fn psnr_shift_invariant_at_fixed_peak(seed in 0u64..1000, shift in -5.0f64..5.0) {
            let mut rng = seeds::rng(seed);
            let a: Vec<f64> = (0..10).map(|_| rng.random::<f64>()).collect();
            let b: Vec<f64> = a.iter().map(|v| v + 0.1 * rng.random::<f64>() - 0.05).collect();
            let sa: Vec<f64> = a.iter().map(|v| v + shift).collect();
            let sb: Vec<f64> = b.iter().map(|v| v + shift).collect();
            let p0 = psnr(&a, &b, 1.0).unwrap();
            let p1 = psnr(&sa, &sb, 1.0).unwrap();
            prop_assert!((p0 - p1).abs() < 1e-6);
        }

        #[test]
        fn correlation_in_unit_interval_and_permutation_free(seed in 0u64..1000) {
            let mut rng = seeds::rng(seed);
            let w = Matrix::from_fn(6, 6, |_, _| rng.sample::<f64, _>(StandardNormal));
            let r = Matrix::from_fn(5, 6, |_, _| rng.sample::<f64, _>(StandardNormal));
            let c = filter_correlation(&w, &r).unwrap();
            prop_assert!((0.0..=1.0).contains(&c));
            let mut wp = w.clone();
            wp.swap_rows(0, 3);
            wp.row_mut(1).neg_mut();
            prop_assert!((filter_correlation(&wp, &r).unwrap() - c).abs() < 1e-12);
        }
    }
}
