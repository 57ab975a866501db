//! Gradients of the per-sample loss `Q(W) = ½‖x*(W, y) − x‖²`.
//!
//! With `g = x* − x`, `q = y − β W±ᵀ s` and `P = I − W₀⁺W₀`:
//!
//! ```text
//! ∇_{W±} Q = −β s (P g)ᵀ
//! ∇_{W₀} Q = −(P (q gᵀ + g qᵀ) W₀⁺)ᵀ
//! ```
//!
//! Both blocks are scattered back to the rows of `W` they came from.
//! [`fd_gradient`] is the central-difference oracle.

use std::time::Instant;

use rayon::prelude::*;

use crate::closedform::{row_split, shifted_measurement, sign_pattern, SignPattern};
use crate::data::{SignalSpec, TrainingPair};
use crate::denoise::{AdmmParams, AdmmSystem, WarmStart};
use crate::linalg::SvdFactors;
use crate::{defaults, Error, Matrix, Result, Vector};

/// `∇_{W±}Q = −β s (P g)ᵀ`, a `k±×n` matrix of rank at most one.
pub fn grad_wpm(grad_x: &Vector, s: &Vector, p: &Matrix, beta: f64) -> Matrix {
    let pg = p * grad_x;
    s * pg.transpose() * (-beta)
}

/// `∇_{W₀}Q = −(P (q gᵀ + g qᵀ) W₀⁺)ᵀ`, a `k₀×n` matrix.
pub fn grad_wzero(grad_x: &Vector, q: &Vector, p: &Matrix, w0_pinv: &Matrix) -> Matrix {
    grad_wzero_parts(&(p * q), &(p * grad_x), grad_x, q, w0_pinv)
}

// −[(W₀⁺ᵀg)(Pq)ᵀ + (W₀⁺ᵀq)(Pg)ᵀ], expanded so no n×n product is formed
fn grad_wzero_parts(pq: &Vector, pg: &Vector, g: &Vector, q: &Vector, w0_pinv: &Matrix) -> Matrix {
    let a = w0_pinv.tr_mul(g);
    let b = w0_pinv.tr_mul(q);
    -(a * pq.transpose() + b * pg.transpose())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientOptions {
    /// Weight on `‖Wx‖₁` in the lower-level problem.
    pub beta: f64,
    /// Sign threshold γ.
    pub gamma: f64,
    /// Relative singular-value cutoff for `W₀⁺`; `None` uses the default.
    pub rel_tol: Option<f64>,
    pub admm: AdmmParams,
}

impl Default for GradientOptions {
    fn default() -> Self {
        Self {
            beta: 1.0,
            gamma: defaults::SIGN_THRESHOLD,
            rel_tol: None,
            admm: AdmmParams::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SampleGradient {
    pub grad_w: Matrix,
    /// `½‖x* − x‖²` at the ADMM solution.
    pub loss: f64,
    pub sign_pattern: SignPattern,
    /// ADMM minimizer.
    pub x_star: Vector,
    /// `‖x_closed_form − x_admm‖_∞`; large values mean the thresholded
    /// pattern disagrees with the solver.
    pub closed_form_gap: f64,
    pub admm_iterations: usize,
    pub warm_start: WarmStart,
}

/// Gradient of `Q` at `W` given the lower-level minimizer `x_star`.
///
/// `x_star` only fixes the sign pattern; the gradient uses the closed-form
/// reconstruction for that pattern.
pub fn gradient_at_solution(
    w: &Matrix,
    pair: &TrainingPair,
    x_star: &Vector,
    beta: f64,
    gamma: f64,
    rel_tol: Option<f64>,
) -> Result<(Matrix, SignPattern, f64)> {
    let pattern = sign_pattern(w, x_star, gamma)?;
    let split = row_split(w, &pattern)?;
    let q = shifted_measurement(&split, &pair.y_noisy, beta);
    let w0 = SvdFactors::new(&split.w0, rel_tol)?;
    let x_cf = w0.project_onto_nullspace(&q);
    let g = &x_cf - &pair.x_clean;
    let pg = w0.project_onto_nullspace(&g);

    let mut grad = Matrix::zeros(w.nrows(), w.ncols());
    let pg_row = pg.transpose();
    for (r, &i) in split.nonzero_rows.iter().enumerate() {
        grad.set_row(i, &(&pg_row * (-beta * split.s[r])));
    }
    if !split.zero_rows.is_empty() {
        let block = grad_wzero_parts(&x_cf, &pg, &g, &q, &w0.pseudoinverse());
        for (r, &i) in split.zero_rows.iter().enumerate() {
            grad.set_row(i, &block.row(r));
        }
    }
    let gap = (&x_cf - x_star).amax();
    Ok((grad, pattern, gap))
}

/// Solves the lower level against a prepared system and differentiates.
pub fn sample_gradient_with(
    system: &AdmmSystem,
    pair: &TrainingPair,
    opts: &GradientOptions,
    warm: Option<&WarmStart>,
) -> Result<SampleGradient> {
    let r = system.solve(&pair.y_noisy, opts.beta, &opts.admm, warm)?;
    let (grad_w, sign_pattern, closed_form_gap) =
        gradient_at_solution(system.w(), pair, &r.x_star, opts.beta, opts.gamma, opts.rel_tol)?;
    let loss = 0.5 * (&r.x_star - &pair.x_clean).norm_squared();
    Ok(SampleGradient {
        grad_w,
        loss,
        sign_pattern,
        x_star: r.x_star,
        closed_form_gap,
        admm_iterations: r.iterations_used,
        warm_start: r.warm_start,
    })
}

/// Analytic gradient of `½‖x*(W, y) − x‖²` with respect to `W`.
pub fn sample_gradient(w: &Matrix, pair: &TrainingPair, opts: &GradientOptions) -> Result<SampleGradient> {
    opts.admm.validate()?;
    if w.ncols() != pair.len() {
        return Err(Error::invalid(format!(
            "W has {} columns but the pair has length {}",
            w.ncols(),
            pair.len()
        )));
    }
    sample_gradient_with(&AdmmSystem::new(w, opts.admm.rho)?, pair, opts, None)
}

/// Central-difference gradient of `Q`: entry `(i, j)` is
/// `(Q(W + h E_ij) − Q(W − h E_ij)) / 2h`.
///
/// Each `Q` comes from an ADMM solve with `params`, warm-started from the
/// unperturbed solution; the perturbed systems are rank-2 updates of the
/// unperturbed one.
pub fn fd_gradient(w: &Matrix, pair: &TrainingPair, beta: f64, step: f64, params: &AdmmParams) -> Result<Matrix> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid(format!("step must be positive, got {step}")));
    }
    params.validate()?;
    let mut base = AdmmSystem::new(w, params.rho)?;
    let center = base.solve(&pair.y_noisy, beta, params, None)?;
    // perturbed solves keep the penalty the centre settled on
    if center.warm_start.rho != base.rho() {
        base = AdmmSystem::with_penalty(w, center.warm_start.rho)?;
    }
    let fixed = AdmmParams {
        max_penalty_updates: 0,
        ..*params
    };
    let (k, n) = w.shape();
    let loss_at = |i: usize, j: usize, delta: f64| -> Result<f64> {
        let sys = base.with_entry_perturbed(i, j, delta)?;
        let r = sys.solve(&pair.y_noisy, beta, &fixed, Some(&center.warm_start))?;
        Ok(0.5 * (r.x_star - &pair.x_clean).norm_squared())
    };
    let entries: Vec<f64> = (0..k * n)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            Ok((loss_at(i, j, step)? - loss_at(i, j, -step)?) / (2.0 * step))
        })
        .collect::<Result<_>>()?;
    Ok(Matrix::from_row_slice(k, n, &entries))
}

/// One analytic-versus-numerical comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckRecord {
    pub n: usize,
    pub seed: u64,
    pub max_abs_err: f64,
    pub analytic_ms: f64,
    pub fd_ms: f64,
    /// Some `|[Wx*]_i|` lies within `10·step` of γ, so the pattern may
    /// change under the finite-difference perturbation.
    pub boundary: bool,
    pub margin: f64,
    /// `‖x_closed_form − x_admm‖_∞` for the thresholded pattern.
    pub closed_form_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckConfig {
    pub n: usize,
    pub sigma: f64,
    pub step: f64,
    pub opts: GradientOptions,
    pub fd_params: AdmmParams,
}

impl GradcheckConfig {
    /// σ = 0.1 pairs, default step, and γ = 20·step.
    pub fn new(n: usize) -> Self {
        Self {
            n,
            sigma: 0.1,
            step: defaults::FD_STEP,
            opts: GradientOptions {
                gamma: defaults::GRADCHECK_GAMMA_STEPS * defaults::FD_STEP,
                ..GradientOptions::default()
            },
            fd_params: AdmmParams::high_accuracy(),
        }
    }
}

/// Compares [`sample_gradient`] with [`fd_gradient`] at `W = I` on the
/// piecewise-constant pair number `seed`.
pub fn gradcheck_instance(config: &GradcheckConfig, seed: u64) -> Result<GradcheckRecord> {
    let pair = SignalSpec::piecewise(config.n, config.sigma).pair(seed, 0)?;
    let w = Matrix::identity(config.n, config.n);
    gradcheck_pair(&w, &pair, config, seed)
}

/// Analytic-versus-numerical comparison on a given `W` and pair.
pub fn gradcheck_pair(w: &Matrix, pair: &TrainingPair, config: &GradcheckConfig, seed: u64) -> Result<GradcheckRecord> {
    let t0 = Instant::now();
    let analytic = sample_gradient(w, pair, &config.opts)?;
    let analytic_ms = t0.elapsed().as_secs_f64() * 1e3;

    let t1 = Instant::now();
    let numeric = fd_gradient(w, pair, config.opts.beta, config.step, &config.fd_params)?;
    let fd_ms = t1.elapsed().as_secs_f64() * 1e3;

    let margin = analytic.sign_pattern.margin;
    Ok(GradcheckRecord {
        n: config.n,
        seed,
        max_abs_err: (&analytic.grad_w - numeric).amax(),
        analytic_ms,
        fd_ms,
        boundary: margin <= 10.0 * config.step,
        margin,
        closed_form_gap: analytic.closed_form_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closedform::closed_form_reconstruct;
    use crate::seeds;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_pair(rng: &mut seeds::Rng, n: usize) -> TrainingPair {
        let x = Vector::from_fn(n, |_, _| rng.random::<f64>());
        let y = &x + Vector::from_fn(n, |_, _| 0.3 * rng.sample::<f64, _>(StandardNormal));
        TrainingPair::new(x, y).unwrap()
    }

    #[test]
    fn zero_grad_x_gives_zero_blocks() {
        let p = Matrix::identity(3, 3);
        let g = Vector::zeros(3);
        let s = Vector::from_vec(vec![1.0, -1.0]);
        assert_eq!(grad_wpm(&g, &s, &p, 1.0), Matrix::zeros(2, 3));
        let pinv = Matrix::from_element(3, 1, 0.5);
        let q = Vector::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!(grad_wzero(&g, &q, &p, &pinv), Matrix::zeros(1, 3));
        assert_eq!(grad_wzero(&q, &q, &p, &Matrix::zeros(3, 0)).shape(), (0, 3));
    }

    #[test]
    fn wpm_unit_case() {
        let g = Vector::from_vec(vec![1.0, 0.0, 0.0]);
        let s = Vector::from_vec(vec![1.0]);
        let m = grad_wpm(&g, &s, &Matrix::identity(3, 3), 1.0);
        assert_eq!(m, Matrix::from_row_slice(1, 3, &[-1.0, 0.0, 0.0]));
    }

    #[test]
    fn wzero_expanded_form_matches_definition() {
        let mut rng = seeds::rng(4);
        let w0 = Matrix::from_fn(2, 5, |_, _| rng.sample::<f64, _>(StandardNormal));
        let f = SvdFactors::new(&w0, None).unwrap();
        let (p, pinv) = (f.nullspace_projector(), f.pseudoinverse());
        let g = Vector::from_fn(5, |_, _| rng.random::<f64>());
        let q = Vector::from_fn(5, |_, _| rng.random::<f64>());
        let direct = -(&p * (&q * g.transpose() + &g * q.transpose()) * &pinv).transpose();
        assert!((grad_wzero(&g, &q, &p, &pinv) - direct).amax() < 1e-13);
    }

    #[test]
    fn zero_w_zero_noise_gradient_is_zero() {
        let pair = SignalSpec::piecewise(12, 0.0).pair(1, 0).unwrap();
        let w = Matrix::zeros(12, 12);
        let g = sample_gradient(&w, &pair, &GradientOptions::default()).unwrap();
        assert_eq!(g.loss, 0.0);
        assert_eq!(g.grad_w.amax(), 0.0);
        let fd = fd_gradient(&w, &pair, 1.0, 1e-6, &AdmmParams::high_accuracy()).unwrap();
        assert!(fd.amax() <= 1e-8);
    }

    #[test]
    fn zero_w_noisy_gradient_vanishes_with_empty_pinv() {
        // W₀ = 0 has pseudoinverse 0, so the formula gives exactly zero
        let pair = SignalSpec::piecewise(8, 0.1).pair(2, 0).unwrap();
        let g = sample_gradient(&Matrix::zeros(8, 8), &pair, &GradientOptions::default()).unwrap();
        assert_eq!(g.grad_w.amax(), 0.0);
        assert!(g.loss > 0.0);
    }

    #[test]
    fn matches_fd_on_random_small_instances() {
        let mut rng = seeds::rng(77);
        let mut checked = 0;
        for _ in 0..12 {
            let n = 8;
            let w = Matrix::from_fn(n, n, |_, _| 0.3 * rng.sample::<f64, _>(StandardNormal));
            let pair = random_pair(&mut rng, n);
            let mut cfg = GradcheckConfig::new(n);
            cfg.opts.admm.max_iters = 200_000;
            cfg.fd_params.max_iters = 200_000;
            let rec = gradcheck_pair(&w, &pair, &cfg, 0).unwrap();
            if rec.boundary {
                continue;
            }
            checked += 1;
            assert!(rec.max_abs_err <= 1e-6, "max abs err {}", rec.max_abs_err);
        }
        assert!(checked >= 10);
    }

    #[test]
    fn identity_gradcheck_instance() {
        let rec = gradcheck_instance(&GradcheckConfig::new(12), 3).unwrap();
        assert!(rec.boundary || rec.max_abs_err <= 1e-6, "{rec:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn scatter_and_rank_one_structure(seed in 0u64..10_000) {
            let mut rng = seeds::rng(seed);
            let (k, n) = (9, 6);
            let w = Matrix::from_fn(k, n, |_, _| 0.4 * rng.sample::<f64, _>(StandardNormal));
            let pair = random_pair(&mut rng, n);
            let opts = GradientOptions {
                admm: AdmmParams { max_iters: 200_000, ..AdmmParams::default() },
                ..GradientOptions::default()
            };
            let sg = sample_gradient(&w, &pair, &opts).unwrap();
            let split = row_split(&w, &sg.sign_pattern).unwrap();
            let f = SvdFactors::new(&split.w0, None).unwrap();
            let p = f.nullspace_projector();
            let x_cf = closed_form_reconstruct(&split, &pair.y_noisy, 1.0, None).unwrap();
            let g = &x_cf - &pair.x_clean;
            let q = shifted_measurement(&split, &pair.y_noisy, 1.0);

            let wpm = grad_wpm(&g, &split.s, &p, 1.0);
            for (r, &i) in split.nonzero_rows.iter().enumerate() {
                prop_assert!((sg.grad_w.row(i) - wpm.row(r)).amax() <= 1e-12);
            }
            let w0 = grad_wzero(&g, &q, &p, &f.pseudoinverse());
            for (r, &i) in split.zero_rows.iter().enumerate() {
                prop_assert!((sg.grad_w.row(i) - w0.row(r)).amax() <= 1e-12);
            }
            // every W± row is a multiple of (P g)ᵀ
            let pg = &p * &g;
            for r in 0..wpm.nrows() {
                let row = wpm.row(r).transpose();
                let resid = &row - &pg * (row.dot(&pg) / pg.norm_squared().max(1e-300));
                prop_assert!(resid.amax() <= 1e-12);
            }
            prop_assert!(sg.loss >= 0.0);
            prop_assert!((sg.loss - 0.5 * (&sg.x_star - &pair.x_clean).norm_squared()).abs() <= 1e-15);
        }
    }
}
