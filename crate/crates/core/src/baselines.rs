//! Reference transforms and the baselines a learned operator is compared
//! against: finite differences (TV) and the DCT with a regularization
//! weight tuned by golden-section search, and unsupervised orthogonal
//! analysis-operator learning.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::data::TrainingPair;
use crate::denoise::{soft_threshold, AdmmParams, AdmmSystem};
use crate::{defaults, Error, Matrix, Result, Vector};

/// `(n−1)×n` forward-difference matrix with rows `(…, −1, +1, …)`.
pub fn finite_difference_matrix(n: usize) -> Result<Matrix> {
    if n < 2 {
        return Err(Error::invalid(format!("finite differences need n >= 2, got {n}")));
    }
    let mut d = Matrix::zeros(n - 1, n);
    for i in 0..n - 1 {
        d[(i, i)] = -1.0;
        d[(i, i + 1)] = 1.0;
    }
    Ok(d)
}

/// Orthonormal DCT-II matrix; row `k` is the `k`-th cosine basis vector.
pub fn dct_matrix(n: usize) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::invalid("DCT size must be positive"));
    }
    let nf = n as f64;
    Ok(Matrix::from_fn(n, n, |k, i| {
        let scale = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        scale * (PI * (2 * i + 1) as f64 * k as f64 / (2.0 * nf)).cos()
    }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoldenSectionSpec {
    pub lo: f64,
    pub hi: f64,
    /// Stop once the bracket is narrower than this.
    pub tol: f64,
    pub max_evals: usize,
}

impl Default for GoldenSectionSpec {
    fn default() -> Self {
        Self {
            lo: defaults::GOLDEN_LO,
            hi: defaults::GOLDEN_HI,
            tol: defaults::GOLDEN_TOL,
            max_evals: defaults::GOLDEN_MAX_EVALS,
        }
    }
}

impl GoldenSectionSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(Error::invalid(format!("bracket [{}, {}] is not valid", self.lo, self.hi)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("golden-section tol must be positive"));
        }
        if self.max_evals < 2 {
            return Err(Error::invalid("golden-section needs at least 2 evaluations"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMinimum {
    pub argmin: f64,
    pub value: f64,
    pub evaluations: usize,
    /// Bracket width at termination.
    pub width: f64,
}

/// Golden-section search for a minimum of `f` on `[lo, hi]`.
///
/// Returns the best point evaluated, which is the bracket minimum for
/// unimodal `f` and still a sensible answer otherwise. NaN values count
/// as `+∞`.
pub fn golden_section_minimize<F: FnMut(f64) -> f64>(mut f: F, spec: &GoldenSectionSpec) -> Result<ScalarMinimum> {
    spec.validate()?;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut eval = |x: f64| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let (mut a, mut b) = (spec.lo, spec.hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = eval(c);
    let mut fd = eval(d);
    let mut evals = 2;
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };

    while b - a > spec.tol && evals < spec.max_evals {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c);
            if fc < best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval(d);
            if fd < best.1 {
                best = (d, fd);
            }
        }
        evals += 1;
    }
    Ok(ScalarMinimum {
        argmin: best.0,
        value: best.1,
        evaluations: evals,
        width: b - a,
    })
}

/// Mean `½‖x*(λW, y) − x‖²` over `pairs`; `+∞` if any solve fails.
pub fn scaled_transform_loss(system: &AdmmSystem, lambda: f64, pairs: &[TrainingPair], params: &AdmmParams) -> f64 {
    if pairs.is_empty() {
        return f64::INFINITY;
    }
    let losses: Vec<f64> = pairs
        .par_iter()
        .map(|p| match system.solve(&p.y_noisy, lambda, params, None) {
            Ok(r) => 0.5 * (r.x_star - &p.x_clean).norm_squared(),
            Err(e) => {
                log::warn!("solve at lambda {lambda:e} failed: {e}");
                f64::INFINITY
            }
        })
        .collect();
    losses.iter().sum::<f64>() / pairs.len() as f64
}

/// Regularization weight `λ` minimizing the validation loss of denoising
/// with `λ‖Wx‖₁`. Returns the best `λ` with its loss.
pub fn golden_section_lambda(
    w: &Matrix,
    val_pairs: &[TrainingPair],
    spec: &GoldenSectionSpec,
    params: &AdmmParams,
) -> Result<ScalarMinimum> {
    if val_pairs.is_empty() {
        return Err(Error::invalid("golden-section search needs validation pairs"));
    }
    params.validate()?;
    let system = AdmmSystem::new(w, params.rho)?;
    golden_section_minimize(|lambda| scaled_transform_loss(&system, lambda, val_pairs, params), spec)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnsupervisedConfig {
    /// Soft-threshold weight on `‖Wx_t‖₁`.
    pub lambda: f64,
    pub rho: f64,
    pub iters: usize,
}

impl Default for UnsupervisedConfig {
    fn default() -> Self {
        Self {
            lambda: defaults::UNSUPERVISED_LAMBDA,
            rho: defaults::UNSUPERVISED_RHO,
            iters: defaults::UNSUPERVISED_ITERS,
        }
    }
}

#[derive(Debug, Clone)]
pub struct UnsupervisedResult {
    /// Lowest-objective orthogonal iterate, including the initial one.
    pub w: Matrix,
    /// `Σ‖Wx_t‖₁` at the initial `W` and after every W-update.
    pub objective_history: Vec<f64>,
}

fn sparsity_objective(w: &Matrix, x: &Matrix) -> f64 {
    (w * x).iter().map(|v| v.abs()).sum()
}

/// Orthogonal `W` approximately minimizing `Σ_t ‖W x_t‖₁` by ADMM on the
/// split `Z = WX`.
///
/// Each round soft-thresholds `WX + U` at `λ/ρ`, sets `W = UVᵀ` from the
/// SVD of `(Z − U)Xᵀ` (orthogonal Procrustes), and updates the scaled dual.
/// `init` defaults to the identity and must be orthogonal.
pub fn unsupervised_orthogonal_learn(
    clean_signals: &[Vector],
    config: &UnsupervisedConfig,
    init: Option<&Matrix>,
) -> Result<UnsupervisedResult> {
    let n = clean_signals.first().ok_or_else(|| Error::invalid("no training signals"))?.len();
    if n == 0 || clean_signals.iter().any(|x| x.len() != n) {
        return Err(Error::invalid("training signals must share a positive length"));
    }
    if !(config.lambda > 0.0 && config.rho > 0.0) {
        return Err(Error::invalid("lambda and rho must be positive"));
    }
    let mut w = match init {
        Some(w0) => {
            if w0.shape() != (n, n) || (w0 * w0.transpose() - Matrix::identity(n, n)).norm() > 1e-8 {
                return Err(Error::invalid("initial W must be an orthogonal n x n matrix"));
            }
            w0.clone()
        }
        None => Matrix::identity(n, n),
    };
    let x = Matrix::from_columns(clean_signals);
    let t = config.lambda / config.rho;
    let mut u = Matrix::zeros(n, x.ncols());
    let mut best = (sparsity_objective(&w, &x), w.clone());
    let mut history = vec![best.0];

    for _ in 0..config.iters {
        let wx = &w * &x;
        let z = (&wx + &u).map(|v| soft_threshold(v, t));
        let target = &z - &u;
        let svd = (&target * x.transpose()).svd(true, true);
        let (uu, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
        w = uu * vt;
        u += &w * &x - &z;
        let obj = sparsity_objective(&w, &x);
        history.push(obj);
        if obj < best.0 {
            best = (obj, w.clone());
        }
    }
    Ok(UnsupervisedResult {
        w: best.1,
        objective_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SignalSpec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn difference_matrix_small() {
        let d = finite_difference_matrix(3).unwrap();
        assert_eq!(d, Matrix::from_row_slice(2, 3, &[-1.0, 1.0, 0.0, 0.0, -1.0, 1.0]));
        assert!(finite_difference_matrix(1).is_err());
        let d = finite_difference_matrix(7).unwrap();
        assert_eq!((&d * Vector::repeat(7, 2.5)).amax(), 0.0);
        let step = Vector::from_fn(7, |i, _| if i >= 4 { 0.3 } else { 0.0 });
        let ds = &d * step;
        assert_eq!(ds.iter().filter(|&&v| v != 0.0).count(), 1);
        assert_eq!(ds[3], 0.3);
    }

    #[test]
    fn dct_is_orthonormal() {
        for n in [1, 2, 5, 16, 64] {
            let c = dct_matrix(n).unwrap();
            assert!((&c * c.transpose() - Matrix::identity(n, n)).amax() < 1e-12);
            for i in 0..n {
                assert_relative_eq!(c[(0, i)], 1.0 / (n as f64).sqrt(), epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn dct_of_cosine_has_one_coefficient() {
        let c = dct_matrix(16).unwrap();
        let x: Vector = c.row(5).transpose() * 0.7;
        let coeffs = &c * x;
        let (i, m) = coeffs.iter().enumerate().fold((0, 0.0), |a, (i, &v)| if v.abs() > a.1 { (i, v.abs()) } else { a });
        assert_eq!(i, 5);
        assert_relative_eq!(m, 0.7, epsilon = 1e-12);
        assert!(coeffs.iter().enumerate().all(|(j, v)| j == 5 || v.abs() < 1e-12));
    }

    #[test]
    fn golden_section_on_parabola() {
        let spec = GoldenSectionSpec {
            lo: 0.0,
            hi: 5.0,
            tol: 1e-6,
            max_evals: 200,
        };
        let r = golden_section_minimize(|x| (x - 2.0).powi(2), &spec).unwrap();
        assert!((r.argmin - 2.0).abs() <= 1e-6);
        assert!(r.evaluations <= 200);
    }

    #[test]
    fn golden_section_monotone_goes_to_lo() {
        let spec = GoldenSectionSpec {
            lo: 0.5,
            hi: 3.0,
            tol: 1e-5,
            max_evals: 100,
        };
        let r = golden_section_minimize(|x| x, &spec).unwrap();
        assert!((r.argmin - 0.5).abs() <= 1e-5);
    }

    #[test]
    fn golden_section_respects_budget_and_shrink_rate() {
        let spec = GoldenSectionSpec {
            lo: 0.0,
            hi: 1.0,
            tol: 1e-30,
            max_evals: 12,
        };
        let mut calls = 0;
        let r = golden_section_minimize(
            |x| {
                calls += 1;
                (x - 0.3).abs()
            },
            &spec,
        )
        .unwrap();
        assert_eq!(calls, 12);
        assert_eq!(r.evaluations, 12);
        // each evaluation after the first two shrinks the bracket by 1/φ
        let inv_phi: f64 = (5f64.sqrt() - 1.0) / 2.0;
        assert_relative_eq!(r.width, inv_phi.powi(10), max_relative = 1e-9);
    }

    #[test]
    fn golden_section_rejects_bad_bracket() {
        let spec = GoldenSectionSpec {
            lo: 2.0,
            hi: 1.0,
            ..GoldenSectionSpec::default()
        };
        assert!(golden_section_minimize(|x| x, &spec).is_err());
    }

    #[test]
    fn tv_lambda_beats_bracket_endpoints() {
        let pairs = SignalSpec::piecewise(32, 0.1).generate(17, 0, 10).unwrap();
        let d = finite_difference_matrix(32).unwrap();
        let spec = GoldenSectionSpec::default();
        let params = AdmmParams {
            max_iters: 50_000,
            ..AdmmParams::default()
        };
        let r = golden_section_lambda(&d, &pairs, &spec, &params).unwrap();
        let sys = AdmmSystem::new(&d, params.rho).unwrap();
        assert!(r.value < scaled_transform_loss(&sys, spec.lo, &pairs, &params));
        assert!(r.value < scaled_transform_loss(&sys, spec.hi, &pairs, &params));
    }

    #[test]
    fn unsupervised_constant_signals() {
        let signals = vec![Vector::repeat(6, 1.0); 3];
        let cfg = UnsupervisedConfig {
            iters: 50,
            ..UnsupervisedConfig::default()
        };
        let r = unsupervised_orthogonal_learn(&signals, &cfg, None).unwrap();
        assert!((&r.w * r.w.transpose() - Matrix::identity(6, 6)).norm() <= 1e-8);
        let x = Matrix::from_columns(&signals);
        assert!(sparsity_objective(&r.w, &x) <= r.objective_history[0]);
    }

    #[test]
    fn unsupervised_reduces_objective_on_piecewise() {
        let signals: Vec<Vector> = SignalSpec::piecewise(16, 0.0)
            .generate(3, 0, 40)
            .unwrap()
            .into_iter()
            .map(|p| p.x_clean)
            .collect();
        let cfg = UnsupervisedConfig {
            iters: 200,
            ..UnsupervisedConfig::default()
        };
        let r = unsupervised_orthogonal_learn(&signals, &cfg, None).unwrap();
        let x = Matrix::from_columns(&signals);
        assert!(sparsity_objective(&r.w, &x) < sparsity_objective(&Matrix::identity(16, 16), &x));
        assert_eq!(r.objective_history.len(), 201);
    }

    #[test]
    fn unsupervised_rejects_non_orthogonal_init() {
        let signals = vec![Vector::repeat(2, 1.0)];
        let bad = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(unsupervised_orthogonal_learn(&signals, &UnsupervisedConfig::default(), Some(&bad)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn unsupervised_stays_orthogonal(seed in 0u64..1000, n in 2usize..10) {
            let signals: Vec<Vector> = SignalSpec::piecewise(n, 0.05)
                .generate(seed, 0, 8)
                .unwrap()
                .into_iter()
                .map(|p| p.y_noisy)
                .collect();
            let cfg = UnsupervisedConfig { iters: 20, ..UnsupervisedConfig::default() };
            let r = unsupervised_orthogonal_learn(&signals, &cfg, None).unwrap();
            prop_assert!((&r.w * r.w.transpose() - Matrix::identity(n, n)).norm() <= 1e-8);
            let x = Matrix::from_columns(&signals);
            prop_assert!(sparsity_objective(&r.w, &x) <= r.objective_history[0] + 1e-12);
        }

        #[test]
        fn golden_section_finds_parabola_vertex(v in 0.1f64..4.9) {
            let spec = GoldenSectionSpec { lo: 0.0, hi: 5.0, tol: 1e-7, max_evals: 200 };
            let r = golden_section_minimize(|x| (x - v).powi(2) + 1.0, &spec).unwrap();
            prop_assert!((r.argmin - v).abs() <= 1e-6);
        }
    }
}
