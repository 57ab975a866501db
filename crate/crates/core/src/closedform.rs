//! Sign patterns, row splits and the closed-form minimizer.
//!
//! With the rows of `W` split into `W₀` (where `Wx* = 0`) and `W±` (where it
//! is not, with signs `s`), the minimizer of `½‖x − y‖² + β‖Wx‖₁` is
//!
//! ```text
//! x* = (I − W₀⁺W₀)(y − β W±ᵀ s)
//! ```
//!
//! `W₀⁺` comes from the SVD pseudoinverse, so rank-deficient `W₀` is fine.

use rand::Rng;
use rayon::prelude::*;

use crate::denoise::{AdmmParams, AdmmSystem};
use crate::linalg::SvdFactors;
use crate::{seeds, Error, Matrix, Result, Vector};

/// Hard-thresholded sign of `W x*`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignPattern {
    pub values: Vec<i8>,
    pub threshold: f64,
    /// Rows with `|[Wx*]_i|` in `[γ/2, 2γ]`, where a small solver error
    /// could flip the classification.
    pub ambiguous: usize,
    /// `min_i ||[Wx*]_i| − γ|`; infinite when `W` has no rows.
    pub margin: f64,
}

impl SignPattern {
    /// Pattern taken as given, e.g. the support of the ADMM split variable.
    /// Nothing was thresholded, so `ambiguous` is 0 and `margin` is `+∞`.
    pub fn from_signs(values: Vec<i8>) -> Self {
        Self {
            values,
            threshold: 0.0,
            ambiguous: 0,
            margin: f64::INFINITY,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn zero_count(&self) -> usize {
        self.values.iter().filter(|&&v| v == 0).count()
    }
}

/// `values[i] = sign([Wx*]_i)`, with magnitudes below `gamma` mapped to 0.
pub fn sign_pattern(w: &Matrix, x_star: &Vector, gamma: f64) -> Result<SignPattern> {
    if !(gamma > 0.0) {
        return Err(Error::invalid(format!("sign threshold must be positive, got {gamma}")));
    }
    if w.ncols() != x_star.len() {
        return Err(Error::invalid(format!(
            "W has {} columns but x has length {}",
            w.ncols(),
            x_star.len()
        )));
    }
    let wx = w * x_star;
    let mut ambiguous = 0;
    let mut margin = f64::INFINITY;
    let values = wx
        .iter()
        .map(|&v| {
            let a = v.abs();
            if (0.5 * gamma..=2.0 * gamma).contains(&a) {
                ambiguous += 1;
            }
            margin = margin.min((a - gamma).abs());
            if a < gamma {
                0
            } else if v > 0.0 {
                1
            } else {
                -1
            }
        })
        .collect();
    if ambiguous > 0 {
        log::debug!("{ambiguous} rows of Wx* lie within a factor 2 of the sign threshold {gamma:e}");
    }
    Ok(SignPattern {
        values,
        threshold: gamma,
        ambiguous,
        margin,
    })
}

/// Rows of `W` partitioned by a sign pattern.
///
/// `wpm` holds the nonzero rows verbatim; their signs live in `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct RowSplit {
    pub w0: Matrix,
    pub wpm: Matrix,
    pub s: Vector,
    pub zero_rows: Vec<usize>,
    pub nonzero_rows: Vec<usize>,
}

impl RowSplit {
    pub fn ncols(&self) -> usize {
        self.w0.ncols()
    }

    /// `W±ᵀ s`.
    pub fn signed_row_sum(&self) -> Vector {
        self.wpm.tr_mul(&self.s)
    }
}

fn select_rows(w: &Matrix, rows: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(rows.len(), w.ncols());
    for (r, &i) in rows.iter().enumerate() {
        out.set_row(r, &w.row(i));
    }
    out
}

pub fn row_split(w: &Matrix, pattern: &SignPattern) -> Result<RowSplit> {
    if pattern.len() != w.nrows() {
        return Err(Error::invalid(format!(
            "sign pattern has {} entries but W has {} rows",
            pattern.len(),
            w.nrows()
        )));
    }
    let (zero_rows, nonzero_rows): (Vec<usize>, Vec<usize>) =
        (0..w.nrows()).partition(|&i| pattern.values[i] == 0);
    let s = Vector::from_iterator(
        nonzero_rows.len(),
        nonzero_rows.iter().map(|&i| f64::from(pattern.values[i])),
    );
    Ok(RowSplit {
        w0: select_rows(w, &zero_rows),
        wpm: select_rows(w, &nonzero_rows),
        s,
        zero_rows,
        nonzero_rows,
    })
}

/// `q = y − β W±ᵀ s`, the point that gets projected.
pub fn shifted_measurement(split: &RowSplit, y: &Vector, beta: f64) -> Vector {
    let mut q = y.clone();
    if !split.nonzero_rows.is_empty() {
        q.gemv_tr(-beta, &split.wpm, &split.s, 1.0);
    }
    q
}

/// `(I − W₀⁺W₀)(y − β W±ᵀ s)`. An empty `W₀` projects with the identity.
pub fn closed_form_reconstruct(split: &RowSplit, y: &Vector, beta: f64, rel_tol: Option<f64>) -> Result<Vector> {
    if y.len() != split.ncols() {
        return Err(Error::invalid(format!(
            "signal length {} does not match split with {} columns",
            y.len(),
            split.ncols()
        )));
    }
    let q = shifted_measurement(split, y, beta);
    Ok(SvdFactors::new(&split.w0, rel_tol)?.project_onto_nullspace(&q))
}

/// Fraction of random perturbations `ΔW` with `max|ΔW_ij| ≤ eta` that leave
/// the sign pattern of the lower-level minimizer unchanged.
///
/// Perturbed solves are warm-started from the unperturbed solution.
#[allow(clippy::too_many_arguments)]
pub fn sign_stability_probe(
    w: &Matrix,
    y: &Vector,
    beta: f64,
    eta: f64,
    trials: usize,
    params: &AdmmParams,
    gamma: f64,
    seed: u64,
) -> Result<f64> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::invalid(format!("eta must be nonnegative, got {eta}")));
    }
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    let base = AdmmSystem::new(w, params.rho)?.solve(y, beta, params, None)?;
    let reference = sign_pattern(w, &base.x_star, gamma)?;
    if eta == 0.0 {
        return Ok(1.0);
    }

    let (k, n) = w.shape();
    let mut rng = seeds::rng(seed);
    let perturbations: Vec<Matrix> = (0..trials)
        .map(|_| Matrix::from_fn(k, n, |_, _| rng.random_range(-eta..=eta)))
        .collect();
    let unchanged: Vec<bool> = perturbations
        .par_iter()
        .map(|dw| -> Result<bool> {
            let wp = w + dw;
            let r = AdmmSystem::new(&wp, params.rho)?.solve(y, beta, params, Some(&base.warm_start))?;
            Ok(sign_pattern(&wp, &r.x_star, gamma)?.values == reference.values)
        })
        .collect::<Result<_>>()?;
    Ok(unchanged.iter().filter(|&&u| u).count() as f64 / trials as f64)
}
