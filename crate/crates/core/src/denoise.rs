//! Lower-level solver for `min_x ½‖x − y‖² + β‖Wx‖₁` and its analytic oracles.
//!
//! ADMM uses the splitting `z = Wx` with scaled dual `u`:
//!
//! ```text
//! x ← (I + ρWᵀW)⁻¹ (y + ρWᵀ(z − u))
//! z ← S_{β/ρ}(Wx + u)
//! u ← u + Wx − z
//! ```
//!
//! The inverse of `I + ρWᵀW` is formed once per [`AdmmSystem`] and shared by
//! every right-hand side solved against the same `W`. A solve may still
//! rebalance ρ a bounded number of times when one residual dwarfs the other
//! (heavily regularized problems stall otherwise); it then refactors a
//! private copy.

use crate::{defaults, linalg, Error, Matrix, Result, Vector};

/// Elementwise soft-threshold `S_t(v) = sign(v)·max(|v| − t, 0)`.
#[inline]
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

pub fn soft_threshold_vec(v: &Vector, t: f64) -> Vector {
    v.map(|e| soft_threshold(e, t))
}

#[inline]
fn sign_of(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmParams {
    /// Penalty for `W` rescaled to unit mean squared row norm. A system
    /// built from a `k`-row `W` uses `rho·k/‖W‖_F²`, which makes the
    /// iteration count independent of the scale of `W`.
    pub rho: f64,
    pub max_iters: usize,
    pub primal_tol: f64,
    pub dual_tol: f64,
    /// Number of consecutive iterations the support/sign of `z` must stay
    /// unchanged before the solver may stop.
    pub sign_stability_window: usize,
    /// How many times one solve may rescale its penalty; 0 keeps it fixed.
    pub max_penalty_updates: usize,
}

impl Default for AdmmParams {
    fn default() -> Self {
        Self {
            rho: defaults::ADMM_RHO,
            max_iters: defaults::ADMM_MAX_ITERS,
            primal_tol: defaults::ADMM_PRIMAL_TOL,
            dual_tol: defaults::ADMM_DUAL_TOL,
            sign_stability_window: defaults::SIGN_STABILITY_WINDOW,
            max_penalty_updates: defaults::ADMM_MAX_PENALTY_UPDATES,
        }
    }
}

impl AdmmParams {
    /// Settings for objective evaluations inside numerical differentiation.
    pub fn high_accuracy() -> Self {
        Self {
            max_iters: 20_000,
            primal_tol: defaults::FD_SOLVE_TOL,
            dual_tol: defaults::FD_SOLVE_TOL,
            sign_stability_window: 2,
            // rebalancing slows the tail to 1e-14 on well-scaled problems
            max_penalty_updates: 0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::invalid(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.primal_tol > 0.0 && self.dual_tol > 0.0) {
            return Err(Error::invalid("ADMM tolerances must be positive"));
        }
        if self.sign_stability_window == 0 {
            return Err(Error::invalid("sign_stability_window must be at least 1"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        Ok(())
    }
}

/// Split variable and scaled dual, enough to resume ADMM.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    pub z: Vector,
    pub u: Vector,
    /// Penalty `u` was scaled by; resuming under another penalty rescales.
    pub rho: f64,
}

#[derive(Debug, Clone)]
pub struct DenoiseResult {
    pub x_star: Vector,
    pub iterations_used: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Sign of the split variable `z` at termination, one entry per row of W.
    pub sign_pattern: Vec<i8>,
    pub warm_start: WarmStart,
}

/// `W` together with the cached inverse of `I + ρWᵀW`.
#[derive(Debug, Clone)]
pub struct AdmmSystem {
    w: Matrix,
    inv: Matrix,
    /// Penalty actually used in the iteration.
    rho: f64,
    /// The scale-free `rho` this system was built from.
    base_rho: f64,
    all_zero: bool,
}

impl AdmmSystem {
    /// Factorizes `I + ρWᵀW` with `ρ = rho·k/‖W‖_F²`.
    pub fn new(w: &Matrix, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::invalid(format!("rho must be positive, got {rho}")));
        }
        let fro2 = w.norm_squared();
        let penalty = if fro2 > 0.0 { rho * w.nrows() as f64 / fro2 } else { rho };
        let mut sys = Self::with_penalty(w, penalty)?;
        sys.base_rho = rho;
        Ok(sys)
    }

    /// Factorizes `I + ρWᵀW` with the penalty `ρ` taken as given.
    pub fn with_penalty(w: &Matrix, rho: f64) -> Result<Self> {
        linalg::check_finite(w, "W")?;
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::invalid(format!("penalty must be positive and finite, got {rho}")));
        }
        let all_zero = w.iter().all(|&v| v == 0.0);
        let inv = if all_zero {
            Matrix::identity(w.ncols(), w.ncols())
        } else {
            factor_inverse(w, rho)?
        };
        Ok(Self {
            w: w.clone(),
            inv,
            rho,
            base_rho: rho,
            all_zero,
        })
    }

    pub fn w(&self) -> &Matrix {
        &self.w
    }

    /// Penalty used in the iteration.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// System for `W + delta·e_row e_colᵀ` with the same penalty, built
    /// from this one with a rank-2 Woodbury update in O(n²).
    pub fn with_entry_perturbed(&self, row: usize, col: usize, delta: f64) -> Result<Self> {
        if row >= self.w.nrows() || col >= self.w.ncols() || !delta.is_finite() {
            return Err(Error::invalid(format!("cannot perturb entry ({row}, {col}) by {delta}")));
        }
        let mut w = self.w.clone();
        w[(row, col)] += delta;
        if delta == 0.0 {
            return Ok(Self { w, ..self.clone() });
        }
        if self.all_zero {
            // the zero matrix fixes no scale, so pick one for the perturbed W
            return Self::new(&w, self.base_rho);
        }
        let n = self.w.ncols();
        // WᵀW changes by delta·(e_c bᵀ + b e_cᵀ), b = w_row + (delta/2) e_c
        let mut b: Vector = self.w.row(row).transpose();
        b[col] += 0.5 * delta;
        let m_e = self.inv.column(col).into_owned();
        let m_b = &self.inv * &b;
        let g00 = self.inv[(col, col)];
        let g01 = m_b[col];
        let g11 = b.dot(&m_b);
        let c_inv = 1.0 / (self.rho * delta);
        // K = (C⁻¹ + UᵀMU)⁻¹ with C⁻¹ = c_inv·[[0,1],[1,0]]
        let a00 = g00;
        let a01 = g01 + c_inv;
        let a11 = g11;
        let det = a00 * a11 - a01 * a01;
        let k00 = a11 / det;
        let k01 = -a01 / det;
        let k11 = a00 / det;
        let mut inv = self.inv.clone();
        for j in 0..n {
            let (ej, bj) = (m_e[j], m_b[j]);
            let t0 = k00 * ej + k01 * bj;
            let t1 = k01 * ej + k11 * bj;
            for i in 0..n {
                inv[(i, j)] -= m_e[i] * t0 + m_b[i] * t1;
            }
        }
        Ok(Self {
            all_zero: w.iter().all(|&v| v == 0.0),
            w,
            inv,
            rho: self.rho,
            base_rho: self.base_rho,
        })
    }

    /// Runs ADMM on `½‖x − y‖² + β‖Wx‖₁`.
    ///
    /// Stops once both residuals are below tolerance and the sign pattern
    /// of `z` has been constant for `sign_stability_window` iterations.
    pub fn solve(
        &self,
        y: &Vector,
        beta: f64,
        params: &AdmmParams,
        warm: Option<&WarmStart>,
    ) -> Result<DenoiseResult> {
        params.validate()?;
        let (k, n) = self.w.shape();
        if y.len() != n {
            return Err(Error::invalid(format!(
                "signal length {} does not match W with {} columns",
                y.len(),
                n
            )));
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("y has non-finite entries"));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::invalid(format!("beta must be positive, got {beta}")));
        }
        if self.all_zero || k == 0 {
            return Ok(DenoiseResult {
                x_star: y.clone(),
                iterations_used: 0,
                primal_residual: 0.0,
                dual_residual: 0.0,
                sign_pattern: vec![0; k],
                warm_start: WarmStart {
                    z: Vector::zeros(k),
                    u: Vector::zeros(k),
                    rho: self.rho,
                },
            });
        }

        let mut rho = self.rho;
        let mut thresh = beta / rho;
        let mut own_inv: Option<Matrix> = None;
        let mut updates_left = params.max_penalty_updates;
        let (mut z, mut u) = match warm {
            Some(ws) if ws.z.len() == k && ws.u.len() == k => (ws.z.clone(), &ws.u * (ws.rho / rho)),
            _ => (Vector::zeros(k), Vector::zeros(k)),
        };
        let mut x = Vector::zeros(n);
        let mut rhs = Vector::zeros(n);
        let mut wx = Vector::zeros(k);
        let mut diff = Vector::zeros(k);
        let mut wt_diff = Vector::zeros(n);
        let mut signs: Vec<i8> = z.iter().map(|&v| sign_of(v)).collect();
        let mut stable = 0usize;
        let mut primal = f64::INFINITY;
        let mut dual = f64::INFINITY;

        for iter in 1..=params.max_iters {
            diff.copy_from(&z);
            diff -= &u;
            rhs.copy_from(y);
            rhs.gemv_tr(rho, &self.w, &diff, 1.0);
            x.gemv(1.0, own_inv.as_ref().unwrap_or(&self.inv), &rhs, 0.0);
            wx.gemv(1.0, &self.w, &x, 0.0);

            let mut changed = false;
            let mut primal_sq = 0.0;
            for i in 0..k {
                let prev = z[i];
                let v = wx[i] + u[i];
                let zi = soft_threshold(v, thresh);
                z[i] = zi;
                diff[i] = zi - prev;
                let r = wx[i] - zi;
                u[i] += r;
                primal_sq += r * r;
                let s = sign_of(zi);
                if s != signs[i] {
                    signs[i] = s;
                    changed = true;
                }
            }
            primal = primal_sq.sqrt();
            stable = if changed { 0 } else { stable + 1 };

            let converging = primal <= params.primal_tol && stable >= params.sign_stability_window;
            let rebalance = updates_left > 0 && iter % defaults::ADMM_PENALTY_CHECK_EVERY == 0;
            if converging || rebalance {
                wt_diff.gemv_tr(rho, &self.w, &diff, 0.0);
                dual = wt_diff.norm();
            }
            if rebalance && !converging {
                let scale = if primal > defaults::ADMM_PENALTY_MU * dual {
                    defaults::ADMM_PENALTY_TAU
                } else if dual > defaults::ADMM_PENALTY_MU * primal {
                    1.0 / defaults::ADMM_PENALTY_TAU
                } else {
                    1.0
                };
                if scale != 1.0 {
                    updates_left -= 1;
                    rho *= scale;
                    thresh = beta / rho;
                    u /= scale;
                    own_inv = Some(factor_inverse(&self.w, rho)?);
                }
            }
            if converging && dual <= params.dual_tol {
                return Ok(DenoiseResult {
                    x_star: x,
                    iterations_used: iter,
                    primal_residual: primal,
                    dual_residual: dual,
                    sign_pattern: signs,
                    warm_start: WarmStart { z, u, rho },
                });
            }
        }
        if !dual.is_finite() {
            wt_diff.gemv_tr(rho, &self.w, &diff, 0.0);
            dual = wt_diff.norm();
        }
        Err(Error::NotConverged {
            iterations: params.max_iters,
            primal_residual: primal,
            dual_residual: dual,
        })
    }
}

/// `(I + ρWᵀW)⁻¹`, symmetrized.
fn factor_inverse(w: &Matrix, rho: f64) -> Result<Matrix> {
    let n = w.ncols();
    let mut a = w.tr_mul(w);
    a *= rho;
    for i in 0..n {
        a[(i, i)] += 1.0;
    }
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::invalid("I + rho W^T W is not positive definite"))?;
    let mut inv = chol.inverse();
    // exact symmetry keeps rank-2 updates symmetric
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (inv[(i, j)] + inv[(j, i)]);
            inv[(i, j)] = m;
            inv[(j, i)] = m;
        }
    }
    Ok(inv)
}

/// Minimizer of `½‖x − y‖² + β‖Wx‖₁` by ADMM (cold start).
pub fn admm_denoise(w: &Matrix, y: &Vector, beta: f64, params: &AdmmParams) -> Result<DenoiseResult> {
    params.validate()?;
    AdmmSystem::new(w, params.rho)?.solve(y, beta, params, None)
}

/// Objective `½‖x − y‖² + β‖Wx‖₁`.
pub fn objective(w: &Matrix, y: &Vector, beta: f64, x: &Vector) -> f64 {
    0.5 * (x - y).norm_squared() + beta * (w * x).lp_norm(1)
}

/// Closed-form minimizer `Wᵀ S_λ(W y)` for orthogonal square `W`.
pub fn orthogonal_closed_form(w: &Matrix, y: &Vector, lambda: f64) -> Result<Vector> {
    let (k, n) = w.shape();
    if k != n {
        return Err(Error::invalid(format!("orthogonal W must be square, got {k}x{n}")));
    }
    if y.len() != n {
        return Err(Error::invalid("signal length does not match W"));
    }
    if lambda < 0.0 {
        return Err(Error::invalid("lambda must be nonnegative"));
    }
    let defect = (w * w.transpose() - Matrix::identity(n, n)).norm();
    if !(defect <= 1e-8) {
        return Err(Error::invalid(format!("W is not orthogonal: ||WW^T - I||_F = {defect:e}")));
    }
    if lambda == 0.0 {
        return Ok(y.clone());
    }
    Ok(w.tr_mul(&soft_threshold_vec(&(w * y), lambda)))
}

/// Minimizer of the scalar problem `½(x − y)² + |w x|`.
pub fn scalar_denoise(w: f64, y: f64) -> f64 {
    let a = w.abs();
    if y >= 0.0 {
        (y - a).max(0.0)
    } else {
        (y + a).min(0.0)
    }
}

/// Rows with `|[Wx]_i|` at or below this are treated as zero by
/// [`optimality_residual`].
pub const OPTIMALITY_ZERO_TOL: f64 = 1e-7;

/// Distance from 0 to the subdifferential `x − y + β Wᵀ ∂‖Wx‖₁`.
///
/// Nonzero rows contribute `sign([Wx]_i)`; zero rows contribute a free
/// coefficient in `[−1, 1]`, chosen by box-constrained least squares.
pub fn optimality_residual(w: &Matrix, y: &Vector, beta: f64, x: &Vector) -> f64 {
    optimality_residual_with_tol(w, y, beta, x, OPTIMALITY_ZERO_TOL)
}

pub fn optimality_residual_with_tol(w: &Matrix, y: &Vector, beta: f64, x: &Vector, zero_tol: f64) -> f64 {
    let wx = w * x;
    let mut base = x - y;
    let mut zero_rows = Vec::new();
    for (i, &v) in wx.iter().enumerate() {
        if v.abs() <= zero_tol {
            zero_rows.push(i);
        } else {
            let s = if v > 0.0 { beta } else { -beta };
            base.axpy(s, &w.row(i).transpose(), 1.0);
        }
    }
    if zero_rows.is_empty() {
        return base.norm();
    }
    // min_{v ∈ [−1,1]^k0} ‖base + β W₀ᵀ v‖ by cyclic coordinate descent
    let cols: Vec<Vector> = zero_rows.iter().map(|&i| w.row(i).transpose() * beta).collect();
    let norms: Vec<f64> = cols.iter().map(|c| c.norm_squared()).collect();
    let mut coef = vec![0.0; cols.len()];
    let mut res = base;
    for _sweep in 0..20_000 {
        let mut max_step = 0.0f64;
        for (j, c) in cols.iter().enumerate() {
            if norms[j] == 0.0 {
                continue;
            }
            let target = (coef[j] - c.dot(&res) / norms[j]).clamp(-1.0, 1.0);
            let step = target - coef[j];
            if step != 0.0 {
                res.axpy(step, c, 1.0);
                coef[j] = target;
                max_step = max_step.max(step.abs() * norms[j].sqrt());
            }
        }
        if max_step < 1e-15 {
            break;
        }
    }
    res.norm()
}
