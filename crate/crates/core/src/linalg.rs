//! SVD-based pseudoinverse, nullspace projection and numerical rank.
//!
//! Every pseudoinverse and projector in the crate is derived from
//! [`SvdFactors`], so the closed-form reconstruction and the gradient make
//! the same rank decision for a given matrix.

use crate::{Error, Matrix, Result, Vector};

/// Default relative cutoff: `max(rows, cols) · ε`. Singular values at or
/// below `rel_tol · σ_max` are treated as zero.
pub fn default_rel_tol(rows: usize, cols: usize) -> f64 {
    rows.max(cols).max(1) as f64 * f64::EPSILON
}

/// Numerical rank of a matrix together with the evidence behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct RankDecision {
    /// Nonincreasing.
    pub singular_values: Vec<f64>,
    /// Absolute cutoff; a singular value counts iff it is strictly above.
    pub tolerance: f64,
    pub rank: usize,
}

pub fn check_finite(a: &Matrix, what: &str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} has non-finite entries")))
    }
}

fn resolve_rel_tol(rel_tol: Option<f64>, rows: usize, cols: usize) -> Result<f64> {
    match rel_tol {
        None => Ok(default_rel_tol(rows, cols)),
        Some(t) if t > 0.0 && t < 1.0 => Ok(t),
        Some(t) => Err(Error::invalid(format!("rel_tol must lie in (0, 1), got {t}"))),
    }
}

/// Thin SVD of a matrix with the retained (above-cutoff) part split out.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    rows: usize,
    cols: usize,
    /// Left singular vectors of the retained directions, rows × r.
    u_r: Matrix,
    /// Retained singular values, length r.
    sigma_r: Vec<f64>,
    /// Right singular vectors of the retained directions, cols × r.
    v_r: Matrix,
    rank: RankDecision,
}

impl SvdFactors {
    pub fn new(a: &Matrix, rel_tol: Option<f64>) -> Result<Self> {
        check_finite(a, "matrix")?;
        let (rows, cols) = a.shape();
        let rel = resolve_rel_tol(rel_tol, rows, cols)?;
        if rows == 0 || cols == 0 {
            return Ok(Self {
                rows,
                cols,
                u_r: Matrix::zeros(rows, 0),
                sigma_r: Vec::new(),
                v_r: Matrix::zeros(cols, 0),
                rank: RankDecision {
                    singular_values: Vec::new(),
                    tolerance: 0.0,
                    rank: 0,
                },
            });
        }

        let svd = a.clone().svd(true, true);
        let u = svd.u.expect("left singular vectors requested");
        let v_t = svd.v_t.expect("right singular vectors requested");
        let sv = svd.singular_values;
        let sigma_max = sv.iter().cloned().fold(0.0, f64::max);
        let tolerance = rel * sigma_max;

        let keep: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] > tolerance).collect();
        let r = keep.len();
        let mut u_r = Matrix::zeros(rows, r);
        let mut v_r = Matrix::zeros(cols, r);
        let mut sigma_r = Vec::with_capacity(r);
        for (c, &i) in keep.iter().enumerate() {
            u_r.set_column(c, &u.column(i));
            v_r.set_column(c, &v_t.row(i).transpose());
            sigma_r.push(sv[i]);
        }

        let mut singular_values: Vec<f64> = sv.iter().cloned().collect();
        singular_values.sort_by(|x, y| y.total_cmp(x));

        Ok(Self {
            rows,
            cols,
            u_r,
            sigma_r,
            v_r,
            rank: RankDecision {
                singular_values,
                tolerance,
                rank: r,
            },
        })
    }

    pub fn rank(&self) -> &RankDecision {
        &self.rank
    }

    /// Moore–Penrose pseudoinverse, cols × rows.
    pub fn pseudoinverse(&self) -> Matrix {
        let mut v_scaled = self.v_r.clone();
        for (c, s) in self.sigma_r.iter().enumerate() {
            v_scaled.column_mut(c).scale_mut(1.0 / s);
        }
        if self.sigma_r.is_empty() {
            return Matrix::zeros(self.cols, self.rows);
        }
        v_scaled * self.u_r.transpose()
    }

    /// `I − A⁺A`, the orthogonal projector onto the nullspace of `A`.
    pub fn nullspace_projector(&self) -> Matrix {
        let mut p = Matrix::identity(self.cols, self.cols);
        if !self.sigma_r.is_empty() {
            p -= &self.v_r * self.v_r.transpose();
        }
        p
    }

    /// `(I − A⁺A) v` without forming the projector.
    pub fn project_onto_nullspace(&self, v: &Vector) -> Vector {
        if self.sigma_r.is_empty() {
            return v.clone();
        }
        let coeffs = self.v_r.tr_mul(v);
        v - &self.v_r * coeffs
    }
}

/// Moore–Penrose pseudoinverse with singular values `≤ rel_tol · σ_max`
/// zeroed. `None` selects [`default_rel_tol`].
pub fn pseudoinverse(a: &Matrix, rel_tol: Option<f64>) -> Result<Matrix> {
    Ok(SvdFactors::new(a, rel_tol)?.pseudoinverse())
}

/// Projector `I − A⁺A` onto the nullspace of `A` (n × n for n columns).
pub fn nullspace_projector(a: &Matrix, rel_tol: Option<f64>) -> Result<Matrix> {
    Ok(SvdFactors::new(a, rel_tol)?.nullspace_projector())
}

pub fn rank_decision(a: &Matrix, rel_tol: Option<f64>) -> Result<RankDecision> {
    Ok(SvdFactors::new(a, rel_tol)?.rank)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn mat(rows: usize, cols: usize, data: &[f64]) -> Matrix {
        Matrix::from_row_slice(rows, cols, data)
    }

    #[test]
    fn pinv_identity() {
        let i3 = Matrix::identity(3, 3);
        let p = pseudoinverse(&i3, Some(1e-12)).unwrap();
        assert_relative_eq!(p, i3, epsilon = 1e-15);
    }

    #[test]
    fn pinv_zero_is_zero_transposed_shape() {
        let z = Matrix::zeros(2, 4);
        let p = pseudoinverse(&z, None).unwrap();
        assert_eq!(p.shape(), (4, 2));
        assert!(p.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pinv_rank_deficient_diagonal() {
        let a = mat(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let p = pseudoinverse(&a, None).unwrap();
        assert_relative_eq!(p, mat(2, 2, &[0.5, 0.0, 0.0, 0.0]), epsilon = 1e-15);
        // A A⁺ A = A by direct multiplication
        assert_relative_eq!(&a * &p * &a, a, epsilon = 1e-15);
    }

    #[test]
    fn pinv_rejects_non_finite() {
        let a = mat(1, 2, &[1.0, f64::NAN]);
        assert!(matches!(pseudoinverse(&a, None), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn rel_tol_out_of_range_rejected() {
        let a = Matrix::identity(2, 2);
        assert!(pseudoinverse(&a, Some(0.0)).is_err());
        assert!(pseudoinverse(&a, Some(1.0)).is_err());
    }

    #[test]
    fn projector_of_empty_is_identity() {
        let a = Matrix::zeros(0, 5);
        let p = nullspace_projector(&a, None).unwrap();
        assert_eq!(p, Matrix::identity(5, 5));
    }

    #[test]
    fn projector_of_identity_is_zero() {
        let p = nullspace_projector(&Matrix::identity(4, 4), None).unwrap();
        assert!(p.amax() < 1e-15);
    }

    #[test]
    fn projector_of_ones_row() {
        let a = mat(1, 2, &[1.0, 1.0]);
        let p = nullspace_projector(&a, None).unwrap();
        assert_relative_eq!(p, mat(2, 2, &[0.5, -0.5, -0.5, 0.5]), epsilon = 1e-15);
        assert_relative_eq!(&p * &p, p, epsilon = 1e-15);
        assert!((&a * &p).amax() < 1e-15);
    }

    #[test]
    fn rank_decision_counts_strictly_above_tolerance() {
        let a = mat(3, 3, &[3.0, 0.0, 0.0, 0.0, 1e-20, 0.0, 0.0, 0.0, 0.0]);
        let r = rank_decision(&a, None).unwrap();
        assert_eq!(r.rank, 1);
        assert_eq!(r.singular_values.len(), 3);
        assert!(r.singular_values.windows(2).all(|w| w[0] >= w[1]));
        assert!(r.tolerance > 0.0);
    }

    #[test]
    fn project_matches_projector_matrix() {
        let a = mat(2, 4, &[1.0, 2.0, 0.0, -1.0, 0.5, 0.0, 3.0, 1.0]);
        let f = SvdFactors::new(&a, None).unwrap();
        let v = Vector::from_vec(vec![1.0, -2.0, 0.3, 4.0]);
        assert_relative_eq!(f.project_onto_nullspace(&v), f.nullspace_projector() * &v, epsilon = 1e-13);
    }

    fn arb_matrix() -> impl Strategy<Value = Matrix> {
        (1usize..7, 1usize..7).prop_flat_map(|(r, c)| {
            proptest::collection::vec(-3.0f64..3.0, r * c)
                .prop_map(move |d| Matrix::from_row_slice(r, c, &d))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn moore_penrose_identities(a in arb_matrix()) {
            let p = pseudoinverse(&a, None).unwrap();
            let scale = a.norm().max(1e-300);
            prop_assert!((&a * &p * &a - &a).norm() <= 1e-10 * scale);
            prop_assert!((&p * &a * &p - &p).norm() <= 1e-10 * p.norm().max(1.0));
            let pa = &p * &a;
            prop_assert!((pa.transpose() - &pa).norm() <= 1e-10);
            let ap = &a * &p;
            prop_assert!((ap.transpose() - &ap).norm() <= 1e-10);
        }

        #[test]
        fn projector_properties(a in arb_matrix()) {
            let p = nullspace_projector(&a, None).unwrap();
            prop_assert!((&p * &p - &p).norm() <= 1e-10);
            prop_assert!((p.transpose() - &p).norm() <= 1e-10);
            prop_assert!((&a * &p).norm() <= 1e-10 * a.norm().max(1.0));
        }

        #[test]
        fn rank_nullity_for_full_row_rank(
            (r, extra) in (1usize..5, 0usize..4),
            seed in proptest::collection::vec(-2.0f64..2.0, 64),
        ) {
            let c = r + extra;
            let mut a = Matrix::from_fn(r, c, |i, j| seed[(i * c + j) % seed.len()]);
            // diagonal boost keeps the rows independent
            for i in 0..r { a[(i, i)] += 5.0; }
            let ra = rank_decision(&a, None).unwrap().rank;
            prop_assert_eq!(ra, r);
            let p = nullspace_projector(&a, None).unwrap();
            // eigenvalues of a projector are 0 or 1, so its rank is its trace
            let rp = p.trace().round() as usize;
            prop_assert_eq!(rp + ra, c);
        }
    }
}
