//! Oracles and instance generators shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_distr::StandardNormal;
use tlearn::closedform::RowSplit;
use tlearn::seeds;
use tlearn::{Matrix, Vector};

pub fn gaussian_matrix(rng: &mut seeds::Rng, k: usize, n: usize, scale: f64) -> Matrix {
    Matrix::from_fn(k, n, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

pub fn gaussian_vector(rng: &mut seeds::Rng, n: usize, scale: f64) -> Vector {
    Vector::from_fn(n, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Solves `[I W₀ᵀ; W₀ 0][x; ν] = [y − βW±ᵀs; 0]` by dense LU and returns x.
/// `None` when the saddle-point matrix is singular (rank-deficient W₀).
pub fn kkt_reconstruct(split: &RowSplit, y: &Vector, beta: f64) -> Option<Vector> {
    let n = y.len();
    let z = split.w0.nrows();
    let mut m = Matrix::zeros(n + z, n + z);
    for i in 0..n {
        m[(i, i)] = 1.0;
    }
    for r in 0..z {
        for c in 0..n {
            m[(n + r, c)] = split.w0[(r, c)];
            m[(c, n + r)] = split.w0[(r, c)];
        }
    }
    let mut rhs = Vector::zeros(n + z);
    let q = y - split.wpm.tr_mul(&split.s) * beta;
    rhs.rows_mut(0, n).copy_from(&q);
    let sol = m.lu().solve(&rhs)?;
    Some(sol.rows(0, n).into_owned())
}

/// Striped test image: vertical bands of `width` pixels alternating
/// between 0.25 and 0.75.
pub fn striped_image(side: usize, width: usize) -> Matrix {
    Matrix::from_fn(side, side, |_, c| if (c / width).is_multiple_of(2) { 0.25 } else { 0.75 })
}
