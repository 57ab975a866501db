//! Numeric defaults shared by the library and the command-line driver.
//!
//! | name                      | value  |
//! |---------------------------|--------|
//! | ADMM penalty ρ            | 1.0    |
//! | ADMM max iterations       | 5000   |
//! | ADMM primal / dual tol    | 1e-10  |
//! | sign stability window     | 25     |
//! | ADMM penalty updates      | 60, every 10 iterations |
//! | sign threshold γ          | 1e-3   |
//! | batch size B              | 100    |
//! | epochs E                  | 750    |
//! | learning rate α           | 1e-4   |
//! | finite-difference step    | 1e-6   |
//! | finite-difference solve tol | 1e-14 |
//! | gradient-check γ          | 20 × step |
//! | golden-section bracket    | [1e-4, 2.0] |
//! | golden-section tol        | 1e-4   |
//! | golden-section max evals  | 60     |
//! | unsupervised ρ / λ / iters| 1.0 / 0.1 / 500 |
//! | patch side / stride       | 8 / 7  |
//! | PSNR peak                 | 1.0    |
//! | generated signal length   | 64     |
//! | generated pairs           | 4000   |
//! | noise σ (normalized)      | 0.1    |
//! | synthetic image side      | 64     |
//! | gradient-check sizes      | 36, 64 |
//! | gradient-check instances  | 100    |
//! | sweep σ values            | 0.02, 0.05, 0.1, 0.2, 0.5 |
//! | sweep train / test pairs  | 200 / 20 |
//! | root seed                 | 0      |

pub const ADMM_RHO: f64 = 1.0;
pub const ADMM_MAX_ITERS: usize = 5000;
pub const ADMM_PRIMAL_TOL: f64 = 1e-10;
pub const ADMM_DUAL_TOL: f64 = 1e-10;
pub const SIGN_STABILITY_WINDOW: usize = 25;
/// Residual-balancing budget: how many times one solve may rescale ρ.
pub const ADMM_MAX_PENALTY_UPDATES: usize = 60;
pub const ADMM_PENALTY_CHECK_EVERY: usize = 10;
/// ρ is scaled by `TAU` when one residual exceeds `MU` times the other.
pub const ADMM_PENALTY_MU: f64 = 10.0;
pub const ADMM_PENALTY_TAU: f64 = 2.0;

pub const SIGN_THRESHOLD: f64 = 1e-3;

pub const BATCH_SIZE: usize = 100;
pub const EPOCHS: usize = 750;
pub const LEARNING_RATE: f64 = 1e-4;

pub const FD_STEP: f64 = 1e-6;
/// Residual tolerance for the lower-level solves inside the numerical
/// gradient; the central difference divides solver error by `2·step`.
pub const FD_SOLVE_TOL: f64 = 1e-14;

/// Sign threshold used by the gradient check, as a multiple of the step:
/// exact zeros then sit `20·step` from γ, outside the `10·step` band
/// where a perturbation could flip the pattern.
pub const GRADCHECK_GAMMA_STEPS: f64 = 20.0;

pub const GOLDEN_LO: f64 = 1e-4;
pub const GOLDEN_HI: f64 = 2.0;
pub const GOLDEN_TOL: f64 = 1e-4;
pub const GOLDEN_MAX_EVALS: usize = 60;

pub const UNSUPERVISED_RHO: f64 = 1.0;
pub const UNSUPERVISED_LAMBDA: f64 = 0.1;
pub const UNSUPERVISED_ITERS: usize = 500;

pub const PATCH_SIDE: usize = 8;
pub const PATCH_STRIDE: usize = 7;

pub const PSNR_PEAK: f64 = 1.0;

pub const SIGNAL_LEN: usize = 64;
pub const PAIR_COUNT: usize = 4000;
pub const SIGMA: f64 = 0.1;
pub const IMAGE_SIDE: usize = 64;
pub const GRADCHECK_SIZES: [usize; 2] = [36, 64];
pub const GRADCHECK_INSTANCES: usize = 100;
pub const SWEEP_SIGMAS: [f64; 5] = [0.02, 0.05, 0.1, 0.2, 0.5];
pub const SWEEP_TRAIN_PAIRS: usize = 200;
pub const SWEEP_TEST_PAIRS: usize = 20;
pub const ROOT_SEED: u64 = 0;
