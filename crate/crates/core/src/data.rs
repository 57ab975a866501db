//! Synthetic signals, Gaussian noise and image patches.

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::baselines::dct_matrix;
use crate::{seeds, Error, Matrix, Result, Vector};

/// A clean signal and its noisy measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub x_clean: Vector,
    pub y_noisy: Vector,
}

impl TrainingPair {
    pub fn new(x_clean: Vector, y_noisy: Vector) -> Result<Self> {
        if x_clean.len() != y_noisy.len() {
            return Err(Error::invalid(format!(
                "clean length {} differs from noisy length {}",
                x_clean.len(),
                y_noisy.len()
            )));
        }
        if !x_clean.iter().chain(y_noisy.iter()).all(|v| v.is_finite()) {
            return Err(Error::invalid("training pair has non-finite entries"));
        }
        Ok(Self { x_clean, y_noisy })
    }

    pub fn len(&self) -> usize {
        self.x_clean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_clean.is_empty()
    }

    /// `½‖y − x‖²`, the loss of returning the measurement unchanged.
    pub fn noisy_loss(&self) -> f64 {
        0.5 * (&self.y_noisy - &self.x_clean).norm_squared()
    }
}

/// Checks that all pairs are non-empty and share one length; returns it.
pub fn common_length(pairs: &[TrainingPair]) -> Result<usize> {
    let n = pairs.first().ok_or_else(|| Error::invalid("no training pairs"))?.len();
    if n == 0 {
        return Err(Error::invalid("training pairs are empty vectors"));
    }
    if let Some((i, p)) = pairs.iter().enumerate().find(|(_, p)| p.len() != n) {
        return Err(Error::invalid(format!("pair {i} has length {} but pair 0 has {n}", p.len())));
    }
    Ok(n)
}

/// Piecewise-constant signal with `num_pieces` segments.
///
/// Breakpoints are distinct positions drawn uniformly from `1..n`; levels
/// are uniform in `[0, 1]` and rescaled so the maximum is exactly 1.
pub fn gen_piecewise_constant(n: usize, num_pieces: usize, seed: u64) -> Result<Vector> {
    if num_pieces == 0 || num_pieces > n {
        return Err(Error::invalid(format!("num_pieces must lie in 1..={n}, got {num_pieces}")));
    }
    let mut rng = seeds::rng(seed);
    let mut breaks: Vec<usize> = index::sample(&mut rng, n - 1, num_pieces - 1)
        .into_iter()
        .map(|b| b + 1)
        .collect();
    breaks.sort_unstable();
    breaks.push(n);
    let levels: Vec<f64> = (0..num_pieces).map(|_| rng.random::<f64>()).collect();
    let peak = levels.iter().cloned().fold(0.0, f64::max);
    let mut x = Vector::zeros(n);
    let mut start = 0;
    for (piece, &end) in breaks.iter().enumerate() {
        let level = if peak > 0.0 { levels[piece] / peak } else { 1.0 };
        for i in start..end {
            x[i] = level;
        }
        start = end;
    }
    Ok(x)
}

/// Signal with exactly `num_harmonics` nonzero orthonormal DCT-II
/// coefficients, scaled so its largest-magnitude entry equals +1.
///
/// Coefficient magnitudes are uniform in `[0.2, 1]` with random signs.
pub fn gen_dct_sparse(n: usize, num_harmonics: usize, seed: u64) -> Result<Vector> {
    if num_harmonics == 0 || num_harmonics > n {
        return Err(Error::invalid(format!("num_harmonics must lie in 1..={n}, got {num_harmonics}")));
    }
    let mut rng = seeds::rng(seed);
    let mut coeffs = Vector::zeros(n);
    for h in index::sample(&mut rng, n, num_harmonics) {
        let mag = rng.random_range(0.2..=1.0);
        coeffs[h] = if rng.random::<bool>() { mag } else { -mag };
    }
    from_dct_coefficients(&coeffs)
}

/// Inverse orthonormal DCT-II of `coeffs`, scaled so the largest-magnitude
/// entry equals +1.
pub fn from_dct_coefficients(coeffs: &Vector) -> Result<Vector> {
    let x = dct_matrix(coeffs.len())?.tr_mul(coeffs);
    let peak = x[x.iamax()];
    if peak == 0.0 {
        return Err(Error::invalid("all DCT coefficients are zero"));
    }
    Ok(x / peak)
}

/// `x + ε` with `ε ~ N(0, σ²I)`.
pub fn add_noise(x: &Vector, sigma: f64, seed: u64) -> Result<Vector> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be nonnegative, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(x.clone());
    }
    let mut rng = seeds::rng(seed);
    Ok(x.map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal)))
}

/// Image version of [`add_noise`].
pub fn add_noise_image(img: &Matrix, sigma: f64, seed: u64) -> Result<Matrix> {
    let flat = Vector::from_column_slice(img.as_slice());
    let noisy = add_noise(&flat, sigma, seed)?;
    Ok(Matrix::from_column_slice(img.nrows(), img.ncols(), noisy.as_slice()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalKind {
    PiecewiseConstant,
    DctSparse,
}

/// Recipe for a synthetic 1D dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    pub kind: SignalKind,
    pub n: usize,
    /// Pieces (or harmonics) per signal are uniform in this inclusive range.
    pub min_parts: usize,
    pub max_parts: usize,
    pub sigma: f64,
}

impl SignalSpec {
    /// Piecewise-constant signals with 2 to `max(2, n/8)` pieces.
    pub fn piecewise(n: usize, sigma: f64) -> Self {
        Self {
            kind: SignalKind::PiecewiseConstant,
            n,
            min_parts: 2.min(n),
            max_parts: (n / 8).max(2).min(n),
            sigma,
        }
    }

    /// DCT-sparse signals with 1 to `max(1, n/16)` harmonics.
    pub fn dct(n: usize, sigma: f64) -> Self {
        Self {
            kind: SignalKind::DctSparse,
            n,
            min_parts: 1,
            max_parts: (n / 16).max(1),
            sigma,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("signal length must be positive"));
        }
        if self.min_parts == 0 || self.min_parts > self.max_parts || self.max_parts > self.n {
            return Err(Error::invalid(format!(
                "parts range {}..={} invalid for n = {}",
                self.min_parts, self.max_parts, self.n
            )));
        }
        Ok(())
    }

    /// Pair number `index` of the dataset rooted at `seed`.
    pub fn pair(&self, seed: u64, index: u64) -> Result<TrainingPair> {
        self.validate()?;
        let mut rng = seeds::rng(seeds::derive(seed, seeds::PURPOSE_DATA, index));
        let parts = rng.random_range(self.min_parts..=self.max_parts);
        let signal_seed = rng.random::<u64>();
        let x = match self.kind {
            SignalKind::PiecewiseConstant => gen_piecewise_constant(self.n, parts, signal_seed)?,
            SignalKind::DctSparse => gen_dct_sparse(self.n, parts, signal_seed)?,
        };
        let y = add_noise(&x, self.sigma, seeds::derive(seed, seeds::PURPOSE_NOISE, index))?;
        TrainingPair::new(x, y)
    }

    /// Pairs `first..first + count`; disjoint index ranges give independent
    /// training and test sets from one root seed.
    pub fn generate(&self, seed: u64, first: u64, count: usize) -> Result<Vec<TrainingPair>> {
        (first..first + count as u64).map(|i| self.pair(seed, i)).collect()
    }
}

/// Placement of square patches on an image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchGrid {
    pub image_height: usize,
    pub image_width: usize,
    pub patch_side: usize,
    pub stride: usize,
    /// `(row, col)` of each patch's top-left pixel, row-major.
    pub patch_origins: Vec<(usize, usize)>,
}

fn axis_origins(len: usize, p: usize, stride: usize) -> Vec<usize> {
    let last = len - p;
    let mut o: Vec<usize> = (0..=last).step_by(stride).collect();
    if *o.last().expect("at least origin 0") != last {
        o.push(last);
    }
    o
}

impl PatchGrid {
    /// Origins every `stride` pixels plus one flush with each far border.
    /// `stride ≤ p` is required so that every pixel is covered.
    pub fn new(height: usize, width: usize, p: usize, stride: usize) -> Result<Self> {
        if p == 0 || p > height.min(width) {
            return Err(Error::invalid(format!(
                "patch side {p} must lie in 1..={} for a {height}x{width} image",
                height.min(width)
            )));
        }
        if stride == 0 || stride > p {
            return Err(Error::invalid(format!(
                "stride must lie in 1..={p} so patches cover the image, got {stride}"
            )));
        }
        let rows = axis_origins(height, p, stride);
        let cols = axis_origins(width, p, stride);
        let patch_origins = rows.iter().flat_map(|&r| cols.iter().map(move |&c| (r, c))).collect();
        Ok(Self {
            image_height: height,
            image_width: width,
            patch_side: p,
            stride,
            patch_origins,
        })
    }

    pub fn len(&self) -> usize {
        self.patch_origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patch_origins.is_empty()
    }
}

/// Row-major vectorized `p×p` patches covering the whole image.
pub fn extract_patches(image: &Matrix, p: usize, stride: usize) -> Result<(PatchGrid, Vec<Vector>)> {
    let grid = PatchGrid::new(image.nrows(), image.ncols(), p, stride)?;
    let patches = grid
        .patch_origins
        .iter()
        .map(|&(r0, c0)| Vector::from_fn(p * p, |k, _| image[(r0 + k / p, c0 + k % p)]))
        .collect();
    Ok((grid, patches))
}

/// Per-pixel mean of all patches covering each pixel.
///
/// The mean is accumulated incrementally, so untouched patches reproduce
/// the image exactly.
pub fn aggregate_patches(grid: &PatchGrid, patches: &[Vector]) -> Result<Matrix> {
    if patches.len() != grid.len() {
        return Err(Error::invalid(format!(
            "{} patches supplied for a grid of {}",
            patches.len(),
            grid.len()
        )));
    }
    let p = grid.patch_side;
    if let Some(bad) = patches.iter().find(|v| v.len() != p * p) {
        return Err(Error::invalid(format!("patch of length {} where {} expected", bad.len(), p * p)));
    }
    let mut mean = Matrix::zeros(grid.image_height, grid.image_width);
    let mut count = vec![0u32; grid.image_height * grid.image_width];
    for (&(r0, c0), patch) in grid.patch_origins.iter().zip(patches) {
        for k in 0..p * p {
            let (r, c) = (r0 + k / p, c0 + k % p);
            let cnt = &mut count[r * grid.image_width + c];
            *cnt += 1;
            let m = &mut mean[(r, c)];
            *m += (patch[k] - *m) / f64::from(*cnt);
        }
    }
    Ok(mean)
}
