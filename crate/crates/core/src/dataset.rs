//! Seeded synthetic dataset generators.
//!
//! Every generator is a pure function of its arguments and seed. Generators
//! that draw labels from a non-degenerate distribution consume a label stream
//! that is separate from the geometry stream, so regenerating with a different
//! label seed flips labels only on rows that are flagged ambiguous.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::fmath;
use crate::linalg::Matrix;
use crate::rng::{derive_seed, Rng};

const GEOM_SALT: u64 = 0x67656f6d; // "geom"
const LABEL_SALT: u64 = 0x6c61626c; // "labl"

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataError {
    InvalidCount,
    InvalidRate,
    /// Rejection sampling exceeded its attempt budget.
    ExhaustedSampling,
}

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataError::InvalidCount => write!(f, "invalid sample count"),
            DataError::InvalidRate => write!(f, "rate must lie in [0, 1)"),
            DataError::ExhaustedSampling => write!(f, "rejection sampling exhausted"),
        }
    }
}

impl core::error::Error for DataError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Pool,
    Test,
    Ood,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Pool => "pool",
            Split::Test => "test",
            Split::Ood => "ood",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        Some(match s {
            "train" => Split::Train,
            "val" => Split::Val,
            "pool" => Split::Pool,
            "test" => Split::Test,
            "ood" => Split::Ood,
            _ => return None,
        })
    }
}

/// Feature rows with integer labels, ambiguity flags, and split tags.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<usize>,
    pub ambiguous: Vec<bool>,
    pub split: Vec<Split>,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<usize>, ambiguous: Vec<bool>, split: Vec<Split>) -> Self {
        assert_eq!(x.rows(), y.len(), "rows/labels mismatch");
        assert_eq!(x.rows(), ambiguous.len(), "rows/flags mismatch");
        assert_eq!(x.rows(), split.len(), "rows/splits mismatch");
        assert!(x.is_finite(), "features must be finite");
        Dataset { x, y, ambiguous, split }
    }

    pub fn empty(dim: usize) -> Self {
        Dataset {
            x: Matrix::zeros(0, dim),
            y: Vec::new(),
            ambiguous: Vec::new(),
            split: Vec::new(),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.x.rows()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.y.iter().copied().max().map_or(0, |m| m + 1)
    }

    /// Retag every row with the given split.
    pub fn with_split(mut self, split: Split) -> Self {
        self.split.iter_mut().for_each(|s| *s = split);
        self
    }

    /// Rows selected by index, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let d = self.dim();
        let mut x = Matrix::zeros(indices.len(), d);
        let mut y = Vec::with_capacity(indices.len());
        let mut ambiguous = Vec::with_capacity(indices.len());
        let mut split = Vec::with_capacity(indices.len());
        for (k, &i) in indices.iter().enumerate() {
            x.row_mut(k).copy_from_slice(self.x.row(i));
            y.push(self.y[i]);
            ambiguous.push(self.ambiguous[i]);
            split.push(self.split[i]);
        }
        Dataset { x, y, ambiguous, split }
    }

    pub fn indices_with_split(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.split[i] == split).collect()
    }

    /// Concatenate rows of two datasets with equal dimension.
    pub fn concat(&self, other: &Dataset) -> Dataset {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        let mut data = self.x.data().to_vec();
        data.extend_from_slice(other.x.data());
        let x = Matrix::from_vec(self.len() + other.len(), self.dim(), data);
        let mut y = self.y.clone();
        y.extend_from_slice(&other.y);
        let mut ambiguous = self.ambiguous.clone();
        ambiguous.extend_from_slice(&other.ambiguous);
        let mut split = self.split.clone();
        split.extend_from_slice(&other.split);
        Dataset { x, y, ambiguous, split }
    }
}

/// Point on the first canonical moon arc at parameter t in [0, pi].
#[inline]
fn moon0(t: f64) -> (f64, f64) {
    (fmath::cos(t), fmath::sin(t))
}

/// Point on the second canonical moon arc at parameter t in [0, pi].
#[inline]
fn moon1(t: f64) -> (f64, f64) {
    (1.0 - fmath::cos(t), 0.5 - fmath::sin(t))
}

/// Two interleaving half-circles with additive Gaussian coordinate noise.
///
/// Classes are balanced to within one sample; class 0 is the upper arc.
pub fn two_moons(n: usize, noise: f64, seed: u64) -> Result<Dataset, DataError> {
    if n < 2 {
        return Err(DataError::InvalidCount);
    }
    if !(noise >= 0.0) {
        return Err(DataError::InvalidRate);
    }
    let n0 = n / 2;
    let n1 = n - n0;
    let mut rng = Rng::new(derive_seed(seed, GEOM_SALT));
    let mut x = Matrix::zeros(n, 2);
    let mut y = Vec::with_capacity(n);
    for i in 0..n0 {
        let t = core::f64::consts::PI * i as f64 / (n0 - 1).max(1) as f64;
        let (px, py) = moon0(t);
        x.set(i, 0, px);
        x.set(i, 1, py);
        y.push(0);
    }
    for i in 0..n1 {
        let t = core::f64::consts::PI * i as f64 / (n1 - 1).max(1) as f64;
        let (px, py) = moon1(t);
        x.set(n0 + i, 0, px);
        x.set(n0 + i, 1, py);
        y.push(1);
    }
    if noise > 0.0 {
        for v in x.data_mut() {
            *v += noise * rng.normal();
        }
    }
    Ok(Dataset::new(x, y, vec![false; n], vec![Split::Train; n]))
}

/// Three well-separated 2D Gaussians with a fraction of labels resampled
/// uniformly over the other two classes. Resampled rows are flagged ambiguous.
pub fn three_gaussians_label_noise(
    n: usize,
    noise_rate: f64,
    seed: u64,
) -> Result<Dataset, DataError> {
    three_gaussians_label_noise_streams(n, noise_rate, derive_seed(seed, GEOM_SALT), derive_seed(seed, LABEL_SALT))
}

/// Cluster centers used by [`three_gaussians_label_noise`]; unit isotropic
/// covariance around each.
pub const THREE_GAUSSIAN_MEANS: [[f64; 2]; 3] = [[-4.0, 0.0], [4.0, 0.0], [0.0, 6.0]];

/// Variant of [`three_gaussians_label_noise`] with separate geometry and
/// label streams, for checking that only label-noise decisions depend on the
/// label stream.
pub fn three_gaussians_label_noise_streams(
    n: usize,
    noise_rate: f64,
    geom_seed: u64,
    label_seed: u64,
) -> Result<Dataset, DataError> {
    if !(0.0..1.0).contains(&noise_rate) {
        return Err(DataError::InvalidRate);
    }
    let mut geom = Rng::new(geom_seed);
    let mut labels = Rng::new(label_seed);
    let mut x = Matrix::zeros(n, 2);
    let mut y = Vec::with_capacity(n);
    let mut ambiguous = vec![false; n];
    for i in 0..n {
        let c = i % 3;
        let m = THREE_GAUSSIAN_MEANS[c];
        x.set(i, 0, m[0] + geom.normal());
        x.set(i, 1, m[1] + geom.normal());
        y.push(c);
    }
    for i in 0..n {
        if labels.bernoulli(noise_rate) {
            let shift = 1 + labels.below(2);
            y[i] = (y[i] + shift) % 3;
            ambiguous[i] = true;
        }
    }
    Ok(Dataset::new(x, y, ambiguous, vec![Split::Train; n]))
}

const ARC_STEPS: usize = 512;

/// Dense polylines along both canonical arcs, used for nearest-point queries.
fn arc_tables() -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
    let mut a0 = Vec::with_capacity(ARC_STEPS + 1);
    let mut a1 = Vec::with_capacity(ARC_STEPS + 1);
    for k in 0..=ARC_STEPS {
        let t = core::f64::consts::PI * k as f64 / ARC_STEPS as f64;
        let (x0, y0) = moon0(t);
        let (x1, y1) = moon1(t);
        a0.push([x0, y0]);
        a1.push([x1, y1]);
    }
    (a0, a1)
}

fn dist_to_polyline(px: f64, py: f64, pts: &[[f64; 2]]) -> f64 {
    let mut best = f64::INFINITY;
    for p in pts {
        let d2 = (px - p[0]) * (px - p[0]) + (py - p[1]) * (py - p[1]);
        if d2 < best {
            best = d2;
        }
    }
    fmath::sqrt(best)
}

fn in_band_tables(px: f64, py: f64, a0: &[[f64; 2]], a1: &[[f64; 2]]) -> bool {
    let d0 = dist_to_polyline(px, py, a0);
    let d1 = dist_to_polyline(px, py, a1);
    fmath::abs(d0 - d1) <= 0.5 && d0.min(d1) <= 0.7
}

/// True when a point lies within 0.25 of the curve equidistant from the two
/// canonical moon arcs. Moving a point by delta changes the arc-distance gap
/// by about 2*delta, so the band is |d0 - d1| <= 0.5.
pub fn in_overlap_band(px: f64, py: f64) -> bool {
    let (a0, a1) = arc_tables();
    in_band_tables(px, py, &a0, &a1)
}

/// Clean two-moons rows plus ambiguous rows from the inter-moon overlap band
/// with Bernoulli(0.5) labels. All rows are tagged `pool`.
pub fn ambiguous_pool(n_clean: usize, n_ambiguous: usize, seed: u64) -> Result<Dataset, DataError> {
    ambiguous_pool_streams(n_clean, n_ambiguous, seed, derive_seed(seed, LABEL_SALT))
}

/// Variant of [`ambiguous_pool`] with an explicit label-stream seed.
pub fn ambiguous_pool_streams(
    n_clean: usize,
    n_ambiguous: usize,
    seed: u64,
    label_seed: u64,
) -> Result<Dataset, DataError> {
    let clean = if n_clean > 0 {
        two_moons(n_clean, 0.1, seed)?.with_split(Split::Pool)
    } else {
        Dataset::empty(2)
    };
    if n_ambiguous == 0 {
        return Ok(clean);
    }
    let mut geom = Rng::new(derive_seed(seed, GEOM_SALT ^ 0xba2d));
    let mut labels = Rng::new(label_seed);
    let (a0, a1) = arc_tables();
    let mut x = Matrix::zeros(n_ambiguous, 2);
    let mut y = Vec::with_capacity(n_ambiguous);
    // Bounding box of the noisy moons with margin.
    let (x_lo, x_hi) = (-1.5, 2.5);
    let (y_lo, y_hi) = (-1.0, 1.5);
    let mut rejections = 0u64;
    for i in 0..n_ambiguous {
        loop {
            let px = geom.uniform_range(x_lo, x_hi);
            let py = geom.uniform_range(y_lo, y_hi);
            if in_band_tables(px, py, &a0, &a1) {
                x.set(i, 0, px);
                x.set(i, 1, py);
                break;
            }
            rejections += 1;
            if rejections > 100_000_000 {
                return Err(DataError::ExhaustedSampling);
            }
        }
        y.push(usize::from(labels.bernoulli(0.5)));
    }
    let band = Dataset::new(
        x,
        y,
        vec![true; n_ambiguous],
        vec![Split::Pool; n_ambiguous],
    );
    Ok(clean.concat(&band))
}

/// Layout constants for [`toy_1d`]: cluster centers with their labels, the
/// ambiguous bands, and the per-cluster standard deviation.
pub const TOY1D_CLUSTERS: [(f64, usize); 4] = [(-5.0, 0), (-3.0, 1), (3.0, 0), (5.0, 1)];
pub const TOY1D_BAND: (f64, f64) = (3.5, 4.5);
pub const TOY1D_CLUSTER_STD: f64 = 0.15;
const TOY1D_PER_CLUSTER: usize = 120;
const TOY1D_PER_BAND: usize = 80;

/// 1D binary dataset: four unambiguous clusters near +-3 and +-5, ambiguous
/// bands at |x| in [3.5, 4.5] with Bernoulli(0.5) labels, and the interval
/// (-2, 2) left empty.
pub fn toy_1d(seed: u64) -> Dataset {
    toy_1d_streams(derive_seed(seed, GEOM_SALT), derive_seed(seed, LABEL_SALT))
}

/// Variant of [`toy_1d`] with an explicit label-stream seed.
pub fn toy_1d_streams(geom_seed: u64, label_seed: u64) -> Dataset {
    let mut geom = Rng::new(geom_seed);
    let mut labels = Rng::new(label_seed);
    let n = 4 * TOY1D_PER_CLUSTER + 2 * TOY1D_PER_BAND;
    let mut x = Matrix::zeros(n, 1);
    let mut y = Vec::with_capacity(n);
    let mut ambiguous = Vec::with_capacity(n);
    let mut row = 0;
    for &(center, label) in &TOY1D_CLUSTERS {
        for _ in 0..TOY1D_PER_CLUSTER {
            // Truncate to 3 sigma so cluster points stay out of the ambiguous
            // bands and the empty gap.
            let mut v = center + TOY1D_CLUSTER_STD * geom.normal();
            while fmath::abs(v - center) > 3.0 * TOY1D_CLUSTER_STD {
                v = center + TOY1D_CLUSTER_STD * geom.normal();
            }
            x.set(row, 0, v);
            y.push(label);
            ambiguous.push(false);
            row += 1;
        }
    }
    for &sign in &[-1.0, 1.0] {
        for _ in 0..TOY1D_PER_BAND {
            let v = sign * geom.uniform_range(TOY1D_BAND.0, TOY1D_BAND.1);
            x.set(row, 0, v);
            y.push(usize::from(labels.bernoulli(0.5)));
            ambiguous.push(true);
            row += 1;
        }
    }
    Dataset::new(x, y, ambiguous, vec![Split::Train; n])
}

/// Uniform samples in the box [lo, hi] that keep at least `min_dist`
/// (Euclidean) from every row of `exclusion`. Rows are tagged `ood` with
/// label 0.
pub fn uniform_ood_box(
    n: usize,
    lo: &[f64],
    hi: &[f64],
    exclusion: &Dataset,
    min_dist: f64,
    seed: u64,
) -> Result<Dataset, DataError> {
    assert_eq!(lo.len(), hi.len(), "box bounds dimension mismatch");
    assert!(
        lo.iter().zip(hi).all(|(a, b)| a < b),
        "box bounds must satisfy lo < hi"
    );
    assert!(min_dist >= 0.0, "min_dist must be nonnegative");
    let d = lo.len();
    if !exclusion.is_empty() {
        assert_eq!(exclusion.dim(), d, "exclusion dimension mismatch");
    }
    let mut rng = Rng::new(derive_seed(seed, GEOM_SALT));
    let mut x = Matrix::zeros(n, d);
    let min_sq = min_dist * min_dist;
    let mut rejections = 0u64;
    let mut point = vec![0.0; d];
    for i in 0..n {
        'sample: loop {
            for j in 0..d {
                point[j] = rng.uniform_range(lo[j], hi[j]);
            }
            for r in 0..exclusion.len() {
                let row = exclusion.x.row(r);
                let mut dist_sq = 0.0;
                for j in 0..d {
                    let diff = point[j] - row[j];
                    dist_sq += diff * diff;
                }
                if dist_sq < min_sq {
                    rejections += 1;
                    if rejections >= 1_000_000 {
                        return Err(DataError::ExhaustedSampling);
                    }
                    continue 'sample;
                }
            }
            x.row_mut(i).copy_from_slice(&point);
            break;
        }
    }
    Ok(Dataset::new(
        x,
        vec![0; n],
        vec![false; n],
        vec![Split::Ood; n],
    ))
}
