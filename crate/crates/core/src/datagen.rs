//! Synthetic Tucker problems: Gaussian core and factors, additive Gaussian
//! noise and sparse uniform outliers.
//!
//! Every random component draws from its own ChaCha20 stream of the same
//! seed, so changing the noise level does not change the clean tensor and
//! the outlier support does not depend on the noise.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::kv::KvConfig;
use crate::linalg::householder_qr;
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::tensor::DenseTensor;
use crate::tucker::{validate_ranks, FactorModel};

/// Generator family recorded next to experiment outputs.
pub const RNG_ALGORITHM: &str = "ChaCha20Rng::seed_from_u64 with per-component streams";

pub const STREAM_CORE: u64 = 1;
pub const STREAM_FACTORS: u64 = 2;
pub const STREAM_NOISE: u64 = 3;
pub const STREAM_OUTLIERS: u64 = 4;
pub const STREAM_SOLVER_INIT: u64 = 5;

pub fn component_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normal<T: Scalar>(rng: &mut impl Rng) -> T {
    T::of(rng.sample::<f64, _>(StandardNormal))
}

pub fn gaussian_tensor<T: Scalar>(dims: &[usize], rng: &mut impl Rng) -> DenseTensor<T> {
    let len = dims.iter().product();
    let data = (0..len).map(|_| normal(rng)).collect();
    DenseTensor::new(dims.to_vec(), data).expect("positive extents")
}

pub fn gaussian_matrix<T: Scalar>(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix<T> {
    let data = (0..rows * cols).map(|_| normal(rng)).collect();
    Matrix::new(rows, cols, data).expect("positive extents")
}

/// `rows × cols` matrix with orthonormal columns: the Q factor of a
/// Gaussian matrix. Requires `cols ≤ rows`.
pub fn random_orthonormal<T: Scalar>(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix<T> {
    assert!(cols <= rows, "cannot fit {cols} orthonormal columns in {rows} rows");
    householder_qr(&gaussian_matrix(rows, cols, rng)).0
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub dims: Vec<usize>,
    pub true_ranks: Vec<usize>,
    /// Standard deviation `δ` of the additive noise.
    pub noise_delta: f64,
    /// Fraction of entries hit by an outlier.
    pub outlier_ratio: f64,
    /// Outlier values are uniform on `[−outlier_range, outlier_range]`.
    pub outlier_range: f64,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct SynthData<T> {
    pub clean: DenseTensor<T>,
    pub noisy: DenseTensor<T>,
    pub truth: FactorModel<T>,
}

impl SynthSpec {
    /// Noiseless, outlier-free spec with seed 0.
    pub fn new(dims: Vec<usize>, true_ranks: Vec<usize>) -> Self {
        Self {
            dims,
            true_ranks,
            noise_delta: 0.0,
            outlier_ratio: 0.0,
            outlier_range: 1.0,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_noise(mut self, delta: f64) -> Self {
        self.noise_delta = delta;
        self
    }

    pub fn with_outliers(mut self, ratio: f64, range: f64) -> Self {
        self.outlier_ratio = ratio;
        self.outlier_range = range;
        self
    }

    pub fn validate(&self) -> Result<()> {
        validate_ranks(&self.dims, &self.true_ranks)?;
        if !(self.noise_delta >= 0.0 && self.noise_delta.is_finite()) {
            return Err(Error::InvalidConfig(format!("noise delta {} must be >= 0", self.noise_delta)));
        }
        check_outliers(self.outlier_ratio, self.outlier_range)
    }

    pub fn generate<T: Scalar>(&self) -> Result<SynthData<T>> {
        gen_tucker(self)
    }

    pub fn to_kv(&self) -> KvConfig {
        let list = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let mut kv = KvConfig::new();
        kv.set("dims", list(&self.dims));
        kv.set("true_ranks", list(&self.true_ranks));
        kv.set("noise_delta", format!("{:e}", self.noise_delta));
        kv.set("outlier_ratio", format!("{:e}", self.outlier_ratio));
        kv.set("outlier_range", format!("{:e}", self.outlier_range));
        kv.set("seed", self.seed);
        kv.set("rng", RNG_ALGORITHM);
        kv
    }

    pub fn from_kv(kv: &KvConfig) -> Result<Self> {
        let dims: Vec<usize> = kv
            .get_list("dims")?
            .ok_or_else(|| Error::Parse("missing dims".into()))?;
        let true_ranks = kv
            .get_list("true_ranks")?
            .ok_or_else(|| Error::Parse("missing true_ranks".into()))?;
        let spec = Self {
            dims,
            true_ranks,
            noise_delta: kv.get_or("noise_delta", 0.0)?,
            outlier_ratio: kv.get_or("outlier_ratio", 0.0)?,
            outlier_range: kv.get_or("outlier_range", 1.0)?,
            seed: kv.get_or("seed", 0)?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn check_outliers(ratio: f64, range: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::InvalidConfig(format!("outlier ratio {ratio} must lie in [0, 1]")));
    }
    if !(range >= 0.0 && range.is_finite()) {
        return Err(Error::InvalidConfig(format!("outlier range {range} must be >= 0")));
    }
    Ok(())
}

/// Clean tensor `G ×_1 U_1 ⋯ ×_N U_N` with i.i.d. standard Gaussian core
/// and factors, plus the noisy observation `clean + δ E (+ outliers)`.
pub fn gen_tucker<T: Scalar>(spec: &SynthSpec) -> Result<SynthData<T>> {
    spec.validate()?;
    let core = gaussian_tensor(&spec.true_ranks, &mut component_rng(spec.seed, STREAM_CORE));
    let mut rng = component_rng(spec.seed, STREAM_FACTORS);
    let factors = spec
        .dims
        .iter()
        .zip(&spec.true_ranks)
        .map(|(&i, &r)| gaussian_matrix(i, r, &mut rng))
        .collect();
    let truth = FactorModel::new(core, factors)?;
    let clean = truth.reconstruct();
    let mut noisy = clean.clone();
    if spec.noise_delta > 0.0 {
        let noise = gaussian_tensor(&spec.dims, &mut component_rng(spec.seed, STREAM_NOISE));
        noisy.axpy(T::of(spec.noise_delta), &noise)?;
    }
    if spec.outlier_ratio > 0.0 {
        noisy = add_outliers(&noisy, spec.outlier_ratio, spec.outlier_range, spec.seed)?;
    }
    Ok(SynthData { clean, noisy, truth })
}

/// Adds uniform `[−range, range]` values at exactly
/// `round(ratio · len)` distinct positions chosen uniformly at random.
pub fn add_outliers<T: Scalar>(t: &DenseTensor<T>, ratio: f64, range: f64, seed: u64) -> Result<DenseTensor<T>> {
    check_outliers(ratio, range)?;
    let count = (ratio * t.len() as f64).round() as usize;
    if count == 0 || range == 0.0 {
        return Ok(t.clone());
    }
    let mut rng = component_rng(seed, STREAM_OUTLIERS);
    let positions = index::sample(&mut rng, t.len(), count.min(t.len()));
    let mut data = t.data().to_vec();
    for pos in positions.iter() {
        data[pos] = data[pos] + T::of(rng.random_range(-range..=range));
    }
    DenseTensor::new(t.dims().to_vec(), data)
}
