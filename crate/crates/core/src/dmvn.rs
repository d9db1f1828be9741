//! Discretized multivariate normal distributions with diagonal covariance.
//!
//! A discretized Gaussian is the law of `floor(x~)` where `x~ ~ N(mu, Sigma)`
//! and `Sigma` is diagonal. Its PMF on the integer lattice is a signed sum of
//! CDF evaluations at the 2^D corners of the unit cell `[x, x+1]^D`. Two
//! independent constructions of that signed sum are provided: a recursive one
//! (`pmf_successive`) that extends the one-dimensional difference pattern one
//! coordinate at a time, and a direct one (`pmf_binary`) that enumerates all
//! corners as binary codes. They must agree to within 1e-12 on every input;
//! keeping both routes intact is the point, so neither delegates to the other.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{LcError, Result};

/// Largest dimension accepted by [`pmf_binary`]; 2^D corner evaluations.
pub const BINARY_DIM_CAP: usize = 20;

/// Negative PMF values above this threshold are cancellation noise and clamp
/// to zero; anything below it indicates a real defect and is reported.
const PMF_NEGATIVE_LIMIT: f64 = -1e-9;

/// Parameters of one discretized Gaussian class likelihood.
///
/// `mean` and `variances` describe the underlying continuous normal; the
/// distribution itself lives on the integer lattice via floor-quantization.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedGaussian {
    mean: Vec<f64>,
    variances: Vec<f64>,
}

impl DiscretizedGaussian {
    /// Validates that both vectors share a length D >= 1, all entries are
    /// finite, and every variance is strictly positive.
    pub fn new(mean: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        if mean.len() != variances.len() {
            return Err(LcError::DimensionMismatch {
                expected: mean.len(),
                got: variances.len(),
            });
        }
        if mean.is_empty() {
            return Err(LcError::Empty("distribution dimension"));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(LcError::NonFinite("distribution mean"));
        }
        if variances.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(LcError::InvalidScenario(
                "variances must be finite and strictly positive".into(),
            ));
        }
        Ok(Self { mean, variances })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(LcError::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }
}

/// Seeded deterministic random generator.
///
/// Identical seeds yield identical streams. One generator is single-owner;
/// parallel sampling takes independently seeded instances.
#[derive(Debug, Clone)]
pub struct Rng {
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn seeded(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform draw from `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Uniform draw from `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            items.swap(i, self.inner.gen_range(0..=i));
        }
    }

    /// One pair of independent standard normals via the Box-Muller transform.
    ///
    /// `u1` is shifted into `(0, 1]` so the logarithm is always finite; no
    /// rejection loop, so draws per sample are constant and reproducible.
    pub fn standard_normal_pair(&mut self) -> (f64, f64) {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        (r * theta.cos(), r * theta.sin())
    }
}

/// Standard normal CDF `Phi(z)`, absolute error below 1e-12.
pub fn std_normal_cdf(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(LcError::NonFinite("std_normal_cdf"));
    }
    // erfc keeps full relative precision in the left tail, where the
    // complementary form 1 - Phi(-z) would cancel.
    Ok(0.5 * libm::erfc(-z / std::f64::consts::SQRT_2))
}

/// CDF of the underlying continuous normal at `point`, factored across
/// dimensions (valid because the covariance is diagonal).
pub fn diag_mvn_cdf(point: &[f64], dist: &DiscretizedGaussian) -> Result<f64> {
    dist.check_dim(point.len())?;
    let mut acc = 1.0;
    for ((p, m), v) in point.iter().zip(dist.mean()).zip(dist.variances()) {
        acc *= std_normal_cdf((p - m) / v.sqrt())?;
    }
    Ok(acc)
}

/// Shared tail of both PMF routes: negative results within cancellation
/// noise clamp to zero, genuine negatives are a numerical-consistency error.
fn finish_pmf(x: &[i64], signed_sum: f64) -> Result<f64> {
    if signed_sum < PMF_NEGATIVE_LIMIT {
        return Err(LcError::Numeric(format!(
            "pmf at {x:?} evaluated to {signed_sum:e}"
        )));
    }
    Ok(signed_sum.max(0.0))
}

/// Evaluates one corner of the unit cell: bit `d` set means coordinate
/// `x_d + 1` (the upper face), unset means `x_d`.
fn corner_cdf(x: &[i64], code: usize, dist: &DiscretizedGaussian) -> Result<f64> {
    let corner: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(d, &xd)| if code >> d & 1 == 1 { (xd + 1) as f64 } else { xd as f64 })
        .collect();
    diag_mvn_cdf(&corner, dist)
}

/// PMF of the cell at `x` by successive extension.
///
/// The one-dimensional pattern is `<1> - <0>` (CDF at the upper face minus
/// the lower). Each further dimension prepends a `1` copy of the previous
/// pattern and subtracts a `0` copy, doubling the term list.
pub fn pmf_successive(x: &[i64], dist: &DiscretizedGaussian) -> Result<f64> {
    dist.check_dim(x.len())?;
    // Terms as (sign, corner code); bit d of the code selects the upper
    // face in dimension d.
    let mut terms: Vec<(f64, usize)> = vec![(1.0, 1), (-1.0, 0)];
    for d in 1..x.len() {
        let mut next = Vec::with_capacity(terms.len() * 2);
        for &(sign, code) in &terms {
            next.push((sign, code | 1 << d));
        }
        for &(sign, code) in &terms {
            next.push((-sign, code));
        }
        terms = next;
    }
    let mut sum = 0.0;
    for (sign, code) in terms {
        sum += sign * corner_cdf(x, code, dist)?;
    }
    finish_pmf(x, sum)
}

/// Sign and corner code of every term in the direct binary expansion.
///
/// Corner i (i = 1..2^D) carries the code `2^D - i`; its sign is +1 exactly
/// when the code's count of ones has the same parity as D.
fn binary_corner_signs(dim: usize) -> Vec<(f64, usize)> {
    let count = 1usize << dim;
    (1..=count)
        .map(|i| {
            let code = count - i;
            let sign = if code.count_ones() as usize % 2 == dim % 2 {
                1.0
            } else {
                -1.0
            };
            (sign, code)
        })
        .collect()
}

/// PMF of the cell at `x` by direct enumeration of all 2^D corners.
pub fn pmf_binary(x: &[i64], dist: &DiscretizedGaussian) -> Result<f64> {
    dist.check_dim(x.len())?;
    if x.len() > BINARY_DIM_CAP {
        return Err(LcError::DimensionCap(x.len()));
    }
    let mut sum = 0.0;
    for (sign, code) in binary_corner_signs(x.len()) {
        sum += sign * corner_cdf(x, code, dist)?;
    }
    finish_pmf(x, sum)
}

/// One continuous draw from the underlying normal.
fn continuous_point(dist: &DiscretizedGaussian, rng: &mut Rng) -> Vec<f64> {
    let d = dist.dim();
    let mut out = Vec::with_capacity(d);
    while out.len() < d {
        let (a, b) = rng.standard_normal_pair();
        out.push(a);
        if out.len() < d {
            out.push(b);
        }
        // An odd dimension discards the spare normal so every point consumes
        // a fixed number of draws regardless of call history.
    }
    for (z, (m, v)) in out.iter_mut().zip(dist.mean().iter().zip(dist.variances())) {
        *z = m + v.sqrt() * *z;
    }
    out
}

/// One lattice sample `floor(x~)`.
pub fn sample_one(dist: &DiscretizedGaussian, rng: &mut Rng) -> Vec<i64> {
    continuous_point(dist, rng)
        .into_iter()
        .map(|c| c.floor() as i64)
        .collect()
}

/// `count` lattice samples; deterministic given the generator's seed.
pub fn sample(dist: &DiscretizedGaussian, count: usize, rng: &mut Rng) -> Vec<Vec<i64>> {
    (0..count).map(|_| sample_one(dist, rng)).collect()
}
