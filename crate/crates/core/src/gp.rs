//! Zero-mean Gaussian-process priors over finite point sets with the
//! squared-exponential kernel `amplitude * exp(-(x - x')² / (2 bandwidth²))`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{Cholesky, SquareMatrix};
use crate::{Error, Result};

/// Default jitter relative to the kernel amplitude.
pub const DEFAULT_RELATIVE_JITTER: f64 = 1e-6;
/// Largest jitter tried (relative to the amplitude) before giving up.
pub const MAX_RELATIVE_JITTER: f64 = 1e-2;
/// Above this many points the average pairwise distance uses the sorted
/// prefix-sum formula instead of the double loop.
pub const EXACT_PAIRWISE_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceConfig {
    pub amplitude: f64,
    pub bandwidth: f64,
    pub jitter: f64,
}

impl CovarianceConfig {
    pub fn new(amplitude: f64, bandwidth: f64, jitter: f64) -> Result<Self> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !(ok(amplitude) && ok(bandwidth) && ok(jitter)) {
            return Err(Error::Domain("covariance amplitude, bandwidth and jitter must be positive"));
        }
        Ok(CovarianceConfig {
            amplitude,
            bandwidth,
            jitter,
        })
    }

    /// Config with jitter `1e-6 * amplitude`.
    pub fn with_default_jitter(amplitude: f64, bandwidth: f64) -> Result<Self> {
        Self::new(amplitude, bandwidth, DEFAULT_RELATIVE_JITTER * amplitude)
    }

    pub fn kernel(&self, x: f64, y: f64) -> f64 {
        let d = x - y;
        self.amplitude * libm::exp(-d * d / (2.0 * self.bandwidth * self.bandwidth))
    }
}

/// Values of a latent function at a strictly increasing set of points.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentFunction {
    pub points: Vec<f64>,
    pub values: Vec<f64>,
}

impl LatentFunction {
    pub fn new(points: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: values.len(),
            });
        }
        check_points(&points)?;
        Ok(LatentFunction { points, values })
    }

    pub fn zeros(points: Vec<f64>) -> Result<Self> {
        let values = alloc::vec![0.0; points.len()];
        Self::new(points, values)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn check_points(points: &[f64]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::Domain("a GP needs at least one point"));
    }
    if points.iter().any(|p| !p.is_finite()) || points.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("GP points must be finite and strictly increasing"));
    }
    Ok(())
}

/// Kernel matrix plus `jitter` on the diagonal. Exactly symmetric: each
/// off-diagonal entry is computed once and mirrored.
pub fn covariance_matrix(points: &[f64], config: &CovarianceConfig) -> Result<SquareMatrix> {
    check_points(points)?;
    let n = points.len();
    let mut upper = alloc::vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let k = config.kernel(points[i], points[j]);
            upper[i * n + j] = k;
            upper[j * n + i] = k;
        }
    }
    let mut m = SquareMatrix::from_fn(n, |i, j| upper[i * n + j]);
    m.add_diagonal(config.jitter);
    Ok(m)
}

/// Cholesky factor of a GP prior covariance, with the jitter that made the
/// factorization succeed.
#[derive(Debug, Clone)]
pub struct PriorFactor {
    points: Vec<f64>,
    chol: Cholesky,
    jitter: f64,
    log_det: f64,
}

impl PriorFactor {
    /// Factorizes the prior covariance, multiplying the jitter by 10 on each
    /// failure up to `1e-2 * amplitude`.
    pub fn new(points: &[f64], config: &CovarianceConfig) -> Result<Self> {
        let mut cfg = *config;
        let ceiling = MAX_RELATIVE_JITTER * config.amplitude;
        loop {
            let k = covariance_matrix(points, &cfg)?;
            match Cholesky::factor(&k) {
                Ok(chol) => {
                    let log_det = chol.log_det();
                    return Ok(PriorFactor {
                        points: points.to_vec(),
                        chol,
                        jitter: cfg.jitter,
                        log_det,
                    });
                }
                Err(_) if cfg.jitter * 10.0 <= ceiling * (1.0 + 1e-9) => cfg.jitter *= 10.0,
                Err(_) => return Err(Error::Numerical("GP covariance is not factorizable even with maximal jitter")),
            }
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.points.len()
    }

    /// Log density of a standard-normal vector `z` pushed through the factor,
    /// i.e. the prior log density of `L z`.
    pub fn log_prior_from_noise(&self, z: &[f64]) -> f64 {
        let n = z.len() as f64;
        -0.5 * z.iter().map(|v| v * v).sum::<f64>() - 0.5 * self.log_det - 0.5 * n * libm::log(2.0 * PI)
    }

    pub fn log_prior(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: values.len(),
            });
        }
        let n = values.len() as f64;
        Ok(-0.5 * self.chol.quadratic_form(values) - 0.5 * self.log_det - 0.5 * n * libm::log(2.0 * PI))
    }

    /// Draws standard-normal noise into `z` and writes `L z` into `values`.
    pub fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, z: &mut Vec<f64>, values: &mut Vec<f64>) {
        z.clear();
        z.extend((0..self.dim()).map(|_| Distribution::<f64>::sample(&StandardNormal, rng)));
        self.chol.mul_vec_into(z, values);
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> LatentFunction {
        let (mut z, mut values) = (Vec::new(), Vec::new());
        self.draw_into(rng, &mut z, &mut values);
        LatentFunction {
            points: self.points.clone(),
            values,
        }
    }
}

/// One draw from `GP(0, kernel)` at `points`.
pub fn sample_prior<R: Rng + ?Sized>(points: &[f64], config: &CovarianceConfig, rng: &mut R) -> Result<LatentFunction> {
    Ok(PriorFactor::new(points, config)?.sample(rng))
}

/// Multivariate-normal log density of `g.values` under the GP prior.
pub fn log_prior(g: &LatentFunction, config: &CovarianceConfig) -> Result<f64> {
    PriorFactor::new(&g.points, config)?.log_prior(&g.values)
}

/// Mean absolute difference over all unordered pairs of points; `None` for
/// fewer than two points.
pub fn average_pairwise_distance(points: &[f64]) -> Option<f64> {
    let n = points.len();
    if n < 2 {
        return None;
    }
    let pairs = (n * (n - 1) / 2) as f64;
    if n <= EXACT_PAIRWISE_LIMIT {
        let mut total = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                total += (points[i] - points[j]).abs();
            }
        }
        return Some(total / pairs);
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(f64::total_cmp);
    // sum_{i<j} (x_j - x_i) = sum_j x_j * (2j - n + 1)
    let total: f64 = sorted
        .iter()
        .enumerate()
        .map(|(j, x)| x * (2.0 * j as f64 - n as f64 + 1.0))
        .sum();
    Some(total / pairs)
}
