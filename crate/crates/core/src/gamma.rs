//! Gamma distribution in exponential-family form.
//!
//! The density is `exp(eta1 * ln x + eta2 * x) / Z(eta)` on `x > 0`, with
//! `Z(eta) = Γ(eta1 + 1) / (-eta2)^(eta1 + 1)`. In the usual parameterization
//! `shape = eta1 + 1` and `rate = -eta2`.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::Distribution;

use crate::special::{digamma, ln_gamma, trigamma};
use crate::{Error, Result};

/// Natural parameters of a gamma distribution: coefficients of `ln x` and `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaNatural {
    pub eta1: f64,
    pub eta2: f64,
}

const SHAPE_BRACKET: (f64, f64) = (1e-3, 1e3);
const MLE_GRADIENT_TOL: f64 = 1e-8;

impl GammaNatural {
    pub fn new(eta1: f64, eta2: f64) -> Result<Self> {
        let p = GammaNatural { eta1, eta2 };
        if p.is_valid() {
            Ok(p)
        } else {
            Err(Error::Domain("gamma natural parameters need eta1 > -1 and eta2 < 0"))
        }
    }

    /// Integrability of `exp(eta . u(x))` on `(0, inf)`.
    pub fn is_valid(&self) -> bool {
        self.eta1 > -1.0 && self.eta2 < 0.0 && self.eta1.is_finite() && self.eta2.is_finite()
    }

    pub fn from_shape_rate(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
            return Err(Error::Domain("shape and rate must be positive"));
        }
        Self::new(shape - 1.0, -rate)
    }

    pub fn to_shape_rate(&self) -> (f64, f64) {
        (self.eta1 + 1.0, -self.eta2)
    }

    /// `eta . u(x)` without the normalizer. `x` must be positive.
    pub fn exponent(&self, x: f64) -> f64 {
        self.eta1 * libm::log(x) + self.eta2 * x
    }

    /// `ln Z(eta)`.
    pub fn log_normalizer(&self) -> f64 {
        let shape = self.eta1 + 1.0;
        ln_gamma(shape) - shape * libm::log(-self.eta2)
    }

    pub fn log_density(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::Domain("gamma density is only defined for x > 0"));
        }
        if !self.is_valid() {
            return Err(Error::Domain("invalid gamma natural parameters"));
        }
        Ok(self.exponent(x) - self.log_normalizer())
    }

    pub fn mean(&self) -> f64 {
        let (shape, rate) = self.to_shape_rate();
        shape / rate
    }

    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<f64>> {
        if !self.is_valid() {
            return Err(Error::Domain("invalid gamma natural parameters"));
        }
        let (shape, rate) = self.to_shape_rate();
        let dist = rand_distr::Gamma::new(shape, 1.0 / rate)
            .map_err(|_| Error::Domain("invalid gamma parameters"))?;
        Ok((0..count).map(|_| dist.sample(rng)).collect())
    }
}

/// Maximum-likelihood gamma fit.
///
/// Solves `ln k - digamma(k) = ln(mean) - mean(ln x)` for the shape `k` by
/// bisection on `[1e-3, 1e3]` followed by Newton steps, then sets
/// `rate = k / mean`.
pub fn fit_mle(samples: &[f64]) -> Result<GammaNatural> {
    if samples.len() < 2 {
        return Err(Error::Fit("need at least two samples"));
    }
    if samples.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::Fit("samples must be positive and finite"));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let mean_log = samples.iter().map(|&x| libm::log(x)).sum::<f64>() / n;
    let target = libm::log(mean) - mean_log;
    if !(target > 0.0) {
        return Err(Error::Fit("samples are degenerate"));
    }
    // decreasing in k
    let gradient = |k: f64| libm::log(k) - digamma(k) - target;
    let (mut lo, mut hi) = SHAPE_BRACKET;
    if gradient(lo) < 0.0 || gradient(hi) > 0.0 {
        return Err(Error::Fit("shape estimate outside [1e-3, 1e3]"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gradient(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-6 * mid {
            break;
        }
    }
    let mut k = 0.5 * (lo + hi);
    for _ in 0..50 {
        let g = gradient(k);
        if g.abs() < MLE_GRADIENT_TOL * 1e-3 {
            break;
        }
        let step = g / (1.0 / k - trigamma(k));
        let next = k - step;
        k = if next > 0.0 { next } else { 0.5 * k };
    }
    if !(gradient(k).abs() < MLE_GRADIENT_TOL) {
        return Err(Error::Fit("root finding did not converge"));
    }
    GammaNatural::from_shape_rate(k, k / mean)
}

/// Sum of gamma log densities over `samples`.
pub fn log_likelihood(params: &GammaNatural, samples: &[f64]) -> Result<f64> {
    samples.iter().map(|&x| params.log_density(x)).sum()
}
