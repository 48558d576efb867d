//! Semiparametric densities `f(x) ∝ exp(eta · (ln x, x) + g(x))` on a finite
//! support grid.
//!
//! `g` is represented at the training observations and at equally spaced
//! quadrature nodes. Normalizers and truncated masses use the trapezoid rule
//! over the quadrature nodes; between nodes the integrand is taken to be
//! linear, which makes masses additive over adjacent intervals and gives a
//! piecewise-quadratic CDF that can be inverted in closed form.

use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::Rng;

use crate::gamma::GammaNatural;
use crate::gp::LatentFunction;
use crate::{Error, Result};

/// Smallest admissible lower grid bound.
pub const GRID_FLOOR: f64 = 1e-6;
/// Default number of quadrature nodes per density.
pub const DEFAULT_QUADRATURE_COUNT: usize = 512;
/// Default factor by which the grid extends beyond the observed range.
pub const DEFAULT_EXTENSION_FACTOR: f64 = 1.5;

/// Observation points plus equally spaced quadrature nodes on `[low, high]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportGrid {
    observations: Vec<f64>,
    low: f64,
    high: f64,
    quadrature: Vec<f64>,
    points: Vec<f64>,
    points_ln: Vec<f64>,
    quadrature_index: Vec<usize>,
}

impl SupportGrid {
    /// A grid with explicit bounds. Observations are sorted and deduplicated;
    /// they may fall outside `[low, high]`, where they carry `g` but no mass.
    pub fn new(mut observations: Vec<f64>, low: f64, high: f64, quadrature_count: usize) -> Result<Self> {
        if quadrature_count < 2 {
            return Err(Error::InvalidArgument("a support grid needs at least two quadrature nodes"));
        }
        if !(low > 0.0 && low < high && high.is_finite()) {
            return Err(Error::InvalidArgument("grid bounds must satisfy 0 < low < high < inf"));
        }
        if observations.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(Error::InvalidArgument("grid observations must be positive and finite"));
        }
        observations.sort_by(f64::total_cmp);
        observations.dedup();
        let h = (high - low) / (quadrature_count - 1) as f64;
        let quadrature: Vec<f64> = (0..quadrature_count)
            .map(|i| if i + 1 == quadrature_count { high } else { low + i as f64 * h })
            .collect();

        // merge the two sorted lists, dropping exact duplicates
        let mut points = Vec::with_capacity(observations.len() + quadrature.len());
        let mut quadrature_index = Vec::with_capacity(quadrature.len());
        let (mut i, mut j) = (0, 0);
        while i < observations.len() || j < quadrature.len() {
            let take_obs = j == quadrature.len() || (i < observations.len() && observations[i] < quadrature[j]);
            if take_obs {
                points.push(observations[i]);
                i += 1;
            } else {
                if i < observations.len() && observations[i] == quadrature[j] {
                    i += 1;
                }
                quadrature_index.push(points.len());
                points.push(quadrature[j]);
                j += 1;
            }
        }
        let points_ln = points.iter().map(|&x| libm::log(x)).collect();
        Ok(SupportGrid {
            observations,
            low,
            high,
            quadrature,
            points,
            points_ln,
            quadrature_index,
        })
    }

    /// Grid from sorted positive observations:
    /// `low = max(1e-6, min / extension)`, `high = max * extension`.
    pub fn build(observations: &[f64], quadrature_count: usize, extension_factor: f64) -> Result<Self> {
        Self::build_covering(observations, f64::INFINITY, quadrature_count, extension_factor)
    }

    /// As [`Self::build`], but the lower bound also reaches down to `floor`
    /// (clamped at 1e-6), so truncation intervals starting there keep mass.
    pub fn build_covering(
        observations: &[f64],
        floor: f64,
        quadrature_count: usize,
        extension_factor: f64,
    ) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::InvalidArgument("cannot build a grid without observations"));
        }
        if !(extension_factor >= 1.0) {
            return Err(Error::InvalidArgument("extension factor must be at least 1"));
        }
        if observations.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(Error::InvalidArgument("grid observations must be positive and finite"));
        }
        let min = observations.iter().copied().fold(f64::INFINITY, f64::min);
        let max = observations.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let low = (min / extension_factor).min(floor).max(GRID_FLOOR);
        let mut high = max * extension_factor;
        if high <= low {
            high = low * 2.0;
        }
        Self::new(observations.to_vec(), low, high, quadrature_count)
    }

    pub fn observations(&self) -> &[f64] {
        &self.observations
    }

    pub fn low(&self) -> f64 {
        self.low
    }

    pub fn high(&self) -> f64 {
        self.high
    }

    pub fn quadrature(&self) -> &[f64] {
        &self.quadrature
    }

    pub fn quadrature_count(&self) -> usize {
        self.quadrature.len()
    }

    pub fn spacing(&self) -> f64 {
        (self.high - self.low) / (self.quadrature.len() - 1) as f64
    }

    /// Union of observation and quadrature points: where `g` is represented.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Index of `x` among the represented points, if it is one of them.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        self.points.binary_search_by(|p| p.total_cmp(&x)).ok()
    }

    fn integrand_logs<'a>(&'a self, eta: &GammaNatural, g: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        let (e1, e2) = (eta.eta1, eta.eta2);
        self.quadrature_index
            .iter()
            .map(move |&k| e1 * self.points_ln[k] + e2 * self.points[k] + g[k])
    }
}

/// Builds a [`SupportGrid`] from training observations.
pub fn build_grid(observations: &[f64], quadrature_count: usize, extension_factor: f64) -> Result<SupportGrid> {
    SupportGrid::build(observations, quadrature_count, extension_factor)
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || !max.is_finite() {
        return max;
    }
    max + libm::log(values.map(|v| libm::exp(v - max)).sum::<f64>())
}

/// Log of the trapezoid estimate of `∫ exp(eta·u(x) + g(x)) dx` over the grid.
/// `g` holds values at [`SupportGrid::points`].
pub fn log_normalizer(eta: &GammaNatural, g: &[f64], grid: &SupportGrid) -> Result<f64> {
    if g.len() != grid.points.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.points.len(),
            got: g.len(),
        });
    }
    let logs: Vec<f64> = grid.integrand_logs(eta, g).collect();
    if logs.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite integrand in normalizer"));
    }
    let last = logs.len() - 1;
    let half = libm::log(0.5);
    let weighted = logs
        .iter()
        .enumerate()
        .map(move |(i, &v)| if i == 0 || i == last { v + half } else { v });
    Ok(libm::log(grid.spacing()) + log_sum_exp(weighted))
}

/// A normalized semiparametric density with cached quadrature tables.
#[derive(Debug, Clone)]
pub struct SemiparametricDensity {
    eta: GammaNatural,
    grid: Arc<SupportGrid>,
    g: Vec<f64>,
    log_normalizer: f64,
    /// Normalized density at each quadrature node.
    node_density: Vec<f64>,
    /// Mass left of each node.
    cdf: Vec<f64>,
    /// Mass right of each node.
    sf: Vec<f64>,
}

impl PartialEq for SemiparametricDensity {
    fn eq(&self, other: &Self) -> bool {
        self.eta == other.eta && self.g == other.g && *self.grid == *other.grid
    }
}

impl SemiparametricDensity {
    /// `g` holds values at `grid.points()`.
    pub fn new(eta: GammaNatural, grid: Arc<SupportGrid>, g: Vec<f64>) -> Result<Self> {
        if !eta.is_valid() {
            return Err(Error::Domain("invalid gamma natural parameters"));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("latent function values must be finite"));
        }
        let log_normalizer = log_normalizer(&eta, &g, &grid)?;
        let node_density: Vec<f64> = grid
            .integrand_logs(&eta, &g)
            .map(|v| libm::exp(v - log_normalizer))
            .collect();
        let h = grid.spacing();
        let n = node_density.len();
        let mut cdf = Vec::with_capacity(n);
        let mut acc = 0.0;
        cdf.push(0.0);
        for w in node_density.windows(2) {
            acc += 0.5 * h * (w[0] + w[1]);
            cdf.push(acc);
        }
        let mut sf = alloc::vec![0.0; n];
        let mut acc = 0.0;
        for i in (0..n - 1).rev() {
            acc += 0.5 * h * (node_density[i] + node_density[i + 1]);
            sf[i] = acc;
        }
        Ok(SemiparametricDensity {
            eta,
            grid,
            g,
            log_normalizer,
            node_density,
            cdf,
            sf,
        })
    }

    /// The gamma density restricted to the grid (`g ≡ 0`).
    pub fn gamma(eta: GammaNatural, grid: Arc<SupportGrid>) -> Result<Self> {
        let zeros = alloc::vec![0.0; grid.points().len()];
        Self::new(eta, grid, zeros)
    }

    pub fn eta(&self) -> GammaNatural {
        self.eta
    }

    pub fn grid(&self) -> &Arc<SupportGrid> {
        &self.grid
    }

    pub fn g_values(&self) -> &[f64] {
        &self.g
    }

    pub fn latent(&self) -> LatentFunction {
        LatentFunction {
            points: self.grid.points.clone(),
            values: self.g.clone(),
        }
    }

    pub fn log_normalizer(&self) -> f64 {
        self.log_normalizer
    }

    /// `g` at `x`: exact at represented points, linear in between, and held
    /// constant beyond the outermost represented points.
    pub fn latent_at(&self, x: f64) -> f64 {
        let pts = &self.grid.points;
        let last = pts.len() - 1;
        if x <= pts[0] {
            return self.g[0];
        }
        if x >= pts[last] {
            return self.g[last];
        }
        let k = pts.partition_point(|p| *p < x);
        if pts[k] == x {
            return self.g[k];
        }
        let (x0, x1) = (pts[k - 1], pts[k]);
        let t = (x - x0) / (x1 - x0);
        self.g[k - 1] + t * (self.g[k] - self.g[k - 1])
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return f64::NEG_INFINITY;
        }
        self.eta.exponent(x) + self.latent_at(x) - self.log_normalizer
    }

    /// Log density at the `index`-th represented point.
    pub fn log_pdf_at(&self, index: usize) -> f64 {
        let (e1, e2) = (self.eta.eta1, self.eta.eta2);
        e1 * self.grid.points_ln[index] + e2 * self.grid.points[index] + self.g[index] - self.log_normalizer
    }

    /// Mass of `[low, x]` under the piecewise-linear interpolant, for `x` inside the grid.
    fn cdf_inside(&self, x: f64) -> f64 {
        let (i, t) = self.panel(x);
        self.cdf[i] + self.panel_mass(i, t)
    }

    fn sf_inside(&self, x: f64) -> f64 {
        let (i, t) = self.panel(x);
        self.sf[i] - self.panel_mass(i, t)
    }

    /// Panel index and offset into it.
    fn panel(&self, x: f64) -> (usize, f64) {
        let h = self.grid.spacing();
        let n = self.node_density.len();
        let i = (((x - self.grid.low) / h) as usize).min(n - 2);
        (i, (x - self.grid.quadrature[i]).clamp(0.0, h))
    }

    /// Integral of the linear interpolant over `[x_i, x_i + t]`.
    fn panel_mass(&self, i: usize, t: f64) -> f64 {
        let h = self.grid.spacing();
        let (p0, p1) = (self.node_density[i], self.node_density[i + 1]);
        p0 * t + (p1 - p0) * t * t / (2.0 * h)
    }

    /// Total mass under the quadrature rule (1 up to rounding).
    pub fn grid_mass(&self) -> f64 {
        self.cdf[self.cdf.len() - 1]
    }

    /// Mass of `[l, r]` clipped to the grid.
    pub fn truncated_mass(&self, l: f64, r: f64) -> f64 {
        let a = l.max(self.grid.low);
        let b = r.min(self.grid.high);
        if !(a < b) {
            return 0.0;
        }
        let lower = self.cdf_inside(a);
        let m = if lower > 0.5 {
            self.sf_inside(a) - self.sf_inside(b)
        } else {
            self.cdf_inside(b) - lower
        };
        m.max(0.0)
    }

    /// Log density of `x` conditioned on `x ∈ [l, r]`; `-inf` outside the interval.
    pub fn truncated_log_pdf(&self, x: f64, l: f64, r: f64) -> Result<f64> {
        if !(l <= x && x <= r) {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(self.log_pdf(x) - self.log_truncated_mass(l, r)?)
    }

    /// `ln` of [`Self::truncated_mass`], or an error when the mass is zero.
    pub fn log_truncated_mass(&self, l: f64, r: f64) -> Result<f64> {
        if l <= self.grid.low && r >= self.grid.high {
            return Ok(libm::log(self.grid_mass()));
        }
        let m = self.truncated_mass(l, r);
        if m > 0.0 {
            Ok(libm::log(m))
        } else {
            Err(Error::InfeasibleTruncation { left: l, right: r })
        }
    }

    /// Inverse-CDF draw from the density restricted to `[l, r]` ∩ grid.
    pub fn sample_truncated<R: Rng + ?Sized>(&self, l: f64, r: f64, rng: &mut R) -> Result<f64> {
        let a = l.max(self.grid.low);
        let b = r.min(self.grid.high);
        if !(a < b) || self.truncated_mass(l, r) <= 0.0 {
            return Err(Error::InfeasibleTruncation { left: l, right: r });
        }
        let ca = self.cdf_inside(a);
        let cb = self.cdf_inside(b);
        let u: f64 = rng.random();
        let target = ca + u * (cb - ca);
        // last node whose cdf is <= target
        let i = (self.cdf.partition_point(|c| *c <= target).max(1) - 1).min(self.node_density.len() - 2);
        let rem = (target - self.cdf[i]).max(0.0);
        let h = self.grid.spacing();
        let (p0, p1) = (self.node_density[i], self.node_density[i + 1]);
        let slope = (p1 - p0) / h;
        let t = if slope.abs() <= 1e-12 * p0.max(1e-300) {
            if p0 > 0.0 { rem / p0 } else { 0.0 }
        } else {
            let disc = (p0 * p0 + 2.0 * slope * rem).max(0.0);
            // numerically stable root of slope/2 t² + p0 t - rem = 0
            2.0 * rem / (p0 + libm::sqrt(disc))
        };
        let x = self.grid.quadrature[i] + t.clamp(0.0, h);
        Ok(x.clamp(a, b))
    }
}

/// Total-variation distance `½ ∫ |f - g|` estimated by the trapezoid rule on
/// `nodes` (equally spaced or not).
pub fn total_variation(f: &SemiparametricDensity, g: &SemiparametricDensity, nodes: &[f64]) -> f64 {
    let diff: Vec<f64> = nodes
        .iter()
        .map(|&x| (libm::exp(f.log_pdf(x)) - libm::exp(g.log_pdf(x))).abs())
        .collect();
    0.5 * nodes
        .windows(2)
        .zip(diff.windows(2))
        .map(|(x, d)| 0.5 * (x[1] - x[0]) * (d[0] + d[1]))
        .sum::<f64>()
}

/// `count` equally spaced nodes spanning the union of two grids.
pub fn common_nodes(f: &SupportGrid, g: &SupportGrid, count: usize) -> Vec<f64> {
    let lo = f.low().min(g.low());
    let hi = f.high().max(g.high());
    let h = (hi - lo) / (count - 1) as f64;
    (0..count).map(|i| lo + i as f64 * h).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    fn grid(obs: &[f64], low: f64, high: f64, n: usize) -> Arc<SupportGrid> {
        Arc::new(SupportGrid::new(obs.to_vec(), low, high, n).unwrap())
    }

    #[test]
    fn build_grid_example() {
        let g = build_grid(&[1.0, 2.0], 3, 2.0).unwrap();
        assert_eq!(g.low(), 0.5);
        assert_eq!(g.high(), 4.0);
        assert_eq!(g.quadrature(), &[0.5, 2.25, 4.0]);
        assert_eq!(g.points(), &[0.5, 1.0, 2.0, 2.25, 4.0]);
        assert_eq!(g.index_of(2.0), Some(2));
        assert_eq!(g.index_of(3.0), None);
    }

    #[test]
    fn covering_grid_reaches_the_floor() {
        let g = SupportGrid::build_covering(&[1.0, 2.0], 0.2, 3, 2.0).unwrap();
        assert_eq!((g.low(), g.high()), (0.2, 4.0));
        let g = SupportGrid::build_covering(&[1.0, 2.0], 0.0, 3, 2.0).unwrap();
        assert_eq!(g.low(), GRID_FLOOR);
        let g = SupportGrid::build_covering(&[1.0, 2.0], 0.9, 3, 2.0).unwrap();
        assert_eq!(g.low(), 0.5);
    }

    #[test]
    fn build_grid_floor_and_dedup() {
        let g = build_grid(&[1e-9, 1e-9, 2.0], 4, 1.5).unwrap();
        assert_eq!(g.low(), GRID_FLOOR);
        assert!(g.observations().len() == 2);
        assert!(build_grid(&[], 4, 1.5).is_err());
        assert!(build_grid(&[-1.0], 4, 1.5).is_err());
        assert!(build_grid(&[1.0], 1, 1.5).is_err());
    }

    #[test]
    fn exponential_normalizer_is_near_zero() {
        // eta = (0, -1) is Exp(1), whose normalizer is Γ(1)/1 = 1
        let g = grid(&[], 1e-6, 40.0, 20001);
        let eta = GammaNatural::new(0.0, -1.0).unwrap();
        let z = log_normalizer(&eta, &alloc::vec![0.0; g.points().len()], &g).unwrap();
        assert!(z.abs() < 1e-3, "{z}");
    }

    #[test]
    fn gamma_normalizer_converges_under_refinement() {
        let eta = GammaNatural::from_shape_rate(3.0, 0.75).unwrap();
        let exact = eta.log_normalizer();
        let mut prev = f64::INFINITY;
        for n in [65, 257, 1025, 4097] {
            let g = grid(&[], 1e-6, 60.0, n);
            let z = log_normalizer(&eta, &alloc::vec![0.0; g.points().len()], &g).unwrap();
            let err = (z - exact).abs();
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 1e-5, "{prev}");
    }

    #[test]
    fn gamma_density_matches_closed_form() {
        let eta = GammaNatural::from_shape_rate(2.0, 1.0).unwrap();
        let g = grid(&[0.3, 1.7], 1e-6, 40.0, 4097);
        let d = SemiparametricDensity::gamma(eta, g).unwrap();
        for x in [0.3, 1.0, 1.7, 5.0] {
            let exact = eta.log_density(x).unwrap();
            assert!((d.log_pdf(x) - exact).abs() < 1e-4);
        }
    }

    #[test]
    fn normalizer_shift_invariance() {
        let g = grid(&[0.5, 1.2, 3.3], 0.1, 8.0, 64);
        let eta = GammaNatural::from_shape_rate(2.0, 1.0).unwrap();
        let base: Vec<f64> = g.points().iter().map(|x| libm::sin(*x)).collect();
        let shifted: Vec<f64> = base.iter().map(|v| v + 3.7).collect();
        let d0 = SemiparametricDensity::new(eta, g.clone(), base).unwrap();
        let d1 = SemiparametricDensity::new(eta, g, shifted).unwrap();
        let z0 = d0.log_normalizer();
        assert!((d1.log_normalizer() - z0 - 3.7).abs() < 1e-12);
        for x in [0.05, 0.5, 0.77, 3.3, 7.9, 12.0] {
            assert!((d0.log_pdf(x) - d1.log_pdf(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn latent_interpolation_and_extrapolation() {
        let g = grid(&[], 1.0, 3.0, 3);
        let eta = GammaNatural::from_shape_rate(1.0, 1.0).unwrap();
        let d = SemiparametricDensity::new(eta, g, alloc::vec![1.0, 3.0, 2.0]).unwrap();
        assert_eq!(d.latent_at(0.5), 1.0);
        assert_eq!(d.latent_at(1.5), 2.0);
        assert_eq!(d.latent_at(2.0), 3.0);
        assert_eq!(d.latent_at(2.5), 2.5);
        assert_eq!(d.latent_at(9.0), 2.0);
        assert_eq!(d.log_pdf(0.0), f64::NEG_INFINITY);
        assert_eq!(d.log_pdf(-1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn full_support_truncation_is_identity() {
        let g = grid(&[0.4, 2.0], 0.01, 10.0, 512);
        let eta = GammaNatural::from_shape_rate(2.0, 1.0).unwrap();
        let d = SemiparametricDensity::gamma(eta, g).unwrap();
        let full = d.truncated_log_pdf(2.0, 0.0, f64::INFINITY).unwrap();
        assert!((full - d.log_pdf(2.0)).abs() < 1e-10);
        assert!((d.grid_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_truncation_doubles_density() {
        let g = grid(&[0.1], 1e-6, 60.0, 60001);
        let d = SemiparametricDensity::gamma(GammaNatural::new(0.0, -1.0).unwrap(), g).unwrap();
        let ln2 = core::f64::consts::LN_2;
        let x = 0.1;
        let lhs = d.truncated_log_pdf(x, 0.0, ln2).unwrap();
        assert!((lhs - (d.log_pdf(x) + ln2)).abs() < 1e-4, "{lhs}");
        assert_eq!(d.truncated_log_pdf(1.0, 0.0, ln2).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn empty_truncation_is_an_error() {
        let g = grid(&[], 1.0, 2.0, 16);
        let d = SemiparametricDensity::gamma(GammaNatural::from_shape_rate(2.0, 1.0).unwrap(), g).unwrap();
        assert_eq!(d.truncated_mass(3.0, 4.0), 0.0);
        assert!(matches!(
            d.truncated_log_pdf(3.5, 3.0, 4.0),
            Err(Error::InfeasibleTruncation { .. })
        ));
        assert!(d.sample_truncated(3.0, 4.0, &mut rng::stream(1, &["t"])).is_err());
    }

    #[test]
    fn masses_are_additive_and_monotone() {
        let g = grid(&[0.7, 2.2], 0.05, 12.0, 300);
        let vals: Vec<f64> = g.points().iter().map(|x| 0.5 * libm::cos(2.0 * x)).collect();
        let d = SemiparametricDensity::new(GammaNatural::from_shape_rate(2.5, 0.8).unwrap(), g, vals).unwrap();
        let cuts = [0.0, 0.051, 0.4, 1.0, 1.33, 2.0, 5.5, 11.99, 20.0];
        for w in cuts.windows(3) {
            let total = d.truncated_mass(w[0], w[2]);
            let split = d.truncated_mass(w[0], w[1]) + d.truncated_mass(w[1], w[2]);
            assert!((total - split).abs() < 1e-12);
            assert!(d.truncated_mass(w[0], w[1]) <= total + 1e-15);
        }
        let mut prev = 0.0;
        for k in 1..200 {
            let m = d.truncated_mass(0.0, k as f64 * 0.07);
            assert!(m >= prev);
            prev = m;
        }
    }

    #[test]
    fn truncated_cdf_of_exponential() {
        // on [0, ln 2] the truncated Exp(1) CDF is 2(1 - e^{-x}), which is 1/2 at ln(4/3)
        let g = grid(&[], 1e-9, 40.0, 40001);
        let d = SemiparametricDensity::gamma(GammaNatural::new(0.0, -1.0).unwrap(), g).unwrap();
        let ln2 = core::f64::consts::LN_2;
        let x = libm::log(4.0 / 3.0);
        let ratio = d.truncated_mass(0.0, x) / d.truncated_mass(0.0, ln2);
        assert!((ratio - 0.5).abs() < 1e-6, "{ratio}");
    }

    fn ks_statistic(mut draws: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
        draws.sort_by(f64::total_cmp);
        let n = draws.len() as f64;
        draws
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let c = cdf(x);
                (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn truncated_sampling_matches_cdf() {
        let g = grid(&[0.9], 0.01, 15.0, 512);
        let vals: Vec<f64> = g.points().iter().map(|x| 0.8 * libm::sin(*x)).collect();
        let d = SemiparametricDensity::new(GammaNatural::from_shape_rate(3.0, 1.0).unwrap(), g, vals).unwrap();
        let mut r = rng::stream(7, &["ks"]);
        for (l, h) in [(0.0, f64::INFINITY), (1.0, 3.0), (4.0, f64::INFINITY), (0.5, 0.6)] {
            let draws: Vec<f64> = (0..100_000).map(|_| d.sample_truncated(l, h, &mut r).unwrap()).collect();
            assert!(draws.iter().all(|x| *x >= l && *x <= h));
            let mass = d.truncated_mass(l, h);
            let ks = ks_statistic(draws, |x| d.truncated_mass(l, x) / mass);
            assert!(ks < 0.01, "[{l},{h}] ks={ks}");
        }
    }

    #[test]
    fn sampling_exponential_against_analytic_cdf() {
        let g = grid(&[], 1e-9, 40.0, 20001);
        let d = SemiparametricDensity::gamma(GammaNatural::new(0.0, -1.0).unwrap(), g).unwrap();
        let mut r = rng::stream(3, &["exp"]);
        let draws: Vec<f64> = (0..50_000).map(|_| d.sample_truncated(0.0, 2.0, &mut r).unwrap()).collect();
        let norm = 1.0 - libm::exp(-2.0);
        let ks = ks_statistic(draws, |x| (1.0 - libm::exp(-x)) / norm);
        assert!(ks < 0.01, "{ks}");
    }

    #[test]
    fn total_variation_basics() {
        let g = grid(&[], 0.01, 30.0, 512);
        let a = SemiparametricDensity::gamma(GammaNatural::from_shape_rate(2.0, 1.0).unwrap(), g.clone()).unwrap();
        let b = SemiparametricDensity::gamma(GammaNatural::from_shape_rate(8.0, 1.0).unwrap(), g.clone()).unwrap();
        let nodes = common_nodes(&g, &g, 4001);
        assert!(total_variation(&a, &a, &nodes) < 1e-12);
        let tv = total_variation(&a, &b, &nodes);
        assert!(tv > 0.8 && tv <= 1.0, "{tv}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn self_normalization(
            shape in 0.5f64..20.0,
            rate in 0.05f64..5.0,
            amp in 0.0f64..3.0,
            freq in 0.1f64..4.0,
            n in 16usize..600,
        ) {
            let eta = GammaNatural::from_shape_rate(shape, rate).unwrap();
            let mean = shape / rate;
            let g = grid(&[mean], 1e-6, mean * 4.0 + 10.0 / rate, n);
            let vals: Vec<f64> = g.points().iter().map(|x| amp * libm::sin(freq * x)).collect();
            let d = SemiparametricDensity::new(eta, g.clone(), vals).unwrap();
            // trapezoid on nodes of exp(log_pdf) equals one
            let h = g.spacing();
            let q = g.quadrature();
            let s: f64 = q.windows(2).map(|w| 0.5 * h * (libm::exp(d.log_pdf(w[0])) + libm::exp(d.log_pdf(w[1])))).sum();
            prop_assert!((s - 1.0).abs() < 1e-6);
            prop_assert!((d.truncated_mass(0.0, f64::INFINITY) - 1.0).abs() < 1e-9);
        }

        #[test]
        fn additivity(a in 0.0f64..30.0, b in 0.0f64..30.0, c in 0.0f64..30.0) {
            let mut v = [a, b, c];
            v.sort_by(f64::total_cmp);
            let g = grid(&[], 0.5, 25.0, 200);
            let vals: Vec<f64> = g.points().iter().map(|x| libm::cos(*x)).collect();
            let d = SemiparametricDensity::new(GammaNatural::from_shape_rate(4.0, 0.5).unwrap(), g, vals).unwrap();
            let lhs = d.truncated_mass(v[0], v[2]);
            let rhs = d.truncated_mass(v[0], v[1]) + d.truncated_mass(v[1], v[2]);
            prop_assert!((lhs - rhs).abs() < 1e-9);
        }
    }
}
