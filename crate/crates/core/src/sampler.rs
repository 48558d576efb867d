//! Metropolis–Hastings over `(eta, g)` for one semiparametric density given
//! interval-truncated observations.
//!
//! The proposal draws `g*` afresh from the GP prior and perturbs `eta` by a
//! Gaussian random walk, so the prior and proposal terms for `g` cancel in the
//! acceptance ratio.

use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::density::{SemiparametricDensity, SupportGrid};
use crate::gamma::{fit_mle, GammaNatural};
use crate::gp::{CovarianceConfig, PriorFactor};
use crate::rng;
use crate::{Error, Result};

/// Shape of the fallback density used when there are too few observations.
pub const FALLBACK_SHAPE: f64 = 2.0;

/// Observations `y_i` known to lie in `[l_i, r_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedObservations {
    y: Vec<f64>,
    l: Vec<f64>,
    r: Vec<f64>,
}

impl TruncatedObservations {
    pub fn new(y: Vec<f64>, l: Vec<f64>, r: Vec<f64>) -> Result<Self> {
        if y.len() != l.len() || y.len() != r.len() {
            return Err(Error::DimensionMismatch {
                expected: y.len(),
                got: if l.len() != y.len() { l.len() } else { r.len() },
            });
        }
        for i in 0..y.len() {
            if !(y[i].is_finite() && l[i] < r[i] && l[i] <= y[i] && y[i] <= r[i]) {
                return Err(Error::InvalidArgument("observation outside its truncation interval").at_observation(i));
            }
        }
        Ok(TruncatedObservations { y, l, r })
    }

    /// Untruncated observations, `l = 0`, `r = inf`.
    pub fn untruncated(y: Vec<f64>) -> Result<Self> {
        let n = y.len();
        Self::new(y, alloc::vec![0.0; n], alloc::vec![f64::INFINITY; n])
    }

    pub fn empty() -> Self {
        TruncatedObservations {
            y: Vec::new(),
            l: Vec::new(),
            r: Vec::new(),
        }
    }

    pub fn push(&mut self, y: f64, l: f64, r: f64) -> Result<()> {
        if !(y.is_finite() && l < r && l <= y && y <= r) {
            return Err(Error::InvalidArgument("observation outside its truncation interval").at_observation(self.y.len()));
        }
        self.y.push(y);
        self.l.push(l);
        self.r.push(r);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn lower(&self) -> &[f64] {
        &self.l
    }

    pub fn upper(&self) -> &[f64] {
        &self.r
    }

    /// Observations sorted and ready for [`SupportGrid::build`].
    pub fn sorted_values(&self) -> Vec<f64> {
        let mut v = self.y.clone();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// `Σ_i log f(y_i | y_i ∈ [l_i, r_i])`.
pub fn truncated_log_likelihood(f: &SemiparametricDensity, obs: &TruncatedObservations) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..obs.len() {
        total += f
            .truncated_log_pdf(obs.y[i], obs.l[i], obs.r[i])
            .map_err(|e| e.at_observation(i))?;
    }
    Ok(total)
}

/// Observations indexed against a fixed grid with truncation intervals
/// deduplicated, so each state computes every distinct mass once.
#[derive(Debug, Clone)]
struct IndexedObservations {
    /// Represented-point index of each observation, or its value if it is off the grid.
    points: Vec<Result<usize, f64>>,
    /// Distinct intervals with their multiplicities.
    intervals: Vec<(f64, f64, f64)>,
}

impl IndexedObservations {
    fn new(obs: &TruncatedObservations, grid: &SupportGrid) -> Self {
        let points = obs.y.iter().map(|&y| grid.index_of(y).ok_or(y)).collect();
        let mut keyed: Vec<(f64, f64)> = obs.l.iter().copied().zip(obs.r.iter().copied()).collect();
        keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut intervals: Vec<(f64, f64, f64)> = Vec::new();
        for (l, r) in keyed {
            match intervals.last_mut() {
                Some(last) if last.0 == l && last.1 == r => last.2 += 1.0,
                _ => intervals.push((l, r, 1.0)),
            }
        }
        IndexedObservations { points, intervals }
    }

    /// Log likelihood, `-inf` when any interval has zero mass.
    fn log_likelihood(&self, f: &SemiparametricDensity) -> f64 {
        let mut total = 0.0;
        for p in &self.points {
            total += match *p {
                Ok(k) => f.log_pdf_at(k),
                Err(y) => f.log_pdf(y),
            };
        }
        for &(l, r, count) in &self.intervals {
            match f.log_truncated_mass(l, r) {
                Ok(lm) => total -= count * lm,
                Err(_) => return f64::NEG_INFINITY,
            }
        }
        if total.is_nan() {
            f64::NEG_INFINITY
        } else {
            total
        }
    }
}

/// Prior over the natural parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaPrior {
    /// Improper uniform prior on the valid region.
    Flat,
    /// Independent Gaussians on `eta1`, `eta2`, restricted to the valid region.
    Gaussian { mean: (f64, f64), sd: (f64, f64) },
}

impl EtaPrior {
    pub fn log_density(&self, eta: &GammaNatural) -> f64 {
        if !eta.is_valid() {
            return f64::NEG_INFINITY;
        }
        match *self {
            EtaPrior::Flat => 0.0,
            EtaPrior::Gaussian { mean, sd } => {
                let a = (eta.eta1 - mean.0) / sd.0;
                let b = (eta.eta2 - mean.1) / sd.1;
                -0.5 * (a * a + b * b)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MhConfig {
    pub iterations: usize,
    pub burn_in: usize,
    /// Standard deviation of the Gaussian walk on each natural parameter.
    pub eta_step: f64,
    pub thinning: usize,
    pub seed: u64,
    /// Tune `eta_step` towards acceptance 0.23 during the first half of burn-in.
    pub adapt: bool,
    /// Record one trace row per iteration.
    pub trace: bool,
    pub eta_prior: EtaPrior,
}

impl Default for MhConfig {
    fn default() -> Self {
        MhConfig {
            iterations: 10_000,
            burn_in: 5_000,
            eta_step: 0.05,
            thinning: 5,
            seed: 0,
            adapt: false,
            trace: false,
            eta_prior: EtaPrior::Flat,
        }
    }
}

impl MhConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(Error::InvalidArgument("burn-in must be shorter than the chain"));
        }
        if self.thinning == 0 {
            return Err(Error::InvalidArgument("thinning must be at least 1"));
        }
        if !(self.eta_step >= 0.0 && self.eta_step.is_finite()) {
            return Err(Error::InvalidArgument("eta step must be a non-negative real"));
        }
        Ok(())
    }
}

/// A chain state: parameters plus the standard-normal noise that generated `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub eta: GammaNatural,
    pub g: Vec<f64>,
    pub noise: Vec<f64>,
}

/// Draws a proposal: fresh `g* = L z` from the prior, `eta* = eta + step·N(0, I)`.
pub fn propose<R: Rng + ?Sized>(current: &ChainState, eta_step: f64, prior: &PriorFactor, rng: &mut R) -> ChainState {
    let d1: f64 = StandardNormal.sample(rng);
    let d2: f64 = StandardNormal.sample(rng);
    let eta = GammaNatural {
        eta1: current.eta.eta1 + eta_step * d1,
        eta2: current.eta.eta2 + eta_step * d2,
    };
    let (mut noise, mut g) = (Vec::new(), Vec::new());
    prior.draw_into(rng, &mut noise, &mut g);
    ChainState { eta, g, noise }
}

/// Everything the acceptance ratio needs about one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateTerms {
    pub log_eta_prior: f64,
    pub log_likelihood: f64,
    pub log_g_prior: f64,
}

fn log_walk_density(to: &GammaNatural, from: &GammaNatural, step: f64) -> f64 {
    if step == 0.0 {
        return 0.0;
    }
    let a = (to.eta1 - from.eta1) / step;
    let b = (to.eta2 - from.eta2) / step;
    -0.5 * (a * a + b * b) - 2.0 * libm::log(step) - libm::log(2.0 * core::f64::consts::PI)
}

/// `log Q` written out in full: target ratio times reverse/forward proposal ratio.
pub fn acceptance_log_ratio_full(
    current: (&GammaNatural, &StateTerms),
    proposal: (&GammaNatural, &StateTerms),
    eta_step: f64,
) -> f64 {
    let (eta, s) = current;
    let (eta_p, p) = proposal;
    let numerator = p.log_likelihood + p.log_eta_prior + p.log_g_prior + s.log_g_prior + log_walk_density(eta, eta_p, eta_step);
    let denominator = s.log_likelihood + s.log_eta_prior + s.log_g_prior + p.log_g_prior + log_walk_density(eta_p, eta, eta_step);
    finite_or_reject(numerator - denominator)
}

/// `log Q` after cancelling the GP prior against the independence proposal
/// and the symmetric walk against itself.
pub fn acceptance_log_ratio(current: &StateTerms, proposal: &StateTerms) -> f64 {
    finite_or_reject((proposal.log_eta_prior + proposal.log_likelihood) - (current.log_eta_prior + current.log_likelihood))
}

fn finite_or_reject(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// One thinned post-burn-in state.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSample {
    pub eta: GammaNatural,
    pub g: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub eta1: f64,
    pub eta2: f64,
    pub log_posterior: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityPosterior {
    pub samples: Vec<PosteriorSample>,
    pub mean_density: SemiparametricDensity,
    pub acceptance_rate: f64,
    pub accepted: usize,
    pub proposed: usize,
    /// Final proposal scale after any adaptation.
    pub eta_step: f64,
    /// Set when MH was skipped and a default density substituted.
    pub fallback: bool,
    pub trace: Vec<TraceRow>,
}

/// Averages `eta` and `g` over samples sharing one grid and renormalizes.
pub fn posterior_mean(samples: &[PosteriorSample], grid: Arc<SupportGrid>) -> Result<SemiparametricDensity> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("posterior mean of no samples"));
    }
    let n = grid.points().len();
    if samples.iter().any(|s| s.g.len() != n) {
        return Err(Error::GridMismatch);
    }
    let k = samples.len() as f64;
    let mut g = alloc::vec![0.0; n];
    let (mut e1, mut e2) = (0.0, 0.0);
    for s in samples {
        e1 += s.eta.eta1;
        e2 += s.eta.eta2;
        for (acc, v) in g.iter_mut().zip(&s.g) {
            *acc += v;
        }
    }
    for v in &mut g {
        *v /= k;
    }
    let eta = GammaNatural::new(e1 / k, e2 / k)?;
    SemiparametricDensity::new(eta, grid, g)
}

/// Gamma with shape 2 and mean at the grid midpoint, `g ≡ 0`.
pub fn fallback_density(grid: Arc<SupportGrid>) -> Result<SemiparametricDensity> {
    let mid = 0.5 * (grid.low() + grid.high());
    let eta = GammaNatural::from_shape_rate(FALLBACK_SHAPE, FALLBACK_SHAPE / mid)?;
    SemiparametricDensity::gamma(eta, grid)
}

fn fallback_posterior(grid: Arc<SupportGrid>, config: &MhConfig) -> Result<DensityPosterior> {
    let mean_density = fallback_density(grid.clone())?;
    Ok(DensityPosterior {
        samples: alloc::vec![PosteriorSample {
            eta: mean_density.eta(),
            g: mean_density.g_values().to_vec(),
        }],
        mean_density,
        acceptance_rate: 0.0,
        accepted: 0,
        proposed: 0,
        eta_step: config.eta_step,
        fallback: true,
        trace: Vec::new(),
    })
}

const ADAPT_BATCH: usize = 100;

/// Runs one chain from the gamma MLE with `g ≡ 0`.
///
/// With fewer than two observations, or when the MLE does not exist, returns
/// the fallback density with `fallback` set.
pub fn run_chain(
    obs: &TruncatedObservations,
    grid: Arc<SupportGrid>,
    covariance: &CovarianceConfig,
    config: &MhConfig,
) -> Result<DensityPosterior> {
    config.validate()?;
    if obs.is_empty() {
        return Err(Error::InvalidArgument("cannot run a chain without observations"));
    }
    let init = match fit_mle(obs.values()) {
        Ok(eta) if obs.len() >= 2 => eta,
        _ => return fallback_posterior(grid, config),
    };
    run_chain_from(obs, grid, covariance, config, init)
}

/// [`run_chain`] with an explicit initial `eta`.
pub fn run_chain_from(
    obs: &TruncatedObservations,
    grid: Arc<SupportGrid>,
    covariance: &CovarianceConfig,
    config: &MhConfig,
    init: GammaNatural,
) -> Result<DensityPosterior> {
    config.validate()?;
    let mut rng = rng::stream(config.seed, &["mh"]);
    let prior = PriorFactor::new(grid.points(), covariance)?;
    let indexed = IndexedObservations::new(obs, &grid);
    let n = grid.points().len();

    let mut state = ChainState {
        eta: init,
        g: alloc::vec![0.0; n],
        noise: alloc::vec![0.0; n],
    };
    let density = SemiparametricDensity::new(state.eta, grid.clone(), state.g.clone())?;
    let mut terms = StateTerms {
        log_eta_prior: config.eta_prior.log_density(&state.eta),
        log_likelihood: indexed.log_likelihood(&density),
        log_g_prior: prior.log_prior_from_noise(&state.noise),
    };
    if !(terms.log_likelihood.is_finite() && terms.log_eta_prior.is_finite()) {
        return Err(Error::Numerical("initial state has zero posterior density"));
    }

    let mut step = config.eta_step;
    let adapt_until = if config.adapt { config.burn_in / 2 } else { 0 };
    let mut batch_accepts = 0usize;
    let mut accepted = 0usize;
    let mut samples = Vec::with_capacity((config.iterations - config.burn_in) / config.thinning);
    let mut trace = Vec::new();

    for it in 0..config.iterations {
        let proposal = propose(&state, step, &prior, &mut rng);
        let log_eta_prior = config.eta_prior.log_density(&proposal.eta);
        let log_likelihood = if log_eta_prior.is_finite() {
            match SemiparametricDensity::new(proposal.eta, grid.clone(), proposal.g.clone()) {
                Ok(f) => indexed.log_likelihood(&f),
                Err(_) => f64::NEG_INFINITY,
            }
        } else {
            f64::NEG_INFINITY
        };
        let proposal_terms = StateTerms {
            log_eta_prior,
            log_likelihood,
            log_g_prior: prior.log_prior_from_noise(&proposal.noise),
        };
        let log_q = acceptance_log_ratio(&terms, &proposal_terms);
        #[cfg(debug_assertions)]
        if log_q.is_finite() {
            let full = acceptance_log_ratio_full((&state.eta, &terms), (&proposal.eta, &proposal_terms), step);
            debug_assert!((full - log_q).abs() <= 1e-8 * (1.0 + log_q.abs()), "full {full} reduced {log_q}");
        }
        let u: f64 = rng.random();
        let accept = log_q >= 0.0 || libm::log(u) < log_q;
        if accept {
            state = proposal;
            terms = proposal_terms;
            accepted += 1;
            batch_accepts += 1;
        }
        if it < adapt_until && (it + 1) % ADAPT_BATCH == 0 {
            let rate = batch_accepts as f64 / ADAPT_BATCH as f64;
            if rate < 0.13 {
                step *= 0.7;
            } else if rate > 0.33 {
                step *= 1.3;
            }
            batch_accepts = 0;
        }
        if config.trace {
            trace.push(TraceRow {
                iteration: it,
                eta1: state.eta.eta1,
                eta2: state.eta.eta2,
                log_posterior: terms.log_eta_prior + terms.log_likelihood + terms.log_g_prior,
                accepted: accept,
            });
        }
        if it >= config.burn_in && (it + 1 - config.burn_in) % config.thinning == 0 {
            samples.push(PosteriorSample {
                eta: state.eta,
                g: state.g.clone(),
            });
        }
    }
    if samples.is_empty() {
        samples.push(PosteriorSample {
            eta: state.eta,
            g: state.g.clone(),
        });
    }
    let mean_density = posterior_mean(&samples, grid)?;
    Ok(DensityPosterior {
        samples,
        mean_density,
        acceptance_rate: accepted as f64 / config.iterations as f64,
        accepted,
        proposed: config.iterations,
        eta_step: step,
        fallback: false,
        trace,
    })
}
