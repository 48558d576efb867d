//! Per-reader generative model: saccade-type probabilities `pi`, refixation
//! branch weight `mu`, and eleven amplitude and duration densities.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::corpus::{
    decompose, find_text, Branch, Fixation, SaccadeEvent, SaccadeType, Scanpath, StepIntervals, TextLine,
};
use crate::density::{SemiparametricDensity, SupportGrid, DEFAULT_EXTENSION_FACTOR, DEFAULT_QUADRATURE_COUNT};
use crate::gamma::fit_mle;
use crate::gp::{average_pairwise_distance, CovarianceConfig};
use crate::rng;
use crate::sampler::{fallback_density, run_chain, DensityPosterior, MhConfig, TruncatedObservations};
use crate::{Error, Result};

/// The eleven densities of a reader model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DensityRole {
    /// Initial fixation position.
    Alpha0,
    /// Positive refixation amplitude.
    Alpha1,
    /// Negative refixation amplitude, on magnitudes.
    Alpha1Bar,
    Alpha2,
    Alpha3,
    /// Regression amplitude, on magnitudes.
    Alpha4,
    /// Initial fixation duration.
    Delta0,
    Delta1,
    Delta2,
    Delta3,
    Delta4,
}

impl DensityRole {
    pub const ALL: [DensityRole; 11] = [
        DensityRole::Alpha0,
        DensityRole::Alpha1,
        DensityRole::Alpha1Bar,
        DensityRole::Alpha2,
        DensityRole::Alpha3,
        DensityRole::Alpha4,
        DensityRole::Delta0,
        DensityRole::Delta1,
        DensityRole::Delta2,
        DensityRole::Delta3,
        DensityRole::Delta4,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            DensityRole::Alpha0 => "alpha0",
            DensityRole::Alpha1 => "alpha1",
            DensityRole::Alpha1Bar => "alpha1_bar",
            DensityRole::Alpha2 => "alpha2",
            DensityRole::Alpha3 => "alpha3",
            DensityRole::Alpha4 => "alpha4",
            DensityRole::Delta0 => "delta0",
            DensityRole::Delta1 => "delta1",
            DensityRole::Delta2 => "delta2",
            DensityRole::Delta3 => "delta3",
            DensityRole::Delta4 => "delta4",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|r| r.name() == name)
    }

    pub fn is_amplitude(self) -> bool {
        self.index() <= DensityRole::Alpha4.index()
    }

    /// Amplitude density for a saccade type and refixation branch.
    pub fn amplitude(kind: SaccadeType, branch: Branch) -> Self {
        match (kind, branch) {
            (SaccadeType::Refixation, Branch::Positive) => DensityRole::Alpha1,
            (SaccadeType::Refixation, Branch::Negative) => DensityRole::Alpha1Bar,
            (SaccadeType::NextWord, _) => DensityRole::Alpha2,
            (SaccadeType::ForwardSkip, _) => DensityRole::Alpha3,
            (SaccadeType::Regression, _) => DensityRole::Alpha4,
        }
    }

    /// Duration density of the fixation that ends a saccade of `kind`.
    pub fn duration(kind: SaccadeType) -> Self {
        match kind {
            SaccadeType::Refixation => DensityRole::Delta1,
            SaccadeType::NextWord => DensityRole::Delta2,
            SaccadeType::ForwardSkip => DensityRole::Delta3,
            SaccadeType::Regression => DensityRole::Delta4,
        }
    }
}

impl fmt::Display for DensityRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Whether an amplitude density sees `a` itself or `-a`.
fn flips_sign(kind: SaccadeType, branch: Branch) -> bool {
    matches!(
        (kind, branch),
        (SaccadeType::Refixation, Branch::Negative) | (SaccadeType::Regression, _)
    )
}

/// Maps an amplitude and its interval onto the positive support of its density.
fn to_magnitude(flip: bool, a: f64, l: f64, r: f64) -> (f64, f64, f64) {
    if flip {
        (-a, -r, -l)
    } else {
        (a, l, r)
    }
}

/// Probabilities of the four saccade types, in [`SaccadeType::index`] order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaccadeTypeProbs([f64; 4]);

impl SaccadeTypeProbs {
    pub fn new(pi: [f64; 4]) -> Result<Self> {
        if pi.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::Domain("saccade type probabilities must be non-negative"));
        }
        if (pi.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::Domain("saccade type probabilities must sum to one"));
        }
        Ok(SaccadeTypeProbs(pi))
    }

    /// Normalizes non-negative weights.
    pub fn from_weights(w: [f64; 4]) -> Result<Self> {
        let s: f64 = w.iter().sum();
        if !(s > 0.0 && s.is_finite()) || w.iter().any(|v| *v < 0.0) {
            return Err(Error::Domain("saccade type weights must be non-negative with positive sum"));
        }
        Ok(SaccadeTypeProbs(w.map(|v| v / s)))
    }

    pub fn get(&self, kind: SaccadeType) -> f64 {
        self.0[kind.index()]
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReaderModel {
    pub reader_id: String,
    pub pi: SaccadeTypeProbs,
    /// Weight of the positive refixation branch.
    pub mu: f64,
    /// Indexed by [`DensityRole::index`].
    pub densities: Vec<SemiparametricDensity>,
    /// Roles whose density is the sparse-data default rather than a fit.
    pub fallback: [bool; 11],
}

impl ReaderModel {
    pub fn new(
        reader_id: impl Into<String>,
        pi: SaccadeTypeProbs,
        mu: f64,
        densities: Vec<SemiparametricDensity>,
        fallback: [bool; 11],
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::Domain("refixation mixture weight must lie in [0, 1]"));
        }
        if densities.len() != DensityRole::ALL.len() {
            return Err(Error::DimensionMismatch {
                expected: DensityRole::ALL.len(),
                got: densities.len(),
            });
        }
        Ok(ReaderModel {
            reader_id: reader_id.into(),
            pi,
            mu,
            densities,
            fallback,
        })
    }

    pub fn density(&self, role: DensityRole) -> &SemiparametricDensity {
        &self.densities[role.index()]
    }

    fn branch_weight(&self, branch: Branch) -> f64 {
        match branch {
            Branch::Positive => self.mu,
            Branch::Negative => 1.0 - self.mu,
        }
    }

    /// Log of the amplitude factor of one event: branch weight times the
    /// truncated amplitude density; `-inf` when the interval carries no mass.
    pub fn amplitude_log_term(&self, event: &SaccadeEvent) -> f64 {
        let branch = event.sign_branch.unwrap_or(Branch::Positive);
        let role = DensityRole::amplitude(event.kind, branch);
        let (y, l, r) = to_magnitude(
            flips_sign(event.kind, branch),
            event.amplitude,
            event.trunc_left,
            event.trunc_right,
        );
        let weight = if event.kind == SaccadeType::Refixation && event.other_branch_open {
            libm::log(self.branch_weight(branch))
        } else {
            0.0
        };
        match self.density(role).truncated_log_pdf(y, l, r) {
            Ok(v) => weight + v,
            Err(_) => f64::NEG_INFINITY,
        }
    }

    /// Log probability of one event given the previous fixation.
    pub fn event_log_likelihood(&self, event: &SaccadeEvent) -> f64 {
        libm::log(self.pi.get(event.kind))
            + self.amplitude_log_term(event)
            + self.density(DensityRole::duration(event.kind)).log_pdf(event.duration)
    }
}

/// `log p(S | X, model)`.
pub fn scanpath_log_likelihood(scanpath: &Scanpath, text: &TextLine, model: &ReaderModel) -> Result<f64> {
    let d = decompose(scanpath, text)?;
    let mut total = model.density(DensityRole::Alpha0).log_pdf(d.initial.position)
        + model.density(DensityRole::Delta0).log_pdf(d.initial.duration);
    for e in &d.events {
        total += model.event_log_likelihood(e);
    }
    Ok(total)
}

/// Observations routed to each density plus the conjugate sufficient statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutedObservations {
    /// Indexed by [`DensityRole::index`].
    pub observations: Vec<TruncatedObservations>,
    pub type_counts: [u64; 4],
    /// Refixations on the positive and negative branch where both were open.
    pub branch_counts: (u64, u64),
    /// Events dropped because their magnitude was not positive.
    pub dropped: u64,
}

/// Routes every initial fixation, amplitude and duration to its density.
pub fn collect_observations<'a>(
    scanpaths: impl IntoIterator<Item = &'a Scanpath>,
    texts: &[TextLine],
) -> Result<RoutedObservations> {
    let mut out = RoutedObservations {
        observations: DensityRole::ALL.iter().map(|_| TruncatedObservations::empty()).collect(),
        type_counts: [0; 4],
        branch_counts: (0, 0),
        dropped: 0,
    };
    let push = |out: &mut RoutedObservations, role: DensityRole, y: f64, l: f64, r: f64| -> Result<()> {
        if y > 0.0 {
            out.observations[role.index()].push(y, l, r)
        } else {
            out.dropped += 1;
            Ok(())
        }
    };
    for sp in scanpaths {
        let text = find_text(texts, &sp.text_id)?;
        let d = decompose(sp, text)?;
        push(&mut out, DensityRole::Alpha0, d.initial.position, 0.0, f64::INFINITY)?;
        push(&mut out, DensityRole::Delta0, d.initial.duration, 0.0, f64::INFINITY)?;
        for e in &d.events {
            out.type_counts[e.kind.index()] += 1;
            let branch = e.sign_branch.unwrap_or(Branch::Positive);
            if e.kind == SaccadeType::Refixation && e.other_branch_open {
                match branch {
                    Branch::Positive => out.branch_counts.0 += 1,
                    Branch::Negative => out.branch_counts.1 += 1,
                }
            }
            let (y, l, r) = to_magnitude(flips_sign(e.kind, branch), e.amplitude, e.trunc_left, e.trunc_right);
            push(&mut out, DensityRole::amplitude(e.kind, branch), y, l.max(0.0), r)?;
            push(&mut out, DensityRole::duration(e.kind), e.duration, 0.0, f64::INFINITY)?;
        }
    }
    Ok(out)
}

/// Hyperparameters shared by the semiparametric fit and the gamma baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Symmetric Dirichlet concentration for `pi`.
    pub lambda: f64,
    /// Symmetric Beta concentration for `mu`.
    pub rho: f64,
    /// GP amplitude shared by all roles; bandwidths are per role.
    pub amplitude: f64,
    pub mh: MhConfig,
    pub quadrature_count: usize,
    pub extension_factor: f64,
    /// Keep thinned chain samples in the posterior (memory heavy).
    pub retain_samples: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            lambda: 1.0,
            rho: 1.0,
            amplitude: 1.0,
            mh: MhConfig::default(),
            quadrature_count: DEFAULT_QUADRATURE_COUNT,
            extension_factor: DEFAULT_EXTENSION_FACTOR,
            retain_samples: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReaderPosterior {
    pub reader_id: String,
    /// Dirichlet parameters `lambda + counts`.
    pub pi_posterior: [f64; 4],
    /// Beta parameters `(rho + positive, rho + negative)`.
    pub mu_posterior: (f64, f64),
    /// Indexed by [`DensityRole::index`].
    pub density_posteriors: Vec<DensityPosterior>,
    pub mean_model: ReaderModel,
}

fn conjugate_means(routed: &RoutedObservations, config: &FitConfig) -> Result<([f64; 4], (f64, f64), SaccadeTypeProbs, f64)> {
    if !(config.lambda > 0.0 && config.rho > 0.0) {
        return Err(Error::InvalidArgument("Dirichlet and Beta concentrations must be positive"));
    }
    let dir = routed.type_counts.map(|c| config.lambda + c as f64);
    let beta = (
        config.rho + routed.branch_counts.0 as f64,
        config.rho + routed.branch_counts.1 as f64,
    );
    let pi = SaccadeTypeProbs::from_weights(dir)?;
    Ok((dir, beta, pi, beta.0 / (beta.0 + beta.1)))
}

/// Grid for a role, reaching down to the smallest truncation lower bound of
/// its observations. Roles without data borrow the pooled observations of
/// their kind (all amplitudes or all durations).
fn role_grid(role: DensityRole, routed: &RoutedObservations, config: &FitConfig) -> Result<Arc<SupportGrid>> {
    let obs = &routed.observations[role.index()];
    let own = obs.sorted_values();
    let floor = obs.lower().iter().copied().fold(f64::INFINITY, f64::min);
    let values = if own.is_empty() {
        let mut pooled: Vec<f64> = DensityRole::ALL
            .iter()
            .filter(|r| r.is_amplitude() == role.is_amplitude())
            .flat_map(|r| routed.observations[r.index()].values().iter().copied())
            .collect();
        if pooled.is_empty() {
            pooled.push(1.0);
        }
        pooled.sort_by(f64::total_cmp);
        pooled
    } else {
        own
    };
    Ok(Arc::new(SupportGrid::build_covering(
        &values,
        floor,
        config.quadrature_count,
        config.extension_factor,
    )?))
}

/// Fits one role's density by MCMC; `seed` is the run seed.
pub fn fit_role(
    reader_id: &str,
    role: DensityRole,
    routed: &RoutedObservations,
    config: &FitConfig,
) -> Result<DensityPosterior> {
    let wrap = |e: Error| e.at_role(role);
    let obs = &routed.observations[role.index()];
    let grid = role_grid(role, routed, config).map_err(wrap)?;
    if obs.is_empty() {
        let mean_density = fallback_density(grid).map_err(wrap)?;
        return Ok(DensityPosterior {
            samples: Vec::new(),
            mean_density,
            acceptance_rate: 0.0,
            accepted: 0,
            proposed: 0,
            eta_step: config.mh.eta_step,
            fallback: true,
            trace: Vec::new(),
        });
    }
    let bandwidth = average_pairwise_distance(&obs.sorted_values())
        .filter(|d| *d > 0.0)
        .unwrap_or(1.0);
    let cov = CovarianceConfig::with_default_jitter(config.amplitude, bandwidth).map_err(wrap)?;
    let mh = MhConfig {
        seed: rng::derive_seed(config.mh.seed, &[reader_id, role.name()]),
        ..config.mh.clone()
    };
    let mut post = run_chain(obs, grid, &cov, &mh).map_err(wrap)?;
    if !config.retain_samples {
        post.samples = Vec::new();
    }
    Ok(post)
}

/// Assembles a posterior from routed observations and per-role fits.
pub fn assemble_posterior(
    reader_id: &str,
    routed: &RoutedObservations,
    config: &FitConfig,
    density_posteriors: Vec<DensityPosterior>,
) -> Result<ReaderPosterior> {
    let (dir, beta, pi, mu) = conjugate_means(routed, config)?;
    let densities = density_posteriors.iter().map(|p| p.mean_density.clone()).collect();
    let mut fallback = [false; 11];
    for (f, p) in fallback.iter_mut().zip(&density_posteriors) {
        *f = p.fallback;
    }
    let mean_model = ReaderModel::new(reader_id, pi, mu, densities, fallback)?;
    Ok(ReaderPosterior {
        reader_id: reader_id.into(),
        pi_posterior: dir,
        mu_posterior: beta,
        density_posteriors,
        mean_model,
    })
}

/// Fits the full semiparametric reader model. Each role's chain uses a stream
/// derived from `(config.mh.seed, reader_id, role)`.
pub fn fit(reader_id: &str, scanpaths: &[Scanpath], texts: &[TextLine], config: &FitConfig) -> Result<ReaderPosterior> {
    if scanpaths.is_empty() {
        return Err(Error::NoScanpaths);
    }
    let routed = collect_observations(scanpaths, texts)?;
    let posteriors = DensityRole::ALL
        .iter()
        .map(|&role| fit_role(reader_id, role, &routed, config))
        .collect::<Result<Vec<_>>>()?;
    assemble_posterior(reader_id, &routed, config, posteriors)
}

/// Gamma-only baseline: every density is the MLE gamma on the same grid as
/// the semiparametric fit, ignoring truncation.
pub fn fit_gamma_baseline(
    reader_id: &str,
    scanpaths: &[Scanpath],
    texts: &[TextLine],
    config: &FitConfig,
) -> Result<ReaderModel> {
    if scanpaths.is_empty() {
        return Err(Error::NoScanpaths);
    }
    let routed = collect_observations(scanpaths, texts)?;
    gamma_baseline_from(reader_id, &routed, config)
}

pub fn gamma_baseline_from(reader_id: &str, routed: &RoutedObservations, config: &FitConfig) -> Result<ReaderModel> {
    let (_, _, pi, mu) = conjugate_means(routed, config)?;
    let mut densities = Vec::with_capacity(11);
    let mut fallback = [false; 11];
    for role in DensityRole::ALL {
        let wrap = |e: Error| e.at_role(role);
        let grid = role_grid(role, routed, config).map_err(wrap)?;
        let obs = routed.observations[role.index()].values();
        let density = match fit_mle(obs) {
            Ok(eta) => SemiparametricDensity::gamma(eta, grid).map_err(wrap)?,
            Err(_) => {
                fallback[role.index()] = true;
                fallback_density(grid).map_err(wrap)?
            }
        };
        densities.push(density);
    }
    ReaderModel::new(reader_id, pi, mu, densities, fallback)
}

/// Draws a scanpath on `text`.
///
/// The first position is redrawn until it lands on the line. At each step the
/// type is drawn from `pi` restricted to types with positive amplitude mass.
/// A next-word or forward-skip move past the last word, or any landing outside
/// the admissible range, ends the scanpath.
pub fn generate<R: Rng + ?Sized>(
    text: &TextLine,
    model: &ReaderModel,
    max_fixations: usize,
    rng: &mut R,
) -> Result<Scanpath> {
    if max_fixations == 0 {
        return Err(Error::InvalidArgument("max_fixations must be positive"));
    }
    let words = text.words();
    let (line_lo, line_hi) = (words[0].left, words[words.len() - 1].right);
    let alpha0 = model.density(DensityRole::Alpha0);
    if alpha0.truncated_mass(line_lo, line_hi) <= 0.0 {
        return Err(Error::NoFeasibleType);
    }
    let mut s = alpha0.sample_truncated(line_lo, line_hi, rng)?;
    let d = model.density(DensityRole::Delta0).sample_truncated(0.0, f64::INFINITY, rng)?;
    let mut fixations = alloc::vec![Fixation::new(s, d)];

    while fixations.len() < max_fixations {
        let steps = StepIntervals::at(s, text)?;
        // (type, branch, interval, weight); exit moves have no interval
        let mut options: Vec<(SaccadeType, Option<(Branch, f64, f64)>, f64)> = Vec::with_capacity(5);
        for kind in SaccadeType::ALL {
            let p = model.pi.get(kind);
            if p <= 0.0 {
                continue;
            }
            if kind == SaccadeType::Refixation {
                let open: Vec<(Branch, f64, f64)> = [Branch::Positive, Branch::Negative]
                    .into_iter()
                    .filter_map(|b| {
                        let (l, r) = steps.interval(kind, b).ok()?;
                        let (_, ml, mr) = to_magnitude(flips_sign(kind, b), 0.0, l, r);
                        (model.density(DensityRole::amplitude(kind, b)).truncated_mass(ml, mr) > 0.0).then_some((b, l, r))
                    })
                    .collect();
                match open.len() {
                    2 => {
                        for (b, l, r) in open {
                            options.push((kind, Some((b, l, r)), p * model.branch_weight(b)));
                        }
                    }
                    1 => options.push((kind, Some(open[0]), p)),
                    _ => {}
                }
                continue;
            }
            match steps.interval(kind, Branch::Positive) {
                Ok((l, r)) => {
                    let (_, ml, mr) = to_magnitude(flips_sign(kind, Branch::Positive), 0.0, l, r);
                    if model.density(DensityRole::amplitude(kind, Branch::Positive)).truncated_mass(ml, mr) > 0.0 {
                        options.push((kind, Some((Branch::Positive, l, r)), p));
                    }
                }
                Err(Error::MissingNextWord) => options.push((kind, None, p)),
                Err(_) => {}
            }
        }
        let total: f64 = options.iter().map(|o| o.2).sum();
        if !(total > 0.0) {
            if fixations.len() == 1 {
                return Err(Error::NoFeasibleType);
            }
            break;
        }
        let mut u = rng.random::<f64>() * total;
        let mut chosen = options[options.len() - 1];
        for o in &options {
            if u < o.2 {
                chosen = *o;
                break;
            }
            u -= o.2;
        }
        let (kind, Some((branch, l, r))) = (chosen.0, chosen.1) else {
            break;
        };
        let flip = flips_sign(kind, branch);
        let (_, ml, mr) = to_magnitude(flip, 0.0, l, r);
        let magnitude = model
            .density(DensityRole::amplitude(kind, branch))
            .sample_truncated(ml, mr, rng)?;
        let a = if flip { -magnitude } else { magnitude };
        let next = s + a;
        if !text.is_admissible(next) {
            break;
        }
        let d = model
            .density(DensityRole::duration(kind))
            .sample_truncated(0.0, f64::INFINITY, rng)?;
        fixations.push(Fixation::new(next, d));
        s = next;
    }
    Scanpath::new(model.reader_id.clone(), text.id(), fixations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{classify_saccade, saccade_event, Word};
    use crate::gamma::GammaNatural;

    fn line(id: &str, n: usize) -> TextLine {
        let words = (0..n).map(|i| Word::new(i as f64 * 6.0, i as f64 * 6.0 + 5.0)).collect();
        TextLine::new(id, words).unwrap()
    }

    fn gamma_model(pi: [f64; 4]) -> ReaderModel {
        let spec: [(f64, f64, f64); 11] = [
            (3.0, 0.3, 60.0),
            (2.0, 1.0, 15.0),
            (2.0, 1.0, 15.0),
            (6.0, 1.0, 30.0),
            (10.0, 0.8, 50.0),
            (5.0, 0.7, 40.0),
            (8.0, 0.04, 700.0),
            (8.0, 0.04, 700.0),
            (8.0, 0.04, 700.0),
            (8.0, 0.04, 700.0),
            (8.0, 0.04, 700.0),
        ];
        let densities = spec
            .iter()
            .map(|&(k, r, hi)| {
                let grid = Arc::new(SupportGrid::new(Vec::new(), 1e-6, hi, 2048).unwrap());
                SemiparametricDensity::gamma(GammaNatural::from_shape_rate(k, r).unwrap(), grid).unwrap()
            })
            .collect();
        ReaderModel::new("r", SaccadeTypeProbs::new(pi).unwrap(), 0.5, densities, [false; 11]).unwrap()
    }

    #[test]
    fn roles_round_trip_names() {
        for (i, r) in DensityRole::ALL.iter().enumerate() {
            assert_eq!(r.index(), i);
            assert_eq!(DensityRole::from_name(r.name()), Some(*r));
        }
        assert_eq!(DensityRole::from_name("alpha5"), None);
        assert_eq!(DensityRole::Alpha1Bar.to_string(), "alpha1_bar");
    }

    #[test]
    fn routing_examples() {
        let text = TextLine::new("t", alloc::vec![Word::new(0.0, 4.0), Word::new(5.0, 10.0), Word::new(11.0, 20.0)]).unwrap();
        // 2 -> 9: next word, interval [5-2, 10-2] = [3, 8]
        // 9 -> 6: refixation on the negative branch, interval [5-9, 0] = [-4, 0]
        // 6 -> 1: regression, interval (-inf, 5-6) = (-inf, -1)
        let sp = Scanpath::new(
            "r",
            "t",
            alloc::vec![
                Fixation::new(2.0, 200.0),
                Fixation::new(9.0, 210.0),
                Fixation::new(6.0, 220.0),
                Fixation::new(1.0, 230.0),
            ],
        )
        .unwrap();
        let routed = collect_observations([&sp], core::slice::from_ref(&text)).unwrap();
        let a2 = &routed.observations[DensityRole::Alpha2.index()];
        assert_eq!((a2.values(), a2.lower(), a2.upper()), (&[7.0][..], &[3.0][..], &[8.0][..]));
        let a1b = &routed.observations[DensityRole::Alpha1Bar.index()];
        assert_eq!((a1b.values(), a1b.lower(), a1b.upper()), (&[3.0][..], &[0.0][..], &[4.0][..]));
        let a4 = &routed.observations[DensityRole::Alpha4.index()];
        assert_eq!((a4.values(), a4.lower()), (&[5.0][..], &[1.0][..]));
        assert_eq!(a4.upper()[0], f64::INFINITY);
        assert_eq!(routed.observations[DensityRole::Alpha0.index()].values(), &[2.0]);
        assert_eq!(routed.observations[DensityRole::Delta0.index()].values(), &[200.0]);
        assert_eq!(routed.observations[DensityRole::Delta1.index()].values(), &[220.0]);
        assert_eq!(routed.type_counts, [1, 1, 0, 1]);
        assert_eq!(routed.type_counts.iter().sum::<u64>(), (sp.len() - 1) as u64);
        assert_eq!(routed.branch_counts, (0, 1));
    }

    #[test]
    fn conjugate_posterior_means() {
        let mut routed = collect_observations(core::iter::empty(), &[]).unwrap();
        routed.type_counts = [10, 20, 5, 5];
        let (_, _, pi, mu) = conjugate_means(&routed, &FitConfig::default()).unwrap();
        let expect = [11.0 / 44.0, 21.0 / 44.0, 6.0 / 44.0, 6.0 / 44.0];
        for (a, b) in pi.as_array().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(mu, 0.5);
    }

    #[test]
    fn single_fixation_likelihood() {
        let text = line("t", 4);
        let m = gamma_model([0.25; 4]);
        let sp = Scanpath::new("r", "t", alloc::vec![Fixation::new(3.0, 180.0)]).unwrap();
        let ll = scanpath_log_likelihood(&sp, &text, &m).unwrap();
        let expect = m.density(DensityRole::Alpha0).log_pdf(3.0) + m.density(DensityRole::Delta0).log_pdf(180.0);
        assert_eq!(ll, expect);
    }

    #[test]
    fn zero_probability_type_gives_minus_infinity() {
        let text = line("t", 4);
        let m = gamma_model([0.0, 1.0, 0.0, 0.0]);
        let sp = Scanpath::new(
            "r",
            "t",
            alloc::vec![Fixation::new(2.0, 180.0), Fixation::new(8.0, 200.0), Fixation::new(9.0, 200.0)],
        )
        .unwrap();
        assert_eq!(scanpath_log_likelihood(&sp, &text, &m).unwrap(), f64::NEG_INFINITY);
        let ok = Scanpath::new("r", "t", alloc::vec![Fixation::new(2.0, 180.0), Fixation::new(8.0, 200.0)]).unwrap();
        assert!(scanpath_log_likelihood(&ok, &text, &m).unwrap().is_finite());
    }

    #[test]
    fn forced_next_word_path() {
        let text = line("t", 3);
        let m = gamma_model([0.0, 1.0, 0.0, 0.0]);
        let mut r = rng::stream(2, &["forced"]);
        for _ in 0..50 {
            let sp = generate(&text, &m, 100, &mut r).unwrap();
            let visited: Vec<usize> = sp.fixations.iter().map(|f| text.attribute(f.position).unwrap()).collect();
            let start = visited[0];
            let expect: Vec<usize> = (start..3).collect();
            assert_eq!(visited, expect);
        }
    }

    #[test]
    fn generated_events_reclassify() {
        let text = line("t", 12);
        let m = gamma_model([0.2, 0.5, 0.15, 0.15]);
        let mut r = rng::stream(3, &["roundtrip"]);
        let mut events = 0;
        while events < 10_000 {
            let sp = generate(&text, &m, 100, &mut r).unwrap();
            sp.validate_against(&text).unwrap();
            for w in sp.fixations.windows(2) {
                let kind = classify_saccade(w[0].position, w[1].position, &text).unwrap();
                // every landing lies inside the interval of the type it reclassifies as
                let e = saccade_event(w[0].position, w[1].position, w[1].duration, &text).unwrap();
                assert_eq!(e.kind, kind);
                assert!(e.trunc_left <= e.amplitude && e.amplitude <= e.trunc_right);
                events += 1;
            }
        }
    }

    #[test]
    fn generation_is_deterministic_and_bounded() {
        let text = line("t", 8);
        let m = gamma_model([0.4, 0.3, 0.1, 0.2]);
        let a = generate(&text, &m, 7, &mut rng::stream(5, &["g"])).unwrap();
        let b = generate(&text, &m, 7, &mut rng::stream(5, &["g"])).unwrap();
        assert_eq!(a, b);
        assert!(a.len() <= 7);
        assert!(generate(&text, &m, 0, &mut rng::stream(5, &["g"])).is_err());
    }

    /// Numerically integrates `pi_u * exp(amplitude term)` over amplitudes.
    #[test]
    fn per_step_factor_integrates_to_one() {
        let text = line("t", 10);
        let m = gamma_model([0.2, 0.4, 0.15, 0.25]);
        for prev in [13.0, 25.5, 31.2, 40.0] {
            let steps = StepIntervals::at(prev, &text).unwrap();
            let mut total = 0.0;
            let n = 400_000;
            let (lo, hi) = (-60.0, 60.0);
            let h = (hi - lo) / n as f64;
            for i in 0..=n {
                let a = lo + i as f64 * h;
                // landings in the gap after the current word lie outside every type's interval
                let gap_end = steps.next.map_or(f64::INFINITY, |n| n.0);
                if a > steps.current.1 && a < gap_end {
                    continue;
                }
                let e = saccade_event(prev, prev + a, 1.0, &text).unwrap();
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                total += w * h * m.pi.get(e.kind) * libm::exp(m.amplitude_log_term(&e));
            }
            assert!((total - 1.0).abs() < 1e-4, "prev {prev}: {total}");
        }
    }

    #[test]
    fn event_terms_are_translation_invariant() {
        let words: Vec<Word> = (0..6).map(|i| Word::new(i as f64 * 7.0, i as f64 * 7.0 + 5.5)).collect();
        let shifted: Vec<Word> = words.iter().map(|w| Word::new(w.left + 1000.0, w.right + 1000.0)).collect();
        let t0 = TextLine::new("t", words).unwrap();
        let t1 = TextLine::new("t", shifted).unwrap();
        let m = gamma_model([0.2, 0.4, 0.15, 0.25]);
        let mut r = rng::stream(6, &["shift"]);
        for _ in 0..100 {
            let sp = generate(&t0, &m, 30, &mut r).unwrap();
            let mut moved = sp.clone();
            for f in &mut moved.fixations {
                f.position += 1000.0;
            }
            let events = |sp: &Scanpath, t: &TextLine| -> f64 {
                decompose(sp, t).unwrap().events.iter().map(|e| m.event_log_likelihood(e)).sum()
            };
            let (a, b) = (events(&sp, &t0), events(&moved, &t1));
            assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn baseline_has_zero_latent_and_is_seed_free() {
        let text = line("t", 10);
        let m = gamma_model([0.2, 0.5, 0.15, 0.15]);
        let mut r = rng::stream(1, &["data"]);
        let sps: Vec<Scanpath> = (0..50).map(|_| generate(&text, &m, 60, &mut r).unwrap()).collect();
        let texts = [text];
        let mut cfg = FitConfig::default();
        let a = fit_gamma_baseline("r", &sps, &texts, &cfg).unwrap();
        cfg.mh.seed = 99;
        let b = fit_gamma_baseline("r", &sps, &texts, &cfg).unwrap();
        assert_eq!(a, b);
        for d in &a.densities {
            assert!(d.g_values().iter().all(|v| *v == 0.0));
        }
        assert!(fit_gamma_baseline("r", &[], &texts, &cfg).is_err());
    }

    #[test]
    fn pi_recovery_from_generated_data() {
        let text = line("t", 40);
        let truth = [0.15, 0.55, 0.15, 0.15];
        let m = gamma_model(truth);
        let mut r = rng::stream(4, &["recovery"]);
        let sps: Vec<Scanpath> = (0..1000).map(|_| generate(&text, &m, 100, &mut r).unwrap()).collect();
        let routed = collect_observations(&sps, core::slice::from_ref(&text)).unwrap();
        let (_, _, pi, _) = conjugate_means(&routed, &FitConfig::default()).unwrap();
        for (a, b) in pi.as_array().iter().zip(truth) {
            assert!((a - b).abs() < 0.02, "{:?}", pi.as_array());
        }
    }
}
