//! Synthetic texts and reader populations with known ground truth.
//!
//! Each reader perturbs shared base parameters by noise scaled with
//! `divergence`, and warps every density by a sum of Gaussian bumps in
//! log-density space with heights scaled by `gp_warp`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::corpus::{Scanpath, TextLine, Word};
use crate::density::{SemiparametricDensity, SupportGrid, GRID_FLOOR};
use crate::gamma::GammaNatural;
use crate::reader::{generate, DensityRole, ReaderModel, SaccadeTypeProbs};
use crate::rng::{self, Stream};
use crate::{Error, Result};

/// Base `(shape, rate)` per role in [`DensityRole::index`] order.
pub const BASE_GAMMAS: [(f64, f64); 11] = [
    (3.0, 0.75),
    (2.0, 1.0),
    (2.0, 1.0),
    (6.0, 1.0),
    (10.0, 0.8),
    (5.0, 0.7),
    (8.0, 0.04),
    (8.0, 0.04),
    (8.0, 0.04),
    (8.0, 0.04),
    (8.0, 0.04),
];
/// Base saccade-type probabilities.
pub const BASE_PI: [f64; 4] = [0.15, 0.55, 0.15, 0.15];
pub const BASE_MU: f64 = 0.5;

/// Per-unit-divergence standard deviations of the log-normal noise on gamma
/// shape and rate.
pub const SHAPE_NOISE: f64 = 0.1;
pub const RATE_NOISE: f64 = 0.1;
/// Per-unit-divergence noise on log `pi` weights and on logit `mu`.
pub const PI_NOISE: f64 = 0.1;
pub const MU_NOISE: f64 = 0.2;

pub const WARP_BUMPS: usize = 3;
/// Quadrature nodes of ground-truth densities.
pub const TRUTH_QUADRATURE: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSpec {
    pub reader_count: usize,
    pub sentences_train: usize,
    pub sentences_test: usize,
    pub words_per_sentence: (usize, usize),
    pub word_length: (f64, f64),
    pub divergence: f64,
    pub gp_warp: f64,
    pub seed: u64,
    pub max_fixations: usize,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        PopulationSpec {
            reader_count: 20,
            sentences_train: 72,
            sentences_test: 72,
            words_per_sentence: (6, 12),
            word_length: (2.0, 9.0),
            divergence: 0.5,
            gp_warp: 0.5,
            seed: 0,
            max_fixations: 100,
        }
    }
}

impl PopulationSpec {
    /// Every violated constraint, in field order.
    pub fn violations(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.reader_count == 0 {
            v.push("reader_count must be at least 1");
        }
        if self.sentences_train == 0 {
            v.push("sentences_train must be at least 1");
        }
        if self.sentences_test == 0 {
            v.push("sentences_test must be at least 1");
        }
        if self.words_per_sentence.0 == 0 || self.words_per_sentence.0 > self.words_per_sentence.1 {
            v.push("words_per_sentence must satisfy 1 <= min <= max");
        }
        if !(self.word_length.0 > 0.0 && self.word_length.0 <= self.word_length.1 && self.word_length.1.is_finite()) {
            v.push("word_length must satisfy 0 < min <= max");
        }
        if !(self.divergence >= 0.0 && self.divergence.is_finite()) {
            v.push("divergence must be non-negative");
        }
        if !(self.gp_warp >= 0.0 && self.gp_warp.is_finite()) {
            v.push("gp_warp must be non-negative");
        }
        if self.max_fixations == 0 {
            v.push("max_fixations must be at least 1");
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations().first() {
            Some(m) => Err(Error::InvalidArgument(m)),
            None => Ok(()),
        }
    }

    pub fn sentence_count(&self) -> usize {
        self.sentences_train + self.sentences_test
    }
}

fn normal(rng: &mut Stream) -> f64 {
    StandardNormal.sample(rng)
}

pub fn sentence_id(i: usize) -> String {
    format!("s{i:04}")
}

pub fn reader_id(i: usize) -> String {
    format!("r{i:03}")
}

/// Lines with uniform word counts and lengths, unit gaps, starting at 0.
pub fn make_corpus(spec: &PopulationSpec, rng: &mut Stream) -> Result<Vec<TextLine>> {
    spec.validate()?;
    let (wmin, wmax) = spec.words_per_sentence;
    let (lmin, lmax) = spec.word_length;
    (0..spec.sentence_count())
        .map(|i| {
            let n = rng.random_range(wmin..=wmax);
            let mut x = 0.0;
            let words = (0..n)
                .map(|_| {
                    let len = if lmin == lmax { lmin } else { rng.random_range(lmin..lmax) };
                    let w = Word::new(x, x + len);
                    x += len + 1.0;
                    w
                })
                .collect();
            TextLine::new(sentence_id(i), words)
        })
        .collect()
}

/// Smooth warp `g(x) = Σ h_j exp(-(x - c_j)² / (2 w²))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Warp {
    pub centers: Vec<f64>,
    pub heights: Vec<f64>,
    pub width: f64,
}

impl Warp {
    pub fn eval(&self, x: f64) -> f64 {
        self.centers
            .iter()
            .zip(&self.heights)
            .map(|(c, h)| {
                let d = (x - c) / self.width;
                h * libm::exp(-0.5 * d * d)
            })
            .sum()
    }
}

/// Where most of a gamma's mass lies: mean ± 3 sd, floored at zero.
fn bulk(shape: f64, rate: f64) -> (f64, f64) {
    let mean = shape / rate;
    let sd = libm::sqrt(shape) / rate;
    ((mean - 3.0 * sd).max(0.0), mean + 3.0 * sd)
}

/// Ground-truth density: gamma times `exp(warp)` on a fine grid.
pub fn truth_density(shape: f64, rate: f64, warp: Option<&Warp>) -> Result<SemiparametricDensity> {
    let eta = GammaNatural::from_shape_rate(shape, rate)?;
    let high = (shape + 12.0 * libm::sqrt(shape)) / rate;
    let grid = Arc::new(SupportGrid::new(Vec::new(), GRID_FLOOR, high, TRUTH_QUADRATURE)?);
    let g = grid.points().iter().map(|&x| warp.map_or(0.0, |w| w.eval(x))).collect();
    SemiparametricDensity::new(eta, grid, g)
}

/// One ground-truth reader drawn from its own stream.
pub fn make_reader(spec: &PopulationSpec, index: usize) -> Result<ReaderModel> {
    let id = reader_id(index);
    let mut rng = rng::stream(spec.seed, &["population", &id]);
    let div = spec.divergence;

    let weights = BASE_PI.map(|p| p * libm::exp(div * PI_NOISE * normal(&mut rng)));
    let pi = SaccadeTypeProbs::from_weights(weights)?;
    let logit = libm::log(BASE_MU / (1.0 - BASE_MU)) + div * MU_NOISE * normal(&mut rng);
    let mu = 1.0 / (1.0 + libm::exp(-logit));

    let mut densities = Vec::with_capacity(11);
    for role in DensityRole::ALL {
        let (k0, r0) = BASE_GAMMAS[role.index()];
        let shape = k0 * libm::exp(div * SHAPE_NOISE * normal(&mut rng));
        let rate = r0 * libm::exp(div * RATE_NOISE * normal(&mut rng));
        let (lo, hi) = bulk(shape, rate);
        let centers: Vec<f64> = (0..WARP_BUMPS).map(|_| rng.random_range(lo..hi)).collect();
        let heights: Vec<f64> = (0..WARP_BUMPS).map(|_| spec.gp_warp * normal(&mut rng)).collect();
        let warp = Warp {
            centers,
            heights,
            width: (hi - lo) / 8.0,
        };
        let warp = (spec.gp_warp > 0.0).then_some(&warp);
        densities.push(truth_density(shape, rate, warp).map_err(|e| e.at_role(role))?);
    }
    ReaderModel::new(id, pi, mu, densities, [false; 11])
}

pub fn make_population(spec: &PopulationSpec) -> Result<Vec<ReaderModel>> {
    spec.validate()?;
    (0..spec.reader_count).map(|i| make_reader(spec, i)).collect()
}

/// Train and test scanpaths, reader-major. The first `sentences_train` texts
/// are training sentences, the rest test sentences.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<Scanpath>,
    pub test: Vec<Scanpath>,
}

/// One scanpath of `model` on `text`, from the stream for that pair.
pub fn generate_one(spec: &PopulationSpec, model: &ReaderModel, text: &TextLine) -> Result<Scanpath> {
    let mut rng = rng::stream(spec.seed, &["scanpath", &model.reader_id, text.id()]);
    generate(text, model, spec.max_fixations, &mut rng).map_err(|e| Error::InvalidScanpath {
        reader_id: model.reader_id.clone(),
        text_id: text.id().to_string(),
        reason: e.to_string(),
    })
}

pub fn generate_dataset(models: &[ReaderModel], corpus: &[TextLine], spec: &PopulationSpec) -> Result<Dataset> {
    if models.is_empty() || corpus.is_empty() {
        return Err(Error::InvalidArgument("dataset generation needs readers and texts"));
    }
    let split = spec.sentences_train.min(corpus.len());
    let mut data = Dataset {
        train: Vec::new(),
        test: Vec::new(),
    };
    for m in models {
        for (i, text) in corpus.iter().enumerate() {
            let sp = generate_one(spec, m, text)?;
            if i < split {
                data.train.push(sp);
            } else {
                data.test.push(sp);
            }
        }
    }
    Ok(data)
}

/// Corpus, population and data for a spec, each from its own stream.
pub fn synthesize(spec: &PopulationSpec) -> Result<(Vec<TextLine>, Vec<ReaderModel>, Dataset)> {
    let corpus = make_corpus(spec, &mut rng::stream(spec.seed, &["corpus"]))?;
    let models = make_population(spec)?;
    let data = generate_dataset(&models, &corpus, spec)?;
    Ok((corpus, models, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{common_nodes, total_variation};
    use crate::corpus::{decompose, find_text};
    use crate::reader::collect_observations;

    fn small(seed: u64) -> PopulationSpec {
        PopulationSpec {
            reader_count: 3,
            sentences_train: 4,
            sentences_test: 3,
            seed,
            ..PopulationSpec::default()
        }
    }

    #[test]
    fn corpus_shape() {
        let spec = PopulationSpec {
            words_per_sentence: (5, 5),
            ..small(1)
        };
        let c = make_corpus(&spec, &mut rng::stream(1, &["c"])).unwrap();
        assert_eq!(c.len(), 7);
        assert!(c.iter().all(|t| t.words().len() == 5));
        assert_eq!(c, make_corpus(&spec, &mut rng::stream(1, &["c"])).unwrap());
        for t in &c {
            for w in t.words().windows(2) {
                assert!((w[1].left - w[0].right - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spec_violations_are_listed() {
        let bad = PopulationSpec {
            reader_count: 0,
            words_per_sentence: (5, 2),
            divergence: -1.0,
            ..PopulationSpec::default()
        };
        assert_eq!(bad.violations().len(), 3);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_divergence_and_warp_give_identical_gammas() {
        let spec = PopulationSpec {
            divergence: 0.0,
            gp_warp: 0.0,
            ..small(2)
        };
        let pop = make_population(&spec).unwrap();
        for m in &pop {
            assert_eq!(m.pi, pop[0].pi);
            assert_eq!(m.mu, pop[0].mu);
            assert_eq!(m.densities, pop[0].densities);
            assert!(m.densities.iter().all(|d| d.g_values().iter().all(|v| *v == 0.0)));
        }
        let warped_only = make_population(&PopulationSpec { gp_warp: 0.0, ..small(3) }).unwrap();
        assert!(warped_only.iter().all(|m| m.densities.iter().all(|d| d.g_values().iter().all(|v| *v == 0.0))));
    }

    fn mean_pairwise_tv(pop: &[ReaderModel]) -> f64 {
        let mut total = 0.0;
        let mut n = 0.0;
        for i in 0..pop.len() {
            for j in i + 1..pop.len() {
                for role in &DensityRole::ALL[..6] {
                    let (a, b) = (pop[i].density(*role), pop[j].density(*role));
                    total += total_variation(a, b, &common_nodes(a.grid(), b.grid(), 4001));
                    n += 1.0;
                }
            }
        }
        total / n
    }

    #[test]
    fn divergence_increases_spread() {
        let tv: Vec<f64> = [0.0, 0.1, 0.3, 1.0]
            .iter()
            .map(|&d| {
                let spec = PopulationSpec {
                    reader_count: 6,
                    divergence: d,
                    gp_warp: 0.0,
                    ..small(4)
                };
                mean_pairwise_tv(&make_population(&spec).unwrap())
            })
            .collect();
        assert!(tv.windows(2).all(|w| w[1] > w[0]), "{tv:?}");
    }

    #[test]
    fn dataset_counts_split_and_validity() {
        let spec = small(5);
        let (corpus, models, data) = synthesize(&spec).unwrap();
        assert_eq!(data.train.len() + data.test.len(), 3 * 7);
        assert_eq!(data.train.len(), 3 * 4);
        let train_texts: Vec<&str> = data.train.iter().map(|s| s.text_id.as_str()).collect();
        assert!(data.test.iter().all(|s| !train_texts.contains(&s.text_id.as_str())));
        for sp in data.train.iter().chain(&data.test) {
            decompose(sp, find_text(&corpus, &sp.text_id).unwrap()).unwrap();
        }
        assert_eq!(data.train[0].reader_id, models[0].reader_id);
        let again = synthesize(&spec).unwrap();
        assert_eq!(again.2, data);
    }

    #[test]
    fn pi_recovered_from_training_half() {
        let spec = PopulationSpec {
            reader_count: 2,
            sentences_train: 200,
            sentences_test: 1,
            ..small(6)
        };
        let (corpus, models, data) = synthesize(&spec).unwrap();
        for m in &models {
            let own: Vec<&Scanpath> = data.train.iter().filter(|s| s.reader_id == m.reader_id).collect();
            let routed = collect_observations(own, &corpus).unwrap();
            let total: u64 = routed.type_counts.iter().sum();
            let lambda = 1.0;
            for (k, c) in routed.type_counts.iter().enumerate() {
                let est = (lambda + *c as f64) / (4.0 * lambda + total as f64);
                assert!((est - m.pi.as_array()[k]).abs() < 0.05, "{k}: {est} vs {:?}", m.pi);
            }
        }
    }
}
