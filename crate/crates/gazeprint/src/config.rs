//! JSON run configurations. Unknown keys are rejected, and validation
//! reports every violation at once. Relative paths resolve against the
//! directory holding the config file.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use gazeprint_core::reader::FitConfig;
use gazeprint_core::sampler::MhConfig;
use gazeprint_core::synth::PopulationSpec;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// GP amplitude candidates searched by `"amplitude": "tune"`.
pub const AMPLITUDE_GRID: [f64; 6] = [0.01, 0.1, 0.5, 1.0, 2.0, 5.0];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub source: String,
    pub violations: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config {}:", self.source)?;
        for v in &self.violations {
            write!(f, "\n  - {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FitMode {
    #[default]
    Semiparametric,
    GammaBaseline,
}

/// Either a fixed GP amplitude or `"tune"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Amplitude {
    Fixed(f64),
    Keyword(AmplitudeKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmplitudeKeyword {
    Tune,
}

impl Default for Amplitude {
    fn default() -> Self {
        Amplitude::Fixed(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSettings {
    /// Random subsets per point of the accuracy curves.
    pub repeats: usize,
    pub test_fractions: Vec<f64>,
    /// Reader-subset sizes; sizes above the population are skipped.
    pub reader_counts: Vec<usize>,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            repeats: 10,
            test_fractions: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            reader_counts: vec![2, 5, 10, 20],
        }
    }
}

fn d_lambda() -> f64 {
    1.0
}
fn d_eta_step() -> f64 {
    MhConfig::default().eta_step
}
fn d_iterations() -> usize {
    MhConfig::default().iterations
}
fn d_burn_in() -> usize {
    MhConfig::default().burn_in
}
fn d_thinning() -> usize {
    MhConfig::default().thinning
}
fn d_quadrature() -> usize {
    FitConfig::default().quadrature_count
}

/// Configuration shared by `train`, `identify` and `eval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Training corpus (JSONL).
    pub corpus: PathBuf,
    /// Test corpus for `identify` and `eval`.
    #[serde(default)]
    pub test_corpus: Option<PathBuf>,
    pub models_dir: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default = "d_lambda")]
    pub lambda: f64,
    #[serde(default = "d_lambda")]
    pub rho: f64,
    #[serde(default)]
    pub amplitude: Amplitude,
    #[serde(default = "d_eta_step")]
    pub eta_step: f64,
    #[serde(default = "d_iterations")]
    pub iterations: usize,
    #[serde(default = "d_burn_in")]
    pub burn_in: usize,
    #[serde(default = "d_thinning")]
    pub thinning: usize,
    #[serde(default = "d_quadrature")]
    pub quadrature_count: usize,
    /// Scale the walk on the natural parameters during burn-in.
    #[serde(default)]
    pub adapt: bool,
    /// Write per-role chain traces next to the training log.
    #[serde(default)]
    pub trace: bool,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; never part of the reproducibility record.
    #[serde(default, skip_serializing)]
    pub jobs: Option<usize>,
    #[serde(default)]
    pub mode: FitMode,
    #[serde(default)]
    pub eval: EvalSettings,
}

impl RunConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let positive = |name: &str, x: f64, v: &mut Vec<String>| {
            if !(x > 0.0 && x.is_finite()) {
                v.push(format!("{name} must be a positive number, got {x}"));
            }
        };
        positive("lambda", self.lambda, &mut v);
        positive("rho", self.rho, &mut v);
        match self.amplitude {
            Amplitude::Fixed(a) => positive("amplitude", a, &mut v),
            Amplitude::Keyword(AmplitudeKeyword::Tune) => {}
        }
        if !(self.eta_step >= 0.0 && self.eta_step.is_finite()) {
            v.push(format!("eta_step must be non-negative, got {}", self.eta_step));
        }
        if self.burn_in >= self.iterations {
            v.push(format!(
                "burn_in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            ));
        }
        if self.thinning == 0 {
            v.push("thinning must be at least 1".into());
        }
        if self.quadrature_count < 2 {
            v.push(format!("quadrature_count must be at least 2, got {}", self.quadrature_count));
        }
        if self.jobs == Some(0) {
            v.push("jobs must be at least 1".into());
        }
        if self.eval.repeats == 0 {
            v.push("eval.repeats must be at least 1".into());
        }
        for f in &self.eval.test_fractions {
            if !(*f > 0.0 && *f <= 1.0) {
                v.push(format!("eval.test_fractions entries must lie in (0, 1], got {f}"));
            }
        }
        if self.eval.reader_counts.contains(&0) {
            v.push("eval.reader_counts entries must be at least 1".into());
        }
        v
    }

    /// Copy with relative paths joined onto `base`.
    pub fn resolved(&self, base: &Path) -> RunConfig {
        let mut c = self.clone();
        c.corpus = base.join(&self.corpus);
        c.test_corpus = self.test_corpus.as_ref().map(|p| base.join(p));
        c.models_dir = base.join(&self.models_dir);
        c.output_dir = base.join(&self.output_dir);
        c
    }

    /// Fit settings for a given GP amplitude.
    pub fn fit_config(&self, amplitude: f64) -> FitConfig {
        FitConfig {
            lambda: self.lambda,
            rho: self.rho,
            amplitude,
            mh: MhConfig {
                iterations: self.iterations,
                burn_in: self.burn_in,
                eta_step: self.eta_step,
                thinning: self.thinning,
                seed: self.seed,
                adapt: self.adapt,
                trace: self.trace,
                ..MhConfig::default()
            },
            quadrature_count: self.quadrature_count,
            ..FitConfig::default()
        }
    }
}

/// Spec of a synthetic population and where to write it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub reader_count: usize,
    pub sentences_train: usize,
    pub sentences_test: usize,
    pub words_per_sentence: [usize; 2],
    pub word_length: [f64; 2],
    pub divergence: f64,
    pub gp_warp: f64,
    pub max_fixations: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(skip_serializing)]
    pub jobs: Option<usize>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let p = PopulationSpec::default();
        SynthConfig {
            reader_count: p.reader_count,
            sentences_train: p.sentences_train,
            sentences_test: p.sentences_test,
            words_per_sentence: [p.words_per_sentence.0, p.words_per_sentence.1],
            word_length: [p.word_length.0, p.word_length.1],
            divergence: p.divergence,
            gp_warp: p.gp_warp,
            max_fixations: p.max_fixations,
            seed: p.seed,
            output_dir: PathBuf::from("synth"),
            jobs: None,
        }
    }
}

impl SynthConfig {
    pub fn population(&self) -> PopulationSpec {
        PopulationSpec {
            reader_count: self.reader_count,
            sentences_train: self.sentences_train,
            sentences_test: self.sentences_test,
            words_per_sentence: (self.words_per_sentence[0], self.words_per_sentence[1]),
            word_length: (self.word_length[0], self.word_length[1]),
            divergence: self.divergence,
            gp_warp: self.gp_warp,
            seed: self.seed,
            max_fixations: self.max_fixations,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v: Vec<String> = self.population().violations().into_iter().map(String::from).collect();
        if self.jobs == Some(0) {
            v.push("jobs must be at least 1".into());
        }
        v
    }
}

/// Parses JSON into `T`, collecting every unknown key before failing.
pub fn parse_config<T: DeserializeOwned>(source: &str, content: &str) -> Result<T, ConfigError> {
    let fail = |violations| ConfigError {
        source: source.to_string(),
        violations,
    };
    let mut unknown = Vec::new();
    let de = &mut serde_json::Deserializer::from_str(content);
    let parsed: Result<T, _> = serde_ignored::deserialize(de, |path| unknown.push(format!("unknown key {path}")));
    match parsed {
        Err(e) => {
            unknown.push(e.to_string());
            Err(fail(unknown))
        }
        Ok(_) if !unknown.is_empty() => Err(fail(unknown)),
        Ok(t) => Ok(t),
    }
}

/// Reads a config file and checks it with `violations`.
pub fn load_config<T: DeserializeOwned>(path: &Path, violations: impl Fn(&T) -> Vec<String>) -> Result<T, ConfigError> {
    let source = path.display().to_string();
    let content = fs::read_to_string(path).map_err(|e| ConfigError {
        source: source.clone(),
        violations: vec![format!("cannot read {source}: {e}")],
    })?;
    let t = parse_config::<T>(&source, &content)?;
    let v = violations(&t);
    if v.is_empty() {
        Ok(t)
    } else {
        Err(ConfigError { source, violations: v })
    }
}

/// Directory a config's relative paths resolve against.
pub fn base_dir(config_path: &Path) -> PathBuf {
    config_path.parent().map(Path::to_path_buf).unwrap_or_default()
}
