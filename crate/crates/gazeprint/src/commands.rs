//! The five commands. Each reads its inputs, writes only under its output
//! directory, and finishes with a manifest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gazeprint_core::identify::{
    evaluate, identify, normalized_verification_scores, units_by_reader, verification_curve, EvaluateOptions,
    ScanpathScores,
};
use gazeprint_core::reader::{DensityRole, ReaderModel};
use serde::Serialize;

use crate::config::{Amplitude, AmplitudeKeyword, RunConfig, SynthConfig};
use crate::export::{accuracy_csv, curve_csv, density_csv, score_matrix_csv, trace_csv};
use crate::jsonl::{load_corpus, save_corpus, Corpus};
use crate::manifest::{manifest, write_json};
use crate::model::{load_model, load_model_dir, model_path, save_model};
use crate::pipeline::{score_units, synthesize, thread_pool, train, tune_amplitude, ReaderLog, TuningPoint};

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("cannot create {}", path.display()))
}

fn write(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).with_context(|| format!("cannot write {}", path.display()))
}

/// Writes `train.jsonl`, `test.jsonl`, `truth/<reader>.json` and a manifest.
pub fn cmd_synth(config: &SynthConfig, base: &Path) -> Result<PathBuf> {
    let out = base.join(&config.output_dir);
    let spec = config.population();
    let pool = thread_pool(config.jobs)?;
    let (corpus, models, data) = synthesize(&spec, &pool)?;
    create_dir(&out.join("truth"))?;
    let (train_texts, test_texts) = corpus.split_at(spec.sentences_train.min(corpus.len()));
    save_corpus(&out.join("train.jsonl"), train_texts, &data.train)?;
    save_corpus(&out.join("test.jsonl"), test_texts, &data.test)?;
    for m in &models {
        save_model(&model_path(&out.join("truth"), &m.reader_id), m)?;
    }
    write_json(&out.join("manifest.json"), &manifest("synth", config.seed, config))?;
    Ok(out)
}

#[derive(Serialize)]
struct TrainLog<'a> {
    mode: crate::config::FitMode,
    amplitude: f64,
    tuning: Option<&'a [TuningPoint]>,
    readers: Vec<&'a ReaderLog>,
}

/// Fits every reader in the training corpus and writes one model file each,
/// plus `train_log.json` (and chain traces when enabled) in the output dir.
pub fn cmd_train(config: &RunConfig) -> Result<Vec<ReaderModel>> {
    let corpus = load_corpus(&config.corpus)?;
    let pool = thread_pool(config.jobs)?;
    let base_fit = config.fit_config(1.0);
    let (amplitude, tuning) = match config.amplitude {
        Amplitude::Fixed(a) => (a, None),
        Amplitude::Keyword(AmplitudeKeyword::Tune) => {
            let (a, points) = tune_amplitude(&corpus.scanpaths, &corpus.texts, &base_fit, &pool)?;
            (a, Some(points))
        }
    };
    let fit_config = config.fit_config(amplitude);
    let trained = train(&corpus.scanpaths, &corpus.texts, &fit_config, config.mode, &pool)?;

    create_dir(&config.models_dir)?;
    create_dir(&config.output_dir)?;
    for t in &trained {
        save_model(&model_path(&config.models_dir, &t.model.reader_id), &t.model)?;
    }
    if config.trace {
        let dir = config.output_dir.join("traces");
        create_dir(&dir)?;
        for t in &trained {
            for (role, rows) in &t.traces {
                write(&dir.join(format!("{}_{}.csv", t.model.reader_id, role.name())), &trace_csv(rows))?;
            }
        }
    }
    let log = TrainLog {
        mode: config.mode,
        amplitude,
        tuning: tuning.as_deref(),
        readers: trained.iter().map(|t| &t.log).collect(),
    };
    write_json(&config.output_dir.join("train_log.json"), &log)?;
    write_json(&config.output_dir.join("manifest_train.json"), &manifest("train", config.seed, config))?;
    Ok(trained.into_iter().map(|t| t.model).collect())
}

fn test_corpus(config: &RunConfig) -> Result<Corpus> {
    let Some(path) = &config.test_corpus else {
        bail!("test_corpus is required for this command");
    };
    Ok(load_corpus(path)?)
}

fn scores(config: &RunConfig) -> Result<ScanpathScores> {
    let models = load_model_dir(&config.models_dir)?;
    let corpus = test_corpus(config)?;
    let units = units_by_reader(&corpus.scanpaths);
    if units.is_empty() {
        bail!("the test corpus contains no scanpaths");
    }
    let pool = thread_pool(config.jobs)?;
    score_units(&units, &corpus.texts, &models, &pool)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionRecord {
    pub unit: String,
    pub truth: String,
    /// `None` when every reader gives the unit zero likelihood.
    pub predicted: Option<String>,
}

fn predictions(scores: &ScanpathScores) -> Result<Vec<PredictionRecord>> {
    let matrix = scores.full_matrix()?;
    Ok(identify(&matrix)
        .into_iter()
        .zip(&scores.units)
        .map(|(p, u)| PredictionRecord {
            unit: p.unit,
            truth: u.truth.clone(),
            predicted: p.reader,
        })
        .collect())
}

/// Scores the test corpus and writes `scores.csv` and `predictions.json`.
pub fn cmd_identify(config: &RunConfig) -> Result<Vec<PredictionRecord>> {
    let scores = scores(config)?;
    let preds = predictions(&scores)?;
    create_dir(&config.output_dir)?;
    write(&config.output_dir.join("scores.csv"), &score_matrix_csv(&scores.full_matrix()?))?;
    write_json(&config.output_dir.join("predictions.json"), &preds)?;
    write_json(
        &config.output_dir.join("manifest_identify.json"),
        &manifest("identify", config.seed, config),
    )?;
    Ok(preds)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub setting: f64,
    pub accuracy: f64,
    pub accuracy_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub readers: usize,
    pub units: usize,
    pub accuracy: f64,
    /// Binomial standard error over units.
    pub accuracy_se: f64,
    /// Area under false accepts over false rejects; absent without impostors.
    pub auc: Option<f64>,
    pub predictions: Vec<PredictionRecord>,
    pub accuracy_by_test_fraction: Vec<CurvePoint>,
    pub accuracy_by_reader_count: Vec<CurvePoint>,
}

/// Full evaluation: `metrics.json`, `curve.csv`, `scores.csv` and the two
/// accuracy curves.
pub fn cmd_eval(config: &RunConfig) -> Result<Metrics> {
    let scores = scores(config)?;
    let matrix = scores.full_matrix()?;
    let truth = scores.truth();
    let preds = predictions(&scores)?;
    let full = evaluate(&scores, &EvaluateOptions::default())?;
    let n = scores.units.len() as f64;
    let accuracy_se = (full.accuracy * (1.0 - full.accuracy) / n).sqrt();
    let curve = if scores.readers.len() > 1 {
        Some(verification_curve(&normalized_verification_scores(&matrix), &truth)?)
    } else {
        None
    };

    let options = |reader_subset, test_fraction| EvaluateOptions {
        reader_subset,
        test_fraction,
        repeats: config.eval.repeats,
        seed: config.seed,
    };
    let point = |setting: f64, opts: EvaluateOptions| -> Result<CurvePoint> {
        let r = evaluate(&scores, &opts)?;
        Ok(CurvePoint {
            setting,
            accuracy: r.accuracy,
            accuracy_se: r.accuracy_se,
        })
    };
    let by_fraction = config
        .eval
        .test_fractions
        .iter()
        .map(|&f| point(f, options(None, f)))
        .collect::<Result<Vec<_>>>()?;
    let by_readers = config
        .eval
        .reader_counts
        .iter()
        .filter(|&&r| r <= scores.readers.len())
        .map(|&r| point(r as f64, options(Some(r), 1.0)))
        .collect::<Result<Vec<_>>>()?;

    let metrics = Metrics {
        readers: scores.readers.len(),
        units: scores.units.len(),
        accuracy: full.accuracy,
        accuracy_se,
        auc: curve.as_ref().map(|c| c.auc),
        predictions: preds,
        accuracy_by_test_fraction: by_fraction,
        accuracy_by_reader_count: by_readers,
    };
    let out = &config.output_dir;
    create_dir(out)?;
    write_json(&out.join("metrics.json"), &metrics)?;
    write(&out.join("scores.csv"), &score_matrix_csv(&matrix))?;
    if let Some(c) = &curve {
        write(&out.join("curve.csv"), &curve_csv(c))?;
    }
    let rows = |pts: &[CurvePoint]| pts.iter().map(|p| (p.setting, p.accuracy, p.accuracy_se)).collect::<Vec<_>>();
    write(
        &out.join("accuracy_by_test_fraction.csv"),
        &accuracy_csv("test_fraction", &rows(&metrics.accuracy_by_test_fraction)),
    )?;
    write(
        &out.join("accuracy_by_reader_count.csv"),
        &accuracy_csv("readers", &rows(&metrics.accuracy_by_reader_count)),
    )?;
    write_json(&out.join("manifest_eval.json"), &manifest("eval", config.seed, config))?;
    Ok(metrics)
}

/// The `(x, log_pdf)` CSV of one role of a model file.
pub fn cmd_export_density(model: &Path, role: &str) -> Result<String> {
    let Some(role) = DensityRole::from_name(role) else {
        let names: Vec<&str> = DensityRole::ALL.iter().map(|r| r.name()).collect();
        bail!("unknown density role {role}; expected one of {}", names.join(", "));
    };
    let model = load_model(model)?;
    Ok(density_csv(model.density(role)))
}
