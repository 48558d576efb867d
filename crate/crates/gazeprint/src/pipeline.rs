//! Parallel orchestration of synthesis, training and scoring.
//!
//! Every task draws from a stream derived from the run seed and its own
//! labels, and results are collected in canonical order, so outputs do not
//! depend on the number of worker threads.

use anyhow::{bail, Context, Result};
use gazeprint_core::corpus::{find_text, Scanpath, TextLine};
use gazeprint_core::identify::{ScanpathScores, TestUnit, TestUnitScores};
use gazeprint_core::reader::{
    assemble_posterior, collect_observations, fit, fit_role, gamma_baseline_from, scanpath_log_likelihood,
    DensityRole, FitConfig, ReaderModel, RoutedObservations,
};
use gazeprint_core::rng;
use gazeprint_core::sampler::TraceRow;
use gazeprint_core::synth::{generate_one, make_corpus, make_reader, Dataset, PopulationSpec};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{FitMode, AMPLITUDE_GRID};

pub fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        b = b.num_threads(n);
    }
    b.build().context("cannot start worker threads")
}

/// Same result as the sequential `synth::synthesize`, generated in parallel.
pub fn synthesize(spec: &PopulationSpec, pool: &rayon::ThreadPool) -> Result<(Vec<TextLine>, Vec<ReaderModel>, Dataset)> {
    spec.validate()?;
    let corpus = make_corpus(spec, &mut rng::stream(spec.seed, &["corpus"]))?;
    let (models, scanpaths) = pool.install(|| -> Result<_> {
        let models = (0..spec.reader_count)
            .into_par_iter()
            .map(|i| make_reader(spec, i))
            .collect::<Result<Vec<_>, _>>()?;
        let pairs: Vec<(usize, usize)> = (0..models.len())
            .flat_map(|r| (0..corpus.len()).map(move |t| (r, t)))
            .collect();
        let scanpaths = pairs
            .par_iter()
            .map(|&(r, t)| generate_one(spec, &models[r], &corpus[t]))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((models, scanpaths))
    })?;
    let split = spec.sentences_train.min(corpus.len());
    let mut data = Dataset {
        train: Vec::new(),
        test: Vec::new(),
    };
    for (i, sp) in scanpaths.into_iter().enumerate() {
        if i % corpus.len() < split {
            data.train.push(sp);
        } else {
            data.test.push(sp);
        }
    }
    Ok((corpus, models, data))
}

/// Scanpaths grouped by reader, sorted by reader id.
pub fn group_by_reader(scanpaths: &[Scanpath]) -> Vec<(String, Vec<Scanpath>)> {
    let mut groups: Vec<(String, Vec<Scanpath>)> = Vec::new();
    for sp in scanpaths {
        match groups.iter_mut().find(|(id, _)| *id == sp.reader_id) {
            Some((_, v)) => v.push(sp.clone()),
            None => groups.push((sp.reader_id.clone(), vec![sp.clone()])),
        }
    }
    groups.sort_by(|a, b| a.0.cmp(&b.0));
    groups
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoleLog {
    pub role: &'static str,
    pub observations: usize,
    pub fallback: bool,
    pub shape: f64,
    pub rate: f64,
    /// Absent for the gamma baseline.
    pub acceptance_rate: Option<f64>,
    pub final_eta_step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReaderLog {
    pub reader_id: String,
    pub scanpaths: usize,
    /// Non-positive values left out of the density fits.
    pub dropped_values: u64,
    pub pi: [f64; 4],
    pub mu: f64,
    pub roles: Vec<RoleLog>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedReader {
    pub model: ReaderModel,
    pub log: ReaderLog,
    /// Chain traces by role; empty unless tracing was requested.
    pub traces: Vec<(DensityRole, Vec<TraceRow>)>,
}

fn reader_log(model: &ReaderModel, scanpaths: usize, routed: &RoutedObservations, chains: Option<&[(f64, f64)]>) -> ReaderLog {
    let roles = DensityRole::ALL
        .iter()
        .map(|&role| {
            let (shape, rate) = model.density(role).eta().to_shape_rate();
            RoleLog {
                role: role.name(),
                observations: routed.observations[role.index()].len(),
                fallback: model.fallback[role.index()],
                shape,
                rate,
                acceptance_rate: chains.map(|c| c[role.index()].0),
                final_eta_step: chains.map(|c| c[role.index()].1),
            }
        })
        .collect();
    ReaderLog {
        reader_id: model.reader_id.clone(),
        scanpaths,
        dropped_values: routed.dropped,
        pi: model.pi.as_array(),
        mu: model.mu,
        roles,
    }
}

/// Fits one model per reader. Semiparametric fits run one task per
/// (reader, role) chain.
pub fn train(
    scanpaths: &[Scanpath],
    texts: &[TextLine],
    fit_config: &FitConfig,
    mode: FitMode,
    pool: &rayon::ThreadPool,
) -> Result<Vec<TrainedReader>> {
    let groups = group_by_reader(scanpaths);
    if groups.is_empty() {
        bail!("the training corpus contains no scanpaths");
    }
    pool.install(|| {
        let routed = groups
            .par_iter()
            .map(|(id, sps)| collect_observations(sps, texts).with_context(|| format!("reader {id}")))
            .collect::<Result<Vec<_>>>()?;
        match mode {
            FitMode::GammaBaseline => groups
                .par_iter()
                .zip(&routed)
                .map(|((id, sps), r)| {
                    let model = gamma_baseline_from(id, r, fit_config).with_context(|| format!("reader {id}"))?;
                    let log = reader_log(&model, sps.len(), r, None);
                    Ok(TrainedReader {
                        model,
                        log,
                        traces: Vec::new(),
                    })
                })
                .collect(),
            FitMode::Semiparametric => {
                let tasks: Vec<(usize, DensityRole)> = (0..groups.len())
                    .flat_map(|g| DensityRole::ALL.into_iter().map(move |role| (g, role)))
                    .collect();
                let mut chains = tasks
                    .par_iter()
                    .map(|&(g, role)| {
                        let id = &groups[g].0;
                        fit_role(id, role, &routed[g], fit_config).with_context(|| format!("reader {id}"))
                    })
                    .collect::<Result<Vec<_>>>()?
                    .into_iter();
                let mut out = Vec::with_capacity(groups.len());
                for ((id, sps), r) in groups.iter().zip(&routed) {
                    let mut posteriors: Vec<_> = chains.by_ref().take(DensityRole::ALL.len()).collect();
                    let stats: Vec<(f64, f64)> = posteriors.iter().map(|p| (p.acceptance_rate, p.eta_step)).collect();
                    let traces = DensityRole::ALL
                        .iter()
                        .zip(posteriors.iter_mut())
                        .filter(|(_, p)| !p.trace.is_empty())
                        .map(|(&role, p)| (role, std::mem::take(&mut p.trace)))
                        .collect();
                    let posterior = assemble_posterior(id, r, fit_config, posteriors)?;
                    let log = reader_log(&posterior.mean_model, sps.len(), r, Some(&stats));
                    out.push(TrainedReader {
                        model: posterior.mean_model,
                        log,
                        traces,
                    });
                }
                Ok(out)
            }
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuningPoint {
    pub amplitude: f64,
    /// Mean held-out log-likelihood per scanpath.
    pub held_out_log_likelihood: f64,
}

/// Chooses the GP amplitude from a fixed grid by leave-one-reader-out
/// likelihood: for every candidate and every reader, a model fitted on all
/// other readers' training scanpaths scores the held-out reader's scanpaths.
/// Ties go to the smaller amplitude.
pub fn tune_amplitude(
    scanpaths: &[Scanpath],
    texts: &[TextLine],
    base: &FitConfig,
    pool: &rayon::ThreadPool,
) -> Result<(f64, Vec<TuningPoint>)> {
    let groups = group_by_reader(scanpaths);
    if groups.len() < 2 {
        bail!("amplitude tuning needs at least two readers");
    }
    let tasks: Vec<(usize, usize)> = (0..AMPLITUDE_GRID.len())
        .flat_map(|a| (0..groups.len()).map(move |r| (a, r)))
        .collect();
    let per_task = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(a, held)| -> Result<(f64, usize)> {
                let config = FitConfig {
                    amplitude: AMPLITUDE_GRID[a],
                    ..base.clone()
                };
                let others: Vec<Scanpath> = groups
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != held)
                    .flat_map(|(_, (_, s))| s.iter().cloned())
                    .collect();
                let pooled_id = format!("without-{}", groups[held].0);
                let model = fit(&pooled_id, &others, texts, &config)?.mean_model;
                let mut total = 0.0;
                for sp in &groups[held].1 {
                    total += scanpath_log_likelihood(sp, find_text(texts, &sp.text_id)?, &model)?;
                }
                Ok((total, groups[held].1.len()))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut points = Vec::with_capacity(AMPLITUDE_GRID.len());
    for (a, chunk) in per_task.chunks(groups.len()).enumerate() {
        let (total, count) = chunk.iter().fold((0.0, 0), |(t, c), (x, n)| (t + x, c + n));
        points.push(TuningPoint {
            amplitude: AMPLITUDE_GRID[a],
            held_out_log_likelihood: total / count as f64,
        });
    }
    let mut best = &points[0];
    for p in &points[1..] {
        if p.held_out_log_likelihood > best.held_out_log_likelihood {
            best = p;
        }
    }
    Ok((best.amplitude, points))
}

/// Parallel version of `ScanpathScores::compute`, one task per scanpath.
pub fn score_units(
    units: &[TestUnit],
    texts: &[TextLine],
    models: &[ReaderModel],
    pool: &rayon::ThreadPool,
) -> Result<ScanpathScores> {
    let flat: Vec<&Scanpath> = units.iter().flat_map(|u| &u.scanpaths).collect();
    let rows = pool.install(|| {
        flat.par_iter()
            .map(|sp| -> Result<Vec<f64>> {
                let text = find_text(texts, &sp.text_id)?;
                models
                    .iter()
                    .map(|m| Ok(scanpath_log_likelihood(sp, text, m)?))
                    .collect()
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut rows = rows.into_iter();
    let units = units
        .iter()
        .map(|u| TestUnitScores {
            unit: u.unit.clone(),
            truth: u.truth.clone(),
            rows: u
                .scanpaths
                .iter()
                .map(|sp| (sp.text_id.clone(), rows.next().expect("one row per scanpath")))
                .collect(),
        })
        .collect();
    Ok(ScanpathScores {
        readers: models.iter().map(|m| m.reader_id.clone()).collect(),
        units,
    })
}
