//! Reader identification and verification from per-scanpath log-likelihoods.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::index;

use crate::corpus::{find_text, Scanpath, TextLine};
use crate::reader::{scanpath_log_likelihood, ReaderModel};
use crate::rng;
use crate::{Error, Result};

/// `Σ log p(S | X, model)` over a unit's scanpaths.
pub fn score(scanpaths: &[Scanpath], texts: &[TextLine], model: &ReaderModel) -> Result<f64> {
    let mut total = 0.0;
    for sp in scanpaths {
        total += scanpath_log_likelihood(sp, find_text(texts, &sp.text_id)?, model)?;
    }
    Ok(total)
}

/// Log scores of test units (rows) under reader models (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    readers: Vec<String>,
    units: Vec<String>,
    log_scores: Vec<f64>,
}

impl ScoreMatrix {
    /// `log_scores` is row-major, one row per unit.
    pub fn new(readers: Vec<String>, units: Vec<String>, log_scores: Vec<f64>) -> Result<Self> {
        if log_scores.len() != readers.len() * units.len() {
            return Err(Error::DimensionMismatch {
                expected: readers.len() * units.len(),
                got: log_scores.len(),
            });
        }
        if log_scores.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::Domain("log scores must be finite or -inf"));
        }
        Ok(ScoreMatrix {
            readers,
            units,
            log_scores,
        })
    }

    pub fn readers(&self) -> &[String] {
        &self.readers
    }

    pub fn units(&self) -> &[String] {
        &self.units
    }

    pub fn get(&self, unit: usize, reader: usize) -> f64 {
        self.log_scores[unit * self.readers.len() + reader]
    }

    pub fn row(&self, unit: usize) -> &[f64] {
        let r = self.readers.len();
        &self.log_scores[unit * r..(unit + 1) * r]
    }
}

/// Per-scanpath log-likelihoods of each test unit under every reader, so that
/// score matrices for sentence subsets are sums of cached rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanpathScores {
    pub readers: Vec<String>,
    pub units: Vec<TestUnitScores>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestUnitScores {
    pub unit: String,
    /// True reader of the unit.
    pub truth: String,
    /// `(text_id, log-likelihood under each reader)` per scanpath.
    pub rows: Vec<(String, Vec<f64>)>,
}

impl ScanpathScores {
    /// Scores every scanpath of every unit under every model, sequentially.
    pub fn compute(units: &[TestUnit], texts: &[TextLine], models: &[ReaderModel]) -> Result<Self> {
        let units = units
            .iter()
            .map(|u| {
                let rows = u
                    .scanpaths
                    .iter()
                    .map(|sp| {
                        let text = find_text(texts, &sp.text_id)?;
                        let lls = models
                            .iter()
                            .map(|m| scanpath_log_likelihood(sp, text, m))
                            .collect::<Result<Vec<_>>>()?;
                        Ok((sp.text_id.clone(), lls))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(TestUnitScores {
                    unit: u.unit.clone(),
                    truth: u.truth.clone(),
                    rows,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ScanpathScores {
            readers: models.iter().map(|m| m.reader_id.clone()).collect(),
            units,
        })
    }

    /// Score matrix restricted to the given readers (by index) and to
    /// scanpaths on texts accepted by `keep_text`.
    pub fn matrix(&self, reader_idx: &[usize], unit_idx: &[usize], keep_text: impl Fn(&str) -> bool) -> Result<ScoreMatrix> {
        let mut scores = Vec::with_capacity(reader_idx.len() * unit_idx.len());
        for &u in unit_idx {
            let unit = &self.units[u];
            for &r in reader_idx {
                scores.push(
                    unit.rows
                        .iter()
                        .filter(|(t, _)| keep_text(t))
                        .map(|(_, lls)| lls[r])
                        .sum::<f64>(),
                );
            }
        }
        ScoreMatrix::new(
            reader_idx.iter().map(|&r| self.readers[r].clone()).collect(),
            unit_idx.iter().map(|&u| self.units[u].unit.clone()).collect(),
            scores,
        )
    }

    pub fn full_matrix(&self) -> Result<ScoreMatrix> {
        let readers: Vec<usize> = (0..self.readers.len()).collect();
        let units: Vec<usize> = (0..self.units.len()).collect();
        self.matrix(&readers, &units, |_| true)
    }

    /// `(unit, true reader)` pairs.
    pub fn truth(&self) -> Vec<(String, String)> {
        self.units.iter().map(|u| (u.unit.clone(), u.truth.clone())).collect()
    }
}

/// All test scanpaths of one true reader.
#[derive(Debug, Clone, PartialEq)]
pub struct TestUnit {
    pub unit: String,
    pub truth: String,
    pub scanpaths: Vec<Scanpath>,
}

/// Groups scanpaths by reader id into units named after the reader, in
/// first-appearance order.
pub fn units_by_reader(scanpaths: &[Scanpath]) -> Vec<TestUnit> {
    let mut units: Vec<TestUnit> = Vec::new();
    for sp in scanpaths {
        match units.iter_mut().find(|u| u.truth == sp.reader_id) {
            Some(u) => u.scanpaths.push(sp.clone()),
            None => units.push(TestUnit {
                unit: sp.reader_id.clone(),
                truth: sp.reader_id.clone(),
                scanpaths: alloc::vec![sp.clone()],
            }),
        }
    }
    units
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub unit: String,
    /// `None` when every reader scores `-inf`.
    pub reader: Option<String>,
}

/// Argmax reader per unit; ties go to the earliest reader.
pub fn identify(matrix: &ScoreMatrix) -> Vec<Prediction> {
    (0..matrix.units.len())
        .map(|u| {
            let mut best: Option<(usize, f64)> = None;
            for (r, &s) in matrix.row(u).iter().enumerate() {
                if s > f64::NEG_INFINITY && best.is_none_or(|(_, b)| s > b) {
                    best = Some((r, s));
                }
            }
            Prediction {
                unit: matrix.units[u].clone(),
                reader: best.map(|(r, _)| matrix.readers[r].clone()),
            }
        })
        .collect()
}

/// Fraction of units whose prediction equals the truth. Unidentifiable units count as wrong.
pub fn multiclass_accuracy(predictions: &[Prediction], truth: &[(String, String)]) -> Result<f64> {
    if predictions.len() != truth.len() || predictions.is_empty() {
        return Err(Error::UnitMismatch);
    }
    let mut correct = 0usize;
    for p in predictions {
        let (_, t) = truth.iter().find(|(u, _)| *u == p.unit).ok_or(Error::UnitMismatch)?;
        if p.reader.as_deref() == Some(t.as_str()) {
            correct += 1;
        }
    }
    Ok(correct as f64 / predictions.len() as f64)
}

/// `log_score(u, r) - log mean_r' exp(log_score(u, r'))`, the mean taken over
/// finite entries; `-inf` entries stay `-inf`.
pub fn normalized_verification_scores(matrix: &ScoreMatrix) -> ScoreMatrix {
    let mut out = Vec::with_capacity(matrix.log_scores.len());
    for u in 0..matrix.units.len() {
        let row = matrix.row(u);
        let finite: Vec<f64> = row.iter().copied().filter(|v| v.is_finite()).collect();
        let lme = if finite.is_empty() {
            0.0
        } else {
            let m = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            m + libm::log(finite.iter().map(|v| libm::exp(v - m)).sum::<f64>() / finite.len() as f64)
        };
        out.extend(row.iter().map(|v| if v.is_finite() { v - lme } else { f64::NEG_INFINITY }));
    }
    ScoreMatrix {
        readers: matrix.readers.clone(),
        units: matrix.units.clone(),
        log_scores: out,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationCurve {
    /// Ascending; first is `-inf`, last is `+inf`.
    pub thresholds: Vec<f64>,
    /// False-accept rate at each threshold (non-increasing).
    pub far: Vec<f64>,
    /// False-reject rate at each threshold (non-decreasing).
    pub frr: Vec<f64>,
    /// Area under FAR as a function of FRR; smaller is better.
    pub auc: f64,
}

/// Genuine and impostor scores from a normalized matrix.
pub fn split_pairs(normalized: &ScoreMatrix, truth: &[(String, String)]) -> Result<(Vec<f64>, Vec<f64>)> {
    let (mut genuine, mut impostor) = (Vec::new(), Vec::new());
    for (u, unit) in normalized.units.iter().enumerate() {
        let (_, t) = truth.iter().find(|(id, _)| id == unit).ok_or(Error::UnitMismatch)?;
        for (r, reader) in normalized.readers.iter().enumerate() {
            let s = normalized.get(u, r);
            if reader == t {
                genuine.push(s);
            } else {
                impostor.push(s);
            }
        }
    }
    Ok((genuine, impostor))
}

/// Trapezoid area under the `(frr, far)` polyline.
pub fn curve_area(frr: &[f64], far: &[f64]) -> f64 {
    frr.windows(2)
        .zip(far.windows(2))
        .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) * 0.5)
        .sum()
}

/// Sweeps `τ` over `-inf`, every distinct score, and `+inf`:
/// FAR(τ) = #{impostor ≥ τ} / #impostor, FRR(τ) = #{genuine < τ} / #genuine.
pub fn verification_curve(normalized: &ScoreMatrix, truth: &[(String, String)]) -> Result<VerificationCurve> {
    let (mut genuine, mut impostor) = split_pairs(normalized, truth)?;
    if genuine.is_empty() || impostor.is_empty() {
        return Err(Error::DegenerateTruth);
    }
    genuine.sort_by(f64::total_cmp);
    impostor.sort_by(f64::total_cmp);
    let mut thresholds: Vec<f64> = genuine.iter().chain(&impostor).copied().filter(|v| v.is_finite()).collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    thresholds.insert(0, f64::NEG_INFINITY);
    thresholds.push(f64::INFINITY);

    let (ng, ni) = (genuine.len() as f64, impostor.len() as f64);
    let (mut gi, mut ii) = (0usize, 0usize);
    let mut far = Vec::with_capacity(thresholds.len());
    let mut frr = Vec::with_capacity(thresholds.len());
    for &tau in &thresholds {
        // counts strictly below tau, maintained incrementally
        while gi < genuine.len() && genuine[gi] < tau {
            gi += 1;
        }
        while ii < impostor.len() && impostor[ii] < tau {
            ii += 1;
        }
        far.push((impostor.len() - ii) as f64 / ni);
        frr.push(gi as f64 / ng);
    }
    let auc = curve_area(&frr, &far);
    Ok(VerificationCurve {
        thresholds,
        far,
        frr,
        auc,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateOptions {
    /// Number of readers drawn per repeat; `None` uses all.
    pub reader_subset: Option<usize>,
    /// Fraction of test sentences kept per repeat.
    pub test_fraction: f64,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for EvaluateOptions {
    fn default() -> Self {
        EvaluateOptions {
            reader_subset: None,
            test_fraction: 1.0,
            repeats: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub accuracies: Vec<f64>,
    pub accuracy: f64,
    pub accuracy_se: f64,
    /// Per-repeat AUC; absent when a repeat has no impostor pairs.
    pub aucs: Vec<Option<f64>>,
    pub auc: Option<f64>,
    pub auc_se: Option<f64>,
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var / n))
}

/// Accuracy and AUC averaged over repeats, each drawing a reader subset and a
/// subset of test sentences shared by all units.
pub fn evaluate(scores: &ScanpathScores, options: &EvaluateOptions) -> Result<EvaluationReport> {
    let total_readers = scores.readers.len();
    let subset = options.reader_subset.unwrap_or(total_readers);
    if subset > total_readers {
        return Err(Error::SubsetTooLarge {
            requested: subset,
            available: total_readers,
        });
    }
    if subset == 0 || options.repeats == 0 {
        return Err(Error::InvalidArgument("reader subset and repeats must be positive"));
    }
    if !(options.test_fraction > 0.0 && options.test_fraction <= 1.0) {
        return Err(Error::InvalidArgument("test fraction must lie in (0, 1]"));
    }
    let mut sentences: Vec<&str> = Vec::new();
    for u in &scores.units {
        for (t, _) in &u.rows {
            if !sentences.contains(&t.as_str()) {
                sentences.push(t);
            }
        }
    }
    let keep_count = ((options.test_fraction * sentences.len() as f64).round() as usize).clamp(1, sentences.len().max(1));

    let mut accuracies = Vec::with_capacity(options.repeats);
    let mut aucs = Vec::with_capacity(options.repeats);
    for rep in 0..options.repeats {
        let mut rng = rng::stream(options.seed, &["evaluate", &rep.to_string()]);
        let mut readers: Vec<usize> = if subset == total_readers {
            (0..total_readers).collect()
        } else {
            index::sample(&mut rng, total_readers, subset).into_vec()
        };
        readers.sort_unstable();
        let chosen: Vec<&str> = readers.iter().map(|&r| scores.readers[r].as_str()).collect();
        let units: Vec<usize> = (0..scores.units.len())
            .filter(|&u| chosen.contains(&scores.units[u].truth.as_str()))
            .collect();
        let kept: Vec<&str> = if keep_count == sentences.len() {
            sentences.clone()
        } else {
            let mut idx = index::sample(&mut rng, sentences.len(), keep_count).into_vec();
            idx.sort_unstable();
            idx.iter().map(|&i| sentences[i]).collect()
        };
        let matrix = scores.matrix(&readers, &units, |t| kept.contains(&t))?;
        let truth: Vec<(String, String)> = units
            .iter()
            .map(|&u| (scores.units[u].unit.clone(), scores.units[u].truth.clone()))
            .collect();
        accuracies.push(multiclass_accuracy(&identify(&matrix), &truth)?);
        aucs.push(match verification_curve(&normalized_verification_scores(&matrix), &truth) {
            Ok(c) => Some(c.auc),
            Err(Error::DegenerateTruth) => None,
            Err(e) => return Err(e),
        });
    }
    let (accuracy, accuracy_se) = mean_se(&accuracies);
    let finite_aucs: Vec<f64> = aucs.iter().flatten().copied().collect();
    let (auc, auc_se) = if finite_aucs.len() == aucs.len() {
        let (m, s) = mean_se(&finite_aucs);
        (Some(m), Some(s))
    } else {
        (None, None)
    };
    Ok(EvaluationReport {
        accuracies,
        accuracy,
        accuracy_se,
        aucs,
        auc,
        auc_se,
    })
}
