//! Confusion matrices, accuracy and Jaccard metrics, cross-validation,
//! cross-environment evaluation, sliding-window scoring and microphone
//! subset studies.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{classify_azimuth, train_with, Prediction, SvmModel, TrainOptions};
use crate::dataset::{clip_window, featurize, stratified_folds, SampleWindow, FRONT_OFFSET};
use crate::error::{Error, Result};
use crate::features::{
    augment_training_set, extract_feature, Class, LabeledSample, PipelineConfig,
};
use crate::seed::derive_seed;
use crate::signal::{ArrayGeometry, AudioClip};

/// Default sliding-window step in seconds.
pub const DEFAULT_SLIDING_HOP: f64 = 0.1;

/// Counts indexed `[true][predicted]` in [`Class::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; Class::COUNT]; Class::COUNT],
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_counts(counts: [[u64; Class::COUNT]; Class::COUNT]) -> Self {
        Self { counts }
    }

    pub fn record(&mut self, truth: Class, predicted: Class) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (row, o) in self.counts.iter_mut().zip(&other.counts) {
            for (a, b) in row.iter_mut().zip(o) {
                *a += b;
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn true_positives(&self, c: Class) -> u64 {
        self.counts[c.index()][c.index()]
    }

    pub fn false_positives(&self, c: Class) -> u64 {
        (0..Class::COUNT)
            .filter(|&t| t != c.index())
            .map(|t| self.counts[t][c.index()])
            .sum()
    }

    pub fn false_negatives(&self, c: Class) -> u64 {
        (0..Class::COUNT)
            .filter(|&p| p != c.index())
            .map(|p| self.counts[c.index()][p])
            .sum()
    }
}

/// Trace over total.
pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::invariant("accuracy of an empty confusion matrix"));
    }
    let trace: u64 = Class::ALL.iter().map(|&c| cm.true_positives(c)).sum();
    Ok(trace as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jaccard {
    pub value: f64,
    /// Set when `TP + FP + FN = 0`; the value is then 0.
    pub degenerate: bool,
}

/// `TP / (TP + FP + FN)` for class `c`.
pub fn jaccard(cm: &ConfusionMatrix, c: Class) -> Jaccard {
    let tp = cm.true_positives(c);
    let denom = tp + cm.false_positives(c) + cm.false_negatives(c);
    if denom == 0 {
        Jaccard {
            value: 0.0,
            degenerate: true,
        }
    } else {
        Jaccard {
            value: tp as f64 / denom as f64,
            degenerate: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub class: Class,
    pub jaccard: f64,
    pub degenerate: bool,
}

/// Metrics of one confusion matrix over the scored classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: u64,
    pub accuracy: f64,
    pub per_class: Vec<ClassScore>,
    pub confusion: ConfusionMatrix,
}

impl Metrics {
    pub fn from_confusion(cm: ConfusionMatrix, classes: &[Class]) -> Result<Self> {
        Ok(Self {
            n: cm.total(),
            accuracy: accuracy(&cm)?,
            per_class: classes
                .iter()
                .map(|&class| {
                    let j = jaccard(&cm, class);
                    ClassScore {
                        class,
                        jaccard: j.value,
                        degenerate: j.degenerate,
                    }
                })
                .collect(),
            confusion: cm,
        })
    }

    pub fn jaccard(&self, class: Class) -> Option<f64> {
        self.per_class
            .iter()
            .find(|s| s.class == class)
            .map(|s| s.jaccard)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub metrics: Metrics,
}

/// Pooled metrics plus the per-fold breakdown they were aggregated from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub classes: Vec<Class>,
    pub pooled: Metrics,
    pub folds: Vec<FoldMetrics>,
}

impl MetricsReport {
    pub fn accuracy(&self) -> f64 {
        self.pooled.accuracy
    }

    pub fn n(&self) -> u64 {
        self.pooled.n
    }

    pub fn jaccard(&self, class: Class) -> Option<f64> {
        self.pooled.jaccard(class)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// One row for the pooled result and one per fold.
    pub fn to_csv(&self, preamble: &[String]) -> Result<String> {
        let mut out = String::new();
        for line in preamble {
            out.push_str(&format!("# {line}\n"));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![
            "scope".to_string(),
            "n_train".into(),
            "n".into(),
            "accuracy".into(),
        ];
        header.extend(self.classes.iter().map(|c| format!("jaccard_{c}")));
        w.write_record(&header)?;
        let row = |scope: String, n_train: String, m: &Metrics| {
            let mut r = vec![scope, n_train, m.n.to_string(), m.accuracy.to_string()];
            r.extend(m.per_class.iter().map(|s| s.jaccard.to_string()));
            r
        };
        w.write_record(row("pooled".into(), String::new(), &self.pooled))?;
        for f in &self.folds {
            w.write_record(row(
                format!("fold_{}", f.fold),
                f.n_train.to_string(),
                &f.metrics,
            ))?;
        }
        let body = w
            .into_inner()
            .map_err(|e| Error::invariant(e.to_string()))?;
        out.push_str(&String::from_utf8(body).map_err(|e| Error::invariant(e.to_string()))?);
        Ok(out)
    }
}

/// Settings shared by the training-based evaluations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub folds: usize,
    pub train: TrainOptions,
    pub seed: u64,
    pub augment: bool,
}

impl EvalOptions {
    pub fn new(folds: usize, lambda: f64, seed: u64, augment: bool) -> Self {
        Self {
            folds,
            train: TrainOptions::new(lambda, seed),
            seed,
            augment,
        }
    }
}

fn recording_ids(samples: &[&LabeledSample]) -> BTreeSet<String> {
    samples
        .iter()
        .map(|s| s.meta.recording_id.clone())
        .collect()
}

fn check_disjoint(train: &[&LabeledSample], test: &[&LabeledSample]) -> Result<()> {
    let train_ids = recording_ids(train);
    match test
        .iter()
        .find(|s| train_ids.contains(&s.meta.recording_id))
    {
        Some(s) => Err(Error::RecordingOverlap(s.meta.recording_id.clone())),
        None => Ok(()),
    }
}

/// Trains on `train` (mirrored when `augment`) and scores `test`.
fn train_and_score(
    train: &[&LabeledSample],
    test: &[&LabeledSample],
    options: &TrainOptions,
    augment: bool,
) -> Result<(usize, ConfusionMatrix)> {
    check_disjoint(train, test)?;
    let owned: Vec<LabeledSample> = train.iter().map(|s| (*s).clone()).collect();
    let train_set = if augment {
        augment_training_set(&owned)
    } else {
        owned
    };
    let model = train_with(&train_set, options)?;
    let mut cm = ConfusionMatrix::new();
    for s in test {
        cm.record(s.label, model.predict(&s.feature)?.label);
    }
    Ok((train_set.len(), cm))
}

/// Grouped k-fold cross-validation with one pooled confusion matrix.
pub fn cross_validate(
    samples: &[LabeledSample],
    k: usize,
    lambda: f64,
    seed: u64,
    augment: bool,
) -> Result<MetricsReport> {
    cross_validate_with(samples, &EvalOptions::new(k, lambda, seed, augment))
}

pub fn cross_validate_with(
    samples: &[LabeledSample],
    options: &EvalOptions,
) -> Result<MetricsReport> {
    if samples.iter().any(|s| s.meta.augmented) {
        return Err(Error::invariant(
            "cross-validation input must not contain augmented samples",
        ));
    }
    let folds = stratified_folds(samples, options.folds, derive_seed(options.seed, "folds"))?;
    let results = folds
        .par_iter()
        .enumerate()
        .map(|(f, test_idx)| -> Result<FoldMetrics> {
            let in_test: BTreeSet<usize> = test_idx.iter().copied().collect();
            let test: Vec<&LabeledSample> = test_idx.iter().map(|&i| &samples[i]).collect();
            let train: Vec<&LabeledSample> = (0..samples.len())
                .filter(|i| !in_test.contains(i))
                .map(|i| &samples[i])
                .collect();
            let train_options = TrainOptions {
                seed: derive_seed(options.seed, &format!("train/{f}")),
                ..options.train.clone()
            };
            let (n_train, cm) = train_and_score(&train, &test, &train_options, options.augment)?;
            Ok(FoldMetrics {
                fold: f,
                n_train,
                n_test: test.len(),
                metrics: Metrics::from_confusion(cm, &Class::ALL)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pooled = ConfusionMatrix::new();
    for f in &results {
        pooled.merge(&f.metrics.confusion);
    }
    Ok(MetricsReport {
        classes: Class::ALL.to_vec(),
        pooled: Metrics::from_confusion(pooled, &Class::ALL)?,
        folds: results,
    })
}

/// Single train/test pass over disjoint recordings.
pub fn generalization_eval(
    train: &[LabeledSample],
    test: &[LabeledSample],
    lambda: f64,
    seed: u64,
    augment: bool,
) -> Result<MetricsReport> {
    let train_refs: Vec<&LabeledSample> = train.iter().collect();
    let test_refs: Vec<&LabeledSample> = test.iter().collect();
    let options = TrainOptions::new(lambda, derive_seed(seed, "train"));
    let (n_train, cm) = train_and_score(&train_refs, &test_refs, &options, augment)?;
    let metrics = Metrics::from_confusion(cm, &Class::ALL)?;
    Ok(MetricsReport {
        classes: Class::ALL.to_vec(),
        pooled: metrics.clone(),
        folds: vec![FoldMetrics {
            fold: 0,
            n_train,
            n_test: test.len(),
            metrics,
        }],
    })
}

/// Classes the direction-only baseline can output.
pub const BASELINE_CLASSES: [Class; 3] = [Class::Left, Class::Front, Class::Right];

/// Scores the direction-only rule on `(true label, α_max)` pairs; `none`
/// samples are skipped.
pub fn baseline_eval(samples: &[(Class, f64)], alpha_th: f64) -> Result<MetricsReport> {
    let mut cm = ConfusionMatrix::new();
    for &(label, azimuth) in samples.iter().filter(|(l, _)| *l != Class::None) {
        cm.record(label, classify_azimuth(azimuth, alpha_th)?);
    }
    let pooled = Metrics::from_confusion(cm, &BASELINE_CLASSES)?;
    Ok(MetricsReport {
        classes: BASELINE_CLASSES.to_vec(),
        folds: Vec::new(),
        pooled,
    })
}

/// Baseline accuracy for each threshold, in input order.
pub fn baseline_grid_search(
    samples: &[(Class, f64)],
    thresholds: &[f64],
) -> Result<Vec<(f64, f64)>> {
    thresholds
        .iter()
        .map(|&th| Ok((th, baseline_eval(samples, th)?.accuracy())))
        .collect()
}

/// Window end times `δt + k·hop` that fit inside `duration`.
pub fn window_ends(duration: f64, sample_len: f64, hop: f64) -> Result<Vec<f64>> {
    if !(hop > 0.0 && sample_len > 0.0) {
        return Err(Error::config("hop and window length must be positive"));
    }
    if duration < sample_len {
        return Err(Error::WindowOutOfBounds {
            start: 0.0,
            end: sample_len,
            duration,
        });
    }
    let count = ((duration - sample_len) / hop + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| sample_len + k as f64 * hop).collect())
}

/// Labels counted as correct at `t_e`. For approaches the true direction is
/// accepted until `t0 + 1.5 s` and `front` from `t0` onward.
pub fn accepted_labels(label: Class, t0: Option<f64>, t_e: f64) -> Result<Vec<Class>> {
    match label {
        Class::Left | Class::Right => {
            let t0 = t0.ok_or_else(|| Error::invariant(format!("{label} recording without t0")))?;
            let mut accepted = Vec::with_capacity(2);
            if t_e <= t0 + FRONT_OFFSET {
                accepted.push(label);
            }
            if t_e > t0 {
                accepted.push(Class::Front);
            }
            Ok(accepted)
        }
        Class::None => Ok(vec![Class::None]),
        Class::Front => Err(Error::invariant(
            "recordings are labeled left, right or none",
        )),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowPoint {
    pub t_e: f64,
    pub prediction: Prediction,
    pub accepted: Vec<Class>,
}

impl WindowPoint {
    pub fn correct(&self) -> bool {
        self.accepted.contains(&self.prediction.label)
    }
}

/// Predictions for every trailing window `[t_e - δt, t_e)` of a recording.
pub fn sliding_predictions(
    clip: &AudioClip,
    model: &SvmModel,
    geometry: &ArrayGeometry,
    config: &PipelineConfig,
    hop: f64,
) -> Result<Vec<(f64, Prediction)>> {
    config.validate(clip.sample_rate())?;
    let ends = window_ends(clip.duration(), config.sample_len, hop)?;
    ends.par_iter()
        .map(|&t_e| {
            let window = clip_window(clip, t_e, config.sample_len)?;
            let feature = extract_feature(&window, geometry, config)?;
            Ok((t_e, model.predict(&feature)?))
        })
        .collect()
}

/// Classifies every trailing window of a recording and applies the
/// acceptance rule of [`accepted_labels`].
pub fn sliding_window_eval(
    clip: &AudioClip,
    label: Class,
    t0: Option<f64>,
    model: &SvmModel,
    geometry: &ArrayGeometry,
    config: &PipelineConfig,
    hop: f64,
) -> Result<Vec<WindowPoint>> {
    // Fail on a missing t0 before doing any work.
    accepted_labels(label, t0, config.sample_len)?;
    sliding_predictions(clip, model, geometry, config, hop)?
        .into_iter()
        .map(|(t_e, prediction)| {
            Ok(WindowPoint {
                t_e,
                prediction,
                accepted: accepted_labels(label, t0, t_e)?,
            })
        })
        .collect()
}

/// Fraction of correct windows.
pub fn sliding_accuracy(points: &[WindowPoint]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::invariant("no windows to score"));
    }
    Ok(points.iter().filter(|p| p.correct()).count() as f64 / points.len() as f64)
}

pub const TIME_SERIES_HEADER: [&str; 7] = [
    "t_e",
    "p_left",
    "p_front",
    "p_right",
    "p_none",
    "label_pred",
    "label_true_accepted",
];

/// Accepted labels are joined with `|`.
pub fn time_series_csv(points: &[WindowPoint], preamble: &[String]) -> Result<String> {
    let mut out = String::new();
    for line in preamble {
        out.push_str(&format!("# {line}\n"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TIME_SERIES_HEADER)?;
    for p in points {
        let mut row = vec![format!("{:.6}", p.t_e)];
        row.extend(p.prediction.probs.iter().map(|v| v.to_string()));
        row.push(p.prediction.label.to_string());
        row.push(
            p.accepted
                .iter()
                .map(|c| c.as_str())
                .collect::<Vec<_>>()
                .join("|"),
        );
        w.write_record(&row)?;
    }
    let body = w
        .into_inner()
        .map_err(|e| Error::invariant(e.to_string()))?;
    out.push_str(&String::from_utf8(body).map_err(|e| Error::invariant(e.to_string()))?);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetStudyRow {
    pub m: usize,
    pub best: f64,
    pub mean: f64,
    pub std: f64,
    pub subsets: Vec<Vec<usize>>,
    pub accuracies: Vec<f64>,
}

/// `trials` sorted random `m`-subsets of `0..total`, reproducible per seed.
pub fn sample_subsets(total: usize, m: usize, trials: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if m < 2 {
        return Err(Error::config(
            "microphone subsets need at least two microphones",
        ));
    }
    if m > total {
        return Err(Error::config(format!(
            "subset size {m} exceeds the {total} microphones"
        )));
    }
    if trials == 0 {
        return Err(Error::config("at least one trial is required"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("subsets/{m}")));
    Ok((0..trials)
        .map(|_| {
            let mut s = rand::seq::index::sample(&mut rng, total, m).into_vec();
            s.sort_unstable();
            s
        })
        .collect())
}

/// Cross-validated accuracy of random microphone subsets. Features are
/// re-extracted from the windows with the reduced geometry; every subset is
/// cross-validated with the same options so the full set reproduces the
/// baseline exactly.
pub fn mic_subset_study(
    windows: &[SampleWindow],
    geometry: &ArrayGeometry,
    config: &PipelineConfig,
    sizes: &[usize],
    trials: usize,
    options: &EvalOptions,
) -> Result<Vec<SubsetStudyRow>> {
    sizes
        .iter()
        .map(|&m| {
            let subsets = sample_subsets(geometry.len(), m, trials, options.seed)?;
            let accuracies = subsets
                .iter()
                .map(|subset| {
                    let sub_geometry = geometry.subset(subset)?;
                    let sub_windows = windows
                        .iter()
                        .map(|w| {
                            Ok(SampleWindow {
                                audio: w.audio.select_channels(subset)?,
                                ..w.clone()
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let samples = featurize(&sub_windows, &sub_geometry, config)?;
                    Ok(cross_validate_with(&samples, options)?.accuracy())
                })
                .collect::<Result<Vec<f64>>>()?;
            let n = accuracies.len() as f64;
            let mean = accuracies.iter().sum::<f64>() / n;
            let std = (accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
            let best = accuracies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Ok(SubsetStudyRow {
                m,
                best,
                mean,
                std,
                subsets,
                accuracies,
            })
        })
        .collect()
}

pub fn subset_study_csv(rows: &[SubsetStudyRow], preamble: &[String]) -> Result<String> {
    let mut out = String::new();
    for line in preamble {
        out.push_str(&format!("# {line}\n"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["m", "trials", "best", "mean", "std"])?;
    for r in rows {
        w.write_record([
            r.m.to_string(),
            r.accuracies.len().to_string(),
            r.best.to_string(),
            r.mean.to_string(),
            r.std.to_string(),
        ])?;
    }
    let body = w
        .into_inner()
        .map_err(|e| Error::invariant(e.to_string()))?;
    out.push_str(&String::from_utf8(body).map_err(|e| Error::invariant(e.to_string()))?);
    Ok(out)
}
