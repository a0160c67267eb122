//! One-vs-rest linear SVM over DoA features, Platt-calibrated class
//! probabilities, and the argmax-azimuth baseline.

pub mod platt;
pub mod solver;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::beamform::{argmax_doa, DoaResponse};
use crate::error::{Error, Result};
use crate::features::{Class, DoaFeature, LabeledSample, PipelineConfig};
use platt::Sigmoid;
use solver::{BinaryProblem, BinarySolution};

pub const MODEL_MAGIC: &str = "blindcorner-svm";
pub const MODEL_VERSION: u32 = 1;
pub const DEFAULT_LAMBDA: f64 = 1.0;
pub const DEFAULT_ALPHA_TH: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub lambda: f64,
    pub seed: u64,
    pub epochs: usize,
    /// Standardize with training statistics; identity scaling otherwise.
    pub standardize: bool,
    pub bias_scale: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            seed: 0,
            epochs: 300,
            standardize: true,
            bias_scale: 1.0,
        }
    }
}

impl TrainOptions {
    pub fn new(lambda: f64, seed: u64) -> Self {
        Self {
            lambda,
            seed,
            ..Self::default()
        }
    }
}

/// Trained model. Rows of `weights` follow [`Class::ALL`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub magic: String,
    pub version: u32,
    pub class_order: Vec<Class>,
    pub feature_dim: usize,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub scaler_mean: Vec<f64>,
    pub scaler_std: Vec<f64>,
    pub calib_a: Vec<f64>,
    pub calib_b: Vec<f64>,
    pub lambda: f64,
    pub seed: u64,
    pub epochs: usize,
    pub standardize: bool,
    pub bias_scale: f64,
    pub n_train: usize,
    /// Objective convention and its liblinear equivalent.
    pub objective: String,
    pub config: Option<PipelineConfig>,
    /// Hash and echo of the run settings that produced the model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_config: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: Class,
    pub scores: [f64; Class::COUNT],
    pub probs: [f64; Class::COUNT],
}

fn fit_scaler(rows: &[&[f64]], standardize: bool) -> (Vec<f64>, Vec<f64>) {
    let d = rows[0].len();
    if !standardize {
        return (vec![0.0; d], vec![1.0; d]);
    }
    let n = rows.len() as f64;
    let mean: Vec<f64> = (0..d)
        .map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / n)
        .collect();
    let std = (0..d)
        .map(|k| {
            let var = rows.iter().map(|r| (r[k] - mean[k]).powi(2)).sum::<f64>() / n;
            let s = var.sqrt();
            if s > 1e-12 && s.is_finite() {
                s
            } else {
                1.0
            }
        })
        .collect();
    (mean, std)
}

/// Label of the largest value; ties resolve to the earlier class.
fn argmax_class(values: &[f64; Class::COUNT]) -> Class {
    let mut best = 0;
    for c in 1..Class::COUNT {
        if values[c] > values[best] {
            best = c;
        }
    }
    Class::ALL[best]
}

pub fn train(samples: &[LabeledSample], lambda: f64, seed: u64) -> Result<SvmModel> {
    train_with(samples, &TrainOptions::new(lambda, seed))
}

pub fn train_with(samples: &[LabeledSample], options: &TrainOptions) -> Result<SvmModel> {
    if !(options.lambda.is_finite() && options.lambda > 0.0) {
        return Err(Error::config("lambda must be positive"));
    }
    let first = samples
        .first()
        .ok_or_else(|| Error::config("training set is empty"))?;
    let dim = first.feature.dim();
    if let Some(bad) = samples.iter().find(|s| s.feature.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: bad.feature.dim(),
        });
    }
    let mut present = [false; Class::COUNT];
    for s in samples {
        present[s.label.index()] = true;
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::config("training needs at least two distinct labels"));
    }

    let raw: Vec<&[f64]> = samples.iter().map(|s| s.feature.as_slice()).collect();
    let (mean, std) = fit_scaler(&raw, options.standardize);
    let rows: Vec<Vec<f64>> = raw
        .iter()
        .map(|r| {
            r.iter()
                .zip(&mean)
                .zip(&std)
                .map(|((v, m), s)| (v - m) / s)
                .collect()
        })
        .collect();

    let mut weights = Vec::with_capacity(Class::COUNT);
    let mut biases = Vec::with_capacity(Class::COUNT);
    let mut calib_a = Vec::with_capacity(Class::COUNT);
    let mut calib_b = Vec::with_capacity(Class::COUNT);
    for class in Class::ALL {
        let targets: Vec<f64> = samples
            .iter()
            .map(|s| if s.label == class { 1.0 } else { -1.0 })
            .collect();
        let problem = BinaryProblem {
            rows: &rows,
            targets: &targets,
            lambda: options.lambda,
            bias_scale: options.bias_scale,
        };
        let machine_seed = options.seed.wrapping_add(class.index() as u64);
        let BinarySolution {
            weights: w, bias, ..
        } = solver::solve(&problem, options.epochs, machine_seed);
        let decisions: Vec<f64> = rows
            .iter()
            .map(|x| x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + bias)
            .collect();
        let positive: Vec<bool> = samples.iter().map(|s| s.label == class).collect();
        let sig = platt::fit(&decisions, &positive);
        weights.push(w);
        biases.push(bias);
        calib_a.push(sig.a);
        calib_b.push(sig.b);
    }

    Ok(SvmModel {
        magic: MODEL_MAGIC.into(),
        version: MODEL_VERSION,
        class_order: Class::ALL.to_vec(),
        feature_dim: dim,
        weights,
        biases,
        scaler_mean: mean,
        scaler_std: std,
        calib_a,
        calib_b,
        lambda: options.lambda,
        seed: options.seed,
        epochs: options.epochs,
        standardize: options.standardize,
        bias_scale: options.bias_scale,
        n_train: samples.len(),
        objective: format!(
            "mean hinge + lambda*||w||^2 per one-vs-rest machine; equivalent liblinear C = 1/(2*lambda*n) = {}",
            1.0 / (2.0 * options.lambda * samples.len() as f64)
        ),
        config: None,
        config_hash: None,
        run_config: None,
    })
}

impl SvmModel {
    pub fn with_config(mut self, config: PipelineConfig) -> Self {
        self.config = Some(config);
        self
    }

    pub fn with_provenance(mut self, hash: String, run_config: serde_json::Value) -> Self {
        self.config_hash = Some(hash);
        self.run_config = Some(run_config);
        self
    }

    pub fn decision_values(&self, x: &[f64]) -> Result<[f64; Class::COUNT]> {
        if x.len() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim,
                found: x.len(),
            });
        }
        let z: Vec<f64> = x
            .iter()
            .zip(&self.scaler_mean)
            .zip(&self.scaler_std)
            .map(|((v, m), s)| (v - m) / s)
            .collect();
        let mut scores = [0.0; Class::COUNT];
        for (c, score) in scores.iter_mut().enumerate() {
            *score = z
                .iter()
                .zip(&self.weights[c])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                + self.biases[c];
        }
        Ok(scores)
    }

    pub fn predict(&self, feature: &DoaFeature) -> Result<Prediction> {
        let scores = self.decision_values(feature.as_slice())?;
        let mut probs = [0.0; Class::COUNT];
        for c in 0..Class::COUNT {
            probs[c] = Sigmoid {
                a: self.calib_a[c],
                b: self.calib_b[c],
            }
            .probability(scores[c]);
        }
        let total: f64 = probs.iter().sum();
        if total > 0.0 && total.is_finite() {
            for p in &mut probs {
                *p /= total;
            }
        } else {
            // All calibrated sigmoids underflowed; fall back to the raw scores.
            probs = [0.0; Class::COUNT];
            probs[argmax_class(&scores).index()] = 1.0;
        }
        Ok(Prediction {
            label: argmax_class(&probs),
            scores,
            probs,
        })
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights
            .iter()
            .flatten()
            .map(|w| w * w)
            .sum::<f64>()
            .sqrt()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str, path: &Path) -> Result<SvmModel> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Corrupt {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        match value.get("magic").and_then(|m| m.as_str()) {
            Some(MODEL_MAGIC) => {}
            other => {
                return Err(Error::ModelVersion(format!(
                    "expected magic '{MODEL_MAGIC}', found {other:?}"
                )))
            }
        }
        match value.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(MODEL_VERSION) => {}
            other => {
                return Err(Error::ModelVersion(format!(
                    "expected version {MODEL_VERSION}, found {other:?}"
                )))
            }
        }
        let model: SvmModel = serde_json::from_value(value).map_err(|e| Error::Corrupt {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        model.check_shape().map_err(|reason| Error::Corrupt {
            path: path.to_path_buf(),
            reason,
        })?;
        Ok(model)
    }

    fn check_shape(&self) -> std::result::Result<(), String> {
        let c = Class::COUNT;
        if self.class_order != Class::ALL {
            return Err("class order differs from left,front,right,none".into());
        }
        if self.weights.len() != c
            || self.weights.iter().any(|w| w.len() != self.feature_dim)
            || [&self.biases, &self.calib_a, &self.calib_b]
                .iter()
                .any(|v| v.len() != c)
            || self.scaler_mean.len() != self.feature_dim
            || self.scaler_std.len() != self.feature_dim
        {
            return Err("array lengths disagree with feature_dim and class count".into());
        }
        if self.scaler_std.iter().any(|s| !(*s > 0.0)) {
            return Err("scaler std entries must be positive".into());
        }
        Ok(())
    }
}

pub fn save_model(model: &SvmModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model.to_json()?).map_err(|source| Error::Unwritable {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SvmModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Unreadable {
        path: path.to_path_buf(),
        source,
    })?;
    SvmModel::from_json(&text, path)
}

/// Classifies by the most salient azimuth alone: left below `-α_th`, right
/// above `+α_th`, front in between (inclusive).
pub fn doa_baseline(response: &DoaResponse, alpha_th: f64) -> Result<Class> {
    classify_azimuth(argmax_doa(response), alpha_th)
}

pub fn classify_azimuth(alpha_max: f64, alpha_th: f64) -> Result<Class> {
    if !(0.0..=90.0).contains(&alpha_th) {
        return Err(Error::config(format!(
            "alpha_th {alpha_th}° outside [0°, 90°]"
        )));
    }
    Ok(if alpha_max < -alpha_th {
        Class::Left
    } else if alpha_max > alpha_th {
        Class::Right
    } else {
        Class::Front
    })
}
