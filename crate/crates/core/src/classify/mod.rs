//! Binary intent classifiers with probability outputs.
//!
//! Four model families share one interface: logistic regression, linear SVM
//! (hinge loss, sigmoid-calibrated on a held-out slice), AdaBoost over
//! decision stumps, and Gaussian naive Bayes. Every model is bound to the
//! fingerprint of the encoder whose vectors it was trained on.

pub mod boost;
pub mod calibration;
pub mod eval;
pub mod linear;
pub mod optim;
pub mod synthetic;
pub mod bayes;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder::Embedding;
use bayes::GaussianNb;
use boost::Stump;
use calibration::Calibration;
use linear::{HingeLoss, LabeledRows, LogLoss};

pub use eval::{cross_validate, evaluate, render_report, select_best, stratified_kfold, Confusion, CrossValidation, Fold, Metrics};

pub const MODEL_FORMAT: &str = "hearken-classifier";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("training data contains only one class")]
    SingleClassDataset,
    #[error("training diverged: objective became non-finite")]
    NonfiniteLoss,
    #[error("vector was produced by encoder {actual}, model expects {expected}")]
    FingerprintMismatch { expected: String, actual: String },
    #[error("dimension mismatch: model expects {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("hyperparameter {name} = {value} outside {range}")]
    InvalidHyperparameter { name: &'static str, value: String, range: &'static str },
    #[error("each class needs at least {k} rows for {k}-fold splitting (have {positives} positive, {negatives} negative)")]
    TooFewPerClass { k: usize, positives: usize, negatives: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("model file: {0}")]
    ModelFile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "logreg")]
    LogisticRegression,
    #[serde(rename = "svm")]
    LinearSvm,
    #[serde(rename = "adaboost")]
    AdaBoost,
    #[serde(rename = "nb")]
    NaiveBayes,
}

impl Algorithm {
    /// Fixed order, also the tie-break order of [`select_best`].
    pub const ALL: [Algorithm; 4] =
        [Algorithm::LogisticRegression, Algorithm::LinearSvm, Algorithm::AdaBoost, Algorithm::NaiveBayes];

    pub fn tag(self) -> &'static str {
        match self {
            Self::LogisticRegression => "logreg",
            Self::LinearSvm => "svm",
            Self::AdaBoost => "adaboost",
            Self::NaiveBayes => "nb",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Self::LogisticRegression => "Logistic Regression",
            Self::LinearSvm => "Linear SVM",
            Self::AdaBoost => "AdaBoost",
            Self::NaiveBayes => "Naïve Bayes",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|a| a.tag() == s).ok_or_else(|| format!("unknown algorithm {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub text: String,
    pub vector: Vec<f64>,
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub rows: Vec<Example>,
    pub encoder_fingerprint: String,
}

impl Dataset {
    pub fn new(rows: Vec<Example>, encoder_fingerprint: impl Into<String>) -> Result<Self, ClassifyError> {
        if let Some(first) = rows.first() {
            let d = first.vector.len();
            if let Some(bad) = rows.iter().find(|r| r.vector.len() != d) {
                return Err(ClassifyError::DimensionMismatch { expected: d, actual: bad.vector.len() });
            }
        }
        Ok(Self { rows, encoder_fingerprint: encoder_fingerprint.into() })
    }

    /// Builds rows from embeddings that must all share one fingerprint.
    pub fn from_embeddings(items: Vec<(String, String, Embedding, bool)>) -> Result<Self, ClassifyError> {
        let fingerprint = items.first().map(|i| i.2.fingerprint.clone()).unwrap_or_default();
        if let Some(bad) = items.iter().find(|i| i.2.fingerprint != fingerprint) {
            return Err(ClassifyError::FingerprintMismatch {
                expected: fingerprint,
                actual: bad.2.fingerprint.clone(),
            });
        }
        let rows = items
            .into_iter()
            .map(|(id, text, e, label)| Example { id, text, vector: e.values, label })
            .collect();
        Self::new(rows, fingerprint)
    }

    pub fn dimension(&self) -> usize {
        self.rows.first().map_or(0, |r| r.vector.len())
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.rows.iter().filter(|r| r.label).count();
        (pos, self.rows.len() - pos)
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            encoder_fingerprint: self.encoder_fingerprint.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// L2 penalty for the linear models.
    pub l2: f64,
    pub max_epochs: usize,
    pub gradient_tolerance: f64,
    pub boosting_rounds: usize,
    /// Fraction of training rows held out for SVM calibration.
    pub calibration_holdout: f64,
    pub variance_floor: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            l2: 1e-3,
            max_epochs: 2000,
            gradient_tolerance: 1e-6,
            boosting_rounds: 100,
            calibration_holdout: 0.2,
            variance_floor: 1e-6,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), ClassifyError> {
        let bad = |name, value: String, range| Err(ClassifyError::InvalidHyperparameter { name, value, range });
        if !(self.l2.is_finite() && self.l2 >= 0.0 && self.l2 <= 1e3) {
            return bad("l2", self.l2.to_string(), "[0, 1000]");
        }
        if !(1..=1_000_000).contains(&self.max_epochs) {
            return bad("max_epochs", self.max_epochs.to_string(), "[1, 1000000]");
        }
        if !(self.gradient_tolerance > 0.0 && self.gradient_tolerance < 1.0) {
            return bad("gradient_tolerance", self.gradient_tolerance.to_string(), "(0, 1)");
        }
        if !(1..=10_000).contains(&self.boosting_rounds) {
            return bad("boosting_rounds", self.boosting_rounds.to_string(), "[1, 10000]");
        }
        if !(self.calibration_holdout > 0.0 && self.calibration_holdout <= 0.5) {
            return bad("calibration_holdout", self.calibration_holdout.to_string(), "(0, 0.5]");
        }
        if !(self.variance_floor > 0.0 && self.variance_floor.is_finite()) {
            return bad("variance_floor", self.variance_floor.to_string(), "(0, inf)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Params {
    Linear { weights: Vec<f64>, bias: f64, calibration: Option<Calibration> },
    Boosted { stumps: Vec<Stump> },
    GaussianNb(GaussianNb),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryClassifier {
    pub algorithm: Algorithm,
    pub dimension: usize,
    pub params: Params,
    pub encoder_fingerprint: String,
    pub trained_on: usize,
}

/// Anything that yields P(positive) for an embedding.
pub trait ProbabilityModel: Send + Sync {
    fn encoder_fingerprint(&self) -> &str;
    fn predict_proba(&self, v: &Embedding) -> Result<f64, ClassifyError>;
}

impl BinaryClassifier {
    /// Probability for a raw vector, skipping the fingerprint check.
    pub fn probability(&self, x: &[f64]) -> f64 {
        let p = match &self.params {
            Params::Linear { weights, bias, calibration } => {
                let m = weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + bias;
                match calibration {
                    Some(c) => c.probability(m),
                    None => linear::sigmoid(m),
                }
            }
            Params::Boosted { stumps } => boost::probability(stumps, x),
            Params::GaussianNb(nb) => nb.probability(x),
        };
        p.clamp(0.0, 1.0)
    }

    /// Raw decision score; positive means the positive class.
    pub fn decision(&self, x: &[f64]) -> f64 {
        match &self.params {
            Params::Linear { weights, bias, .. } => weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + bias,
            Params::Boosted { stumps } => boost::margin(stumps, x),
            Params::GaussianNb(nb) => nb.log_odds(x),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model: self.clone(),
        })
        .expect("classifier serializes")
    }

    /// Parses a model file, refusing other format versions and, when
    /// `expected_fingerprint` is given, models bound to another encoder.
    pub fn from_json(text: &str, expected_fingerprint: Option<&str>) -> Result<Self, ClassifyError> {
        #[derive(Deserialize)]
        struct Header {
            format: String,
            version: u32,
        }
        let header: Header = serde_json::from_str(text).map_err(|e| ClassifyError::ModelFile(e.to_string()))?;
        if header.format != MODEL_FORMAT {
            return Err(ClassifyError::ModelFile(format!("not a classifier file (format {:?})", header.format)));
        }
        if header.version != MODEL_VERSION {
            return Err(ClassifyError::ModelFile(format!(
                "unsupported version {} (expected {MODEL_VERSION})",
                header.version
            )));
        }
        let file: ModelFile = serde_json::from_str(text).map_err(|e| ClassifyError::ModelFile(e.to_string()))?;
        if let Some(expected) = expected_fingerprint {
            if file.model.encoder_fingerprint != expected {
                return Err(ClassifyError::FingerprintMismatch {
                    expected: expected.to_string(),
                    actual: file.model.encoder_fingerprint,
                });
            }
        }
        Ok(file.model)
    }

    pub fn load(path: &Path, expected_fingerprint: Option<&str>) -> Result<Self, ClassifyError> {
        let text = std::fs::read_to_string(path).map_err(|e| ClassifyError::ModelFile(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, expected_fingerprint)
    }
}

impl ProbabilityModel for BinaryClassifier {
    fn encoder_fingerprint(&self) -> &str {
        &self.encoder_fingerprint
    }

    fn predict_proba(&self, v: &Embedding) -> Result<f64, ClassifyError> {
        if v.fingerprint != self.encoder_fingerprint {
            return Err(ClassifyError::FingerprintMismatch {
                expected: self.encoder_fingerprint.clone(),
                actual: v.fingerprint.clone(),
            });
        }
        if v.dimension() != self.dimension {
            return Err(ClassifyError::DimensionMismatch { expected: self.dimension, actual: v.dimension() });
        }
        Ok(self.probability(&v.values))
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: BinaryClassifier,
}

fn signed_rows<'a>(rows: impl Iterator<Item = &'a Example>) -> LabeledRows<'a> {
    let mut out = LabeledRows { xs: Vec::new(), ys: Vec::new() };
    for r in rows {
        out.xs.push(&r.vector);
        out.ys.push(if r.label { 1.0 } else { -1.0 });
    }
    out
}

fn fit_linear(rows: &LabeledRows<'_>, hinge: bool, hp: &Hyperparams) -> Result<(Vec<f64>, f64), ClassifyError> {
    let d = rows.dimension();
    let settings = optim::Settings {
        max_iterations: hp.max_epochs,
        gradient_tolerance: hp.gradient_tolerance,
        ..optim::Settings::default()
    };
    let outcome = if hinge {
        optim::minimize(&HingeLoss { rows, l2: hp.l2 }, vec![0.0; d + 1], &settings)
    } else {
        optim::minimize(&LogLoss { rows, l2: hp.l2 }, vec![0.0; d + 1], &settings)
    };
    if outcome.termination == optim::Termination::NonFinite {
        return Err(ClassifyError::NonfiniteLoss);
    }
    let mut params = outcome.params;
    let bias = params.pop().expect("bias present");
    Ok((params, bias))
}

/// Stratified holdout split: (train indices, calibration indices).
fn calibration_split(data: &Dataset, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut held = Vec::new();
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..data.rows.len()).filter(|&i| data.rows[i].label == class).collect();
        idx.shuffle(&mut rng);
        let n_held = if idx.len() >= 2 { ((idx.len() as f64 * fraction).floor() as usize).max(1) } else { 0 };
        held.extend_from_slice(&idx[..n_held]);
        train.extend_from_slice(&idx[n_held..]);
    }
    train.sort_unstable();
    held.sort_unstable();
    (train, held)
}

pub fn train(data: &Dataset, algorithm: Algorithm, hp: &Hyperparams, seed: u64) -> Result<BinaryClassifier, ClassifyError> {
    hp.validate()?;
    if data.rows.is_empty() {
        return Err(ClassifyError::EmptyDataset);
    }
    let (pos, neg) = data.class_counts();
    if pos == 0 || neg == 0 {
        return Err(ClassifyError::SingleClassDataset);
    }
    if data.rows.iter().flat_map(|r| &r.vector).any(|v| !v.is_finite()) {
        return Err(ClassifyError::NonfiniteLoss);
    }
    let params = match algorithm {
        Algorithm::LogisticRegression => {
            let rows = signed_rows(data.rows.iter());
            let (weights, bias) = fit_linear(&rows, false, hp)?;
            Params::Linear { weights, bias, calibration: None }
        }
        Algorithm::LinearSvm => {
            let (train_idx, held_idx) = calibration_split(data, hp.calibration_holdout, seed);
            let fit_rows = signed_rows(train_idx.iter().map(|&i| &data.rows[i]));
            let (weights, bias) = fit_linear(&fit_rows, true, hp)?;
            let margin = |x: &[f64]| weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + bias;
            let held_has_both = held_idx.iter().any(|&i| data.rows[i].label) && held_idx.iter().any(|&i| !data.rows[i].label);
            let calib_idx = if held_has_both { held_idx } else { train_idx };
            let margins: Vec<f64> = calib_idx.iter().map(|&i| margin(&data.rows[i].vector)).collect();
            let labels: Vec<bool> = calib_idx.iter().map(|&i| data.rows[i].label).collect();
            let calibration = calibration::fit(&margins, &labels);
            Params::Linear { weights, bias, calibration: Some(calibration) }
        }
        Algorithm::AdaBoost => {
            let rows = signed_rows(data.rows.iter());
            Params::Boosted { stumps: boost::train(&rows.xs, &rows.ys, hp.boosting_rounds) }
        }
        Algorithm::NaiveBayes => {
            let xs: Vec<&[f64]> = data.rows.iter().map(|r| r.vector.as_slice()).collect();
            let labels: Vec<bool> = data.rows.iter().map(|r| r.label).collect();
            Params::GaussianNb(GaussianNb::fit(&xs, &labels, hp.variance_floor))
        }
    };
    Ok(BinaryClassifier {
        algorithm,
        dimension: data.dimension(),
        params,
        encoder_fingerprint: data.encoder_fingerprint.clone(),
        trained_on: data.rows.len(),
    })
}
