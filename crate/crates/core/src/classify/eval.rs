//! Stratified k-fold cross-validation and confusion-matrix metrics.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{train, Algorithm, BinaryClassifier, ClassifyError, Dataset, Hyperparams};

/// Probability at or above which a prediction counts as positive.
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub confusion: Confusion,
    /// No positive predictions: precision reported as 0.
    pub precision_undefined: bool,
    /// No positive rows: recall reported as 0.
    pub recall_undefined: bool,
}

impl Metrics {
    pub fn from_confusion(c: Confusion) -> Self {
        let precision_undefined = c.tp + c.fp == 0;
        let recall_undefined = c.tp + c.fn_ == 0;
        let precision = if precision_undefined { 0.0 } else { c.tp as f64 / (c.tp + c.fp) as f64 };
        let recall = if recall_undefined { 0.0 } else { c.tp as f64 / (c.tp + c.fn_) as f64 };
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        let accuracy = if c.total() == 0 { 0.0 } else { (c.tp + c.tn) as f64 / c.total() as f64 };
        Self { precision, recall, f1, accuracy, confusion: c, precision_undefined, recall_undefined }
    }

    /// Unweighted mean of each metric; confusion counts are summed.
    pub fn macro_average(folds: &[Metrics]) -> Metrics {
        let n = folds.len() as f64;
        let mean = |f: fn(&Metrics) -> f64| folds.iter().map(f).sum::<f64>() / n;
        let mut confusion = Confusion::default();
        for m in folds {
            confusion.tp += m.confusion.tp;
            confusion.fp += m.confusion.fp;
            confusion.fn_ += m.confusion.fn_;
            confusion.tn += m.confusion.tn;
        }
        Metrics {
            precision: mean(|m| m.precision),
            recall: mean(|m| m.recall),
            f1: mean(|m| m.f1),
            accuracy: mean(|m| m.accuracy),
            confusion,
            precision_undefined: folds.iter().any(|m| m.precision_undefined),
            recall_undefined: folds.iter().any(|m| m.recall_undefined),
        }
    }
}

pub fn evaluate(model: &BinaryClassifier, test: &Dataset) -> Metrics {
    let mut c = Confusion::default();
    for row in &test.rows {
        let predicted = model.probability(&row.vector) >= DECISION_THRESHOLD;
        match (predicted, row.label) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Metrics::from_confusion(c)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Splits row indices into `k` folds that preserve class proportions to
/// within one row per class.
pub fn stratified_kfold(labels: &[bool], k: usize, seed: u64) -> Result<Vec<Fold>, ClassifyError> {
    let positives: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let negatives: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    if k < 2 || positives.len() < k || negatives.len() < k {
        return Err(ClassifyError::TooFewPerClass { k: k.max(2), positives: positives.len(), negatives: negatives.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0usize; labels.len()];
    let mut offset = 0;
    for mut class in [positives, negatives] {
        class.shuffle(&mut rng);
        for (j, &row) in class.iter().enumerate() {
            assignment[row] = (offset + j) % k;
        }
        // continue where this class left off so fold sizes stay balanced overall
        offset = (offset + class.len()) % k;
    }
    Ok((0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| assignment[i] == f);
            Fold { train, test }
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct CrossValidation {
    pub algorithm: Algorithm,
    pub folds: Vec<Metrics>,
    pub mean: Metrics,
}

/// Folds are trained in parallel; fold `i` trains with seed `seed + i`.
pub fn cross_validate(
    data: &Dataset,
    algorithm: Algorithm,
    hp: &Hyperparams,
    k: usize,
    seed: u64,
) -> Result<CrossValidation, ClassifyError> {
    let labels: Vec<bool> = data.rows.iter().map(|r| r.label).collect();
    let folds = stratified_kfold(&labels, k, seed)?;
    let per_fold = folds
        .par_iter()
        .enumerate()
        .map(|(i, fold)| {
            let model = train(&data.subset(&fold.train), algorithm, hp, seed.wrapping_add(i as u64))?;
            Ok(evaluate(&model, &data.subset(&fold.test)))
        })
        .collect::<Result<Vec<_>, ClassifyError>>()?;
    let mean = Metrics::macro_average(&per_fold);
    Ok(CrossValidation { algorithm, folds: per_fold, mean })
}

/// Highest F1, then accuracy, then the fixed algorithm order.
pub fn select_best(results: &BTreeMap<Algorithm, Metrics>) -> Option<Algorithm> {
    Algorithm::ALL
        .into_iter()
        .filter_map(|a| results.get(&a).map(|m| (a, m)))
        .fold(None, |best: Option<(Algorithm, &Metrics)>, (a, m)| match best {
            Some((_, b)) if (m.f1, m.accuracy) <= (b.f1, b.accuracy) => best,
            _ => Some((a, m)),
        })
        .map(|(a, _)| a)
}

/// Tab-separated report: one header row, one row per algorithm, four decimals.
pub fn render_report(title: Option<&str>, rows: &[(Algorithm, Metrics)]) -> String {
    let mut out = String::new();
    if let Some(t) = title {
        let _ = writeln!(out, "{t}");
    }
    out.push_str("\tPrecision\tRecall\tF1\tAccuracy\n");
    for (algo, m) in rows {
        let _ = writeln!(
            out,
            "{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}",
            algo.display_name(),
            m.precision,
            m.recall,
            m.f1,
            m.accuracy
        );
    }
    out
}
