//! Gaussian naive Bayes over dense coordinates.

use serde::{Deserialize, Serialize};

use super::linear::sigmoid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    /// Index 0 is the negative class, 1 the positive class.
    pub means: [Vec<f64>; 2],
    pub variances: [Vec<f64>; 2],
    pub log_priors: [f64; 2],
}

impl GaussianNb {
    /// Both classes must be present in `labels`.
    pub fn fit(xs: &[&[f64]], labels: &[bool], variance_floor: f64) -> Self {
        let dim = xs[0].len();
        let mut means = [vec![0.0; dim], vec![0.0; dim]];
        let mut variances = [vec![0.0; dim], vec![0.0; dim]];
        let mut counts = [0usize; 2];
        for (x, &l) in xs.iter().zip(labels) {
            let c = l as usize;
            counts[c] += 1;
            for (m, v) in means[c].iter_mut().zip(x.iter()) {
                *m += v;
            }
        }
        for c in 0..2 {
            means[c].iter_mut().for_each(|m| *m /= counts[c] as f64);
        }
        for (x, &l) in xs.iter().zip(labels) {
            let c = l as usize;
            for ((var, m), v) in variances[c].iter_mut().zip(&means[c]).zip(x.iter()) {
                *var += (v - m).powi(2);
            }
        }
        for c in 0..2 {
            variances[c].iter_mut().for_each(|v| *v = (*v / counts[c] as f64).max(variance_floor));
        }
        let n = xs.len() as f64;
        let log_priors = [(counts[0] as f64 / n).ln(), (counts[1] as f64 / n).ln()];
        Self { means, variances, log_priors }
    }

    fn log_likelihood(&self, class: usize, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.means[class])
            .zip(&self.variances[class])
            .map(|((v, m), var)| -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (v - m).powi(2) / (2.0 * var))
            .sum()
    }

    pub fn log_odds(&self, x: &[f64]) -> f64 {
        (self.log_priors[1] + self.log_likelihood(1, x)) - (self.log_priors[0] + self.log_likelihood(0, x))
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.log_odds(x))
    }
}
