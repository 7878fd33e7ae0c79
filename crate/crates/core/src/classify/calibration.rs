//! Sigmoid (Platt) calibration of raw margins: `P(y = 1 | f) = 1 / (1 + exp(A f + B))`.
//!
//! Fitted by Newton's method with backtracking on regularized targets, following
//! the numerically careful formulation of Lin, Lin and Weng.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub a: f64,
    pub b: f64,
}

impl Calibration {
    pub fn probability(&self, margin: f64) -> f64 {
        let z = self.a * margin + self.b;
        // 1 / (1 + e^z), stable for both signs
        if z >= 0.0 {
            let e = (-z).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + z.exp())
        }
    }
}

/// Largest slope accepted as "increasing in the margin".
const MAX_SLOPE: f64 = -1e-6;

pub fn fit(margins: &[f64], labels: &[bool]) -> Calibration {
    let prior1 = labels.iter().filter(|&&l| l).count() as f64;
    let prior0 = labels.len() as f64 - prior1;
    let hi = (prior1 + 1.0) / (prior1 + 2.0);
    let lo = 1.0 / (prior0 + 2.0);
    let targets: Vec<f64> = labels.iter().map(|&l| if l { hi } else { lo }).collect();

    let mut a = 0.0;
    let mut b = ((prior0 + 1.0) / (prior1 + 1.0)).ln();
    let sigma = 1e-12;
    let min_step = 1e-10;
    let eps = 1e-5;

    let objective = |a: f64, b: f64| -> f64 {
        margins
            .iter()
            .zip(&targets)
            .map(|(f, t)| {
                let z = f * a + b;
                if z >= 0.0 {
                    t * z + (-z).exp().ln_1p()
                } else {
                    (t - 1.0) * z + z.exp().ln_1p()
                }
            })
            .sum()
    };

    let mut fval = objective(a, b);
    for _ in 0..100 {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (sigma, sigma, 0.0, 0.0, 0.0);
        for (f, t) in margins.iter().zip(&targets) {
            let z = f * a + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = t - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < eps && g2.abs() < eps {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        let mut moved = false;
        while step >= min_step {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                moved = true;
                break;
            }
            step /= 2.0;
        }
        if !moved {
            break;
        }
    }
    if !a.is_finite() || !b.is_finite() || a > MAX_SLOPE {
        // Degenerate fit (uninformative margins); fall back to a plain logistic.
        return Calibration { a: -1.0, b: 0.0 };
    }
    Calibration { a, b }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_calibration_is_half_at_zero() {
        let c = Calibration { a: -2.0, b: 0.0 };
        assert_eq!(c.probability(0.0), 0.5);
    }

    #[test]
    fn fit_is_monotone_and_inside_unit_interval() {
        let margins: Vec<f64> = (-20..=20).map(|i| i as f64 / 5.0).collect();
        let labels: Vec<bool> = margins.iter().enumerate().map(|(i, m)| *m > 0.0 || i % 7 == 0).collect();
        let c = fit(&margins, &labels);
        assert!(c.a < 0.0);
        let probs: Vec<f64> = margins.iter().map(|&m| c.probability(m)).collect();
        assert!(probs.iter().all(|p| *p > 0.0 && *p < 1.0));
        assert!(probs.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn separable_margins_stay_finite() {
        let margins = [-3.0, -2.0, -1.5, 1.0, 2.0, 4.0];
        let labels = [false, false, false, true, true, true];
        let c = fit(&margins, &labels);
        assert!(c.a.is_finite() && c.b.is_finite() && c.a < 0.0);
        assert!(c.probability(4.0) > 0.5 && c.probability(-3.0) < 0.5);
    }
}
