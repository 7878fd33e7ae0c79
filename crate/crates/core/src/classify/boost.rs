//! Discrete AdaBoost over depth-1 decision stumps.

use serde::{Deserialize, Serialize};

use super::linear::sigmoid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    /// +1 predicts positive above the threshold, -1 predicts positive at or below it.
    pub polarity: f64,
    pub weight: f64,
}

impl Stump {
    pub fn vote(&self, x: &[f64]) -> f64 {
        if x[self.feature] > self.threshold {
            self.polarity
        } else {
            -self.polarity
        }
    }
}

const ERROR_FLOOR: f64 = 1e-10;

/// `ys` are in {-1, +1}. Stops early once no stump beats chance.
pub fn train(xs: &[&[f64]], ys: &[f64], rounds: usize) -> Vec<Stump> {
    let n = xs.len();
    let dim = xs.first().map_or(0, |x| x.len());
    let mut weights = vec![1.0 / n as f64; n];

    // Per-feature row order, sorted once.
    let orders: Vec<Vec<usize>> = (0..dim)
        .map(|f| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| xs[a][f].total_cmp(&xs[b][f]).then(a.cmp(&b)));
            idx
        })
        .collect();

    let mut stumps = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let pos_total: f64 = weights.iter().zip(ys).filter(|(_, y)| **y > 0.0).map(|(w, _)| w).sum();
        let total: f64 = weights.iter().sum();
        let mut best: Option<(f64, usize, f64, f64)> = None;
        for (f, order) in orders.iter().enumerate() {
            let mut pos_left = 0.0;
            let mut neg_left = 0.0;
            // i rows at or below the threshold.
            for i in 0..=n {
                let splittable = i == 0 || i == n || xs[order[i - 1]][f] < xs[order[i]][f];
                if splittable {
                    let neg_total = total - pos_total;
                    // polarity +1: positives on the left and negatives on the right are wrong
                    let err_pos = pos_left + (neg_total - neg_left);
                    let err_neg = total - err_pos;
                    let threshold = match i {
                        0 => xs[order[0]][f] - 1.0,
                        i if i == n => xs[order[n - 1]][f],
                        i => 0.5 * (xs[order[i - 1]][f] + xs[order[i]][f]),
                    };
                    for (err, polarity) in [(err_pos, 1.0), (err_neg, -1.0)] {
                        if best.is_none_or(|(e, ..)| err < e) {
                            best = Some((err, f, threshold, polarity));
                        }
                    }
                }
                if i < n {
                    let row = order[i];
                    if ys[row] > 0.0 {
                        pos_left += weights[row];
                    } else {
                        neg_left += weights[row];
                    }
                }
            }
        }
        let Some((err, feature, threshold, polarity)) = best else { break };
        let err = (err / total).clamp(ERROR_FLOOR, 1.0 - ERROR_FLOOR);
        if err >= 0.5 {
            break;
        }
        let alpha = 0.5 * ((1.0 - err) / err).ln();
        let stump = Stump { feature, threshold, polarity, weight: alpha };
        let mut sum = 0.0;
        for ((w, x), y) in weights.iter_mut().zip(xs).zip(ys) {
            *w *= (-alpha * y * stump.vote(x)).exp();
            sum += *w;
        }
        weights.iter_mut().for_each(|w| *w /= sum);
        stumps.push(stump);
        if err <= ERROR_FLOOR {
            break;
        }
    }
    stumps
}

pub fn margin(stumps: &[Stump], x: &[f64]) -> f64 {
    stumps.iter().map(|s| s.weight * s.vote(x)).sum()
}

/// AdaBoost's additive score estimates half the log-odds, hence `sigmoid(2F)`.
pub fn probability(stumps: &[Stump], x: &[f64]) -> f64 {
    sigmoid(2.0 * margin(stumps, x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_split_is_found() {
        let rows: Vec<Vec<f64>> = vec![vec![0.0, 5.0], vec![1.0, 4.0], vec![2.0, 1.0], vec![3.0, 0.0]];
        let xs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let ys = [-1.0, -1.0, 1.0, 1.0];
        let stumps = train(&xs, &ys, 10);
        assert_eq!(stumps.len(), 1);
        let s = &stumps[0];
        assert_eq!((s.feature, s.threshold, s.polarity), (0, 1.5, 1.0));
        for (x, y) in xs.iter().zip(ys) {
            assert_eq!(probability(&stumps, x) > 0.5, y > 0.0);
        }
    }

    #[test]
    fn xor_like_data_needs_several_rounds() {
        let rows: Vec<Vec<f64>> = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0], vec![4.0], vec![5.0]];
        let xs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let ys = [1.0, 1.0, -1.0, -1.0, 1.0, 1.0];
        let stumps = train(&xs, &ys, 20);
        assert!(stumps.len() > 1);
        let correct = xs.iter().zip(ys).filter(|(x, y)| (margin(&stumps, x) > 0.0) == (*y > 0.0)).count();
        assert_eq!(correct, 6);
    }
}
