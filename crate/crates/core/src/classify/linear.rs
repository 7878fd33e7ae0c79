//! Regularized linear objectives. Parameters are laid out as `[w_0 .. w_{d-1}, b]`;
//! the bias is not penalized.

use super::optim::Objective;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub fn margin(params: &[f64], x: &[f64]) -> f64 {
    let (w, b) = params.split_at(params.len() - 1);
    w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b[0]
}

fn penalty(params: &[f64], l2: f64) -> f64 {
    let w = &params[..params.len() - 1];
    0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>()
}

/// Rows with labels in {-1, +1}.
pub struct LabeledRows<'a> {
    pub xs: Vec<&'a [f64]>,
    pub ys: Vec<f64>,
}

impl LabeledRows<'_> {
    pub fn dimension(&self) -> usize {
        self.xs.first().map_or(0, |x| x.len())
    }
}

/// Mean log-loss plus `l2/2 * |w|^2`.
pub struct LogLoss<'a> {
    pub rows: &'a LabeledRows<'a>,
    pub l2: f64,
}

impl Objective for LogLoss<'_> {
    fn value(&self, params: &[f64]) -> f64 {
        let n = self.rows.ys.len() as f64;
        let loss: f64 =
            self.rows.xs.iter().zip(&self.rows.ys).map(|(x, y)| softplus(-y * margin(params, x))).sum::<f64>() / n;
        loss + penalty(params, self.l2)
    }

    fn gradient(&self, params: &[f64]) -> Vec<f64> {
        let n = self.rows.ys.len() as f64;
        let d = params.len() - 1;
        let mut g = vec![0.0; params.len()];
        for (x, y) in self.rows.xs.iter().zip(&self.rows.ys) {
            let coef = -y * sigmoid(-y * margin(params, x)) / n;
            for (gi, xi) in g[..d].iter_mut().zip(x.iter()) {
                *gi += coef * xi;
            }
            g[d] += coef;
        }
        for (gi, wi) in g[..d].iter_mut().zip(&params[..d]) {
            *gi += self.l2 * wi;
        }
        g
    }
}

/// Mean hinge loss plus `l2/2 * |w|^2`; the gradient is a subgradient at kinks.
pub struct HingeLoss<'a> {
    pub rows: &'a LabeledRows<'a>,
    pub l2: f64,
}

impl Objective for HingeLoss<'_> {
    fn value(&self, params: &[f64]) -> f64 {
        let n = self.rows.ys.len() as f64;
        let loss: f64 =
            self.rows.xs.iter().zip(&self.rows.ys).map(|(x, y)| (1.0 - y * margin(params, x)).max(0.0)).sum::<f64>()
                / n;
        loss + penalty(params, self.l2)
    }

    fn gradient(&self, params: &[f64]) -> Vec<f64> {
        let n = self.rows.ys.len() as f64;
        let d = params.len() - 1;
        let mut g = vec![0.0; params.len()];
        for (x, y) in self.rows.xs.iter().zip(&self.rows.ys) {
            if 1.0 - y * margin(params, x) > 0.0 {
                let coef = -y / n;
                for (gi, xi) in g[..d].iter_mut().zip(x.iter()) {
                    *gi += coef * xi;
                }
                g[d] += coef;
            }
        }
        for (gi, wi) in g[..d].iter_mut().zip(&params[..d]) {
            *gi += self.l2 * wi;
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_reference_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(1.0) - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-15);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((softplus(1000.0) - 1000.0).abs() < 1e-9);
        assert!(softplus(-1000.0) >= 0.0);
    }
}
