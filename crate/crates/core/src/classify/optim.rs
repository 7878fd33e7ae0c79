//! Deterministic full-batch gradient descent with Armijo backtracking.

/// A differentiable (or subdifferentiable) objective over a flat parameter vector.
pub trait Objective {
    fn value(&self, params: &[f64]) -> f64;
    fn gradient(&self, params: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    /// Sufficient-decrease constant of the Armijo condition.
    pub armijo: f64,
    pub initial_step: f64,
    pub min_step: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self { max_iterations: 1000, gradient_tolerance: 1e-6, armijo: 1e-4, initial_step: 1.0, min_step: 1e-16 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    /// No step length satisfied the Armijo condition.
    LineSearchStalled,
    NonFinite,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub params: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    /// Objective value after every accepted step, starting with the initial value.
    pub history: Vec<f64>,
}

pub fn minimize(objective: &dyn Objective, start: Vec<f64>, settings: &Settings) -> Outcome {
    let mut x = start;
    let mut fx = objective.value(&x);
    let mut history = vec![fx];
    if !fx.is_finite() {
        return Outcome { params: x, iterations: 0, termination: Termination::NonFinite, history };
    }
    let mut step = settings.initial_step;
    let mut candidate = vec![0.0; x.len()];
    for iteration in 0..settings.max_iterations {
        let g = objective.gradient(&x);
        let g_sq: f64 = g.iter().map(|v| v * v).sum();
        if !g_sq.is_finite() {
            return Outcome { params: x, iterations: iteration, termination: Termination::NonFinite, history };
        }
        if g_sq.sqrt() < settings.gradient_tolerance {
            return Outcome { params: x, iterations: iteration, termination: Termination::GradientTolerance, history };
        }
        loop {
            for ((c, xi), gi) in candidate.iter_mut().zip(&x).zip(&g) {
                *c = xi - step * gi;
            }
            let fc = objective.value(&candidate);
            if fc.is_finite() && fc <= fx - settings.armijo * step * g_sq {
                std::mem::swap(&mut x, &mut candidate);
                fx = fc;
                history.push(fx);
                step = (step * 2.0).min(1e6);
                break;
            }
            step *= 0.5;
            if step < settings.min_step {
                return Outcome {
                    params: x,
                    iterations: iteration,
                    termination: Termination::LineSearchStalled,
                    history,
                };
            }
        }
    }
    Outcome { params: x, iterations: settings.max_iterations, termination: Termination::MaxIterations, history }
}
