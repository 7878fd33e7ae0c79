//! Seeded synthetic datasets with a known separator along the first axis.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Dataset, Example};

pub const SYNTHETIC_FINGERPRINT: &str = "synthetic";

/// `n` rows split evenly between two unit-variance Gaussian clouds centred
/// at `+shift * e1` (positive) and `-shift * e1` (negative).
///
/// With `margin = Some(m)`, points with `y * x1 < m` are redrawn, making the
/// classes perfectly separable by the hyperplane `x1 = 0`.
pub fn gaussian_clouds(n: usize, dim: usize, shift: f64, seed: u64, margin: Option<f64>) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|i| {
            let label = i % 2 == 0;
            let sign = if label { 1.0 } else { -1.0 };
            let vector = loop {
                let mut v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                v[0] += sign * shift;
                match margin {
                    Some(m) if sign * v[0] < m => continue,
                    _ => break v,
                }
            };
            Example { id: format!("s{i}"), text: format!("synthetic row {i}"), vector, label }
        })
        .collect();
    Dataset { rows, encoder_fingerprint: SYNTHETIC_FINGERPRINT.to_string() }
}

/// The acceptance fixture: 1000 rows, 8 dimensions, separable with margin 0.5.
pub fn separable_fixture(seed: u64) -> Dataset {
    gaussian_clouds(1000, 8, 3.0, seed, Some(0.5))
}
