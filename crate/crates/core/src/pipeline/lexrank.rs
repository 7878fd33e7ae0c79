//! LexRank centrality combined with proximity to the cluster centroid.

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::encoder::cosine;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LexRankConfig {
    pub sim_threshold: f64,
    pub damping: f64,
    pub tol: f64,
    /// Weight of centrality in the combined score; the rest goes to centroid proximity.
    pub centrality_weight: f64,
    pub max_iterations: usize,
}

impl Default for LexRankConfig {
    fn default() -> Self {
        Self { sim_threshold: 0.1, damping: 0.85, tol: 1e-6, centrality_weight: 0.5, max_iterations: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedResponse {
    pub doc_id: String,
    pub lexrank_score: f64,
    pub centroid_sim: f64,
    pub combined: f64,
}

/// Row-stochastic transition matrix of the thresholded similarity graph.
pub(crate) fn transition_matrix(vectors: &[&[f64]], sim_threshold: f64) -> Vec<Vec<f64>> {
    let n = vectors.len();
    (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n)
                .map(|j| {
                    let s = cosine(vectors[i], vectors[j]);
                    if s >= sim_threshold {
                        s
                    } else {
                        0.0
                    }
                })
                .collect();
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                row.iter_mut().for_each(|x| *x /= total);
            } else {
                row.iter_mut().for_each(|x| *x = 1.0 / n as f64);
            }
            row
        })
        .collect()
}

/// Stationary distribution of the damped walk, by power iteration.
pub(crate) fn stationary(matrix: &[Vec<f64>], damping: f64, tol: f64, max_iterations: usize) -> Vec<f64> {
    let n = matrix.len();
    let teleport = (1.0 - damping) / n as f64;
    let mut p = vec![1.0 / n as f64; n];
    for _ in 0..max_iterations {
        let mut next = vec![teleport; n];
        for (i, row) in matrix.iter().enumerate() {
            for (j, &m) in row.iter().enumerate() {
                next[j] += damping * m * p[i];
            }
        }
        let delta: f64 = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum();
        p = next;
        if delta < tol {
            break;
        }
    }
    let total: f64 = p.iter().sum();
    p.iter().map(|x| x / total).collect()
}

pub fn lexrank(cluster: &[(String, Vec<f64>)], config: &LexRankConfig) -> Result<Vec<RankedResponse>, PipelineError> {
    if cluster.is_empty() {
        return Err(PipelineError::EmptyCluster);
    }
    let n = cluster.len();
    let vectors: Vec<&[f64]> = cluster.iter().map(|(_, v)| v.as_slice()).collect();
    let matrix = transition_matrix(&vectors, config.sim_threshold);
    let scores = stationary(&matrix, config.damping, config.tol, config.max_iterations);
    let dim = vectors[0].len();
    let mut centroid = vec![0.0; dim];
    for v in &vectors {
        centroid.iter_mut().zip(v.iter()).for_each(|(c, x)| *c += x / n as f64);
    }
    let w = config.centrality_weight;
    let mut out: Vec<RankedResponse> = cluster
        .iter()
        .zip(scores)
        .map(|((id, v), score)| {
            let centroid_sim = if n == 1 { 1.0 } else { cosine(v, &centroid) };
            RankedResponse {
                doc_id: id.clone(),
                lexrank_score: score,
                centroid_sim,
                combined: w * score * n as f64 + (1.0 - w) * (centroid_sim + 1.0) / 2.0,
            }
        })
        .collect();
    out.sort_by(|a, b| b.combined.total_cmp(&a.combined).then_with(|| a.doc_id.cmp(&b.doc_id)));
    Ok(out)
}
