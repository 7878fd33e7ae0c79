//! Latent Dirichlet allocation by collapsed Gibbs sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{PipelineError, TokenizedCorpus};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdaConfig {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl LdaConfig {
    /// `alpha = 50 / k`, `beta = 0.01`, 1000 sweeps.
    pub fn new(k: usize) -> Self {
        Self { k, alpha: 50.0 / k as f64, beta: 0.01, iterations: 1000, seed: 0 }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let invalid = |name, message: &str| Err(PipelineError::InvalidParameter { name, message: message.to_string() });
        if self.k < 2 {
            return invalid("k", "must be at least 2");
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return invalid("alpha", "must be positive");
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return invalid("beta", "must be positive");
        }
        if self.iterations == 0 {
            return invalid("iterations", "must be at least 1");
        }
        Ok(())
    }
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self::new(5)
    }
}

pub fn intent_id(k: usize) -> String {
    format!("c{}", k + 1)
}

pub fn intent_index(id: &str, k: usize) -> Result<usize, PipelineError> {
    id.strip_prefix('c')
        .and_then(|n| n.parse::<usize>().ok())
        .filter(|&n| n >= 1 && n <= k)
        .map(|n| n - 1)
        .ok_or_else(|| PipelineError::UnknownIntent(id.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    /// K x V topic-word probabilities.
    pub phi: Vec<Vec<f64>>,
    /// D x K document-topic probabilities; flagged documents get the prior.
    pub theta: Vec<Vec<f64>>,
    /// Per intent, tokens by descending phi (ties by token id), at most 10.
    pub top_keywords: Vec<Vec<String>>,
    pub seed: u64,
    pub iterations: usize,
}

/// Gibbs sampler state; exposed so callers can observe every sweep.
#[derive(Debug, Clone)]
pub struct Sampler<'a> {
    corpus: &'a TokenizedCorpus,
    config: LdaConfig,
    vocab_size: usize,
    assignments: Vec<Vec<usize>>,
    doc_topic: Vec<Vec<u32>>,
    topic_word: Vec<Vec<u32>>,
    topic_total: Vec<u32>,
    total_tokens: usize,
    rng: ChaCha8Rng,
    weights: Vec<f64>,
}

impl<'a> Sampler<'a> {
    pub fn new(corpus: &'a TokenizedCorpus, config: LdaConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let usable = corpus.usable_docs();
        if usable < config.k {
            return Err(PipelineError::TooFewDocuments { needed: config.k, found: usable });
        }
        let used_vocab = {
            let mut seen = vec![false; corpus.vocab.len()];
            corpus.docs.iter().flatten().for_each(|&t| seen[t] = true);
            seen.iter().filter(|s| **s).count()
        };
        if used_vocab < config.k {
            return Err(PipelineError::DegenerateVocabulary { vocab: used_vocab, k: config.k });
        }
        let k = config.k;
        let v = corpus.vocab.len();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut doc_topic = vec![vec![0u32; k]; corpus.len()];
        let mut topic_word = vec![vec![0u32; v]; k];
        let mut topic_total = vec![0u32; k];
        let mut assignments = Vec::with_capacity(corpus.len());
        for (d, doc) in corpus.docs.iter().enumerate() {
            let z: Vec<usize> = doc.iter().map(|_| rng.gen_range(0..k)).collect();
            for (&w, &t) in doc.iter().zip(&z) {
                doc_topic[d][t] += 1;
                topic_word[t][w] += 1;
                topic_total[t] += 1;
            }
            assignments.push(z);
        }
        let total_tokens = corpus.docs.iter().map(Vec::len).sum();
        Ok(Self {
            corpus,
            config,
            vocab_size: v,
            assignments,
            doc_topic,
            topic_word,
            topic_total,
            total_tokens,
            rng,
            weights: vec![0.0; k],
        })
    }

    /// One pass over every token.
    pub fn sweep(&mut self) {
        let LdaConfig { k, alpha, beta, .. } = self.config;
        let v_beta = self.vocab_size as f64 * beta;
        for (d, doc) in self.corpus.docs.iter().enumerate() {
            for (i, &w) in doc.iter().enumerate() {
                let old = self.assignments[d][i];
                self.doc_topic[d][old] -= 1;
                self.topic_word[old][w] -= 1;
                self.topic_total[old] -= 1;

                let mut total = 0.0;
                for t in 0..k {
                    let p = (self.doc_topic[d][t] as f64 + alpha) * (self.topic_word[t][w] as f64 + beta)
                        / (self.topic_total[t] as f64 + v_beta);
                    total += p;
                    self.weights[t] = total;
                }
                let u = self.rng.gen::<f64>() * total;
                let new = self.weights.iter().position(|&c| u < c).unwrap_or(k - 1);

                self.assignments[d][i] = new;
                self.doc_topic[d][new] += 1;
                self.topic_word[new][w] += 1;
                self.topic_total[new] += 1;
            }
        }
        debug_assert!(self.counts_conserved());
    }

    /// Every count table accounts for exactly the corpus's tokens.
    pub fn counts_conserved(&self) -> bool {
        let by_topic: usize = self.topic_total.iter().map(|&n| n as usize).sum();
        let by_doc: usize = self.doc_topic.iter().flatten().map(|&n| n as usize).sum();
        let by_word: usize = self.topic_word.iter().flatten().map(|&n| n as usize).sum();
        let rows_match = self
            .topic_word
            .iter()
            .zip(&self.topic_total)
            .all(|(row, &n)| row.iter().map(|&c| c as usize).sum::<usize>() == n as usize);
        by_topic == self.total_tokens && by_doc == self.total_tokens && by_word == self.total_tokens && rows_match
    }

    pub fn total_tokens(&self) -> usize {
        self.total_tokens
    }

    /// Smoothed point estimates from the current counts.
    pub fn estimate(&self, iterations: usize) -> TopicModel {
        let LdaConfig { k, alpha, beta, seed, .. } = self.config;
        let v = self.vocab_size;
        let phi: Vec<Vec<f64>> = (0..k)
            .map(|t| {
                let den = self.topic_total[t] as f64 + v as f64 * beta;
                self.topic_word[t].iter().map(|&c| (c as f64 + beta) / den).collect()
            })
            .collect();
        let theta = self
            .doc_topic
            .iter()
            .map(|row| {
                let n: u32 = row.iter().sum();
                let den = n as f64 + k as f64 * alpha;
                row.iter().map(|&c| (c as f64 + alpha) / den).collect()
            })
            .collect();
        let top_keywords = phi
            .iter()
            .map(|row| {
                let mut ids: Vec<usize> = (0..v).collect();
                ids.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
                ids.into_iter().take(10).map(|i| self.corpus.vocab[i].clone()).collect()
            })
            .collect();
        TopicModel { k, alpha, beta, phi, theta, top_keywords, seed, iterations }
    }
}

impl TopicModel {
    pub fn fit(corpus: &TokenizedCorpus, config: LdaConfig) -> Result<Self, PipelineError> {
        let mut sampler = Sampler::new(corpus, config)?;
        for _ in 0..config.iterations {
            sampler.sweep();
        }
        Ok(sampler.estimate(config.iterations))
    }

    /// Argmax of a theta row, ties to the lower index.
    pub fn dominant(&self, doc: usize) -> usize {
        let row = &self.theta[doc];
        let mut best = 0;
        for (k, &p) in row.iter().enumerate() {
            if p > row[best] {
                best = k;
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentSummary {
    pub intent_id: String,
    pub keywords: Vec<String>,
    pub coverage: f64,
    pub member_doc_ids: Vec<String>,
}

/// Intents by descending coverage (share of usable documents whose dominant
/// intent it is); ties keep intent order.
pub fn rank_intents(model: &TopicModel, corpus: &TokenizedCorpus) -> Vec<IntentSummary> {
    let mut members: Vec<Vec<String>> = vec![Vec::new(); model.k];
    for d in (0..corpus.len()).filter(|&d| !corpus.flagged[d]) {
        members[model.dominant(d)].push(corpus.doc_ids[d].clone());
    }
    let total = corpus.usable_docs().max(1) as f64;
    let mut out: Vec<IntentSummary> = members
        .into_iter()
        .enumerate()
        .map(|(k, member_doc_ids)| IntentSummary {
            intent_id: intent_id(k),
            keywords: model.top_keywords[k].clone(),
            coverage: member_doc_ids.len() as f64 / total,
            member_doc_ids,
        })
        .collect();
    out.sort_by_key(|i| std::cmp::Reverse(i.member_doc_ids.len()));
    out
}

/// Usable documents whose weight on `intent` is strictly above `threshold`, in corpus order.
pub fn select_cluster(
    model: &TopicModel,
    corpus: &TokenizedCorpus,
    intent: &str,
    threshold: f64,
) -> Result<Vec<String>, PipelineError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(PipelineError::InvalidParameter { name: "threshold", message: format!("{threshold} not in (0, 1)") });
    }
    let k = intent_index(intent, model.k)?;
    Ok((0..corpus.len())
        .filter(|&d| !corpus.flagged[d] && model.theta[d][k] > threshold)
        .map(|d| corpus.doc_ids[d].clone())
        .collect())
}
