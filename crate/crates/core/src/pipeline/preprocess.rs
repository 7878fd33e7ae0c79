use std::collections::{BTreeSet, HashMap, HashSet};

use super::PipelineError;
use crate::text::words;

/// English function words plus conversational fillers. Tokens are compared
/// after apostrophes are stripped, so contractions appear without them.
pub const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any", "are", "as", "at",
    "be", "because", "been", "before", "being", "below", "between", "both", "but", "by", "can", "cant", "could",
    "did", "didnt", "do", "does", "doesnt", "doing", "dont", "down", "during", "each", "even", "few", "for", "from",
    "further", "get", "got", "had", "has", "have", "having", "he", "her", "here", "hers", "herself", "him",
    "himself", "his", "how", "i", "id", "if", "ill", "im", "in", "into", "is", "isnt", "it", "its", "itself",
    "ive", "just", "like", "lot", "lots", "may", "me", "might", "more", "most", "much", "must", "my", "myself",
    "no", "nor", "not", "now", "of", "off", "on", "once", "one", "only", "or", "other", "our", "ours",
    "ourselves", "out", "over", "own", "really", "same", "she", "should", "so", "some", "such", "than", "that",
    "thats", "the", "their", "theirs", "them", "themselves", "then", "there", "these", "they", "thing", "things",
    "this", "those", "through", "to", "too", "under", "until", "up", "us", "very", "was", "we", "well", "were",
    "what", "when", "where", "which", "while", "who", "whom", "why", "will", "with", "would", "yeah", "yes", "you",
    "your", "yours", "yourself", "yourselves",
];

#[derive(Debug, Clone)]
pub struct PreprocessConfig {
    pub stopwords: BTreeSet<String>,
    pub min_token_len: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self { stopwords: DEFAULT_STOPWORDS.iter().map(|s| s.to_string()).collect(), min_token_len: 2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenizedCorpus {
    pub doc_ids: Vec<String>,
    pub docs: Vec<Vec<usize>>,
    /// Token id to token.
    pub vocab: Vec<String>,
    pub raw: Vec<String>,
    /// Documents left without tokens; they are kept but skipped downstream.
    pub flagged: Vec<bool>,
}

impl TokenizedCorpus {
    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn tokens(&self, doc: usize) -> Vec<&str> {
        self.docs[doc].iter().map(|&t| self.vocab[t].as_str()).collect()
    }

    pub fn usable_docs(&self) -> usize {
        self.flagged.iter().filter(|f| !**f).count()
    }
}

pub fn preprocess(texts: &[(String, String)], config: &PreprocessConfig) -> Result<TokenizedCorpus, PipelineError> {
    if texts.is_empty() {
        return Err(PipelineError::EmptyInput);
    }
    let mut seen = HashSet::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut corpus = TokenizedCorpus { doc_ids: vec![], docs: vec![], vocab: vec![], raw: vec![], flagged: vec![] };
    for (id, text) in texts {
        if !seen.insert(id.as_str()) {
            return Err(PipelineError::DuplicateId(id.clone()));
        }
        let doc: Vec<usize> = words(text)
            .into_iter()
            .filter(|w| w.chars().count() >= config.min_token_len && !config.stopwords.contains(w))
            .map(|w| {
                let next = index.len();
                *index.entry(w.clone()).or_insert_with(|| {
                    corpus.vocab.push(w);
                    next
                })
            })
            .collect();
        corpus.flagged.push(doc.is_empty());
        corpus.docs.push(doc);
        corpus.doc_ids.push(id.clone());
        corpus.raw.push(text.clone());
    }
    Ok(corpus)
}
