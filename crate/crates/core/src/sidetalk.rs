//! Classifying user turns into answers and the kinds of side talk.
//!
//! Rules are data: the default rule file ships in `assets/sidetalk.toml` and
//! can be replaced wholesale with [`SideTalkConfig::parse`].

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::words;

const DEFAULT_CONFIG: &str = include_str!("../assets/sidetalk.toml");
const ENGLISH_CORPUS: &str = include_str!("../assets/english.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TurnKind {
    Answer,
    QuestionToBot,
    RepeatRequest,
    ClarifyRequest,
    Dodge,
    Gibberish,
}

impl TurnKind {
    pub const ALL: [TurnKind; 6] = [
        TurnKind::Answer,
        TurnKind::QuestionToBot,
        TurnKind::RepeatRequest,
        TurnKind::ClarifyRequest,
        TurnKind::Dodge,
        TurnKind::Gibberish,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Answer => "ANSWER",
            Self::QuestionToBot => "QUESTION_TO_BOT",
            Self::RepeatRequest => "REPEAT_REQUEST",
            Self::ClarifyRequest => "CLARIFY_REQUEST",
            Self::Dodge => "DODGE",
            Self::Gibberish => "GIBBERISH",
        }
    }
}

impl fmt::Display for TurnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TurnKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| format!("unknown turn kind {s:?}"))
    }
}

#[derive(Debug, Error)]
pub enum SideTalkError {
    #[error("side-talk config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Responses {
    pub repeat_prefix: String,
    pub steer_back: Vec<String>,
    pub clarify: Vec<String>,
    pub gibberish: Vec<String>,
    pub rating_reprompt: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SideTalkConfig {
    pub version: u32,
    pub gibberish_threshold: f64,
    pub min_gibberish_chars: usize,
    pub max_request_words: usize,
    pub dodge_max_other_words: usize,
    pub repeat_patterns: Vec<String>,
    pub clarify_patterns: Vec<String>,
    pub question_patterns: Vec<String>,
    pub dodge_patterns: Vec<String>,
    pub second_person: Vec<String>,
    pub first_person: Vec<String>,
    #[serde(default)]
    pub examples: Vec<String>,
    pub responses: Responses,
}

impl Default for SideTalkConfig {
    fn default() -> Self {
        Self::parse(DEFAULT_CONFIG).expect("bundled side-talk config is valid")
    }
}

impl SideTalkConfig {
    pub fn parse(text: &str) -> Result<Self, SideTalkError> {
        let cfg: Self = toml::from_str(text).map_err(|e| SideTalkError::Config(e.to_string()))?;
        if cfg.version != 1 {
            return Err(SideTalkError::Config(format!("unsupported version {}", cfg.version)));
        }
        let r = &cfg.responses;
        if r.steer_back.is_empty() || r.clarify.is_empty() || r.gibberish.is_empty() || r.rating_reprompt.is_empty() {
            return Err(SideTalkError::Config("every response list needs at least one entry".into()));
        }
        Ok(cfg)
    }
}

/// A word-sequence pattern; `exact` patterns must match the whole message.
#[derive(Debug, Clone)]
struct Pattern {
    words: Vec<String>,
    exact: bool,
}

impl Pattern {
    fn compile(raw: &str) -> Self {
        match raw.strip_prefix('=') {
            Some(rest) => Self { words: words(rest), exact: true },
            None => Self { words: words(raw), exact: false },
        }
    }

    /// Start index of the first match.
    fn find(&self, message: &[String]) -> Option<usize> {
        if self.words.is_empty() {
            return None;
        }
        if self.exact {
            return (message == self.words.as_slice()).then_some(0);
        }
        message.windows(self.words.len()).position(|w| w == self.words.as_slice())
    }
}

/// Character trigram model with linear interpolation down to a uniform floor.
#[derive(Debug, Clone)]
pub struct TrigramModel {
    trigrams: HashMap<[char; 3], u32>,
    bigram_contexts: HashMap<[char; 2], u32>,
    bigrams: HashMap<[char; 2], u32>,
    unigram_contexts: HashMap<char, u32>,
    unigrams: HashMap<char, u32>,
    total: u32,
}

const LAMBDAS: [f64; 4] = [0.6, 0.25, 0.1, 0.05];
const ALPHABET: f64 = 28.0;

/// Lowercase letters and digits (digits folded to '0'), single spaces between runs.
pub fn normalize_chars(text: &str) -> Vec<char> {
    let mut out = vec![' ', ' '];
    for c in text.chars().flat_map(char::to_lowercase) {
        let mapped = if c.is_ascii_digit() {
            '0'
        } else if c.is_alphabetic() {
            c
        } else if c == '\'' || c == '’' {
            continue;
        } else {
            ' '
        };
        if mapped == ' ' && out.last() == Some(&' ') {
            continue;
        }
        out.push(mapped);
    }
    if out.last() != Some(&' ') {
        out.push(' ');
    }
    out
}

impl TrigramModel {
    pub fn fit<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut m = Self {
            trigrams: HashMap::new(),
            bigram_contexts: HashMap::new(),
            bigrams: HashMap::new(),
            unigram_contexts: HashMap::new(),
            unigrams: HashMap::new(),
            total: 0,
        };
        for text in texts {
            let chars = normalize_chars(text);
            for w in chars.windows(3) {
                *m.trigrams.entry([w[0], w[1], w[2]]).or_default() += 1;
                *m.bigram_contexts.entry([w[0], w[1]]).or_default() += 1;
                *m.bigrams.entry([w[1], w[2]]).or_default() += 1;
                *m.unigram_contexts.entry(w[1]).or_default() += 1;
                *m.unigrams.entry(w[2]).or_default() += 1;
                m.total += 1;
            }
        }
        m
    }

    fn ratio(num: Option<&u32>, den: u32) -> f64 {
        num.map_or(0.0, |&n| n as f64 / den as f64)
    }

    /// Interpolated estimate; weight of an unseen context falls through to the next order.
    pub fn probability(&self, a: char, b: char, c: char) -> f64 {
        let mut carry = 0.0;
        let mut p = 0.0;
        match self.bigram_contexts.get(&[a, b]) {
            Some(&d) => p += LAMBDAS[0] * Self::ratio(self.trigrams.get(&[a, b, c]), d),
            None => carry += LAMBDAS[0],
        }
        match self.unigram_contexts.get(&b) {
            Some(&d) => {
                p += (LAMBDAS[1] + carry) * Self::ratio(self.bigrams.get(&[b, c]), d);
                carry = 0.0;
            }
            None => carry += LAMBDAS[1],
        }
        if self.total > 0 {
            p += (LAMBDAS[2] + carry) * Self::ratio(self.unigrams.get(&c), self.total);
            carry = 0.0;
        } else {
            carry += LAMBDAS[2];
        }
        p + (LAMBDAS[3] + carry) / ALPHABET
    }

    /// Mean natural-log probability per predicted character.
    pub fn score(&self, text: &str) -> f64 {
        let chars = normalize_chars(text);
        let n = chars.len().saturating_sub(2);
        if n == 0 {
            return 0.0;
        }
        chars.windows(3).map(|w| self.probability(w[0], w[1], w[2]).ln()).sum::<f64>() / n as f64
    }
}

/// The ordered rule cascade plus its gibberish model.
#[derive(Debug, Clone)]
pub struct TurnClassifier {
    pub config: SideTalkConfig,
    model: TrigramModel,
    repeat: Vec<Pattern>,
    clarify: Vec<Pattern>,
    question: Vec<Pattern>,
    dodge: Vec<Pattern>,
}

impl TurnClassifier {
    /// `extra_text` (typically the agenda's own wording) is added to the
    /// bundled English corpus when fitting the gibberish model.
    pub fn new<'a>(config: SideTalkConfig, extra_text: impl IntoIterator<Item = &'a str>) -> Self {
        let corpus = ENGLISH_CORPUS.lines().chain(extra_text);
        let model = TrigramModel::fit(corpus);
        let compile = |list: &[String]| list.iter().map(|p| Pattern::compile(p)).collect();
        Self {
            repeat: compile(&config.repeat_patterns),
            clarify: compile(&config.clarify_patterns),
            question: compile(&config.question_patterns),
            dodge: compile(&config.dodge_patterns),
            model,
            config,
        }
    }

    pub fn gibberish_score(&self, text: &str) -> f64 {
        self.model.score(text)
    }

    pub fn is_gibberish(&self, text: &str) -> bool {
        let significant = text.chars().filter(|c| c.is_alphanumeric()).count();
        significant >= self.config.min_gibberish_chars && self.gibberish_score(text) < self.config.gibberish_threshold
    }

    pub fn classify(&self, text: &str) -> TurnKind {
        let tokens = words(text);
        if tokens.is_empty() && !self.is_gibberish(text) {
            return TurnKind::Dodge;
        }
        if self.is_gibberish(text) {
            return TurnKind::Gibberish;
        }
        let short = tokens.len() <= self.config.max_request_words;
        let any = |patterns: &[Pattern]| patterns.iter().any(|p| p.find(&tokens).is_some());
        if short && any(&self.repeat) {
            return TurnKind::RepeatRequest;
        }
        if short && any(&self.clarify) {
            return TurnKind::ClarifyRequest;
        }
        if short && any(&self.question) {
            return TurnKind::QuestionToBot;
        }
        if self.addresses_bot(text, &tokens) {
            return TurnKind::QuestionToBot;
        }
        for p in &self.dodge {
            if p.find(&tokens).is_some() && tokens.len() - p.words.len() < self.config.dodge_max_other_words {
                return TurnKind::Dodge;
            }
        }
        TurnKind::Answer
    }

    /// A question mark at the end, a second-person pronoun, and no first-person words.
    fn addresses_bot(&self, text: &str, tokens: &[String]) -> bool {
        if !text.trim_end().ends_with('?') {
            return false;
        }
        let has = |list: &[String]| tokens.iter().any(|t| list.contains(t));
        has(&self.config.second_person) && !has(&self.config.first_person)
    }
}

impl Default for TurnClassifier {
    fn default() -> Self {
        Self::new(SideTalkConfig::default(), std::iter::empty())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn classifier() -> TurnClassifier {
        TurnClassifier::default()
    }

    #[test]
    fn books_exchange_turns() {
        let c = classifier();
        assert_eq!(c.classify("I don't know. What about you?"), TurnKind::QuestionToBot);
        assert_eq!(c.classify("What was your question?"), TurnKind::RepeatRequest);
        assert_eq!(c.classify("It's really hard to say since I read a lot."), TurnKind::Dodge);
        assert_eq!(c.classify("I guess my favorite kind would be sci-fis."), TurnKind::Answer);
    }

    #[test]
    fn other_side_talk() {
        let c = classifier();
        assert_eq!(c.classify("What do you mean?"), TurnKind::ClarifyRequest);
        assert_eq!(c.classify("Why do you want to know?"), TurnKind::QuestionToBot);
        assert_eq!(c.classify("Do you have a favorite color?"), TurnKind::QuestionToBot);
        assert_eq!(c.classify("I don't know."), TurnKind::Dodge);
        assert_eq!(c.classify("skip"), TurnKind::Dodge);
        assert_eq!(c.classify("   "), TurnKind::Dodge);
        assert_eq!(c.classify("Can you repeat that?"), TurnKind::RepeatRequest);
    }

    #[test]
    fn answers_stay_answers() {
        let c = classifier();
        for text in [
            "I like to spend time with my friends on weekends.",
            "My biggest challenge is finding a sense of purpose.",
            "I am honest and hard working.",
            "Reading, hiking and cooking.",
            "I don't know exactly when it started, but I have always loved painting landscapes and portraits of my family.",
            "yes",
            "5",
            "four",
        ] {
            assert_eq!(c.classify(text), TurnKind::Answer, "{text}");
        }
    }

    #[test]
    fn gibberish_oracle() {
        let c = classifier();
        let score = c.gibberish_score("asdkjh qweqw zzzk");
        assert!(score < -3.8, "score {score}");
        assert_eq!(c.classify("asdkjh qweqw zzzk"), TurnKind::Gibberish);
        assert!(!c.is_gibberish("zq"));
        for english in ["What was your question?", "I guess my favorite kind would be sci-fis.", "hello there"] {
            assert!(c.gibberish_score(english) > -3.8, "{english}: {}", c.gibberish_score(english));
        }
    }

    #[test]
    fn trigram_probabilities_sum_to_one() {
        let m = TrigramModel::fit(["the cat sat on the mat", "abc"]);
        let alphabet: Vec<char> = "abcdefghijklmnopqrstuvwxyz0 ".chars().collect();
        for ctx in [[' ', 't'], ['t', 'h'], ['q', 'q']] {
            let total: f64 = alphabet.iter().map(|&c| m.probability(ctx[0], ctx[1], c)).sum();
            assert!((total - 1.0).abs() < 1e-9, "{ctx:?}: {total}");
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for k in TurnKind::ALL {
            assert_eq!(k.as_str().parse::<TurnKind>().unwrap(), k);
        }
    }

    #[test]
    fn config_rejects_empty_response_lists() {
        let text = DEFAULT_CONFIG.replace(
            "gibberish = [\n  \"Hmm, I couldn't quite make that out. Could you answer in a few words?\",\n]",
            "gibberish = []",
        );
        assert!(SideTalkConfig::parse(&text).is_err());
    }
}
