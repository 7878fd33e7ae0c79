//! Interview quality and experience measures computed from transcripts,
//! coding sheets and ratings.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialog::{Speaker, Turn};
use crate::text::{word_count, words};
use crate::transcript::TranscriptDoc;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no coded responses")]
    EmptyCoding,
    #[error("transcript has no turns")]
    EmptyTranscript,
    #[error("missing rating for {0}")]
    MissingRating(String),
    #[error("code {0} is outside 0-2")]
    CodeOutOfRange(u8),
    #[error("rating {0} is outside 1-5")]
    RatingOutOfRange(u8),
    #[error("coding sheet line {line}: {message}")]
    MalformedRow { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodedResponse {
    pub relevance: u8,
    pub clarity: u8,
    pub specificity: u8,
}

impl CodedResponse {
    pub fn new(relevance: u8, clarity: u8, specificity: u8) -> Result<Self, MetricsError> {
        for c in [relevance, clarity, specificity] {
            if c > 2 {
                return Err(MetricsError::CodeOutOfRange(c));
            }
        }
        Ok(Self { relevance, clarity, specificity })
    }

    pub fn product(&self) -> u32 {
        u32::from(self.relevance) * u32::from(self.clarity) * u32::from(self.specificity)
    }
}

/// Response Quality Index: sum of relevance x clarity x specificity.
pub fn rqi(coded: &[CodedResponse]) -> Result<u32, MetricsError> {
    if coded.is_empty() {
        return Err(MetricsError::EmptyCoding);
    }
    Ok(coded.iter().map(CodedResponse::product).sum())
}

/// Add-one smoothed unigram model with one extra outcome for unseen tokens.
///
/// With `V` known tokens and `N` total count, a known token has probability
/// `(c + 1) / (N + V + 1)` and any unknown token `1 / (N + V + 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnigramModel {
    counts: HashMap<String, u64>,
    total: u64,
}

impl UnigramModel {
    pub fn fit<'a>(corpus: impl IntoIterator<Item = &'a str>) -> Self {
        let mut counts = HashMap::new();
        let mut total = 0;
        for text in corpus {
            for w in words(text) {
                *counts.entry(w).or_insert(0) += 1;
                total += 1;
            }
        }
        Self { counts, total }
    }

    /// A model with the given vocabulary and no observations, so every
    /// outcome (including "unknown") is equally likely.
    pub fn uniform<'a>(vocab: impl IntoIterator<Item = &'a str>) -> Self {
        Self { counts: vocab.into_iter().map(|t| (t.to_string(), 0)).collect(), total: 0 }
    }

    pub fn vocab_size(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    fn denominator(&self) -> f64 {
        (self.total + self.counts.len() as u64 + 1) as f64
    }

    pub fn probability(&self, token: &str) -> f64 {
        (self.counts.get(token).copied().unwrap_or(0) + 1) as f64 / self.denominator()
    }

    pub fn unknown_probability(&self) -> f64 {
        1.0 / self.denominator()
    }
}

/// Total self-information, in bits, of every token in `responses`.
pub fn informativeness<S: AsRef<str>>(responses: &[S], model: &UnigramModel) -> f64 {
    responses
        .iter()
        .flat_map(|r| words(r.as_ref()))
        .map(|t| -model.probability(&t).log2())
        .sum()
}

/// Words typed by the user.
pub fn response_length(transcript: &[Turn]) -> Result<usize, MetricsError> {
    if transcript.is_empty() {
        return Err(MetricsError::EmptyTranscript);
    }
    Ok(transcript.iter().filter(|t| t.speaker == Speaker::User).map(|t| word_count(&t.text)).sum())
}

/// Minutes from the first to the last turn.
pub fn engagement_duration(transcript: &[Turn]) -> Result<f64, MetricsError> {
    let (first, last) = match (transcript.first(), transcript.last()) {
        (Some(f), Some(l)) => (f.at, l.at),
        _ => return Err(MetricsError::EmptyTranscript),
    };
    Ok(last.saturating_sub(first) as f64 / 60_000.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticipantRecord {
    pub session_id: String,
    pub coded: Vec<CodedResponse>,
    /// Comprehension ratings in agenda order; `None` when never given.
    pub topic_ratings: Vec<(String, Option<u8>)>,
    pub interest: Option<u8>,
    pub chat: Option<u8>,
}

impl ParticipantRecord {
    pub fn from_transcript(doc: &TranscriptDoc, coded: Vec<CodedResponse>) -> Self {
        Self {
            session_id: doc.session_id.clone(),
            coded,
            topic_ratings: doc.rated_topics.iter().map(|t| (t.clone(), doc.ratings.get(t).copied())).collect(),
            interest: doc.ratings.get("final:interest").copied(),
            chat: doc.ratings.get("final:chat").copied(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingIndices {
    #[serde(rename = "agentC")]
    pub agent_c: u32,
    #[serde(rename = "interestR")]
    pub interest_r: u8,
    #[serde(rename = "chatR")]
    pub chat_r: u8,
}

/// `agentC` is the sum of the per-topic comprehension ratings.
pub fn aggregate_ratings(record: &ParticipantRecord) -> Result<RatingIndices, MetricsError> {
    let check = |name: &str, r: Option<u8>| -> Result<u8, MetricsError> {
        let r = r.ok_or_else(|| MetricsError::MissingRating(name.to_string()))?;
        if (1..=5).contains(&r) {
            Ok(r)
        } else {
            Err(MetricsError::RatingOutOfRange(r))
        }
    };
    let mut agent_c = 0;
    for (topic, r) in &record.topic_ratings {
        agent_c += u32::from(check(topic, *r)?);
    }
    Ok(RatingIndices {
        agent_c,
        interest_r: check("final:interest", record.interest)?,
        chat_r: check("final:chat", record.chat)?,
    })
}

pub const CODING_HEADER: &str = "session\tresponse_index\trelevance\tclarity\tspecificity";

/// Session id to coded responses ordered by response index.
pub fn parse_coding_sheet(text: &str) -> Result<BTreeMap<String, Vec<CodedResponse>>, MetricsError> {
    let mut by_session: BTreeMap<String, BTreeMap<usize, CodedResponse>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim_end_matches('\r');
        if line.is_empty() || (i == 0 && line == CODING_HEADER) {
            continue;
        }
        let bad = |message: String| MetricsError::MalformedRow { line: line_no, message };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(bad(format!("expected 5 fields, found {}", f.len())));
        }
        let index: usize = f[1].trim().parse().map_err(|_| bad(format!("bad response index {:?}", f[1])))?;
        let mut codes = [0u8; 3];
        for (slot, raw) in codes.iter_mut().zip(&f[2..]) {
            *slot = raw.trim().parse().map_err(|_| bad(format!("bad code {raw:?}")))?;
        }
        let coded = CodedResponse::new(codes[0], codes[1], codes[2]).map_err(|e| bad(e.to_string()))?;
        if by_session.entry(f[0].to_string()).or_default().insert(index, coded).is_some() {
            return Err(bad(format!("duplicate response index {index}")));
        }
    }
    Ok(by_session.into_iter().map(|(s, m)| (s, m.into_values().collect())).collect())
}

/// One row of the per-participant report. Measures that cannot be computed
/// (no coding, missing ratings) are left empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantMetrics {
    pub session_id: String,
    pub duration_min: f64,
    pub response_words: usize,
    pub informativeness_bits: f64,
    pub rqi: Option<u32>,
    pub ratings: Option<RatingIndices>,
}

pub fn participant_metrics(
    doc: &TranscriptDoc,
    coded: &[CodedResponse],
    model: &UnigramModel,
) -> Result<ParticipantMetrics, MetricsError> {
    let responses: Vec<&str> = doc.turns.iter().filter(|t| t.speaker == Speaker::User).map(|t| t.text.as_str()).collect();
    let record = ParticipantRecord::from_transcript(doc, coded.to_vec());
    Ok(ParticipantMetrics {
        session_id: doc.session_id.clone(),
        duration_min: engagement_duration(&doc.turns)?,
        response_words: response_length(&doc.turns)?,
        informativeness_bits: informativeness(&responses, model),
        rqi: rqi(coded).ok(),
        ratings: aggregate_ratings(&record).ok(),
    })
}

pub const REPORT_HEADER: &str = "session\tduration_min\tresponse_words\tinformativeness_bits\trqi\tagentC\tinterestR\tchatR";

pub fn render_metrics_report(rows: &[ParticipantMetrics]) -> String {
    let opt = |v: Option<String>| v.unwrap_or_default();
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{}\t{:.2}\t{}\t{:.2}\t{}\t{}\t{}\t{}\n",
            r.session_id,
            r.duration_min,
            r.response_words,
            r.informativeness_bits,
            opt(r.rqi.map(|v| v.to_string())),
            opt(r.ratings.map(|v| v.agent_c.to_string())),
            opt(r.ratings.map(|v| v.interest_r.to_string())),
            opt(r.ratings.map(|v| v.chat_r.to_string())),
        ));
    }
    out
}
