use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{PipelineError, RankedResponse};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
    /// Only meaningful in review files: the row is discarded on import.
    Drop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Auto,
    Human,
    /// A document emptied by preprocessing, exported for completeness.
    Skipped,
}

macro_rules! string_enum {
    ($ty:ty, $($variant:path => $name:literal),+) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $($variant => $name),+ }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
        impl FromStr for $ty {
            type Err = ();
            fn from_str(s: &str) -> Result<Self, ()> {
                match s { $($name => Ok($variant),)+ _ => Err(()) }
            }
        }
    };
}

string_enum!(Label, Label::Positive => "positive", Label::Negative => "negative", Label::Drop => "drop");
string_enum!(Source, Source::Auto => "auto", Source::Human => "human", Source::Skipped => "skipped");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub text: String,
    pub topic_id: String,
    pub intent_id: String,
    pub label: Label,
    pub source: Source,
}

/// The top `floor(fraction * n)` responses become positives and as many
/// from the bottom become negatives.
pub fn auto_label(
    ranked: &[RankedResponse],
    fraction: f64,
    raw: &HashMap<String, String>,
    topic_id: &str,
    intent_id: &str,
) -> Result<Vec<LabeledExample>, PipelineError> {
    if !(fraction > 0.0 && fraction <= 0.5) {
        return Err(PipelineError::FractionOutOfRange(fraction));
    }
    let n = ranked.len();
    let take = (fraction * n as f64).floor() as usize;
    let make = |r: &RankedResponse, label| LabeledExample {
        text: raw.get(&r.doc_id).cloned().unwrap_or_default(),
        topic_id: topic_id.to_string(),
        intent_id: intent_id.to_string(),
        label,
        source: Source::Auto,
    };
    let positives = ranked[..take].iter().map(|r| make(r, Label::Positive));
    let negatives = ranked[n - take..].iter().map(|r| make(r, Label::Negative));
    Ok(positives.chain(negatives).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ranked(n: usize) -> (Vec<RankedResponse>, HashMap<String, String>) {
        let rows = (0..n)
            .map(|i| RankedResponse {
                doc_id: format!("d{i}"),
                lexrank_score: 0.0,
                centroid_sim: 0.0,
                combined: (n - i) as f64,
            })
            .collect();
        let raw = (0..n).map(|i| (format!("d{i}"), format!("text {i}"))).collect();
        (rows, raw)
    }

    #[test]
    fn slices_from_both_ends() {
        let (r, raw) = ranked(10);
        let out = auto_label(&r, 0.5, &raw, "t", "c1").unwrap();
        let pos: Vec<&str> = out.iter().filter(|e| e.label == Label::Positive).map(|e| e.text.as_str()).collect();
        let neg: Vec<&str> = out.iter().filter(|e| e.label == Label::Negative).map(|e| e.text.as_str()).collect();
        assert_eq!(pos, vec!["text 0", "text 1", "text 2", "text 3", "text 4"]);
        assert_eq!(neg, vec!["text 5", "text 6", "text 7", "text 8", "text 9"]);
    }

    #[test]
    fn counts_and_bounds() {
        let (r, raw) = ranked(100);
        let out = auto_label(&r, 0.2, &raw, "t", "c1").unwrap();
        assert_eq!(out.iter().filter(|e| e.label == Label::Positive).count(), 20);
        assert_eq!(out.iter().filter(|e| e.label == Label::Negative).count(), 20);
        assert!(out.iter().all(|e| e.source == Source::Auto));
        let (r, raw) = ranked(3);
        assert!(auto_label(&r, 0.2, &raw, "t", "c1").unwrap().is_empty());
        assert_eq!(auto_label(&r, 0.6, &raw, "t", "c1"), Err(PipelineError::FractionOutOfRange(0.6)));
        assert!(auto_label(&r, 0.0, &raw, "t", "c1").is_err());
    }

    #[test]
    fn names_round_trip() {
        for l in [Label::Positive, Label::Negative, Label::Drop] {
            assert_eq!(l.as_str().parse::<Label>(), Ok(l));
        }
        for s in [Source::Auto, Source::Human, Source::Skipped] {
            assert_eq!(s.as_str().parse::<Source>(), Ok(s));
        }
    }
}
