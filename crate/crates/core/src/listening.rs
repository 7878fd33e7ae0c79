//! Active listening: interpret an answer through a topic's relevance and
//! intent classifiers, then respond with a template for the best intent.
//!
//! The decision rule: an answer is relevant when `P(relevant) > threshold1`;
//! a relevant answer gets an intent response when the most probable intent
//! has `P > threshold2`. Both comparisons are strict.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agenda::{Agenda, BundleCatalog, Topic};
use crate::classify::{BinaryClassifier, ClassifyError, ProbabilityModel};
use crate::encoder::{EncoderError, EncoderModel, TextEncoder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Technique {
    Paraphrasing,
    VerbalizingEmotions,
    Summarizing,
    Encouraging,
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Paraphrasing => "paraphrasing",
            Self::VerbalizingEmotions => "verbalizing_emotions",
            Self::Summarizing => "summarizing",
            Self::Encouraging => "encouraging",
        })
    }
}

#[derive(Debug, Error)]
pub enum ListeningError {
    #[error("encoder {actual} does not match bundle encoder {expected}")]
    FingerprintMismatch { expected: String, actual: String },
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error("topic \"{0}\" has no templates for this response")]
    NoTemplates(String),
    #[error("unknown topic \"{0}\"")]
    UnknownTopic(String),
    #[error("bundle is for topic \"{bundle}\", not \"{topic}\"")]
    TopicMismatch { bundle: String, topic: String },
    #[error("bundle file: {0}")]
    BundleFile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Decision {
    RespondWithIntent,
    RelevantNoIntent,
    Irrelevant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interpretation {
    pub relevance_prob: f64,
    /// In bundle intent order.
    pub intent_probs: Vec<(String, f64)>,
    pub best_intent: Option<String>,
    pub decision: Decision,
}

/// Applies the threshold rule to already-computed probabilities.
pub fn decide(relevance_prob: f64, intent_probs: Vec<(String, f64)>, threshold1: f64, threshold2: f64) -> Interpretation {
    let mut best: Option<(usize, f64)> = None;
    for (i, (_, p)) in intent_probs.iter().enumerate() {
        // strict > keeps the earliest intent on ties
        if best.is_none_or(|(_, bp)| *p > bp) {
            best = Some((i, *p));
        }
    }
    let (decision, best_intent) = if relevance_prob <= threshold1 {
        (Decision::Irrelevant, None)
    } else {
        match best {
            Some((i, p)) if p > threshold2 => (Decision::RespondWithIntent, Some(intent_probs[i].0.clone())),
            _ => (Decision::RelevantNoIntent, None),
        }
    };
    Interpretation { relevance_prob, intent_probs, best_intent, decision }
}

/// The deployable unit for one topic: relevance model, intent models, thresholds.
#[derive(Clone)]
pub struct IntentModelBundle {
    pub id: String,
    pub topic_id: String,
    pub relevance: Arc<dyn ProbabilityModel>,
    pub intents: Vec<(String, Arc<dyn ProbabilityModel>)>,
    pub threshold1: f64,
    pub threshold2: f64,
    pub encoder_fingerprint: String,
}

impl fmt::Debug for IntentModelBundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IntentModelBundle")
            .field("id", &self.id)
            .field("topic_id", &self.topic_id)
            .field("intents", &self.intents.iter().map(|(i, _)| i).collect::<Vec<_>>())
            .field("threshold1", &self.threshold1)
            .field("threshold2", &self.threshold2)
            .field("encoder_fingerprint", &self.encoder_fingerprint)
            .finish()
    }
}

impl IntentModelBundle {
    pub fn intent_ids(&self) -> Vec<String> {
        self.intents.iter().map(|(id, _)| id.clone()).collect()
    }

    fn check_fingerprints(&self) -> Result<(), ListeningError> {
        let models = std::iter::once(&self.relevance).chain(self.intents.iter().map(|(_, m)| m));
        for m in models {
            if m.encoder_fingerprint() != self.encoder_fingerprint {
                return Err(ListeningError::FingerprintMismatch {
                    expected: self.encoder_fingerprint.clone(),
                    actual: m.encoder_fingerprint().to_string(),
                });
            }
        }
        Ok(())
    }
}

pub fn interpret(
    bundle: &IntentModelBundle,
    encoder: &dyn TextEncoder,
    user_text: &str,
) -> Result<Interpretation, ListeningError> {
    if encoder.fingerprint() != bundle.encoder_fingerprint {
        return Err(ListeningError::FingerprintMismatch {
            expected: bundle.encoder_fingerprint.clone(),
            actual: encoder.fingerprint().to_string(),
        });
    }
    let v = encoder.encode_text(user_text)?;
    let relevance_prob = bundle.relevance.predict_proba(&v)?;
    let intent_probs = bundle
        .intents
        .iter()
        .map(|(id, m)| Ok((id.clone(), m.predict_proba(&v)?)))
        .collect::<Result<Vec<_>, ClassifyError>>()?;
    Ok(decide(relevance_prob, intent_probs, bundle.threshold1, bundle.threshold2))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub text: String,
    /// `None` for the topic's default (acknowledgement) templates.
    pub technique: Option<Technique>,
}

/// Picks a response template for an interpretation; `None` takes the
/// default-template path (topics without a bundle).
///
/// The template used on the previous turn is skipped whenever another
/// candidate exists.
pub fn generate_response<R: Rng + ?Sized>(
    topic: &Topic,
    interp: Option<&Interpretation>,
    rng: &mut R,
    previous: Option<&str>,
) -> Result<Response, ListeningError> {
    let candidates: Vec<(&str, Option<Technique>)> = match interp.map(|i| (i.decision, i.best_intent.as_deref())) {
        Some((Decision::RespondWithIntent, Some(intent))) => {
            topic.templates_for(intent).into_iter().map(|(t, tech)| (t, Some(tech))).collect()
        }
        Some((Decision::RelevantNoIntent, _)) => {
            topic.encourage_templates.iter().map(|t| (t.as_str(), Some(Technique::Encouraging))).collect()
        }
        _ => topic.default_templates.iter().map(|t| (t.as_str(), None)).collect(),
    };
    let fresh: Vec<_> = match previous {
        Some(prev) if candidates.len() >= 2 => candidates.iter().filter(|(t, _)| *t != prev).cloned().collect(),
        _ => candidates.clone(),
    };
    let pool = if fresh.is_empty() { &candidates } else { &fresh };
    let (text, technique) = pool.choose(rng).ok_or_else(|| ListeningError::NoTemplates(topic.id.clone()))?;
    Ok(Response { text: text.to_string(), technique: *technique })
}

/// Returns a copy of `agenda` whose topic `topic_id` references `bundle`.
pub fn bind_bundle(agenda: &Agenda, topic_id: &str, bundle: &IntentModelBundle) -> Result<Agenda, ListeningError> {
    let index = agenda.topic_index(topic_id).ok_or_else(|| ListeningError::UnknownTopic(topic_id.to_string()))?;
    if bundle.topic_id != topic_id {
        return Err(ListeningError::TopicMismatch { bundle: bundle.topic_id.clone(), topic: topic_id.to_string() });
    }
    let mut out = agenda.clone();
    out.topics[index].bundle_ref = Some(bundle.id.clone());
    Ok(out)
}

/// A bundle together with the encoder its classifiers were trained under.
#[derive(Clone)]
pub struct LoadedBundle {
    pub bundle: IntentModelBundle,
    pub encoder: Arc<dyn TextEncoder>,
}

impl fmt::Debug for LoadedBundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LoadedBundle").field("bundle", &self.bundle).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Default)]
pub struct BundleRegistry {
    bundles: HashMap<String, Arc<LoadedBundle>>,
}

impl BundleRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, bundle: IntentModelBundle, encoder: Arc<dyn TextEncoder>) -> Result<(), ListeningError> {
        bundle.check_fingerprints()?;
        if encoder.fingerprint() != bundle.encoder_fingerprint {
            return Err(ListeningError::FingerprintMismatch {
                expected: bundle.encoder_fingerprint.clone(),
                actual: encoder.fingerprint().to_string(),
            });
        }
        self.bundles.insert(bundle.id.clone(), Arc::new(LoadedBundle { bundle, encoder }));
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Arc<LoadedBundle>> {
        self.bundles.get(id)
    }

    pub fn is_empty(&self) -> bool {
        self.bundles.is_empty()
    }

    pub fn catalog(&self) -> BundleCatalog {
        self.bundles.iter().map(|(id, b)| (id.clone(), b.bundle.intent_ids())).collect()
    }
}

// Bundle file (TOML), paths relative to the file's directory:
//
//   version = 1
//   id = "top-challenge"
//   topic = "q4"
//   threshold1 = 0.5
//   threshold2 = 0.6
//   encoder = "encoder.json"
//   encoder_fingerprint = "…"
//   relevance = "relevance.model.json"
//   [[intents]]
//   id = "c1"
//   model = "c1.model.json"

pub const BUNDLE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleFile {
    pub version: u32,
    pub id: String,
    pub topic: String,
    pub threshold1: Option<f64>,
    pub threshold2: Option<f64>,
    pub encoder: PathBuf,
    pub encoder_fingerprint: String,
    pub relevance: PathBuf,
    #[serde(default)]
    pub intents: Vec<BundleIntent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleIntent {
    pub id: String,
    pub model: PathBuf,
}

impl BundleFile {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("bundle file serializes")
    }

    pub fn parse(text: &str) -> Result<Self, ListeningError> {
        let file: Self = toml::from_str(text).map_err(|e| ListeningError::BundleFile(e.to_string()))?;
        if file.version != BUNDLE_VERSION {
            return Err(ListeningError::BundleFile(format!("unsupported bundle version {}", file.version)));
        }
        Ok(file)
    }
}

/// Loads a bundle file and every model it references. Missing thresholds
/// fall back to `default_thresholds`.
pub fn load_bundle(path: &Path, default_thresholds: (f64, f64)) -> Result<LoadedBundle, ListeningError> {
    let text = std::fs::read_to_string(path).map_err(|e| ListeningError::BundleFile(format!("{}: {e}", path.display())))?;
    let file = BundleFile::parse(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let encoder = EncoderModel::load(&base.join(&file.encoder))?;
    if encoder.fingerprint != file.encoder_fingerprint {
        return Err(ListeningError::FingerprintMismatch {
            expected: file.encoder_fingerprint.clone(),
            actual: encoder.fingerprint.clone(),
        });
    }
    let fp = Some(file.encoder_fingerprint.as_str());
    let relevance: Arc<dyn ProbabilityModel> = Arc::new(BinaryClassifier::load(&base.join(&file.relevance), fp)?);
    let mut intents = Vec::new();
    for intent in &file.intents {
        let model: Arc<dyn ProbabilityModel> = Arc::new(BinaryClassifier::load(&base.join(&intent.model), fp)?);
        intents.push((intent.id.clone(), model));
    }
    let threshold1 = file.threshold1.unwrap_or(default_thresholds.0);
    let threshold2 = file.threshold2.unwrap_or(default_thresholds.1);
    for t in [threshold1, threshold2] {
        if !(0.0..=1.0).contains(&t) {
            return Err(ListeningError::BundleFile(format!("threshold {t} outside [0, 1]")));
        }
    }
    let bundle = IntentModelBundle {
        id: file.id,
        topic_id: file.topic,
        relevance,
        intents,
        threshold1,
        threshold2,
        encoder_fingerprint: file.encoder_fingerprint,
    };
    bundle.check_fingerprints()?;
    Ok(LoadedBundle { bundle, encoder: Arc::new(encoder) })
}

/// Training rows for a topic's relevance model: the topic's own responses
/// are positives; an equal number of negatives is drawn from other topics'
/// responses and the side-talk corpus. Returns (text, label) pairs.
pub fn relevance_training_rows<R: Rng + ?Sized>(
    responses_by_topic: &BTreeMap<String, Vec<String>>,
    topic_id: &str,
    side_talk: &[String],
    rng: &mut R,
) -> Vec<(String, bool)> {
    let positives = responses_by_topic.get(topic_id).cloned().unwrap_or_default();
    let mut pool: Vec<&String> = responses_by_topic
        .iter()
        .filter(|(t, _)| t.as_str() != topic_id)
        .flat_map(|(_, texts)| texts)
        .chain(side_talk)
        .collect();
    pool.shuffle(rng);
    let n = positives.len().min(pool.len());
    let mut rows: Vec<(String, bool)> = positives.into_iter().take(n).map(|t| (t, true)).collect();
    rows.extend(pool.into_iter().take(n).map(|t| (t.clone(), false)));
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agenda::{parse_agenda, TemplateSet};
    use crate::encoder::Embedding;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Constant(f64);

    impl ProbabilityModel for Constant {
        fn encoder_fingerprint(&self) -> &str {
            "stub"
        }
        fn predict_proba(&self, _: &Embedding) -> Result<f64, ClassifyError> {
            Ok(self.0)
        }
    }

    struct StubEncoder;

    impl TextEncoder for StubEncoder {
        fn fingerprint(&self) -> &str {
            "stub"
        }
        fn dimension(&self) -> usize {
            1
        }
        fn encode_text(&self, _: &str) -> Result<Embedding, EncoderError> {
            Ok(Embedding { values: vec![1.0], fingerprint: "stub".into() })
        }
    }

    fn stub_bundle(relevance: f64, intents: &[(&str, f64)], t1: f64, t2: f64) -> IntentModelBundle {
        IntentModelBundle {
            id: "top-challenge".into(),
            topic_id: "q4".into(),
            relevance: Arc::new(Constant(relevance)),
            intents: intents.iter().map(|(id, p)| (id.to_string(), Arc::new(Constant(*p)) as Arc<dyn ProbabilityModel>)).collect(),
            threshold1: t1,
            threshold2: t2,
            encoder_fingerprint: "stub".into(),
        }
    }

    #[test]
    fn best_intent_is_selected() {
        let b = stub_bundle(0.9, &[("c1", 0.2), ("c2", 0.3), ("c3", 0.8)], 0.5, 0.6);
        let i = interpret(&b, &StubEncoder, "starting a new job").unwrap();
        assert_eq!(i.decision, Decision::RespondWithIntent);
        assert_eq!(i.best_intent.as_deref(), Some("c3"));
    }

    #[test]
    fn irrelevant_regardless_of_intents() {
        let b = stub_bundle(0.4, &[("c1", 0.99)], 0.5, 0.6);
        let i = interpret(&b, &StubEncoder, "x").unwrap();
        assert_eq!(i.decision, Decision::Irrelevant);
        assert_eq!(i.best_intent, None);
    }

    #[test]
    fn relevant_without_confident_intent() {
        let b = stub_bundle(0.9, &[("c1", 0.5), ("c2", 0.5), ("c3", 0.5)], 0.5, 0.6);
        assert_eq!(interpret(&b, &StubEncoder, "x").unwrap().decision, Decision::RelevantNoIntent);
    }

    #[test]
    fn thresholds_are_strict() {
        assert_eq!(decide(0.5, vec![("a".into(), 0.9)], 0.5, 0.6).decision, Decision::Irrelevant);
        assert_eq!(decide(0.51, vec![("a".into(), 0.6)], 0.5, 0.6).decision, Decision::RelevantNoIntent);
    }

    #[test]
    fn argmax_ties_follow_bundle_order() {
        let i = decide(0.9, vec![("b".into(), 0.8), ("a".into(), 0.8)], 0.5, 0.6);
        assert_eq!(i.best_intent.as_deref(), Some("b"));
    }

    #[test]
    fn encoder_mismatch_is_refused() {
        let mut b = stub_bundle(0.9, &[], 0.5, 0.6);
        b.encoder_fingerprint = "other".into();
        assert!(matches!(interpret(&b, &StubEncoder, "x"), Err(ListeningError::FingerprintMismatch { .. })));
    }

    fn challenge_topic() -> Topic {
        let mut agenda = parse_agenda(
            "version = 1\nid = \"a\"\n[[topics]]\nid = \"q4\"\nquestion = \"What is the biggest challenge you face now?\"\n",
        )
        .unwrap();
        let mut topic = agenda.topics.remove(0);
        topic.templates = vec![TemplateSet {
            intent: "coping with changes".into(),
            technique: Technique::Summarizing,
            texts: vec![
                "Your description really resonates with me as I also struggle coping with changes or new settings.".into(),
                "I would feel the same in your situation since handling new things is always challenging. Thanks for sharing.".into(),
                "Coping with changes is always hard and I wish I could help you in such situations once I become smarter.".into(),
            ],
        }];
        topic
    }

    #[test]
    fn summarizing_templates_for_coping_with_changes() {
        let topic = challenge_topic();
        let interp = decide(0.9, vec![("coping with changes".into(), 0.8)], 0.5, 0.6);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let allowed = &topic.templates[0].texts;
        let mut previous: Option<String> = None;
        for _ in 0..50 {
            let r = generate_response(&topic, Some(&interp), &mut rng, previous.as_deref()).unwrap();
            assert!(allowed.contains(&r.text));
            assert_eq!(r.technique, Some(Technique::Summarizing));
            assert_ne!(Some(&r.text), previous.as_ref());
            previous = Some(r.text);
        }
    }

    #[test]
    fn single_template_is_always_used() {
        let mut topic = challenge_topic();
        topic.templates[0].texts.truncate(1);
        let interp = decide(0.9, vec![("coping with changes".into(), 0.8)], 0.5, 0.6);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let only = topic.templates[0].texts[0].clone();
        for _ in 0..5 {
            let r = generate_response(&topic, Some(&interp), &mut rng, Some(&only)).unwrap();
            assert_eq!(r.text, only);
        }
    }

    #[test]
    fn response_choice_is_seeded() {
        let topic = challenge_topic();
        let interp = decide(0.9, vec![("coping with changes".into(), 0.8)], 0.5, 0.6);
        let pick = |seed| generate_response(&topic, Some(&interp), &mut ChaCha8Rng::seed_from_u64(seed), None).unwrap();
        assert_eq!(pick(7), pick(7));
    }

    #[test]
    fn fallback_paths() {
        let topic = challenge_topic();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let none = generate_response(&topic, None, &mut rng, None).unwrap();
        assert!(topic.default_templates.contains(&none.text) && none.technique.is_none());
        let irrelevant = decide(0.1, vec![], 0.5, 0.6);
        assert!(generate_response(&topic, Some(&irrelevant), &mut rng, None).unwrap().technique.is_none());
        let vague = decide(0.9, vec![("x".into(), 0.1)], 0.5, 0.6);
        let r = generate_response(&topic, Some(&vague), &mut rng, None).unwrap();
        assert!(topic.encourage_templates.contains(&r.text));
        assert_eq!(r.technique, Some(Technique::Encouraging));
    }

    #[test]
    fn missing_templates_error() {
        let topic = challenge_topic();
        let interp = decide(0.9, vec![("unknown".into(), 0.9)], 0.5, 0.6);
        assert!(matches!(
            generate_response(&topic, Some(&interp), &mut ChaCha8Rng::seed_from_u64(0), None),
            Err(ListeningError::NoTemplates(_))
        ));
    }

    #[test]
    fn binding() {
        let agenda = parse_agenda(
            "version = 1\nid = \"a\"\n[[topics]]\nid = \"q2\"\nquestion = \"A?\"\n[[topics]]\nid = \"q4\"\nquestion = \"B?\"\n",
        )
        .unwrap();
        let bundle = stub_bundle(0.9, &[], 0.5, 0.6);
        let bound = bind_bundle(&agenda, "q4", &bundle).unwrap();
        assert_eq!(bound.topic("q4").unwrap().bundle_ref.as_deref(), Some("top-challenge"));
        assert_eq!(agenda.topic("q4").unwrap().bundle_ref, None);
        assert!(matches!(bind_bundle(&agenda, "q9", &bundle), Err(ListeningError::UnknownTopic(_))));
        let mut q2 = bundle.clone();
        q2.topic_id = "q2".into();
        assert!(matches!(bind_bundle(&agenda, "q4", &q2), Err(ListeningError::TopicMismatch { .. })));
    }

    #[test]
    fn relevance_rows_are_balanced() {
        let by_topic = BTreeMap::from([
            ("q1".to_string(), vec!["a".to_string(), "b".to_string(), "c".to_string()]),
            ("q2".to_string(), vec!["d".to_string()]),
        ]);
        let side = vec!["what about you".to_string(), "skip".to_string()];
        let rows = relevance_training_rows(&by_topic, "q1", &side, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(rows.iter().filter(|r| r.1).count(), 3);
        assert_eq!(rows.iter().filter(|r| !r.1).count(), 3);
        assert!(rows.iter().filter(|r| !r.1).all(|r| !["a", "b", "c"].contains(&r.0.as_str())));
    }
}
