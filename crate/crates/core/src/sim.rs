//! Scripted interviewees and lookup-table stand-ins for trained models.
//!
//! Used to run the same answer corpus against differently configured
//! agendas (for example, with and without intent bundles) and compare the
//! resulting transcripts.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agenda::{RatingTarget, TopicKind};
use crate::classify::{ClassifyError, ProbabilityModel};
use crate::dialog::{BotReply, Engine, Millis, Session};
use crate::encoder::{Embedding, EncoderError, TextEncoder};
use crate::transcript::TranscriptDoc;

/// Maps each known text to its own basis vector; anything else to the last axis.
#[derive(Debug, Clone)]
pub struct LookupEncoder {
    fingerprint: String,
    texts: Vec<String>,
}

impl LookupEncoder {
    pub fn new(fingerprint: impl Into<String>, texts: Vec<String>) -> Self {
        Self { fingerprint: fingerprint.into(), texts }
    }

    pub fn index_of(&self, text: &str) -> Option<usize> {
        self.texts.iter().position(|t| t == text.trim())
    }
}

impl TextEncoder for LookupEncoder {
    fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    fn dimension(&self) -> usize {
        self.texts.len() + 1
    }

    fn encode_text(&self, text: &str) -> Result<Embedding, EncoderError> {
        let mut values = vec![0.0; self.dimension()];
        values[self.index_of(text).unwrap_or(self.texts.len())] = 1.0;
        Ok(Embedding { values, fingerprint: self.fingerprint.clone() })
    }
}

/// Returns a fixed probability per basis axis of a [`LookupEncoder`] embedding.
#[derive(Debug, Clone)]
pub struct LookupModel {
    fingerprint: String,
    /// One entry per known text plus a final entry for unknown text.
    probs: Vec<f64>,
}

impl LookupModel {
    pub fn new(fingerprint: impl Into<String>, probs: Vec<f64>) -> Self {
        Self { fingerprint: fingerprint.into(), probs }
    }
}

impl ProbabilityModel for LookupModel {
    fn encoder_fingerprint(&self) -> &str {
        &self.fingerprint
    }

    fn predict_proba(&self, v: &Embedding) -> Result<f64, ClassifyError> {
        if v.fingerprint != self.fingerprint {
            return Err(ClassifyError::FingerprintMismatch { expected: self.fingerprint.clone(), actual: v.fingerprint.clone() });
        }
        if v.values.len() != self.probs.len() {
            return Err(ClassifyError::DimensionMismatch { expected: self.probs.len(), actual: v.values.len() });
        }
        let axis = v.values.iter().position(|&x| x > 0.5).unwrap_or(self.probs.len() - 1);
        Ok(self.probs[axis])
    }
}

/// What a scripted participant says.
#[derive(Debug, Clone)]
pub struct ScriptedUser {
    /// Candidate answers per open-ended topic id.
    pub answers: BTreeMap<String, Vec<String>>,
    /// Off-topic lines, used at most once per topic.
    pub side_talk: Vec<String>,
    /// Chance of opening a topic with side talk.
    pub side_talk_rate: f64,
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub transcript: TranscriptDoc,
    pub replies: Vec<BotReply>,
    pub session: Session,
}

/// Runs one interview to completion, then gives the two final ratings.
/// Turns are `step` milliseconds apart starting at `start`.
pub fn simulate(engine: &Engine, user: &ScriptedUser, id: &str, seed: u64, start: Millis, step: Millis) -> SimOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let (mut session, opening) = engine.start_session(id, seed, start);
    let mut replies = vec![opening];
    let mut now = start;
    let mut side_talked_on = usize::MAX;
    while !session.done {
        now += step;
        let topic = engine.current_topic(&session).expect("not done").clone();
        let text = if side_talked_on != session.cursor && !user.side_talk.is_empty() && rng.gen_bool(user.side_talk_rate) {
            side_talked_on = session.cursor;
            user.side_talk.choose(&mut rng).cloned().unwrap_or_default()
        } else if topic.kind == TopicKind::Rating {
            rng.gen_range(1..=5).to_string()
        } else {
            user.answers
                .get(&topic.id)
                .and_then(|pool| pool.choose(&mut rng).cloned())
                .unwrap_or_else(|| "I am not sure what to say about that, honestly.".to_string())
        };
        let reply = engine.handle_message(&mut session, &text, now).expect("session accepts messages until done");
        replies.push(reply);
    }
    for target in [RatingTarget::Interest, RatingTarget::Chat] {
        now += step;
        engine.record_rating(&mut session, target, rng.gen_range(1..=5), now).expect("final ratings are always allowed");
    }
    let transcript = TranscriptDoc::from_session(&session, engine.agenda());
    SimOutcome { transcript, replies, session }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::agenda::parse_agenda;
    use crate::listening::{BundleRegistry, Decision, IntentModelBundle};
    use crate::sidetalk::SideTalkConfig;

    #[test]
    fn lookup_models_pick_their_axis() {
        let enc = LookupEncoder::new("fp", vec!["a".into(), "b".into()]);
        let m = LookupModel::new("fp", vec![0.9, 0.1, 0.5]);
        assert_eq!(m.predict_proba(&enc.encode_text("b").unwrap()).unwrap(), 0.1);
        assert_eq!(m.predict_proba(&enc.encode_text("zzz").unwrap()).unwrap(), 0.5);
        let other = LookupModel::new("other", vec![0.0; 3]);
        assert!(other.predict_proba(&enc.encode_text("a").unwrap()).is_err());
    }

    #[test]
    fn bound_topic_uses_intent_templates() {
        let agenda = parse_agenda(
            r#"
version = 1
id = "sim"
[[topics]]
id = "q1"
question = "What is the biggest challenge you face now?"
bundle = "b"
[[topics.templates]]
intent = "c1"
technique = "summarizing"
texts = ["Change can be hard to cope with."]
"#,
        )
        .unwrap();
        let answers = vec!["Adjusting to a new city".to_string(), "Nothing much".to_string()];
        let enc = LookupEncoder::new("fp", answers.clone());
        let bundle = IntentModelBundle {
            id: "b".into(),
            topic_id: "q1".into(),
            relevance: Arc::new(LookupModel::new("fp", vec![0.9, 0.9, 0.1])),
            intents: vec![("c1".into(), Arc::new(LookupModel::new("fp", vec![0.95, 0.2, 0.0])))],
            threshold1: 0.5,
            threshold2: 0.6,
            encoder_fingerprint: "fp".into(),
        };
        let mut reg = BundleRegistry::new();
        reg.insert(bundle, Arc::new(enc)).unwrap();
        let engine = Engine::new(Arc::new(agenda), reg, SideTalkConfig::default()).unwrap();
        let user = ScriptedUser {
            answers: [("q1".to_string(), vec![answers[0].clone()])].into_iter().collect(),
            side_talk: vec![],
            side_talk_rate: 0.0,
        };
        let out = simulate(&engine, &user, "p1", 3, 0, 1000);
        let last = out.replies.last().unwrap();
        assert_eq!(last.interpretation.as_ref().unwrap().decision, Decision::RespondWithIntent);
        assert_eq!(last.messages[0], "Change can be hard to cope with.");
        assert!(out.transcript.done);
        assert_eq!(out.transcript.ratings.len(), 2);
    }
}
