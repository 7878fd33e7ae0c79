//! The interview state machine.
//!
//! An [`Engine`] holds everything shared between sessions (agenda, bundles,
//! side-talk rules). A [`Session`] is the per-interviewee state; it is only
//! ever mutated through the engine, one message at a time.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agenda::{validate_agenda, Agenda, RatingTarget, Topic, TopicKind, Violation};
use crate::listening::{generate_response, interpret, BundleRegistry, Interpretation, Technique};
use crate::sidetalk::{SideTalkConfig, TurnClassifier};
use crate::text::words;

pub use crate::sidetalk::TurnKind;

/// Milliseconds since an arbitrary epoch chosen by the caller.
pub type Millis = u64;

#[derive(Debug, Error, PartialEq)]
pub enum DialogError {
    #[error("invalid agenda: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidAgenda(Vec<Violation>),
    #[error("the interview is already finished")]
    SessionDone,
    #[error("no question is pending")]
    NoPendingQuestion,
    #[error("message is empty")]
    EmptyMessage,
    #[error("score {0} is outside 1-5")]
    ScoreOutOfRange(i64),
    #[error("topic {0:?} has not been asked yet")]
    TopicNotYetAsked(String),
    #[error("unknown topic {0:?}")]
    UnknownTopic(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Bot,
    User,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
    pub at: Millis,
    /// Present exactly on user turns.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<TurnKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interpretation: Option<Interpretation>,
    /// Topic the turn belongs to; `None` for the closing message.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topic_id: Option<String>,
    /// Set on the user turn that was taken as the topic's answer.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub accepted: bool,
}

/// How the bot handled a user message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BotAction {
    Opened,
    Deflected,
    RepeatedQuestion,
    Clarified,
    Encouraged,
    AskedForRealAnswer,
    Reprompted,
    Answered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BotReply {
    pub messages: Vec<String>,
    pub action: BotAction,
    /// The classified user turn, absent on the opening reply.
    pub kind: Option<TurnKind>,
    pub interpretation: Option<Interpretation>,
    /// Technique of the active-listening response, when one was given.
    pub technique: Option<Technique>,
    /// The topic now pending, `None` once the interview is over.
    pub topic_id: Option<String>,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub id: String,
    pub agenda_id: String,
    pub seed: u64,
    pub cursor: usize,
    pub pending: bool,
    pub digressions_on_topic: u32,
    pub gibberish_prompted: bool,
    pub transcript: Vec<Turn>,
    pub ratings: BTreeMap<RatingTarget, u8>,
    /// Topic id to the text accepted as its answer.
    pub answers: BTreeMap<String, String>,
    pub rng: ChaCha8Rng,
    pub started_at: Millis,
    pub last_activity: Millis,
    pub done: bool,
    last_template: Option<String>,
}

impl Session {
    pub fn user_turns(&self) -> impl Iterator<Item = &Turn> {
        self.transcript.iter().filter(|t| t.speaker == Speaker::User)
    }
}

/// Per-session seed: the agenda seed mixed with the first 64 bits of a hex session id.
pub fn session_seed(agenda_seed: u64, session_id: &str) -> u64 {
    let prefix = session_id.get(..16).and_then(|h| u64::from_str_radix(h, 16).ok()).unwrap_or(0);
    agenda_seed ^ prefix
}

/// Reads a 1-5 score out of a short message ("4", "I'd say four").
pub fn parse_rating(text: &str) -> Option<u8> {
    let tokens = words(text);
    if tokens.is_empty() || tokens.len() > 8 {
        return None;
    }
    let mut found: Option<u8> = None;
    for t in &tokens {
        let value = match t.as_str() {
            "1" | "one" => 1,
            "2" | "two" => 2,
            "3" | "three" => 3,
            "4" | "four" => 4,
            "5" | "five" => 5,
            _ => continue,
        };
        match found {
            Some(v) if v != value => return None,
            _ => found = Some(value),
        }
    }
    found
}

pub struct Engine {
    agenda: Arc<Agenda>,
    bundles: BundleRegistry,
    classifier: TurnClassifier,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine").field("agenda", &self.agenda.id).finish_non_exhaustive()
    }
}

fn agenda_text(agenda: &Agenda) -> Vec<String> {
    let mut out = vec![agenda.greeting.clone(), agenda.closing.clone()];
    out.extend(agenda.global_fallbacks.iter().cloned());
    for t in &agenda.topics {
        out.extend(t.intro.iter().cloned());
        out.push(t.question_text.clone());
        out.extend(t.default_templates.iter().cloned());
        out.extend(t.encourage_templates.iter().cloned());
        out.extend(t.templates.iter().flat_map(|s| s.texts.iter().cloned()));
    }
    out
}

impl Engine {
    pub fn new(agenda: Arc<Agenda>, bundles: BundleRegistry, sidetalk: SideTalkConfig) -> Result<Self, DialogError> {
        let violations = validate_agenda(&agenda, &bundles.catalog());
        if !violations.is_empty() {
            return Err(DialogError::InvalidAgenda(violations));
        }
        let extra = agenda_text(&agenda);
        let classifier = TurnClassifier::new(sidetalk, extra.iter().map(String::as_str));
        Ok(Self { agenda, bundles, classifier })
    }

    pub fn agenda(&self) -> &Arc<Agenda> {
        &self.agenda
    }

    pub fn classifier(&self) -> &TurnClassifier {
        &self.classifier
    }

    pub fn start_session(&self, id: impl Into<String>, seed: u64, at: Millis) -> (Session, BotReply) {
        let first = &self.agenda.topics[0];
        let mut session = Session {
            id: id.into(),
            agenda_id: self.agenda.id.clone(),
            seed,
            cursor: 0,
            pending: true,
            digressions_on_topic: 0,
            gibberish_prompted: false,
            transcript: Vec::new(),
            ratings: BTreeMap::new(),
            answers: BTreeMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            started_at: at,
            last_activity: at,
            done: false,
            last_template: None,
        };
        let messages = vec![format!("{} {}", self.agenda.greeting.trim(), first.opening_text())];
        push_bot(&mut session, &messages, at, Some(&first.id));
        let reply = BotReply {
            messages,
            action: BotAction::Opened,
            kind: None,
            interpretation: None,
            technique: None,
            topic_id: Some(first.id.clone()),
            done: false,
        };
        (session, reply)
    }

    pub fn current_topic(&self, session: &Session) -> Option<&Topic> {
        self.agenda.topics.get(session.cursor)
    }

    pub fn pending_question(&self, session: &Session) -> Result<String, DialogError> {
        match self.current_topic(session) {
            Some(topic) if session.pending => Ok(topic.question_text.clone()),
            _ => Err(DialogError::NoPendingQuestion),
        }
    }

    /// Classifies a message in the context of the session's pending topic.
    pub fn classify_turn(&self, session: &Session, text: &str) -> TurnKind {
        if let Some(topic) = self.current_topic(session) {
            if topic.kind == TopicKind::Rating && parse_rating(text).is_some() {
                return TurnKind::Answer;
            }
        }
        self.classifier.classify(text)
    }

    pub fn handle_message(&self, session: &mut Session, text: &str, at: Millis) -> Result<BotReply, DialogError> {
        if session.done {
            return Err(DialogError::SessionDone);
        }
        if text.trim().is_empty() {
            return Err(DialogError::EmptyMessage);
        }
        let at = at.max(session.last_activity);
        session.last_activity = at;
        let topic = &self.agenda.topics[session.cursor];
        let kind = self.classify_turn(session, text);
        session.transcript.push(Turn {
            speaker: Speaker::User,
            text: text.to_string(),
            at,
            kind: Some(kind),
            interpretation: None,
            topic_id: Some(topic.id.clone()),
            accepted: false,
        });

        if kind == TurnKind::Answer {
            if topic.kind == TopicKind::Rating && parse_rating(text).is_none() {
                return Ok(self.digress(session, topic, kind, at, true));
            }
            return Ok(self.accept(session, topic, kind, text, at));
        }
        Ok(self.digress(session, topic, kind, at, false))
    }

    /// Non-answer turns. `reprompt` marks an unreadable rating.
    fn digress(&self, session: &mut Session, topic: &Topic, kind: TurnKind, at: Millis, reprompt: bool) -> BotReply {
        session.digressions_on_topic += 1;
        if session.digressions_on_topic > topic.max_digressions {
            let text = session.transcript.last().map(|t| t.text.clone()).unwrap_or_default();
            return self.accept(session, topic, kind, &text, at);
        }
        let responses = &self.classifier.config.responses;
        let (action, message) = if reprompt {
            (BotAction::Reprompted, pick(session, &responses.rating_reprompt))
        } else {
            match kind {
                TurnKind::RepeatRequest => {
                    (BotAction::RepeatedQuestion, format!("{} {}", responses.repeat_prefix, topic.question_text))
                }
                TurnKind::QuestionToBot => {
                    let deflect = pick(session, &self.agenda.global_fallbacks);
                    let steer = pick(session, &responses.steer_back);
                    (BotAction::Deflected, format!("{deflect} {steer}"))
                }
                TurnKind::ClarifyRequest => {
                    let clarify = pick(session, &responses.clarify);
                    (BotAction::Clarified, format!("{clarify} {}", topic.question_text))
                }
                TurnKind::Gibberish if !session.gibberish_prompted => {
                    session.gibberish_prompted = true;
                    (BotAction::AskedForRealAnswer, pick(session, &responses.gibberish))
                }
                _ => (BotAction::Encouraged, pick(session, &topic.encourage_templates)),
            }
        };
        let messages = vec![message];
        push_bot(session, &messages, at, Some(&topic.id));
        BotReply {
            messages,
            action,
            kind: Some(kind),
            interpretation: None,
            technique: (action == BotAction::Encouraged).then_some(Technique::Encouraging),
            topic_id: Some(topic.id.clone()),
            done: false,
        }
    }

    /// Takes the last user turn as the topic's answer and advances.
    fn accept(&self, session: &mut Session, topic: &Topic, kind: TurnKind, text: &str, at: Millis) -> BotReply {
        let mut interpretation = None;
        if topic.kind == TopicKind::Rating {
            if let Some(score) = parse_rating(text) {
                session.ratings.insert(topic.effective_rating_target(), score);
            }
        } else if let Some(loaded) = topic.bundle_ref.as_deref().and_then(|id| self.bundles.get(id)) {
            // A failing external encoder degrades to the plain acknowledgement.
            interpretation = interpret(&loaded.bundle, loaded.encoder.as_ref(), text).ok();
        }
        let previous = session.last_template.clone();
        let response = generate_response(topic, interpretation.as_ref(), &mut session.rng, previous.as_deref())
            .expect("validated topics always have templates");
        session.last_template = Some(response.text.clone());
        if let Some(turn) = session.transcript.last_mut() {
            turn.accepted = true;
            turn.interpretation = interpretation.clone();
        }
        session.answers.insert(topic.id.clone(), text.to_string());

        session.cursor += 1;
        session.digressions_on_topic = 0;
        session.gibberish_prompted = false;
        let next = self.agenda.topics.get(session.cursor);
        let follow = match next {
            Some(t) => t.opening_text(),
            None => self.agenda.closing.clone(),
        };
        let messages = vec![response.text.clone(), follow];
        push_bot(session, &messages[..1], at, Some(&topic.id));
        push_bot(session, &messages[1..], at, next.map(|t| t.id.as_str()));
        if next.is_none() {
            session.pending = false;
            session.done = true;
        }
        BotReply {
            messages,
            action: BotAction::Answered,
            kind: Some(kind),
            interpretation,
            technique: response.technique,
            topic_id: next.map(|t| t.id.clone()),
            done: session.done,
        }
    }

    /// Stores a score from outside the conversation (e.g. a rating widget).
    /// Returns the previous score when this overwrote one.
    pub fn record_rating(
        &self,
        session: &mut Session,
        target: RatingTarget,
        score: i64,
        at: Millis,
    ) -> Result<Option<u8>, DialogError> {
        if !(1..=5).contains(&score) {
            return Err(DialogError::ScoreOutOfRange(score));
        }
        if let RatingTarget::Topic(id) = &target {
            let index = self.agenda.topic_index(id).ok_or_else(|| DialogError::UnknownTopic(id.clone()))?;
            if index > session.cursor {
                return Err(DialogError::TopicNotYetAsked(id.clone()));
            }
        }
        session.last_activity = session.last_activity.max(at);
        Ok(session.ratings.insert(target, score as u8))
    }
}

fn push_bot(session: &mut Session, messages: &[String], at: Millis, topic_id: Option<&str>) {
    for m in messages {
        session.transcript.push(Turn {
            speaker: Speaker::Bot,
            text: m.clone(),
            at,
            kind: None,
            interpretation: None,
            topic_id: topic_id.map(str::to_string),
            accepted: false,
        });
    }
}

/// Random choice that avoids repeating the previous template when it can.
fn pick(session: &mut Session, candidates: &[String]) -> String {
    let fresh: Vec<&String> = candidates.iter().filter(|c| Some(c.as_str()) != session.last_template.as_deref()).collect();
    let pool: Vec<&String> = if fresh.is_empty() { candidates.iter().collect() } else { fresh };
    let chosen = pool.choose(&mut session.rng).map(|s| s.to_string()).unwrap_or_default();
    session.last_template = Some(chosen.clone());
    chosen
}
