//! Append-only session log and replay.
//!
//! One event per line: `seq<TAB>ms<TAB>speaker<TAB>kind<TAB>text`, with the
//! text escaped by [`escape_field`]. Speakers are `user`, `bot` and `meta`.
//! Meta events carry the session header (`SESSION`) and ratings (`RATING`,
//! or `RERATE` when a score is overwritten).
//!
//! A session's state is rebuilt by feeding the logged user messages and
//! ratings back through the engine; logged bot lines are checked against
//! what the engine produces.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use std::collections::BTreeMap;

use crate::agenda::{Agenda, RatingTarget};
use crate::dialog::{DialogError, Engine, Millis, Session, Speaker, Turn, TurnKind};
use crate::text::{escape_field, unescape_field};

#[derive(Debug, Error, PartialEq)]
pub enum TranscriptError {
    #[error("log line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("log does not start with a session header")]
    MissingHeader,
    #[error("log belongs to agenda {found:?}, engine serves {expected:?}")]
    AgendaMismatch { expected: String, found: String },
    #[error("replay diverged from the log at seq {seq}")]
    Diverged { seq: u64 },
    #[error("replay failed at seq {seq}: {source}")]
    Dialog { seq: u64, source: DialogError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub session: String,
    pub agenda: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    Session(SessionHeader),
    User { kind: TurnKind, text: String },
    Bot { text: String },
    Rating { target: RatingTarget, score: u8, previous: Option<u8> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogEvent {
    pub seq: u64,
    pub at: Millis,
    pub record: Record,
}

impl LogEvent {
    pub fn to_line(&self) -> String {
        let (speaker, kind, text) = match &self.record {
            Record::Session(h) => ("meta", "SESSION".to_string(), serde_json::to_string(h).expect("header serializes")),
            Record::User { kind, text } => ("user", kind.to_string(), text.clone()),
            Record::Bot { text } => ("bot", "-".to_string(), text.clone()),
            Record::Rating { target, score, previous } => {
                let kind = if previous.is_some() { "RERATE" } else { "RATING" };
                let text = match previous {
                    Some(p) => format!("{target}={score} was={p}"),
                    None => format!("{target}={score}"),
                };
                ("meta", kind.to_string(), text)
            }
        };
        format!("{}\t{}\t{}\t{}\t{}", self.seq, self.at, speaker, kind, escape_field(&text))
    }

    pub fn parse(line: &str, lineno: usize) -> Result<Self, TranscriptError> {
        let bad = |message: &str| TranscriptError::Malformed { line: lineno, message: message.to_string() };
        let fields: Vec<&str> = line.splitn(5, '\t').collect();
        if fields.len() != 5 {
            return Err(bad("expected 5 tab-separated fields"));
        }
        let seq = fields[0].parse().map_err(|_| bad("bad sequence number"))?;
        let at = fields[1].parse().map_err(|_| bad("bad timestamp"))?;
        let text = unescape_field(fields[4]);
        let record = match (fields[2], fields[3]) {
            ("meta", "SESSION") => Record::Session(serde_json::from_str(&text).map_err(|e| bad(&e.to_string()))?),
            ("meta", kind @ ("RATING" | "RERATE")) => {
                let mut parts = text.split(' ');
                let main = parts.next().unwrap_or_default();
                let (target, score) = main.rsplit_once('=').ok_or_else(|| bad("rating needs target=score"))?;
                let target = RatingTarget::parse(target).ok_or_else(|| bad("bad rating target"))?;
                let score = score.parse().map_err(|_| bad("bad score"))?;
                let previous = match (kind, parts.next().and_then(|p| p.strip_prefix("was="))) {
                    ("RERATE", Some(p)) => Some(p.parse().map_err(|_| bad("bad previous score"))?),
                    ("RERATE", None) => return Err(bad("RERATE needs was=")),
                    _ => None,
                };
                Record::Rating { target, score, previous }
            }
            ("user", kind) => Record::User { kind: kind.parse().map_err(|e: String| bad(&e))?, text },
            ("bot", "-") => Record::Bot { text },
            _ => return Err(bad("unknown speaker/kind")),
        };
        Ok(Self { seq, at, record })
    }
}

/// Parses a whole log. A final line without a newline is an interrupted
/// write and is dropped.
pub fn parse_log(text: &str) -> Result<Vec<LogEvent>, TranscriptError> {
    let complete = match text.rfind('\n') {
        Some(i) => &text[..=i],
        None => "",
    };
    complete
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| LogEvent::parse(l, i + 1))
        .collect()
}

pub fn render_log(events: &[LogEvent]) -> String {
    events.iter().map(|e| e.to_line() + "\n").collect()
}

/// Converts session turns from `from_turn` onwards into events numbered from `next_seq`.
pub fn turn_events(session: &Session, from_turn: usize, next_seq: u64) -> Vec<LogEvent> {
    session.transcript[from_turn..]
        .iter()
        .zip(next_seq..)
        .map(|(turn, seq)| {
            let record = match turn.speaker {
                Speaker::User => Record::User { kind: turn.kind.unwrap_or(TurnKind::Answer), text: turn.text.clone() },
                Speaker::Bot => Record::Bot { text: turn.text.clone() },
            };
            LogEvent { seq, at: turn.at, record }
        })
        .collect()
}

/// Header plus the opening turns of a freshly started session.
pub fn opening_events(session: &Session) -> Vec<LogEvent> {
    let header = LogEvent {
        seq: 1,
        at: session.started_at,
        record: Record::Session(SessionHeader {
            session: session.id.clone(),
            agenda: session.agenda_id.clone(),
            seed: session.seed,
        }),
    };
    let mut out = vec![header];
    out.extend(turn_events(session, 0, 2));
    out
}

/// The annotated transcript served to clients and consumed by the metrics module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptDoc {
    pub session_id: String,
    pub agenda_id: String,
    pub seed: u64,
    pub done: bool,
    pub started_at: Millis,
    pub last_activity: Millis,
    /// Topics whose scores make up the comprehension index, in agenda order.
    pub rated_topics: Vec<String>,
    pub turns: Vec<Turn>,
    /// Rating target (`topic id`, `final:interest`, `final:chat`) to score.
    pub ratings: BTreeMap<String, u8>,
    pub answers: BTreeMap<String, String>,
}

impl TranscriptDoc {
    pub fn from_session(session: &Session, agenda: &Agenda) -> Self {
        Self {
            session_id: session.id.clone(),
            agenda_id: session.agenda_id.clone(),
            seed: session.seed,
            done: session.done,
            started_at: session.started_at,
            last_activity: session.last_activity,
            rated_topics: agenda.rated_topics(),
            turns: session.transcript.clone(),
            ratings: session.ratings.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            answers: session.answers.clone(),
        }
    }
}

#[derive(Debug)]
pub struct Replayed {
    pub session: Session,
    pub next_seq: u64,
    /// Bot events the engine produced past the end of a truncated log.
    pub missing: Vec<LogEvent>,
}

pub fn read_header(events: &[LogEvent]) -> Result<&SessionHeader, TranscriptError> {
    match events.first().map(|e| &e.record) {
        Some(Record::Session(h)) => Ok(h),
        _ => Err(TranscriptError::MissingHeader),
    }
}

pub fn replay(engine: &Engine, events: &[LogEvent]) -> Result<Replayed, TranscriptError> {
    let header = read_header(events)?;
    if header.agenda != engine.agenda().id {
        return Err(TranscriptError::AgendaMismatch { expected: engine.agenda().id.clone(), found: header.agenda.clone() });
    }
    let (mut session, _) = engine.start_session(header.session.clone(), header.seed, events[0].at);
    let mut logged_turns = 0usize;
    let mut last_seq = events[0].seq;
    for event in &events[1..] {
        if event.seq <= last_seq {
            return Err(TranscriptError::Diverged { seq: event.seq });
        }
        last_seq = event.seq;
        match &event.record {
            Record::Session(_) => return Err(TranscriptError::Diverged { seq: event.seq }),
            Record::User { text, .. } => {
                if logged_turns != session.transcript.len() {
                    return Err(TranscriptError::Diverged { seq: event.seq });
                }
                engine
                    .handle_message(&mut session, text, event.at)
                    .map_err(|source| TranscriptError::Dialog { seq: event.seq, source })?;
                check_turn(&session, logged_turns, event)?;
                logged_turns += 1;
            }
            Record::Bot { .. } => {
                check_turn(&session, logged_turns, event)?;
                logged_turns += 1;
            }
            Record::Rating { target, score, .. } => {
                engine
                    .record_rating(&mut session, target.clone(), i64::from(*score), event.at)
                    .map_err(|source| TranscriptError::Dialog { seq: event.seq, source })?;
            }
        }
    }
    let missing = turn_events(&session, logged_turns, last_seq + 1);
    let next_seq = last_seq + 1 + missing.len() as u64;
    Ok(Replayed { session, next_seq, missing })
}

fn check_turn(session: &Session, index: usize, event: &LogEvent) -> Result<(), TranscriptError> {
    let turn = session.transcript.get(index).ok_or(TranscriptError::Diverged { seq: event.seq })?;
    let matches = match &event.record {
        Record::User { kind, text } => turn.speaker == Speaker::User && turn.kind == Some(*kind) && &turn.text == text,
        Record::Bot { text } => turn.speaker == Speaker::Bot && &turn.text == text && turn.at == event.at,
        _ => false,
    };
    if matches {
        Ok(())
    } else {
        Err(TranscriptError::Diverged { seq: event.seq })
    }
}
