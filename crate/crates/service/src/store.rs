//! Live sessions backed by one append-only log file each.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use hearken_core::agenda::{RatingTarget, TopicKind};
use hearken_core::dialog::{session_seed, BotAction, DialogError, Engine, Millis, Session, TurnKind};
use hearken_core::transcript::{
    opening_events, parse_log, read_header, render_log, replay, turn_events, LogEvent, Record, TranscriptDoc,
};
use rand::rngs::OsRng;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::ServiceError;

pub trait Clock: Send + Sync {
    fn now_ms(&self) -> Millis;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> Millis {
        SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as Millis).unwrap_or(0)
    }
}

struct Entry {
    engine: Arc<Engine>,
    session: Session,
    log: File,
    next_seq: u64,
}

impl Entry {
    fn append(&mut self, events: &[LogEvent]) -> Result<u64, ServiceError> {
        if events.is_empty() {
            return Ok(self.next_seq - 1);
        }
        self.log.write_all(render_log(events).as_bytes())?;
        self.log.sync_data()?;
        self.next_seq = events.last().map_or(self.next_seq, |e| e.seq + 1);
        Ok(self.next_seq - 1)
    }
}

/// What a client needs after each exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnView {
    pub session_id: String,
    /// Sequence number of the last log event written for this exchange.
    pub seq: u64,
    pub bot_messages: Vec<String>,
    pub topic_id: Option<String>,
    pub topic_kind: Option<TopicKind>,
    /// What the pending rating topic scores, e.g. `q4` or `final:chat`.
    pub rating_target: Option<String>,
    pub done: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub turn_kind: Option<TurnKind>,
    pub action: BotAction,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RatingRequest {
    #[serde(default)]
    pub topic_id: Option<String>,
    /// `interest` or `chat`.
    #[serde(rename = "final", default)]
    pub final_kind: Option<String>,
    pub score: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingAck {
    pub session_id: String,
    pub seq: u64,
    pub target: String,
    pub score: u8,
    pub previous: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptView {
    pub seq: u64,
    #[serde(flatten)]
    pub transcript: TranscriptDoc,
}

/// A log that could not be restored at startup.
#[derive(Debug, Clone)]
pub struct SkippedLog {
    pub path: PathBuf,
    pub reason: String,
}

pub struct SessionStore {
    engines: HashMap<String, Arc<Engine>>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Entry>>>>,
    dir: PathBuf,
    clock: Arc<dyn Clock>,
    skipped: Vec<SkippedLog>,
}

fn new_session_id() -> String {
    let mut bytes = [0u8; 16];
    OsRng.fill_bytes(&mut bytes);
    hex::encode(bytes)
}

impl SessionStore {
    /// Opens `data_dir`, replaying every session log found under `sessions/`.
    pub fn open(data_dir: &Path, engines: Vec<Arc<Engine>>, clock: Arc<dyn Clock>) -> Result<Self, ServiceError> {
        let dir = data_dir.join("sessions");
        fs::create_dir_all(&dir)?;
        let engines: HashMap<String, Arc<Engine>> = engines.into_iter().map(|e| (e.agenda().id.clone(), e)).collect();
        let mut store = Self { engines, sessions: RwLock::new(HashMap::new()), dir, clock, skipped: Vec::new() };
        let mut paths: Vec<PathBuf> = fs::read_dir(&store.dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "log"))
            .collect();
        paths.sort();
        for path in paths {
            if let Err(reason) = store.restore(&path) {
                store.skipped.push(SkippedLog { path, reason });
            }
        }
        Ok(store)
    }

    fn restore(&mut self, path: &Path) -> Result<(), String> {
        let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
        let events = parse_log(&text).map_err(|e| e.to_string())?;
        let header = read_header(&events).map_err(|e| e.to_string())?;
        let engine = self.engines.get(&header.agenda).ok_or_else(|| format!("unknown agenda {:?}", header.agenda))?.clone();
        let replayed = replay(&engine, &events).map_err(|e| e.to_string())?;
        // Drop a torn final line before appending.
        let keep = text.rfind('\n').map_or(0, |i| i + 1);
        let log = OpenOptions::new().write(true).open(path).map_err(|e| e.to_string())?;
        log.set_len(keep as u64).map_err(|e| e.to_string())?;
        let log = OpenOptions::new().append(true).open(path).map_err(|e| e.to_string())?;
        let mut entry = Entry { engine, session: replayed.session, log, next_seq: replayed.next_seq - replayed.missing.len() as u64 };
        entry.append(&replayed.missing).map_err(|e| e.to_string())?;
        let id = entry.session.id.clone();
        self.sessions.get_mut().expect("store lock").insert(id, Arc::new(Mutex::new(entry)));
        Ok(())
    }

    pub fn skipped(&self) -> &[SkippedLog] {
        &self.skipped
    }

    pub fn agenda_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.engines.keys().cloned().collect();
        ids.sort();
        ids
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().expect("store lock").keys().cloned().collect();
        ids.sort();
        ids
    }

    pub fn log_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.log"))
    }

    fn entry(&self, id: &str) -> Result<Arc<Mutex<Entry>>, ServiceError> {
        self.sessions.read().expect("store lock").get(id).cloned().ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    fn view(entry: &Entry, seq: u64, messages: Vec<String>, kind: Option<TurnKind>, action: BotAction) -> TurnView {
        let topic = entry.engine.current_topic(&entry.session).filter(|_| !entry.session.done);
        TurnView {
            session_id: entry.session.id.clone(),
            seq,
            bot_messages: messages,
            topic_id: topic.map(|t| t.id.clone()),
            topic_kind: topic.map(|t| t.kind),
            rating_target: topic.filter(|t| t.kind == TopicKind::Rating).map(|t| t.effective_rating_target().to_string()),
            done: entry.session.done,
            turn_kind: kind,
            action,
        }
    }

    pub fn create_session(&self, agenda_id: &str) -> Result<TurnView, ServiceError> {
        let engine = self.engines.get(agenda_id).ok_or_else(|| ServiceError::UnknownAgenda(agenda_id.to_string()))?.clone();
        let id = new_session_id();
        let seed = session_seed(engine.agenda().settings.rng_seed, &id);
        let (session, reply) = engine.start_session(id.clone(), seed, self.clock.now_ms());
        let path = self.log_path(&id);
        let log = OpenOptions::new().create_new(true).append(true).open(&path)?;
        let mut entry = Entry { engine, session, log, next_seq: 1 };
        let events = opening_events(&entry.session);
        let seq = entry.append(&events)?;
        let view = Self::view(&entry, seq, reply.messages, None, reply.action);
        self.sessions.write().expect("store lock").insert(id, Arc::new(Mutex::new(entry)));
        Ok(view)
    }

    pub fn post_message(&self, id: &str, text: &str) -> Result<TurnView, ServiceError> {
        if text.trim().is_empty() {
            return Err(ServiceError::EmptyMessage);
        }
        let entry = self.entry(id)?;
        let mut entry = entry.lock().expect("session lock");
        let entry = &mut *entry;
        let before = entry.session.transcript.len();
        let now = self.clock.now_ms();
        let reply = entry.engine.handle_message(&mut entry.session, text, now)?;
        let events = turn_events(&entry.session, before, entry.next_seq);
        let seq = entry.append(&events)?;
        Ok(Self::view(entry, seq, reply.messages, reply.kind, reply.action))
    }

    pub fn post_rating(&self, id: &str, request: &RatingRequest) -> Result<RatingAck, ServiceError> {
        let target = match (&request.topic_id, request.final_kind.as_deref()) {
            (Some(topic), None) => RatingTarget::Topic(topic.clone()),
            (None, Some("interest")) => RatingTarget::Interest,
            (None, Some("chat")) => RatingTarget::Chat,
            (None, Some(other)) => return Err(ServiceError::BadRequest(format!("final must be interest or chat, got {other:?}"))),
            _ => return Err(ServiceError::BadRequest("give exactly one of topic_id or final".into())),
        };
        let entry = self.entry(id)?;
        let mut entry = entry.lock().expect("session lock");
        let entry = &mut *entry;
        let now = self.clock.now_ms();
        let previous = entry.engine.record_rating(&mut entry.session, target.clone(), request.score, now)?;
        let score = request.score as u8;
        let event = LogEvent { seq: entry.next_seq, at: now, record: Record::Rating { target: target.clone(), score, previous } };
        let seq = entry.append(&[event])?;
        Ok(RatingAck { session_id: id.to_string(), seq, target: target.to_string(), score, previous })
    }

    pub fn transcript(&self, id: &str) -> Result<TranscriptView, ServiceError> {
        let entry = self.entry(id)?;
        let entry = entry.lock().expect("session lock");
        Ok(TranscriptView {
            seq: entry.next_seq - 1,
            transcript: TranscriptDoc::from_session(&entry.session, entry.engine.agenda()),
        })
    }

    /// A copy of the live session state.
    pub fn snapshot(&self, id: &str) -> Result<Session, ServiceError> {
        let entry = self.entry(id)?;
        let entry = entry.lock().expect("session lock");
        Ok(entry.session.clone())
    }
}

impl From<DialogError> for ServiceError {
    fn from(e: DialogError) -> Self {
        match e {
            DialogError::SessionDone => Self::SessionDone,
            DialogError::EmptyMessage => Self::EmptyMessage,
            DialogError::ScoreOutOfRange(s) => Self::ScoreOutOfRange(s),
            DialogError::TopicNotYetAsked(t) => Self::TopicNotYetAsked(t),
            DialogError::UnknownTopic(t) => Self::UnknownTopic(t),
            other => Self::Internal(other.to_string()),
        }
    }
}
