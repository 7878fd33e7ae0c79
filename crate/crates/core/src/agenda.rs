//! Interview agendas: the ordered list of topics a chatbot works through.
//!
//! Agendas are authored as TOML (format version 1) and are immutable once
//! parsed. A minimal file only needs an id and one topic:
//!
//! ```toml
//! version = 1
//! id = "study"
//!
//! [[topics]]
//! id = "q2"
//! question = "What do you enjoy doing in your spare time?"
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::listening::Technique;

pub const FORMAT_VERSION: u32 = 1;

pub const DEFAULT_THRESHOLD1: f64 = 0.5;
pub const DEFAULT_THRESHOLD2: f64 = 0.6;
pub const DEFAULT_MAX_DIGRESSIONS: u32 = 3;

const DEFAULT_GREETING: &str = "Hi, thanks for chatting with me today!";
const DEFAULT_CLOSING: &str = "That was my last question. Thank you so much for chatting with me!";
const DEFAULT_FALLBACKS: &[&str] = &[
    "That's a good question, but today I'm the one who is curious about you.",
    "I'd rather hear about you first.",
];
const DEFAULT_ACKS: &[&str] = &["Thanks for sharing.", "Got it, thank you.", "I see, thanks for telling me."];
const DEFAULT_ENCOURAGE: &[&str] = &[
    "No worries, just share what's on your mind.",
    "Take your time, anything that comes to mind is fine.",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopicKind {
    OpenEnded,
    #[serde(rename = "rating_1_to_5")]
    Rating,
}

/// What a rating topic's score is recorded against.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RatingTarget {
    Topic(String),
    Interest,
    Chat,
}

impl RatingTarget {
    pub fn parse(raw: &str) -> Option<Self> {
        match raw {
            "final:interest" => Some(Self::Interest),
            "final:chat" => Some(Self::Chat),
            "" => None,
            s if s.starts_with("final:") => None,
            s => Some(Self::Topic(s.to_string())),
        }
    }
}

impl fmt::Display for RatingTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Topic(id) => f.write_str(id),
            Self::Interest => f.write_str("final:interest"),
            Self::Chat => f.write_str("final:chat"),
        }
    }
}

/// Response templates for one intent under one active-listening technique.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateSet {
    pub intent: String,
    pub technique: Technique,
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topic {
    pub id: String,
    /// Lead-in spoken before the question the first time it is asked.
    pub intro: Option<String>,
    pub question_text: String,
    pub kind: TopicKind,
    /// Rating topics only; `None` records the score under the topic's own id.
    pub rating_target: Option<RatingTarget>,
    pub bundle_ref: Option<String>,
    pub templates: Vec<TemplateSet>,
    pub default_templates: Vec<String>,
    pub encourage_templates: Vec<String>,
    pub max_digressions: u32,
}

impl Topic {
    /// Every (template, technique) registered for `intent`, in file order.
    pub fn templates_for(&self, intent: &str) -> Vec<(&str, Technique)> {
        self.templates
            .iter()
            .filter(|set| set.intent == intent)
            .flat_map(|set| set.texts.iter().map(move |t| (t.as_str(), set.technique)))
            .collect()
    }

    /// The question as first asked: intro (if any) followed by the question.
    pub fn opening_text(&self) -> String {
        match &self.intro {
            Some(intro) if !intro.trim().is_empty() => format!("{} {}", intro.trim(), self.question_text),
            _ => self.question_text.clone(),
        }
    }

    pub fn effective_rating_target(&self) -> RatingTarget {
        self.rating_target.clone().unwrap_or_else(|| RatingTarget::Topic(self.id.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgendaSettings {
    pub threshold1: f64,
    pub threshold2: f64,
    pub max_digressions_per_topic: u32,
    pub rng_seed: u64,
}

impl Default for AgendaSettings {
    fn default() -> Self {
        Self {
            threshold1: DEFAULT_THRESHOLD1,
            threshold2: DEFAULT_THRESHOLD2,
            max_digressions_per_topic: DEFAULT_MAX_DIGRESSIONS,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agenda {
    pub id: String,
    pub title: String,
    pub greeting: String,
    pub closing: String,
    pub topics: Vec<Topic>,
    pub global_fallbacks: Vec<String>,
    pub settings: AgendaSettings,
}

impl Agenda {
    pub fn topic(&self, id: &str) -> Option<&Topic> {
        self.topics.iter().find(|t| t.id == id)
    }

    pub fn topic_index(&self, id: &str) -> Option<usize> {
        self.topics.iter().position(|t| t.id == id)
    }

    /// Topic-level scores collected by rating topics, in agenda order.
    pub fn rated_topics(&self) -> Vec<String> {
        self.topics
            .iter()
            .filter(|t| t.kind == TopicKind::Rating)
            .filter_map(|t| match t.effective_rating_target() {
                RatingTarget::Topic(id) if id != t.id => Some(id),
                _ => None,
            })
            .collect()
    }
}

/// Bundle id → intent ids served by that bundle.
pub type BundleCatalog = BTreeMap<String, Vec<String>>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoTopics,
    DuplicateTopicId(String),
    EmptyQuestion(String),
    NoDefaultTemplates(String),
    NoGlobalFallbacks,
    ThresholdOutOfRange(&'static str),
    UnknownRatingTarget { topic: String, target: String },
    DanglingBundle(String),
    MissingTemplates(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NoTopics => f.write_str("agenda must contain at least one topic"),
            Self::DuplicateTopicId(id) => write!(f, "duplicate topic id \"{id}\""),
            Self::EmptyQuestion(id) => write!(f, "topic \"{id}\" has an empty question"),
            Self::NoDefaultTemplates(id) => write!(f, "topic \"{id}\" has no default templates"),
            Self::NoGlobalFallbacks => f.write_str("agenda must define at least one global fallback"),
            Self::ThresholdOutOfRange(name) => write!(f, "{name} must lie in [0, 1]"),
            Self::UnknownRatingTarget { topic, target } => {
                write!(f, "topic \"{topic}\" rates unknown target \"{target}\"")
            }
            Self::DanglingBundle(id) => write!(f, "bundle \"{id}\" is not registered"),
            Self::MissingTemplates(intent) => write!(f, "no response templates for intent \"{intent}\""),
        }
    }
}

#[derive(Debug, Error)]
pub enum AgendaError {
    #[error("agenda parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("unsupported agenda format version {0}")]
    Version(u32),
    #[error("invalid agenda: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Validation(Vec<Violation>),
}

/// Checks every agenda invariant, plus bundle resolution against `catalog`.
pub fn validate_agenda(agenda: &Agenda, catalog: &BundleCatalog) -> Vec<Violation> {
    let mut out = structural_violations(agenda);
    for topic in &agenda.topics {
        let Some(bundle) = &topic.bundle_ref else { continue };
        match catalog.get(bundle) {
            None => out.push(Violation::DanglingBundle(bundle.clone())),
            Some(intents) if topic.kind == TopicKind::OpenEnded => {
                for intent in intents {
                    if topic.templates_for(intent).is_empty() {
                        out.push(Violation::MissingTemplates(intent.clone()));
                    }
                }
            }
            Some(_) => {}
        }
    }
    out
}

fn structural_violations(agenda: &Agenda) -> Vec<Violation> {
    let mut out = Vec::new();
    if agenda.topics.is_empty() {
        out.push(Violation::NoTopics);
    }
    if agenda.global_fallbacks.is_empty() {
        out.push(Violation::NoGlobalFallbacks);
    }
    let in_unit = |p: f64| (0.0..=1.0).contains(&p);
    if !in_unit(agenda.settings.threshold1) {
        out.push(Violation::ThresholdOutOfRange("threshold1"));
    }
    if !in_unit(agenda.settings.threshold2) {
        out.push(Violation::ThresholdOutOfRange("threshold2"));
    }
    let mut seen = HashSet::new();
    for topic in &agenda.topics {
        if !seen.insert(topic.id.as_str()) {
            out.push(Violation::DuplicateTopicId(topic.id.clone()));
        }
        if topic.question_text.trim().is_empty() {
            out.push(Violation::EmptyQuestion(topic.id.clone()));
        }
        if topic.default_templates.is_empty() {
            out.push(Violation::NoDefaultTemplates(topic.id.clone()));
        }
        if let Some(RatingTarget::Topic(target)) = &topic.rating_target {
            if agenda.topic(target).is_none() {
                out.push(Violation::UnknownRatingTarget { topic: topic.id.clone(), target: target.clone() });
            }
        }
    }
    out
}

// On-disk representation. Optional fields are filled with defaults on parse
// and always written out explicitly on serialize.

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AgendaFile {
    version: u32,
    id: String,
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    greeting: Option<String>,
    #[serde(default)]
    closing: Option<String>,
    #[serde(default)]
    global_fallbacks: Option<Vec<String>>,
    #[serde(default)]
    settings: Option<SettingsFile>,
    #[serde(default)]
    topics: Vec<TopicFile>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SettingsFile {
    threshold1: Option<f64>,
    threshold2: Option<f64>,
    max_digressions_per_topic: Option<u32>,
    rng_seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopicFile {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    intro: Option<String>,
    question: String,
    #[serde(default)]
    kind: Option<TopicKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rates: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bundle: Option<String>,
    #[serde(default)]
    max_digressions: Option<u32>,
    #[serde(default)]
    default_templates: Option<Vec<String>>,
    #[serde(default)]
    encourage_templates: Option<Vec<String>>,
    #[serde(default)]
    templates: Vec<TemplateSet>,
}

fn owned(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

/// Parses and structurally validates an agenda file.
///
/// Bundle references are not resolved here; use [`validate_agenda`] with
/// a catalog for that.
pub fn parse_agenda(text: &str) -> Result<Agenda, AgendaError> {
    let file: AgendaFile = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map(|s| line_col(text, s.start)).unwrap_or((1, 1));
        AgendaError::Parse { line, column, message: e.message().to_string() }
    })?;
    if file.version != FORMAT_VERSION {
        return Err(AgendaError::Version(file.version));
    }
    let s = file.settings.unwrap_or_default();
    let settings = AgendaSettings {
        threshold1: s.threshold1.unwrap_or(DEFAULT_THRESHOLD1),
        threshold2: s.threshold2.unwrap_or(DEFAULT_THRESHOLD2),
        max_digressions_per_topic: s.max_digressions_per_topic.unwrap_or(DEFAULT_MAX_DIGRESSIONS),
        rng_seed: s.rng_seed.unwrap_or(0),
    };
    let mut topics = Vec::with_capacity(file.topics.len());
    for t in file.topics {
        let rating_target = match t.rates {
            Some(raw) => Some(RatingTarget::parse(&raw).ok_or_else(|| {
                AgendaError::Validation(vec![Violation::UnknownRatingTarget { topic: t.id.clone(), target: raw }])
            })?),
            None => None,
        };
        topics.push(Topic {
            intro: t.intro,
            question_text: t.question,
            kind: t.kind.unwrap_or(TopicKind::OpenEnded),
            rating_target,
            bundle_ref: t.bundle,
            templates: t.templates,
            default_templates: t.default_templates.unwrap_or_else(|| owned(DEFAULT_ACKS)),
            encourage_templates: t.encourage_templates.unwrap_or_else(|| owned(DEFAULT_ENCOURAGE)),
            max_digressions: t.max_digressions.unwrap_or(settings.max_digressions_per_topic),
            id: t.id,
        });
    }
    let agenda = Agenda {
        title: file.title.unwrap_or_else(|| file.id.clone()),
        id: file.id,
        greeting: file.greeting.unwrap_or_else(|| DEFAULT_GREETING.to_string()),
        closing: file.closing.unwrap_or_else(|| DEFAULT_CLOSING.to_string()),
        topics,
        global_fallbacks: file.global_fallbacks.unwrap_or_else(|| owned(DEFAULT_FALLBACKS)),
        settings,
    };
    let violations = structural_violations(&agenda);
    if violations.is_empty() {
        Ok(agenda)
    } else {
        Err(AgendaError::Validation(violations))
    }
}

/// Writes `agenda` back out in the file format, every default made explicit.
pub fn serialize_agenda(agenda: &Agenda) -> String {
    let file = AgendaFile {
        version: FORMAT_VERSION,
        id: agenda.id.clone(),
        title: Some(agenda.title.clone()),
        greeting: Some(agenda.greeting.clone()),
        closing: Some(agenda.closing.clone()),
        global_fallbacks: Some(agenda.global_fallbacks.clone()),
        settings: Some(SettingsFile {
            threshold1: Some(agenda.settings.threshold1),
            threshold2: Some(agenda.settings.threshold2),
            max_digressions_per_topic: Some(agenda.settings.max_digressions_per_topic),
            rng_seed: Some(agenda.settings.rng_seed),
        }),
        topics: agenda
            .topics
            .iter()
            .map(|t| TopicFile {
                id: t.id.clone(),
                intro: t.intro.clone(),
                question: t.question_text.clone(),
                kind: Some(t.kind),
                rates: t.rating_target.as_ref().map(ToString::to_string),
                bundle: t.bundle_ref.clone(),
                max_digressions: Some(t.max_digressions),
                default_templates: Some(t.default_templates.clone()),
                encourage_templates: Some(t.encourage_templates.clone()),
                templates: t.templates.clone(),
            })
            .collect(),
    };
    toml::to_string(&file).expect("agenda always serializes")
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}
