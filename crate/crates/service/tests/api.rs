use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use hearken_core::agenda::parse_agenda;
use hearken_core::dialog::Engine;
use hearken_core::listening::BundleRegistry;
use hearken_core::metrics::{participant_metrics, UnigramModel};
use hearken_core::sidetalk::SideTalkConfig;
use hearken_core::transcript::{parse_log, replay};
use hearken_service::{router, Clock, SessionStore};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const AGENDA: &str = include_str!("../../../data/agendas/interview.toml");

struct StepClock(AtomicU64);

impl Clock for StepClock {
    fn now_ms(&self) -> u64 {
        self.0.fetch_add(1500, Ordering::SeqCst)
    }
}

fn engine() -> Arc<Engine> {
    let agenda = parse_agenda(AGENDA).unwrap();
    Arc::new(Engine::new(Arc::new(agenda), BundleRegistry::new(), SideTalkConfig::default()).unwrap())
}

fn open(dir: &std::path::Path) -> Arc<SessionStore> {
    Arc::new(SessionStore::open(dir, vec![engine()], Arc::new(StepClock(AtomicU64::new(1_000)))).unwrap())
}

async fn call(store: &Arc<SessionStore>, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = router(store.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn create(store: &Arc<SessionStore>) -> (String, Value) {
    let (status, body) = call(store, "POST", "/api/sessions", Some(json!({"agenda_id": "interview"}))).await;
    assert_eq!(status, StatusCode::CREATED);
    (body["session_id"].as_str().unwrap().to_string(), body)
}

async fn say(store: &Arc<SessionStore>, id: &str, text: &str) -> (StatusCode, Value) {
    call(store, "POST", &format!("/api/sessions/{id}/messages"), Some(json!({ "text": text }))).await
}

#[tokio::test]
async fn create_returns_greeting_and_distinct_ids() {
    let dir = tempfile::tempdir().unwrap();
    let store = open(dir.path());
    let (a, body) = create(&store).await;
    let (b, _) = create(&store).await;
    assert_ne!(a, b);
    assert_eq!(a.len(), 32);
    assert!(body["bot_messages"][0].as_str().unwrap().ends_with("Could you tell me about yourself in 2-3 sentences?"));
    assert_eq!(body["topic_id"], "q1");
    assert_eq!(body["topic_kind"], "open_ended");
    assert_eq!(body["done"], false);
    assert!(store.log_path(&a).exists());

    let (status, err) = call(&store, "POST", "/api/sessions", Some(json!({"agenda_id": "nope"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["error_code"], "UNKNOWN_AGENDA");
    let (status, err) = call(&store, "POST", "/api/sessions", Some(json!({"wrong": 1}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["error_code"], "BAD_REQUEST");
}

#[tokio::test]
async fn full_interview_ratings_and_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let store = open(dir.path());
    let (id, first) = create(&store).await;
    let mut last_seq = first["seq"].as_u64().unwrap();

    let (status, err) = call(&store, "POST", &format!("/api/sessions/{id}/ratings"), Some(json!({"topic_id": "q2", "score": 4}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["error_code"], "TOPIC_NOT_YET_ASKED");

    let (status, err) = say(&store, &id, "   ").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["error_code"], "EMPTY_MESSAGE");

    let script = [
        "I am a nurse who loves long walks and cooking for friends.",
        "4",
        "Mostly gardening and reading mystery novels.",
        "five",
        "I am patient and always willing to help.",
        "3",
        "Balancing night shifts with family time.",
        "4",
        "You seem friendly and easy to talk to.",
        "Help me plan healthy meals for the week.",
        "4",
        "5",
    ];
    let mut saw_rating_prompt = false;
    for (i, text) in script.iter().enumerate() {
        let (status, body) = say(&store, &id, text).await;
        assert_eq!(status, StatusCode::OK, "turn {i}: {body}");
        let seq = body["seq"].as_u64().unwrap();
        assert!(seq > last_seq);
        last_seq = seq;
        saw_rating_prompt |= body["topic_kind"] == "rating_1_to_5" && body["rating_target"] == "q1";
        assert_eq!(body["done"], i == script.len() - 1);
    }
    assert!(saw_rating_prompt);

    let (status, err) = say(&store, &id, "hello?").await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["error_code"], "SESSION_DONE");

    let url = format!("/api/sessions/{id}/ratings");
    let (status, ack) = call(&store, "POST", &url, Some(json!({"topic_id": "q4", "score": 5}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ack["previous"], 4);
    let (status, err) = call(&store, "POST", &url, Some(json!({"final": "chat", "score": 6}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["error_code"], "SCORE_OUT_OF_RANGE");

    let (status, doc) = call(&store, "GET", &format!("/api/sessions/{id}/transcript"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(doc["ratings"]["q4"], 5);
    assert_eq!(doc["ratings"]["final:chat"], 5);
    assert!(std::fs::read_to_string(store.log_path(&id)).unwrap().contains("\tRERATE\tq4=5 was=4"));

    let parsed: hearken_core::transcript::TranscriptDoc = serde_json::from_value(doc).unwrap();
    let model = UnigramModel::fit(["a reference corpus about walks cooking and reading"]);
    let m = participant_metrics(&parsed, &[], &model).unwrap();
    assert_eq!(m.ratings.unwrap().agent_c, 4 + 5 + 3 + 5);
    assert!(m.response_words > 30);
}

#[tokio::test]
async fn unknown_session_errors() {
    let dir = tempfile::tempdir().unwrap();
    let store = open(dir.path());
    let (status, err) = call(&store, "GET", "/api/sessions/deadbeef/transcript", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["error_code"], "UNKNOWN_SESSION");
    let (status, _) = say(&store, "deadbeef", "hi").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn fresh_transcript_has_only_the_opening() {
    let dir = tempfile::tempdir().unwrap();
    let store = open(dir.path());
    let (id, _) = create(&store).await;
    let (_, doc) = call(&store, "GET", &format!("/api/sessions/{id}/transcript"), None).await;
    assert_eq!(doc["turns"].as_array().unwrap().len(), 1);
    assert_eq!(doc["turns"][0]["speaker"], "bot");
}

#[tokio::test]
async fn reopening_replays_sessions_and_repairs_torn_tail() {
    let dir = tempfile::tempdir().unwrap();
    let id;
    let before;
    {
        let store = open(dir.path());
        id = create(&store).await.0;
        say(&store, &id, "What was your question?").await;
        say(&store, &id, "I teach music at a primary school.").await;
        call(&store, "POST", &format!("/api/sessions/{id}/ratings"), Some(json!({"final": "interest", "score": 3}))).await;
        before = store.snapshot(&id).unwrap();
    }
    let path = dir.path().join("sessions").join(format!("{id}.log"));
    let mut text = std::fs::read_to_string(&path).unwrap();
    text.push_str("99\t5\tuser\tANSW");
    std::fs::write(&path, &text).unwrap();

    let store = open(dir.path());
    assert!(store.skipped().is_empty());
    assert_eq!(store.snapshot(&id).unwrap(), before);
    let (status, body) = say(&store, &id, "4").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["topic_id"], "q2");
    let log = std::fs::read_to_string(&path).unwrap();
    assert!(!log.contains("ANSW\n") && log.ends_with('\n'));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_posts_to_one_session_stay_paired() {
    let dir = tempfile::tempdir().unwrap();
    let store = open(dir.path());
    let (id, _) = create(&store).await;
    let mut handles = Vec::new();
    for i in 0..8 {
        let store = store.clone();
        let id = id.clone();
        handles.push(tokio::spawn(async move { say(&store, &id, &format!("What was your question? {i}")).await }));
    }
    for h in handles {
        h.await.unwrap();
    }
    // An interleaved log would no longer replay: each user line must be
    // followed by exactly the bot lines the engine produces for it.
    let events = parse_log(&std::fs::read_to_string(store.log_path(&id)).unwrap()).unwrap();
    let replayed = replay(&engine(), &events).unwrap();
    assert!(replayed.missing.is_empty());
    assert_eq!(replayed.session.user_turns().count(), 8);
    assert_eq!(replayed.session, store.snapshot(&id).unwrap());
}
