use std::sync::{Arc, OnceLock};

use hearken_core::agenda::parse_agenda;
use hearken_core::dialog::{BotAction, Engine, Speaker};
use hearken_core::listening::BundleRegistry;
use hearken_core::sidetalk::SideTalkConfig;
use proptest::prelude::*;

const AGENDA: &str = r#"
version = 1
id = "six"

[settings]
max_digressions_per_topic = 3

[[topics]]
id = "q1"
question = "Could you tell me about yourself in 2-3 sentences?"

[[topics]]
id = "q2"
question = "What do you enjoy doing in your spare time?"

[[topics]]
id = "r2"
question = "How well did I understand that, from 1 to 5?"
kind = "rating_1_to_5"
rates = "q2"

[[topics]]
id = "q3"
question = "What is the biggest challenge you face now?"
max_digressions = 1

[[topics]]
id = "f1"
question = "How interested would you be in chatting again, from 1 to 5?"
kind = "rating_1_to_5"
rates = "final:interest"

[[topics]]
id = "f2"
question = "How would you rate this chat, from 1 to 5?"
kind = "rating_1_to_5"
rates = "final:chat"
"#;

/// Messages covering every turn kind, plus ratings and non-ratings.
const POOL: &[&str] = &[
    "I teach piano to kids and love it.",
    "Mostly hiking and reading.",
    "What was your question?",
    "say that again",
    "What do you mean?",
    "I don't understand the question",
    "What about you?",
    "Why do you want to know?",
    "Are you a robot?",
    "I don't know",
    "skip",
    "hard to say",
    "asdkjh qweqw zzzk",
    "xqzv wprtk ghjjl",
    "4",
    "five",
    "two or three",
    "9",
    "?",
    "ok",
];

fn engine() -> &'static Engine {
    static ENGINE: OnceLock<Engine> = OnceLock::new();
    ENGINE.get_or_init(|| {
        Engine::new(Arc::new(parse_agenda(AGENDA).unwrap()), BundleRegistry::new(), SideTalkConfig::default()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn every_interview_completes_and_returns_to_its_question(
        picks in proptest::collection::vec(0..POOL.len(), 0..60),
        gaps in proptest::collection::vec(0u64..5_000, 60),
        seed in any::<u64>(),
    ) {
        let engine = engine();
        let bound: usize = engine.agenda().topics.iter().map(|t| t.max_digressions as usize + 1).sum();
        let (mut session, _) = engine.start_session("p", seed, 0);
        let mut now = 0;
        // Cycle the picks until the interview is over.
        for (sent, &p) in picks.iter().cycle().chain(std::iter::repeat(&0)).enumerate() {
            if session.done {
                break;
            }
            prop_assert!(sent < bound, "not done after {sent} messages");
            let cursor = session.cursor;
            let question = engine.pending_question(&session).unwrap();
            now += gaps[sent % gaps.len()];
            let reply = engine.handle_message(&mut session, POOL[p], now).unwrap();
            prop_assert!(session.cursor >= cursor);
            if reply.action != BotAction::Answered {
                prop_assert_eq!(session.cursor, cursor);
                prop_assert!(session.pending);
                prop_assert_eq!(engine.pending_question(&session).unwrap(), question);
            }
        }
        prop_assert!(session.done);
        prop_assert_eq!(session.cursor, engine.agenda().topics.len());
        for t in &session.transcript {
            prop_assert_eq!(t.kind.is_some(), t.speaker == Speaker::User);
        }
        prop_assert!(session.transcript.windows(2).all(|w| w[0].at <= w[1].at));
    }

    #[test]
    fn fixed_seed_and_inputs_replay_identically(
        picks in proptest::collection::vec(0..POOL.len(), 1..30),
        seed in any::<u64>(),
    ) {
        let engine = engine();
        let run = || {
            let (mut s, _) = engine.start_session("d", seed, 10);
            for (i, &p) in picks.iter().enumerate() {
                if s.done {
                    break;
                }
                engine.handle_message(&mut s, POOL[p], 10 + i as u64 * 700).unwrap();
            }
            s
        };
        prop_assert_eq!(run(), run());
    }
}
