//! The `hearken` binary driven as an operator would.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use hearken_core::agenda::parse_agenda;
use hearken_core::dialog::Engine;
use hearken_core::listening::BundleRegistry;
use hearken_core::sidetalk::SideTalkConfig;
use hearken_service::{Clock, SessionStore};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BIN: &str = env!("CARGO_BIN_EXE_hearken");

fn interview_toml() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/agendas/interview.toml")
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().expect("binary runs")
}

fn run_ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn run_with_stdin(dir: &Path, args: &[&str], input: &str) -> Output {
    let mut child = Command::new(BIN)
        .current_dir(dir)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

const THEMES: [&[&str]; 3] = [
    &["rent", "bills", "salary", "debt", "loans", "savings", "budget", "money", "prices", "mortgage"],
    &["family", "kids", "parents", "schedule", "hours", "shifts", "weekends", "commute", "deadlines", "overtime"],
    &["sleep", "exercise", "diet", "injury", "anxiety", "doctor", "fitness", "energy", "pain", "therapy"],
];

const FRAMES: &[&str] = &[
    "Honestly it is {a} and {b}, also {c}.",
    "Right now {a}, plus {b} and {c}.",
    "Mostly {a} with some {b} and {c}.",
    "I keep worrying about {a}, {b} and {c}.",
    "{a} mainly, and {b} and {c} too.",
];

/// Writes `corpus.txt` with `per_theme` answers on each of three themes.
fn write_corpus(dir: &Path, per_theme: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut lines = Vec::new();
    for words in THEMES {
        for _ in 0..per_theme {
            let mut line = FRAMES[rng.gen_range(0..FRAMES.len())].to_string();
            for slot in ["{a}", "{b}", "{c}"] {
                line = line.replace(slot, words[rng.gen_range(0..words.len())]);
            }
            lines.push(line);
        }
    }
    std::fs::write(dir.join("corpus.txt"), lines.join("\n") + "\n").unwrap();
}

/// The interview answered in order: six open answers, four ratings, two finals.
const SCRIPT: &str = "I am a nurse who loves hiking.\n4\nReading and baking.\n5\nI am patient.\n3\n\
    Mostly rent and debt, plus loans and bills.\n4\nYou are friendly.\nRemind me to drink water.\n5\n4\n";

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    for flag in ["--help", "--version"] {
        assert_eq!(run(dir.path(), &[flag]).status.code(), Some(0), "{flag}");
    }
    assert_eq!(run(dir.path(), &["chat", "--help"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &[]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["discover", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["crossval", "--synthetic", "--folds", "1"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["label", "--ranked", "r.tsv", "--fraction", "0.7", "--out", "o"]).status.code(), Some(1));
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["discover", "--corpus", "missing.txt", "--out-dir", "out"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.txt"));
}

#[test]
fn crossval_synthetic_prints_four_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_ok(dir.path(), &["crossval", "--synthetic", "--folds", "5", "--out", "report.tsv"]);
    let lines: Vec<&str> = out.lines().collect();
    let header = lines.iter().position(|l| *l == "\tPrecision\tRecall\tF1\tAccuracy").expect("report header");
    let names: Vec<&str> = lines[header + 1..].iter().take(4).map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(names, ["Logistic Regression", "Linear SVM", "AdaBoost", "Naïve Bayes"]);
    assert!(std::fs::read_to_string(dir.path().join("report.tsv")).unwrap().contains("Linear SVM"));
}

#[test]
fn discover_drops_thin_intents_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    // One theme is much rarer than the others.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut lines = Vec::new();
    for (words, n) in THEMES.iter().zip([90, 90, 6]) {
        for _ in 0..n {
            let pick: Vec<&str> = (0..4).map(|_| words[rng.gen_range(0..words.len())]).collect();
            lines.push(pick.join(" "));
        }
    }
    std::fs::write(dir.path().join("corpus.txt"), lines.join("\n")).unwrap();
    let args = |out: &'static str| {
        ["discover", "--corpus", "corpus.txt", "--out-dir", out, "--k", "5", "--alpha", "0.1", "--iters", "200", "--seed", "3"]
    };
    run_ok(dir.path(), &args("a"));
    run_ok(dir.path(), &args("b"));
    let intents = std::fs::read_to_string(dir.path().join("a/intents.tsv")).unwrap();
    let mut rows = intents.lines();
    assert_eq!(rows.next(), Some("intent\tcoverage\tdocuments\tkeywords"));
    let coverage: Vec<f64> = rows.map(|l| l.split('\t').nth(1).unwrap().parse().unwrap()).collect();
    assert!(!coverage.is_empty() && coverage.len() < 5, "{coverage:?}");
    assert!(coverage.iter().all(|&c| c >= 0.10), "{coverage:?}");
    for f in ["intents.tsv", "topics.json", "encoder.json"] {
        assert_eq!(
            std::fs::read(dir.path().join("a").join(f)).unwrap(),
            std::fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f} differs between identical runs"
        );
    }
}

#[test]
fn label_takes_exact_fractions_and_import_marks_human_edits() {
    let dir = tempfile::tempdir().unwrap();
    let mut ranked = String::from("doc_id\tlexrank\tcentroid_sim\tcombined\ttext\n");
    for i in 0..1000 {
        ranked.push_str(&format!("d{i}\t0.001\t0.5\t{}\tanswer number {i}\n", 1000 - i));
    }
    std::fs::write(dir.path().join("ranked.tsv"), ranked).unwrap();
    run_ok(
        dir.path(),
        &["label", "--ranked", "ranked.tsv", "--fraction", "0.2", "--topic", "q4", "--intent", "c1", "--out", "review.tsv"],
    );
    let review = std::fs::read_to_string(dir.path().join("review.tsv")).unwrap();
    let count = |label: &str| review.lines().filter(|l| l.split('\t').nth(3) == Some(label)).count();
    assert_eq!((count("positive"), count("negative")), (200, 200));
    assert!(review.contains("answer number 0\tq4\tc1\tpositive"));
    assert!(review.contains("answer number 999\tq4\tc1\tnegative"));

    // A reviewer flips one row and drops another.
    let edited = review
        .replace("answer number 0\tq4\tc1\tpositive", "answer number 0\tq4\tc1\tnegative")
        .replace("answer number 1\tq4\tc1\tpositive", "answer number 1\tq4\tc1\tdrop");
    std::fs::write(dir.path().join("review.tsv"), edited).unwrap();
    run_ok(dir.path(), &["label", "--import", "review.tsv", "--out", "dataset.tsv"]);
    let dataset = std::fs::read_to_string(dir.path().join("dataset.tsv")).unwrap();
    assert_eq!(dataset.lines().count(), 1 + 399);
    assert!(dataset.contains("answer number 0\tq4\tc1\tnegative\thuman"));
    assert!(!dataset.contains("answer number 1\t"));
    assert_eq!(dataset.lines().filter(|l| l.ends_with("\thuman")).count(), 1);
}

#[test]
fn pipeline_from_corpus_to_interview_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_corpus(d, 60);
    run_ok(d, &["discover", "--corpus", "corpus.txt", "--out-dir", "out", "--k", "3", "--alpha", "0.1", "--iters", "300", "--seed", "7"]);

    // Pick the intent whose keywords are about money.
    let intents = std::fs::read_to_string(d.join("out/intents.tsv")).unwrap();
    let money = intents
        .lines()
        .skip(1)
        .find(|l| THEMES[0].iter().filter(|w| l.contains(*w)).count() >= 3)
        .and_then(|l| l.split('\t').next())
        .expect("a money intent was discovered")
        .to_string();
    run_ok(d, &["rank", "--topics", "out/topics.json", "--encoder", "out/encoder.json", "--intent", &money, "--out", "ranked.tsv"]);
    run_ok(d, &["label", "--ranked", "ranked.tsv", "--fraction", "0.3", "--topic", "q4", "--intent", &money, "--out", "review.tsv"]);
    // The cluster holds money answers only, so its bottom ranks are no
    // contrast: the reviewer drops them and adds answers from the other themes.
    let mut review = std::fs::read_to_string(d.join("review.tsv")).unwrap().replace("\tnegative\tauto", "\tdrop\tauto");
    let corpus = std::fs::read_to_string(d.join("corpus.txt")).unwrap();
    for line in corpus.lines().filter(|l| !THEMES[0].iter().any(|w| l.contains(w))).step_by(3) {
        review.push_str(&format!("{line}\tq4\t{money}\tnegative\thuman\n"));
    }
    std::fs::write(d.join("review.tsv"), review).unwrap();
    run_ok(d, &["label", "--import", "review.tsv", "--out", "dataset.tsv"]);

    // Relevance needs off-topic examples beyond the built-in side talk.
    let off_topic = ["turtles", "purple", "pizza", "jazz", "sunny weather", "my cat", "football", "the moon", "trains", "cheese"];
    let negatives: Vec<String> =
        off_topic.iter().flat_map(|x| [format!("I really like {x}"), format!("what about {x}?"), format!("{x} is fun")]).collect();
    std::fs::write(d.join("negatives.txt"), negatives.join("\n")).unwrap();
    let enc = ["--encoder", "out/encoder.json", "--dataset", "dataset.tsv"];
    run_ok(d, &[&["train"][..], &enc, &["--intent", &money, "--folds", "5", "--out", "intent.model.json"]].concat());
    run_ok(
        d,
        &[&["train"][..], &enc, &["--relevance", "q4", "--negatives", "negatives.txt", "--folds", "5", "--out", "rel.model.json"]]
            .concat(),
    );

    let agenda = interview_toml();
    let agenda = agenda.to_str().unwrap();
    let intent_arg = format!("{money}=intent.model.json");
    let bind = |extra: &[&str]| {
        let mut a = vec![
            "bind", "--agenda", agenda, "--topic", "q4", "--id", "challenges", "--encoder", "out/encoder.json", "--relevance",
            "rel.model.json", "--intent-model", &intent_arg, "--threshold1", "0.3", "--threshold2", "0.5", "--out-dir", "bundle",
        ];
        a.extend_from_slice(extra);
        run(d, &a)
    };
    // Without a template for the intent the bundle cannot be bound.
    let refused = bind(&[]);
    assert_eq!(refused.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&refused.stderr).contains("--templates"));

    let reply = "Money worries can weigh on anyone.";
    std::fs::write(
        d.join("templates.toml"),
        format!("[[templates]]\nintent = \"{money}\"\ntechnique = \"verbalizing_emotions\"\ntexts = [\"{reply}\"]\n"),
    )
    .unwrap();
    let bound = bind(&["--templates", "templates.toml"]);
    assert!(bound.status.success(), "{}", String::from_utf8_lossy(&bound.stderr));
    for f in ["agenda.toml", "bundle.toml", "encoder.json", "relevance.model.json"] {
        assert!(d.join("bundle").join(f).exists(), "{f}");
    }

    let chat = run_with_stdin(
        d,
        &[
            "chat", "--agenda", "bundle/agenda.toml", "--bundle", "bundle/bundle.toml", "--session-id", "00000000000000aa",
            "--clock-start", "1000", "--clock-step", "1500", "--log", "s.log", "--transcript", "t/s.json",
        ],
        SCRIPT,
    );
    assert!(chat.status.success(), "{}", String::from_utf8_lossy(&chat.stderr));
    let said = String::from_utf8(chat.stdout).unwrap();
    let log = std::fs::read_to_string(d.join("s.log")).unwrap();
    assert!(said.contains(reply), "intent template missing from the session:\n{log}");
    assert!(said.trim_end().ends_with("have a great day!"));
    assert!(log.starts_with("1\t1000\tmeta\tSESSION\t"));

    std::fs::write(d.join("coding.tsv"), "session\tresponse_index\trelevance\tclarity\tspecificity\n00000000000000aa\t1\t2\t2\t2\n").unwrap();
    let report = run_ok(d, &["eval", "--transcripts", "t", "--reference", "corpus.txt", "--coding", "coding.tsv", "--out", "m.tsv"]);
    let row = report.lines().nth(1).expect("one report row");
    let cols: Vec<&str> = row.split('\t').collect();
    assert_eq!(cols[0], "00000000000000aa");
    assert_eq!(cols[4], "8", "rqi of one (2,2,2) response is 2*2*2");
    // Four topic ratings 4+5+3+4, interest 5, chat 4.
    assert_eq!(&cols[5..], ["16", "5", "4"]);
}

struct StepClock(AtomicU64);

impl Clock for StepClock {
    fn now_ms(&self) -> u64 {
        self.0.fetch_add(1500, Ordering::SeqCst)
    }
}

#[test]
fn chat_log_matches_the_service_log_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let engine = Engine::new(
        Arc::new(parse_agenda(&std::fs::read_to_string(interview_toml()).unwrap()).unwrap()),
        BundleRegistry::new(),
        SideTalkConfig::default(),
    )
    .unwrap();
    let store = SessionStore::open(&dir.path().join("svc"), vec![Arc::new(engine)], Arc::new(StepClock(AtomicU64::new(1000)))).unwrap();
    let id = store.create_session("interview").unwrap().session_id;
    for line in SCRIPT.lines() {
        store.post_message(&id, line).unwrap();
    }
    let served = std::fs::read_to_string(store.log_path(&id)).unwrap();

    let agenda = interview_toml();
    let out = run_with_stdin(
        dir.path(),
        &[
            "chat", "--agenda", agenda.to_str().unwrap(), "--session-id", &id, "--clock-start", "1000", "--clock-step", "1500",
            "--log", "chat.log",
        ],
        SCRIPT,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(dir.path().join("chat.log")).unwrap(), served);
}
