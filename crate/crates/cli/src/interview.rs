//! `chat`, `serve` and `eval`.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use hearken_core::dialog::{session_seed, Millis};
use hearken_core::metrics::{parse_coding_sheet, participant_metrics, render_metrics_report, UnigramModel};
use hearken_core::transcript::{opening_events, render_log, turn_events, LogEvent, TranscriptDoc};
use hearken_service::{SessionStore, SystemClock};
use rand::RngCore;

use crate::args::{ChatArgs, EvalArgs, ServeArgs};
use crate::error::{CliError, CliResult};
use crate::files;

fn random_id() -> String {
    let mut bytes = [0u8; 16];
    rand::thread_rng().fill_bytes(&mut bytes);
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

enum ChatClock {
    System,
    Fixed { next: Millis, step: Millis },
}

impl ChatClock {
    fn now(&mut self) -> Millis {
        match self {
            Self::System => SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as Millis),
            Self::Fixed { next, step } => {
                let now = *next;
                *next += *step;
                now
            }
        }
    }
}

fn append(log: &mut Option<(File, PathBuf)>, events: &[LogEvent]) -> CliResult {
    if let Some((file, path)) = log {
        file.write_all(render_log(events).as_bytes()).map_err(|e| CliError::at(path, e))?;
        file.sync_data().map_err(|e| CliError::at(path, e))?;
    }
    Ok(())
}

pub fn chat(args: ChatArgs) -> CliResult {
    let engine = files::load_engines(std::slice::from_ref(&args.agenda), &args.bundle)?.remove(0);
    let id = args.session_id.clone().unwrap_or_else(random_id);
    if id.trim().is_empty() {
        return Err(CliError::usage("--session-id must not be empty"));
    }
    let seed = args.seed.unwrap_or_else(|| session_seed(engine.agenda().settings.rng_seed, &id));
    let mut clock = match (args.clock_start, args.clock_step) {
        (Some(next), Some(step)) => ChatClock::Fixed { next, step },
        _ => ChatClock::System,
    };
    let mut log = match &args.log {
        Some(path) => {
            let file = OpenOptions::new().create(true).write(true).truncate(true).open(path).map_err(|e| CliError::at(path, e))?;
            Some((file, path.clone()))
        }
        None => None,
    };

    let (mut session, opening) = engine.start_session(id, seed, clock.now());
    let events = opening_events(&session);
    let mut next_seq = events.last().map_or(1, |e| e.seq + 1);
    append(&mut log, &events)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for m in &opening.messages {
        writeln!(out, "{m}")?;
    }
    out.flush()?;

    for line in io::stdin().lock().lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let before = session.transcript.len();
        let reply = engine.handle_message(&mut session, &line, clock.now())?;
        let events = turn_events(&session, before, next_seq);
        next_seq = events.last().map_or(next_seq, |e| e.seq + 1);
        append(&mut log, &events)?;
        for m in &reply.messages {
            writeln!(out, "{m}")?;
        }
        out.flush()?;
        if reply.done {
            break;
        }
    }

    if let Some(path) = &args.transcript {
        let doc = TranscriptDoc::from_session(&session, engine.agenda());
        files::write(path, &serde_json::to_string_pretty(&doc)?)?;
    }
    if !session.done {
        eprintln!("input ended before the interview finished");
    }
    Ok(())
}

pub fn serve(args: ServeArgs) -> CliResult {
    if args.engines.agenda.is_empty() {
        return Err(CliError::usage("give at least one --agenda"));
    }
    let engines = files::load_engines(&args.engines.agenda, &args.engines.bundle)?;
    let store = SessionStore::open(&args.data_dir, engines, Arc::new(SystemClock)).map_err(|e| CliError::at(&args.data_dir, e))?;
    for s in store.skipped() {
        eprintln!("warning: skipped {}: {}", s.path.display(), s.reason);
    }
    let restored = store.session_ids().len();
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind((args.host.as_str(), args.port)).await?;
        println!("listening on {}", listener.local_addr()?);
        if restored > 0 {
            println!("restored {restored} sessions");
        }
        io::stdout().flush()?;
        hearken_service::serve(listener, Arc::new(store)).await
    })?;
    Ok(())
}

fn transcript_files(paths: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| CliError::at(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "json"))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn load_transcript(path: &Path) -> CliResult<TranscriptDoc> {
    serde_json::from_str(&files::read(path)?).map_err(|e| CliError::at(path, e))
}

pub fn eval(args: EvalArgs) -> CliResult {
    let coding = match &args.coding {
        Some(path) => parse_coding_sheet(&files::read(path)?).map_err(|e| CliError::at(path, e))?,
        None => Default::default(),
    };
    let reference = files::read(&args.reference)?;
    let model = UnigramModel::fit(reference.lines());
    let mut rows = Vec::new();
    for path in transcript_files(&args.transcripts)? {
        let doc = load_transcript(&path)?;
        let coded = coding.get(&doc.session_id).map_or(&[][..], Vec::as_slice);
        rows.push(participant_metrics(&doc, coded, &model).map_err(|e| CliError::at(&path, e))?);
    }
    if rows.is_empty() {
        return Err(CliError::runtime("no transcripts found"));
    }
    let report = render_metrics_report(&rows);
    print!("{report}");
    if let Some(out) = &args.out {
        files::write(out, &report)?;
    }
    Ok(())
}
