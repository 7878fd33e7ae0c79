//! File formats passed between stages.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use hearken_core::agenda::{parse_agenda, Agenda};
use hearken_core::dialog::Engine;
use hearken_core::listening::{load_bundle, BundleRegistry};
use hearken_core::pipeline::{IntentSummary, RankedResponse, TokenizedCorpus, TopicModel};
use hearken_core::sidetalk::SideTalkConfig;
use hearken_core::text::{escape_field, unescape_field};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::at(path, e))
}

pub fn write(path: &Path, text: &str) -> CliResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::at(parent, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::at(path, e))
}

/// Reads `id<TAB>text` lines, or plain lines numbered `d1`, `d2`, ... when
/// no line has a tab. Blank lines are skipped; an `id<TAB>text` header is ignored.
pub fn read_corpus(path: &Path) -> CliResult<Vec<(String, String)>> {
    let text = read(path)?;
    let lines: Vec<&str> = text.lines().map(|l| l.trim_end_matches('\r')).filter(|l| !l.trim().is_empty()).collect();
    let tabbed = lines.iter().any(|l| l.contains('\t'));
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if tabbed {
            if i == 0 && *line == "id\ttext" {
                continue;
            }
            let (id, body) = line
                .split_once('\t')
                .ok_or_else(|| CliError::at(path, format!("line {:?} has no tab; expected id<TAB>text", line)))?;
            out.push((id.trim().to_string(), unescape_field(body)));
        } else {
            out.push((format!("d{}", i + 1), line.to_string()));
        }
    }
    Ok(out)
}

/// Plain lines, blanks skipped.
pub fn read_lines(path: &Path) -> CliResult<Vec<String>> {
    Ok(read(path)?.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
}

/// `topics.json`: the fitted model plus the corpus it was fit on.
#[derive(Debug, Serialize, Deserialize)]
pub struct TopicsFile {
    pub doc_ids: Vec<String>,
    pub raw: Vec<String>,
    pub flagged: Vec<bool>,
    /// Ranked by coverage, all intents.
    pub intents: Vec<IntentSummary>,
    pub min_coverage: f64,
    pub model: TopicModel,
}

impl TopicsFile {
    pub fn new(corpus: &TokenizedCorpus, model: TopicModel, intents: Vec<IntentSummary>, min_coverage: f64) -> Self {
        Self {
            doc_ids: corpus.doc_ids.clone(),
            raw: corpus.raw.clone(),
            flagged: corpus.flagged.clone(),
            intents,
            min_coverage,
            model,
        }
    }

    /// The parts of the corpus later stages need.
    pub fn corpus(&self) -> TokenizedCorpus {
        TokenizedCorpus {
            doc_ids: self.doc_ids.clone(),
            docs: vec![Vec::new(); self.doc_ids.len()],
            vocab: Vec::new(),
            raw: self.raw.clone(),
            flagged: self.flagged.clone(),
        }
    }
}

pub const INTENTS_HEADER: &str = "intent\tcoverage\tdocuments\tkeywords";

pub fn render_intents(intents: &[IntentSummary]) -> String {
    let mut out = format!("{INTENTS_HEADER}\n");
    for i in intents {
        out.push_str(&format!("{}\t{:.4}\t{}\t{}\n", i.intent_id, i.coverage, i.member_doc_ids.len(), i.keywords.join(" ")));
    }
    out
}

pub const RANKED_HEADER: &str = "doc_id\tlexrank\tcentroid_sim\tcombined\ttext";

pub fn render_ranked(rows: &[(RankedResponse, String)]) -> String {
    let mut out = format!("{RANKED_HEADER}\n");
    for (r, text) in rows {
        out.push_str(&format!(
            "{}\t{:.10}\t{:.10}\t{:.10}\t{}\n",
            escape_field(&r.doc_id),
            r.lexrank_score,
            r.centroid_sim,
            r.combined,
            escape_field(text)
        ));
    }
    out
}

pub fn parse_ranked(path: &Path) -> CliResult<Vec<(RankedResponse, String)>> {
    let text = read(path)?;
    let mut lines = text.lines();
    if lines.next().map(|h| h.trim_end_matches('\r')) != Some(RANKED_HEADER) {
        return Err(CliError::at(path, format!("header must be {RANKED_HEADER:?}")));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let bad = |m: &str| CliError::at(path, format!("line {}: {m}", i + 2));
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(bad("expected 5 fields"));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(&format!("bad number {s:?}")));
        let r = RankedResponse {
            doc_id: unescape_field(f[0]),
            lexrank_score: num(f[1])?,
            centroid_sim: num(f[2])?,
            combined: num(f[3])?,
        };
        out.push((r, unescape_field(f[4])));
    }
    Ok(out)
}

pub fn load_agenda(path: &Path) -> CliResult<Agenda> {
    parse_agenda(&read(path)?).map_err(|e| CliError::at(path, e))
}

/// One engine per agenda, each seeing every bundle. Bundles without their
/// own thresholds take the agenda's.
pub fn load_engines(agendas: &[PathBuf], bundles: &[PathBuf]) -> CliResult<Vec<Arc<Engine>>> {
    let mut engines = Vec::with_capacity(agendas.len());
    for path in agendas {
        let agenda = load_agenda(path)?;
        let defaults = (agenda.settings.threshold1, agenda.settings.threshold2);
        let mut registry = BundleRegistry::new();
        for b in bundles {
            let loaded = load_bundle(b, defaults).map_err(|e| CliError::at(b, e))?;
            registry.insert(loaded.bundle, loaded.encoder).map_err(|e| CliError::at(b, e))?;
        }
        let engine = Engine::new(Arc::new(agenda), registry, SideTalkConfig::default()).map_err(|e| CliError::at(path, e))?;
        engines.push(Arc::new(engine));
    }
    Ok(engines)
}
