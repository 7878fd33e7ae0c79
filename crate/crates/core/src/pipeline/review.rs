//! Tab-separated review files.
//!
//! ```text
//! text<TAB>topic<TAB>intent<TAB>label<TAB>source
//! ```
//!
//! Reviewers edit the label column (or set it to `drop`). On import, a row is
//! marked `human` when its source column says so or when its label differs
//! from the baseline file written at export time.

use std::collections::HashMap;

use super::{Label, LabeledExample, PipelineError, Source};
use crate::text::{escape_field, unescape_field};

pub const REVIEW_HEADER: &str = "text\ttopic\tintent\tlabel\tsource";

pub fn review_export(examples: &[LabeledExample]) -> Result<String, PipelineError> {
    if examples.is_empty() {
        return Err(PipelineError::NothingToExport);
    }
    let mut out = String::from(REVIEW_HEADER);
    out.push('\n');
    for e in examples {
        let fields = [escape_field(&e.text), escape_field(&e.topic_id), escape_field(&e.intent_id)];
        out.push_str(&format!("{}\t{}\t{}\t{}\t{}\n", fields[0], fields[1], fields[2], e.label, e.source));
    }
    Ok(out)
}

fn parse_rows(text: &str) -> Result<Vec<(usize, LabeledExample)>, PipelineError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end_matches('\r') == REVIEW_HEADER => {}
        _ => return Err(PipelineError::MalformedRow { line: 1, message: format!("header must be {REVIEW_HEADER:?}") }),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(PipelineError::MalformedRow { line: line_no, message: format!("expected 5 fields, found {}", f.len()) });
        }
        let label = f[3]
            .trim()
            .parse::<Label>()
            .map_err(|_| PipelineError::UnknownLabel { line: line_no, label: f[3].to_string() })?;
        let source = f[4]
            .trim()
            .parse::<Source>()
            .map_err(|_| PipelineError::MalformedRow { line: line_no, message: format!("unknown source {:?}", f[4]) })?;
        let text = unescape_field(f[0]);
        if text.trim().is_empty() && source != Source::Skipped {
            return Err(PipelineError::MalformedRow { line: line_no, message: "empty text".into() });
        }
        rows.push((
            line_no,
            LabeledExample { text, topic_id: unescape_field(f[1]), intent_id: unescape_field(f[2]), label, source },
        ));
    }
    Ok(rows)
}

/// Reads a reviewed file. Rows labeled `drop` are removed.
pub fn review_import(text: &str, baseline: Option<&str>) -> Result<Vec<LabeledExample>, PipelineError> {
    let rows = parse_rows(text)?;
    let original: HashMap<(String, String, String), Label> = match baseline {
        Some(b) => parse_rows(b)?
            .into_iter()
            .map(|(_, e)| ((e.text, e.topic_id, e.intent_id), e.label))
            .collect(),
        None => HashMap::new(),
    };
    Ok(rows
        .into_iter()
        .filter(|(_, e)| e.label != Label::Drop)
        .map(|(_, mut e)| {
            let key = (e.text.clone(), e.topic_id.clone(), e.intent_id.clone());
            if original.get(&key).is_some_and(|&l| l != e.label) {
                e.source = Source::Human;
            }
            e
        })
        .collect())
}
