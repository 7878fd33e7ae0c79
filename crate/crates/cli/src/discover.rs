//! `discover`, `rank` and `label`: from raw answers to a reviewed dataset.

use std::collections::HashMap;
use std::ffi::OsString;
use std::path::PathBuf;

use hearken_core::encoder::EncoderModel;
use hearken_core::pipeline::{
    auto_label, lexrank, preprocess, rank_intents, review_export, review_import, select_cluster, Label, LabeledExample,
    LdaConfig, LexRankConfig, PreprocessConfig, Source, TopicModel,
};

use crate::args::{DiscoverArgs, LabelArgs, RankArgs};
use crate::error::{CliError, CliResult};
use crate::files::{self, TopicsFile};

pub fn discover(args: DiscoverArgs) -> CliResult {
    let k = args.k as usize;
    let config = LdaConfig {
        k,
        alpha: args.alpha.unwrap_or(50.0 / k as f64),
        beta: args.beta,
        iterations: args.iters as usize,
        seed: args.seed,
    };
    config.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let texts = files::read_corpus(&args.corpus)?;
    let corpus = preprocess(&texts, &PreprocessConfig::default()).map_err(|e| CliError::at(&args.corpus, e))?;
    let model = TopicModel::fit(&corpus, config)?;
    let intents = rank_intents(&model, &corpus);
    let raw: Vec<&str> = corpus.raw.iter().map(String::as_str).collect();
    let encoder = EncoderModel::fit(&raw, args.dim as usize)?;

    let kept: Vec<_> = intents.iter().filter(|i| i.coverage >= args.min_coverage).cloned().collect();
    let topics = TopicsFile::new(&corpus, model, intents, args.min_coverage);
    files::write(&args.out_dir.join("topics.json"), &serde_json::to_string(&topics)?)?;
    files::write(&args.out_dir.join("encoder.json"), &encoder.to_json())?;
    files::write(&args.out_dir.join("intents.tsv"), &files::render_intents(&kept))?;

    println!("{} documents, {} usable, vocabulary {}", corpus.len(), corpus.usable_docs(), corpus.vocab.len());
    for i in &topics.intents {
        let mark = if i.coverage >= args.min_coverage { "" } else { "  (below min coverage)" };
        println!("{}\t{:.4}\t{}{mark}", i.intent_id, i.coverage, i.keywords.join(" "));
    }
    Ok(())
}

pub fn rank(args: RankArgs) -> CliResult {
    let topics: TopicsFile = serde_json::from_str(&files::read(&args.topics)?).map_err(|e| CliError::at(&args.topics, e))?;
    let encoder = EncoderModel::load(&args.encoder).map_err(|e| CliError::at(&args.encoder, e))?;
    let corpus = topics.corpus();
    let members = select_cluster(&topics.model, &corpus, &args.intent, args.threshold)?;
    let raw: HashMap<&str, &str> = topics.doc_ids.iter().map(String::as_str).zip(topics.raw.iter().map(String::as_str)).collect();
    let cluster: Vec<(String, Vec<f64>)> =
        members.iter().map(|id| (id.clone(), encoder.encode(raw[id.as_str()]).values)).collect();
    let ranked = lexrank(&cluster, &LexRankConfig::default())?;
    let rows: Vec<_> = ranked.into_iter().map(|r| {
        let text = raw[r.doc_id.as_str()].to_string();
        (r, text)
    }).collect();
    files::write(&args.out, &files::render_ranked(&rows))?;
    println!("{}: {} responses ranked", args.intent, rows.len());
    Ok(())
}

fn with_suffix(path: &std::path::Path, suffix: &str) -> PathBuf {
    let mut s: OsString = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn count(examples: &[LabeledExample], label: Label) -> usize {
    examples.iter().filter(|e| e.label == label).count()
}

pub fn label(args: LabelArgs) -> CliResult {
    if let Some(import) = &args.import {
        let baseline_path = args.baseline.clone().or_else(|| Some(with_suffix(import, ".orig")).filter(|p| p.exists()));
        let baseline = baseline_path.as_deref().map(files::read).transpose()?;
        let examples = review_import(&files::read(import)?, baseline.as_deref()).map_err(|e| CliError::at(import, e))?;
        files::write(&args.out, &review_export(&examples)?)?;
        let human = examples.iter().filter(|e| e.source == Source::Human).count();
        println!(
            "{} positive, {} negative ({} changed by reviewers)",
            count(&examples, Label::Positive),
            count(&examples, Label::Negative),
            human
        );
        return Ok(());
    }

    // clap guarantees these when --import is absent.
    let (Some(ranked_path), Some(topic), Some(intent)) = (&args.ranked, &args.topic, &args.intent) else {
        return Err(CliError::usage("--ranked, --topic and --intent are required"));
    };
    let rows = files::parse_ranked(ranked_path)?;
    let raw: HashMap<String, String> = rows.iter().map(|(r, t)| (r.doc_id.clone(), t.clone())).collect();
    let ranked: Vec<_> = rows.into_iter().map(|(r, _)| r).collect();
    let mut examples = auto_label(&ranked, args.fraction, &raw, topic, intent)?;
    let take = count(&examples, Label::Positive);
    if args.include_middle {
        let middle = ranked[take..ranked.len() - take].iter().map(|r| LabeledExample {
            text: raw[&r.doc_id].clone(),
            topic_id: topic.clone(),
            intent_id: intent.clone(),
            label: Label::Drop,
            source: Source::Skipped,
        });
        let negatives = examples.split_off(take);
        examples.extend(middle);
        examples.extend(negatives);
    }
    let text = review_export(&examples)?;
    files::write(&args.out, &text)?;
    files::write(&with_suffix(&args.out, ".orig"), &text)?;
    println!("{take} positive, {take} negative of {} ranked responses", ranked.len());
    Ok(())
}
