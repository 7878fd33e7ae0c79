//! `train`, `crossval` and `bind`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use hearken_core::agenda::{serialize_agenda, TemplateSet, TopicKind};
use hearken_core::classify::{
    cross_validate, render_report, select_best, synthetic, train as fit, Algorithm, BinaryClassifier, Dataset,
    Hyperparams, Metrics,
};
use hearken_core::dialog::Engine;
use hearken_core::encoder::EncoderModel;
use hearken_core::listening::{
    bind_bundle, load_bundle, relevance_training_rows, BundleFile, BundleIntent, BundleRegistry, BUNDLE_VERSION,
};
use hearken_core::pipeline::{review_import, Label, LabeledExample};
use hearken_core::sidetalk::SideTalkConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::args::{AlgoChoice, BindArgs, CrossvalArgs, TrainArgs};
use crate::error::{CliError, CliResult};
use crate::files;

/// What a model is trained to recognise.
enum Target<'a> {
    Intent(&'a str),
    Relevance { topic: &'a str, negatives: Vec<String> },
}

fn read_dataset(path: &Path) -> CliResult<Vec<LabeledExample>> {
    review_import(&files::read(path)?, None).map_err(|e| CliError::at(path, e))
}

fn build_dataset(examples: &[LabeledExample], encoder: &EncoderModel, target: Target, seed: u64) -> CliResult<Dataset> {
    let rows: Vec<(String, bool)> = match target {
        Target::Intent(intent) => examples
            .iter()
            .filter(|e| e.intent_id == intent && e.label != Label::Drop)
            .map(|e| (e.text.clone(), e.label == Label::Positive))
            .collect(),
        Target::Relevance { topic, negatives } => {
            let mut by_topic: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
            for e in examples {
                by_topic.entry(e.topic_id.clone()).or_default().insert(e.text.clone());
            }
            let by_topic: BTreeMap<String, Vec<String>> =
                by_topic.into_iter().map(|(t, texts)| (t, texts.into_iter().collect())).collect();
            let mut side_talk = SideTalkConfig::default().examples;
            side_talk.extend(negatives);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            relevance_training_rows(&by_topic, topic, &side_talk, &mut rng)
        }
    };
    if rows.is_empty() {
        return Err(CliError::runtime("no training rows match"));
    }
    let items = rows
        .into_iter()
        .enumerate()
        .map(|(i, (text, label))| (format!("r{}", i + 1), text.clone(), encoder.encode(&text), label))
        .collect();
    Ok(Dataset::from_embeddings(items)?)
}

fn cross_validate_all(data: &Dataset, algorithms: &[Algorithm], folds: usize, seed: u64) -> CliResult<Vec<(Algorithm, Metrics)>> {
    let hp = Hyperparams::default();
    algorithms
        .iter()
        .map(|&a| Ok((a, cross_validate(data, a, &hp, folds, seed)?.mean)))
        .collect()
}

pub fn train(args: TrainArgs) -> CliResult {
    let encoder = EncoderModel::load(&args.encoder).map_err(|e| CliError::at(&args.encoder, e))?;
    let examples = read_dataset(&args.dataset)?;
    let target = match (&args.intent, &args.relevance) {
        (Some(intent), None) => Target::Intent(intent),
        (None, Some(topic)) => {
            let negatives = args.negatives.as_deref().map(files::read_lines).transpose()?.unwrap_or_default();
            Target::Relevance { topic, negatives }
        }
        _ => return Err(CliError::usage("give exactly one of --intent or --relevance")),
    };
    let data = build_dataset(&examples, &encoder, target, args.seed)?;
    let (pos, neg) = data.class_counts();
    let algorithm = match args.algo {
        AlgoChoice::All => {
            let rows = cross_validate_all(&data, &Algorithm::ALL, args.folds as usize, args.seed)?;
            print!("{}", render_report(Some("Cross validation"), &rows));
            let best = select_best(&rows.iter().cloned().collect()).expect("four results");
            println!("selected {}", best.display_name());
            best
        }
        one => one.algorithms()[0],
    };
    let model = fit(&data, algorithm, &Hyperparams::default(), args.seed)?;
    files::write(&args.out, &model.to_json())?;
    println!("{} trained on {} rows ({pos} positive, {neg} negative)", algorithm.display_name(), pos + neg);
    Ok(())
}

pub fn crossval(args: CrossvalArgs) -> CliResult {
    let (data, title) = if args.synthetic {
        (synthetic::separable_fixture(args.seed), "Synthetic separable data".to_string())
    } else {
        let (Some(dataset), Some(encoder)) = (&args.dataset, &args.encoder) else {
            return Err(CliError::usage("--dataset and --encoder are required without --synthetic"));
        };
        let encoder = EncoderModel::load(encoder).map_err(|e| CliError::at(encoder, e))?;
        let examples = read_dataset(dataset)?;
        match (&args.intent, &args.relevance) {
            (Some(intent), _) => (build_dataset(&examples, &encoder, Target::Intent(intent), args.seed)?, format!("Intent {intent}")),
            (None, Some(topic)) => (
                build_dataset(&examples, &encoder, Target::Relevance { topic, negatives: Vec::new() }, args.seed)?,
                format!("Relevance of {topic}"),
            ),
            (None, None) => return Err(CliError::usage("give --intent or --relevance")),
        }
    };
    let title = format!("{title}: stratified {}-fold cross validation", args.folds);
    let rows = cross_validate_all(&data, &args.algo.algorithms(), args.folds as usize, args.seed)?;
    let report = render_report(Some(&title), &rows);
    print!("{report}");
    if let Some(out) = &args.out {
        files::write(out, &report)?;
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplatesFile {
    templates: Vec<TemplateSet>,
}

fn copy_into(src: &Path, dir: &Path, name: &str) -> CliResult<PathBuf> {
    let dest = dir.join(name);
    if src.canonicalize().ok() != dest.canonicalize().ok() || !dest.exists() {
        std::fs::copy(src, &dest).map_err(|e| CliError::at(src, e))?;
    }
    Ok(PathBuf::from(name))
}

pub fn bind(args: BindArgs) -> CliResult {
    let mut agenda = files::load_agenda(&args.agenda)?;
    let index = agenda
        .topic_index(&args.topic)
        .ok_or_else(|| CliError::usage(format!("agenda {:?} has no topic {:?}", agenda.id, args.topic)))?;
    if agenda.topics[index].kind != TopicKind::OpenEnded {
        return Err(CliError::usage(format!("topic {:?} is a rating topic; only open-ended topics take models", args.topic)));
    }
    let mut seen = BTreeSet::new();
    if let Some((dup, _)) = args.intents.iter().find(|(id, _)| !seen.insert(id.as_str())) {
        return Err(CliError::usage(format!("intent {dup:?} given twice")));
    }
    if let Some(path) = &args.templates {
        let file: TemplatesFile = toml::from_str(&files::read(path)?).map_err(|e| CliError::at(path, e))?;
        agenda.topics[index].templates.extend(file.templates);
    }

    // Check every model against the encoder before writing anything.
    let encoder = EncoderModel::load(&args.encoder).map_err(|e| CliError::at(&args.encoder, e))?;
    let fp = Some(encoder.fingerprint.as_str());
    BinaryClassifier::load(&args.relevance, fp).map_err(|e| CliError::at(&args.relevance, e))?;
    for (_, path) in &args.intents {
        BinaryClassifier::load(path, fp).map_err(|e| CliError::at(path, e))?;
    }

    let dir = &args.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::at(dir, e))?;
    let bundle = BundleFile {
        version: BUNDLE_VERSION,
        id: args.id.clone().unwrap_or_else(|| args.topic.clone()),
        topic: args.topic.clone(),
        threshold1: args.threshold1,
        threshold2: args.threshold2,
        encoder: copy_into(&args.encoder, dir, "encoder.json")?,
        encoder_fingerprint: encoder.fingerprint.clone(),
        relevance: copy_into(&args.relevance, dir, "relevance.model.json")?,
        intents: args
            .intents
            .iter()
            .map(|(id, path)| Ok(BundleIntent { id: id.clone(), model: copy_into(path, dir, &format!("{id}.model.json"))? }))
            .collect::<CliResult<_>>()?,
    };
    let bundle_path = dir.join("bundle.toml");
    files::write(&bundle_path, &bundle.to_toml())?;

    let defaults = (agenda.settings.threshold1, agenda.settings.threshold2);
    let loaded = load_bundle(&bundle_path, defaults).map_err(|e| CliError::at(&bundle_path, e))?;
    let bound = bind_bundle(&agenda, &args.topic, &loaded.bundle)?;
    let mut registry = BundleRegistry::new();
    registry.insert(loaded.bundle, loaded.encoder)?;
    let bound = Arc::new(bound);
    Engine::new(bound.clone(), registry, SideTalkConfig::default())
        .map_err(|e| CliError::runtime(format!("{e} (add response templates with --templates)")))?;
    files::write(&dir.join("agenda.toml"), &serialize_agenda(&bound))?;
    println!("bound {} intents to topic {:?}; wrote {}", bundle.intents.len(), args.topic, dir.display());
    Ok(())
}
