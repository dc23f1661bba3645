use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use serde::{Deserialize, Serialize};
use serde_json::json;

use pgsum::analysis::{self, Field, PosClass, Side};
use pgsum::corpus::{
    self, build_extract_pairs, generate_synthetic_corpus, generate_synthetic_extracts, parse_lexicon,
    read_extract_records, tokenize, Document, Domain, ExtractPair, FallbackAnnotator, SplitSpec, TokenAnnotation,
    Vocabulary,
};
use pgsum::metrics::{self, RougeMode};
use pgsum::model::{beam_decode, greedy_decode, ModelParams};
use pgsum::training::{
    self, history_csv, load_checkpoint, pretrain_budget, save_checkpoint, Dataset, Regime, RegimeKind, TrainError,
    TrainState,
};

use crate::failure::{CmdResult, Failure, ResultExt};
use crate::settings::Settings;

#[derive(Debug, Clone, Copy)]
pub enum Baseline {
    FirstSentence,
    FirstK,
}

impl Baseline {
    fn as_str(self) -> &'static str {
        match self {
            Baseline::FirstSentence => "first-sentence",
            Baseline::FirstK => "first-k",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Analysis {
    Reuse,
    Distribution,
    Breakdown,
    Attention,
    SummaryWorthy,
}

impl Analysis {
    fn as_str(self) -> &'static str {
        match self {
            Analysis::Reuse => "reuse",
            Analysis::Distribution => "distribution",
            Analysis::Breakdown => "breakdown",
            Analysis::Attention => "attention",
            Analysis::SummaryWorthy => "summary-worthy",
        }
    }
}

/// Per-document decoding trace: the (truncated) input the model saw and the
/// attention over it at every emitted token.
#[derive(Debug, Serialize, Deserialize)]
struct TraceRecord {
    id: String,
    input: Vec<String>,
    attention: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub settings: BTreeMap<String, String>,
}

/// The output directory, checked but not yet created.
fn out_dir(s: &Settings) -> CmdResult<PathBuf> {
    let dir = s
        .path("out_dir")
        .ok_or_else(|| Failure::Usage(anyhow!("missing required setting `out_dir`")))?;
    if dir.exists() && !dir.is_dir() {
        return Err(Failure::Data(anyhow!("out_dir {} is not a directory", dir.display())));
    }
    Ok(dir)
}

fn create_dir(dir: &Path) -> CmdResult<()> {
    fs::create_dir_all(dir).map_err(|e| Failure::Data(anyhow!("{}: {e}", dir.display())))
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> CmdResult<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Failure::Data(anyhow!("{}: {e}", path.display())))
}

fn read(path: &Path) -> CmdResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::Data(anyhow!("{}: {e}", path.display())))
}

fn write_manifest(dir: &Path, command: &str, s: &Settings) -> CmdResult<()> {
    let seed = s.seed()?;
    let mut settings = s.entries().clone();
    settings.insert("seed".into(), seed.to_string());
    let manifest = Manifest {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        settings,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write(dir, &format!("{command}.manifest.json"), text + "\n")
}

pub fn read_manifest(path: &Path) -> CmdResult<Manifest> {
    serde_json::from_str(&read(path)?).data()
}

fn train_failure(e: TrainError) -> Failure {
    match e {
        TrainError::BadHyperparam { .. } | TrainError::UnknownKey(_) | TrainError::ConfigSyntax { .. } => {
            Failure::Usage(e.into())
        }
        TrainError::BadRegime { .. } => Failure::Usage(e.into()),
        _ => Failure::Data(e.into()),
    }
}

fn load_documents(path: &Path, fallback: Option<&FallbackAnnotator>) -> CmdResult<Vec<Document>> {
    let ing = corpus::ingest(path, fallback).data()?;
    if ing.documents.is_empty() {
        return Err(Failure::Data(anyhow!("{}: no well-formed documents", path.display())));
    }
    Ok(ing.documents)
}

fn load_vocab(path: &Path) -> CmdResult<Vocabulary> {
    Vocabulary::from_text(&read(path)?).data()
}

fn fallback_annotator(s: &Settings) -> CmdResult<Option<FallbackAnnotator>> {
    match s.existing_opt("lexicon")? {
        None => Ok(None),
        Some(p) => {
            let lex = parse_lexicon(&read(&p)?).data()?;
            Ok(Some(FallbackAnnotator::new(lex, HashMap::new())))
        }
    }
}

fn parse_domain(s: &Settings, key: &str) -> CmdResult<Option<Domain>> {
    match s.str(key) {
        None => Ok(None),
        Some("news") => Ok(Some(Domain::News)),
        Some("opinion") => Ok(Some(Domain::Opinion)),
        Some("other") => Ok(Some(Domain::Other)),
        Some(v) => Err(Failure::Usage(anyhow!("unknown domain {v:?} for {key}"))),
    }
}

pub fn generate(s: &Settings) -> CmdResult<()> {
    let dir = out_dir(s)?;
    let seed = s.seed()?;
    let per_domain: usize = s.parse_or("per_domain", 50)?;
    let extract_count: usize = s.parse_or("extract_count", 200)?;
    let docs = generate_synthetic_corpus(per_domain, seed);
    let mut extracts = String::new();
    for rec in generate_synthetic_extracts(extract_count, seed) {
        extracts.push_str(&serde_json::to_string(&rec).expect("extract record serializes"));
        extracts.push('\n');
    }
    create_dir(&dir)?;
    write(&dir, "corpus.jsonl", corpus::to_jsonl(&docs))?;
    write(&dir, "extracts.jsonl", extracts)?;
    write_manifest(&dir, "generate", s)?;
    println!("{}", json!({"documents": docs.len(), "extracts": extract_count}));
    Ok(())
}

fn parse_split(text: &str) -> CmdResult<SplitSpec> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::Usage(anyhow!("split expects three comma-separated fractions, got {text:?}")))?;
    let [train, valid, test] = parts[..] else {
        return Err(Failure::Usage(anyhow!("split expects three fractions, got {text:?}")));
    };
    SplitSpec::new(train, valid, test).usage()
}

pub fn prepare(s: &Settings) -> CmdResult<()> {
    let input = s.existing("corpus")?;
    let dir = out_dir(s)?;
    let seed = s.seed()?;
    let spec = match s.str("split") {
        Some(t) => parse_split(t)?,
        None => SplitSpec::default(),
    };
    let vocab_size: usize = s.parse_or("vocab_size", 5000)?;
    let fallback = fallback_annotator(s)?;

    let docs = load_documents(&input, fallback.as_ref())?;
    let read_count = docs.len();
    let kept = corpus::filter_pairs(docs);
    if kept.is_empty() {
        return Err(Failure::Data(anyhow!("no document passes the length filter")));
    }
    let kept_count = kept.len();
    let splits = corpus::split(kept, spec, seed);
    let vocab = Vocabulary::build(&splits.train, vocab_size).usage()?;

    create_dir(&dir)?;
    write(&dir, "train.jsonl", corpus::to_jsonl(&splits.train))?;
    write(&dir, "valid.jsonl", corpus::to_jsonl(&splits.valid))?;
    write(&dir, "test.jsonl", corpus::to_jsonl(&splits.test))?;
    write(&dir, "vocab.txt", vocab.to_text())?;
    write_manifest(&dir, "prepare", s)?;
    println!(
        "{}",
        json!({
            "read": read_count,
            "kept": kept_count,
            "train": splits.train.len(),
            "valid": splits.valid.len(),
            "test": splits.test.len(),
            "vocab": vocab.len(),
        })
    );
    Ok(())
}

/// Train and validation documents of a prepared directory, optionally
/// restricted to one domain.
fn prepared_split(dir: &Path, domain: Option<Domain>) -> CmdResult<(Vec<Document>, Vec<Document>)> {
    let load = |name: &str| -> CmdResult<Vec<Document>> {
        let docs = load_documents(&dir.join(name), None)?;
        Ok(match domain {
            Some(d) => docs.into_iter().filter(|doc| doc.domain == d).collect(),
            None => docs,
        })
    };
    Ok((load("train.jsonl")?, load("valid.jsonl")?))
}

/// Extract pairs with the last tenth (at least one pair) held out for
/// validation.
fn extract_split(path: &Path) -> CmdResult<(Vec<ExtractPair>, Vec<ExtractPair>)> {
    let records = read_extract_records(path).data()?;
    let (mut pairs, extractive) = build_extract_pairs(&records);
    if pairs.len() < 2 {
        return Err(Failure::Data(anyhow!("{}: fewer than two usable extract pairs", path.display())));
    }
    log::info!("{} extract pairs, {:.1}% extractive", pairs.len(), 100.0 * extractive);
    let n_valid = (pairs.len() / 10).max(1);
    let valid = pairs.split_off(pairs.len() - n_valid);
    Ok((pairs, valid))
}

/// The vocabulary path: explicit, else the first prepared directory holding
/// `vocab.txt`.
fn vocab_path(s: &Settings, dirs: &[&str]) -> CmdResult<PathBuf> {
    if s.path("vocab").is_some() {
        return s.existing("vocab");
    }
    for key in dirs {
        if let Some(d) = s.path(key) {
            let p = d.join("vocab.txt");
            if p.exists() {
                return Ok(p);
            }
        }
    }
    Err(Failure::Usage(anyhow!("missing required setting `vocab`")))
}

fn write_training_outputs(dir: &Path, state: &TrainState, history: &[training::HistoryRow]) -> CmdResult<()> {
    save_checkpoint(state, &dir.join("model.ckpt")).data()?;
    write(dir, "loss_history.csv", history_csv(history))
}

/// Saves what a diverged run kept and converts the error.
fn handle_divergence(dir: &Path, command: &str, s: &Settings, e: TrainError) -> Failure {
    if let TrainError::Diverged {
        ref last_good,
        ref history,
        ..
    } = e
    {
        let saved = save_checkpoint(last_good, &dir.join("last_good.ckpt"))
            .data()
            .and_then(|_| write(dir, "loss_history.csv", history_csv(history)))
            .and_then(|_| write_manifest(dir, command, s));
        if let Err(f) = saved {
            return f;
        }
        return Failure::Diverged(e.into());
    }
    train_failure(e)
}

pub fn train(s: &Settings) -> CmdResult<()> {
    let kind_text = s
        .str("regime")
        .ok_or_else(|| Failure::Usage(anyhow!("missing required setting `regime`")))?;
    let kind = RegimeKind::parse(kind_text).ok_or_else(|| Failure::Usage(anyhow!("unknown regime {kind_text:?}")))?;
    let hp = s.hyperparams()?;
    let dir = out_dir(s)?;
    let init_path = s.existing_opt("init")?;
    let (source_dir, target_dir, extracts) = match kind {
        RegimeKind::InDomain => (None, Some(s.existing("target")?), None),
        RegimeKind::OutOfDomain => (Some(s.existing("source")?), None, None),
        RegimeKind::MixDomain => (Some(s.existing("source")?), Some(s.existing("target")?), None),
        RegimeKind::PretrainExtracts => (None, None, Some(s.existing("extracts")?)),
    };
    let vocab = load_vocab(&vocab_path(s, &["target", "source"])?)?;
    let init = match &init_path {
        Some(p) => Some(load_checkpoint(p).data()?.params),
        None => None,
    };
    // A warm start fixes the network shape.
    let config = match &init {
        Some(p) => p.config().clone(),
        None => s.model_config(vocab.len())?,
    };
    if config.vocab_size != vocab.len() {
        return Err(Failure::Data(anyhow!(
            "checkpoint vocabulary size {} differs from the vocabulary ({})",
            config.vocab_size,
            vocab.len()
        )));
    }

    let documents = |dir: &Option<PathBuf>, key: &str| -> CmdResult<Option<Dataset>> {
        match dir {
            None => Ok(None),
            Some(d) => {
                let (tr, va) = prepared_split(d, parse_domain(s, key)?)?;
                Ok(Some(Dataset::from_documents(&tr, &va, &vocab, &config).data()?))
            }
        }
    };
    let mut source = documents(&source_dir, "source_domain")?;
    let target = documents(&target_dir, "target_domain")?;
    if let Some(path) = &extracts {
        let (tr, va) = extract_split(path)?;
        source = Some(Dataset::from_extract_pairs(&tr, &va, &vocab, &config).data()?);
    }
    let regime = Regime::new(kind, source, target, init).map_err(train_failure)?;

    create_dir(&dir)?;
    write(&dir, "vocab.txt", vocab.to_text())?;
    let outcome = match training::train(&regime, &config, &hp) {
        Ok(o) => o,
        Err(e) => return Err(handle_divergence(&dir, "train", s, e)),
    };
    for (name, state) in &outcome.phase_states {
        save_checkpoint(state, &dir.join(format!("phase-{name}.ckpt"))).data()?;
    }
    write_training_outputs(&dir, &outcome.state, &outcome.history)?;
    write_manifest(&dir, "train", s)?;
    println!(
        "{}",
        json!({
            "regime": kind.as_str(),
            "steps": outcome.state.step,
            "best_valid_loss": outcome.state.best_valid_loss,
        })
    );
    Ok(())
}

pub fn pretrain(s: &Settings) -> CmdResult<()> {
    let hp = s.hyperparams()?;
    let dir = out_dir(s)?;
    let extracts = s.existing("extracts")?;
    let target_dir = s.existing("target")?;
    let scale: f64 = s.parse_or("pretrain_scale", 0.01)?;
    let steps: usize = s.parse_or("pretrain_steps", pretrain_budget(scale))?;
    let vocab = load_vocab(&vocab_path(s, &["target"])?)?;
    let config = s.model_config(vocab.len())?;

    let (etr, eva) = extract_split(&extracts)?;
    let extract_set = Dataset::from_extract_pairs(&etr, &eva, &vocab, &config).data()?;
    let (tr, va) = prepared_split(&target_dir, parse_domain(s, "target_domain")?)?;
    let annotated = Dataset::from_documents(&tr, &va, &vocab, &config).data()?;

    create_dir(&dir)?;
    write(&dir, "vocab.txt", vocab.to_text())?;
    let outcome = match training::pretrain_then_finetune(&extract_set, &annotated, &config, &hp, steps) {
        Ok(o) => o,
        Err(e) => return Err(handle_divergence(&dir, "pretrain", s, e)),
    };
    save_checkpoint(&outcome.pretrained, &dir.join("pretrained.ckpt")).data()?;
    write_training_outputs(&dir, &outcome.finetuned, &outcome.history)?;
    write_manifest(&dir, "pretrain", s)?;
    println!(
        "{}",
        json!({
            "pretrain_steps": steps,
            "steps": outcome.finetuned.step,
            "best_valid_loss": outcome.finetuned.best_valid_loss,
        })
    );
    Ok(())
}

pub fn decode(s: &Settings) -> CmdResult<()> {
    let ckpt = s.existing("checkpoint")?;
    let input = s.existing("input")?;
    let vocab_file = match s.path("vocab") {
        Some(_) => s.existing("vocab")?,
        None => {
            let p = ckpt.with_file_name("vocab.txt");
            if !p.exists() {
                return Err(Failure::Usage(anyhow!("missing required setting `vocab`")));
            }
            p
        }
    };
    let dir = out_dir(s)?;
    let beam_width = match s.str("decoder").unwrap_or("greedy") {
        "greedy" => None,
        "beam" => Some(s.parse_or("beam_width", 4usize)?),
        other => return Err(Failure::Usage(anyhow!("unknown decoder {other:?}"))),
    };
    let vocab = load_vocab(&vocab_file)?;
    let params: ModelParams = load_checkpoint(&ckpt).data()?.params;
    if params.config().vocab_size != vocab.len() {
        return Err(Failure::Data(anyhow!("checkpoint and vocabulary sizes differ")));
    }
    let docs = load_documents(&input, None)?;

    let mut outputs = String::new();
    let mut traces = Vec::with_capacity(docs.len());
    for doc in &docs {
        let decoded = match beam_width {
            None => greedy_decode(&doc.text_tokens, &params, &vocab),
            Some(w) => beam_decode(&doc.text_tokens, &params, &vocab, w),
        }
        .map_err(|e| Failure::Data(anyhow!("document {}: {e}", doc.id)))?;
        outputs.push_str(&decoded.tokens.join(" "));
        outputs.push('\n');
        let seen = doc.text_tokens.len().min(params.config().max_input_len);
        traces.push(TraceRecord {
            id: doc.id.clone(),
            input: doc.text_tokens[..seen].to_vec(),
            attention: analysis::attention_steps(&decoded),
        });
    }
    create_dir(&dir)?;
    write(&dir, "outputs.txt", outputs)?;
    write(&dir, "traces.json", serde_json::to_string(&traces).expect("traces serialize"))?;
    write_manifest(&dir, "decode", s)?;
    println!("{}", json!({"documents": docs.len()}));
    Ok(())
}

/// Token lists from a corpus file (abstracts) or a one-per-line text file.
fn reference_tokens(path: &Path) -> CmdResult<Vec<Vec<String>>> {
    if path.extension().is_some_and(|e| e == "jsonl") {
        Ok(load_documents(path, None)?
            .into_iter()
            .map(|d| d.abstract_tokens)
            .collect())
    } else {
        Ok(line_tokens(&read(path)?))
    }
}

fn line_tokens(text: &str) -> Vec<Vec<String>> {
    text.lines().map(tokenize).collect()
}

pub fn evaluate(s: &Settings) -> CmdResult<()> {
    let outputs_path = s.existing("outputs")?;
    let refs_path = s.existing("references")?;
    let dir = out_dir(s)?;
    let mode = match s.str("rouge_mode").unwrap_or("recall") {
        "recall" => RougeMode::Recall,
        "precision" => RougeMode::Precision,
        "f1" => RougeMode::F1,
        other => return Err(Failure::Usage(anyhow!("unknown rouge_mode {other:?}"))),
    };
    let outputs = line_tokens(&read(&outputs_path)?);
    let references = reference_tokens(&refs_path)?;
    let pairs = metrics::score_pairs(&outputs, &references, mode).data()?;
    let score = metrics::aggregate(&pairs);
    let text = serde_json::to_string(&score).expect("score serializes");
    create_dir(&dir)?;
    write(&dir, "eval.json", format!("{text}\n"))?;
    write(&dir, "pairs.csv", metrics::pair_scores_csv(&pairs))?;
    write_manifest(&dir, "evaluate", s)?;
    println!("{text}");
    Ok(())
}

pub fn baseline(s: &Settings, which: Baseline) -> CmdResult<()> {
    let input = s.existing("corpus")?;
    let dir = out_dir(s)?;
    let k: Option<usize> = s.parse_opt("k")?;
    let docs = load_documents(&input, None)?;
    let mut out = String::new();
    for doc in &docs {
        let summary = match which {
            Baseline::FirstSentence => metrics::baseline_first_sentence(&doc.text_tokens),
            Baseline::FirstK => metrics::baseline_first_k(&doc.text_tokens, doc.domain, k)
                .map_err(|e| Failure::Data(anyhow!("document {}: {e}", doc.id)))?,
        };
        out.push_str(&summary.join(" "));
        out.push('\n');
    }
    create_dir(&dir)?;
    write(&dir, "baseline.txt", out)?;
    let mut snapshot = s.clone();
    snapshot.set("which", Some(which.as_str()));
    write_manifest(&dir, "baseline", &snapshot)?;
    println!("{}", json!({"documents": docs.len(), "baseline": which.as_str()}));
    Ok(())
}

fn parse_field(s: &Settings) -> CmdResult<Field> {
    match s.str("field").unwrap_or("pos") {
        "pos" => Ok(Field::Pos),
        "ne" => Ok(Field::Ne),
        "subjectivity" => Ok(Field::Subjectivity),
        other => Err(Failure::Usage(anyhow!("unknown field {other:?}"))),
    }
}

fn parse_side(s: &Settings) -> CmdResult<Side> {
    match s.str("side").unwrap_or("abstract") {
        "abstract" => Ok(Side::Abstract),
        "text" => Ok(Side::Text),
        other => Err(Failure::Usage(anyhow!("unknown side {other:?}"))),
    }
}

fn parse_pos(s: &Settings) -> CmdResult<Option<PosClass>> {
    let Some(v) = s.str("pos") else {
        return Ok(None);
    };
    [
        PosClass::Noun,
        PosClass::Verb,
        PosClass::Adjective,
        PosClass::Adverb,
        PosClass::Other,
    ]
    .into_iter()
    .find(|c| c.as_str().eq_ignore_ascii_case(v))
    .map(Some)
    .ok_or_else(|| Failure::Usage(anyhow!("unknown POS class {v:?}")))
}

fn load_traces(path: &Path, docs: &[Document]) -> CmdResult<Vec<TraceRecord>> {
    let traces: Vec<TraceRecord> = serde_json::from_str(&read(path)?).data()?;
    if traces.len() != docs.len() {
        return Err(Failure::Data(anyhow!(
            "{} traces for {} documents",
            traces.len(),
            docs.len()
        )));
    }
    for (t, d) in traces.iter().zip(docs) {
        if t.id != d.id || d.text_tokens[..t.input.len().min(d.text_tokens.len())] != t.input[..] {
            return Err(Failure::Data(anyhow!("trace {} does not match document {}", t.id, d.id)));
        }
    }
    Ok(traces)
}

/// Text annotations cut to the length each trace saw.
fn trace_annotations(
    docs: &[Document],
    traces: &[TraceRecord],
    fallback: Option<&FallbackAnnotator>,
) -> CmdResult<Vec<Vec<TokenAnnotation>>> {
    docs.iter()
        .zip(traces)
        .map(|(d, t)| {
            let mut anns = match (&d.annotations, fallback) {
                (Some(a), _) => a.text.clone(),
                (None, Some(f)) => f.annotate(&d.text_tokens),
                (None, None) => {
                    return Err(Failure::Data(anyhow!("document {} has no annotations", d.id)));
                }
            };
            anns.truncate(t.input.len());
            Ok(anns)
        })
        .collect()
}

pub fn analyze(s: &Settings, which: Analysis) -> CmdResult<()> {
    let corpus_path = s.existing("corpus")?;
    let (outputs_path, traces_path, train_path) = match which {
        Analysis::Breakdown => (Some(s.existing("outputs")?), None, Some(s.existing("train_corpus")?)),
        Analysis::Attention | Analysis::SummaryWorthy => (None, Some(s.existing("traces")?), None),
        Analysis::Reuse | Analysis::Distribution => (None, None, None),
    };
    let field = parse_field(s)?;
    let side = parse_side(s)?;
    let pos = parse_pos(s)?;
    let dir = out_dir(s)?;
    let fallback = fallback_annotator(s)?;
    let docs = load_documents(&corpus_path, None)?;
    let name = which.as_str().replace('-', "_");

    let mut csv = None;
    let report = match which {
        Analysis::Reuse => {
            let rate = analysis::reuse_rate(&docs, pos, fallback.as_ref()).data()?;
            json!({"reuse_rate": rate, "pos": pos.map(PosClass::as_str)})
        }
        Analysis::Distribution => {
            let dist = analysis::distribution_by_category(&docs, field, side, fallback.as_ref()).data()?;
            csv = Some(analysis::category_csv(dist.iter().map(|(k, v)| (k.as_str(), *v))));
            json!(dist)
        }
        Analysis::Breakdown => {
            let outputs = line_tokens(&read(outputs_path.as_deref().expect("checked"))?);
            let train_docs = load_documents(train_path.as_deref().expect("checked"), None)?;
            let seen = analysis::abstract_vocabulary(&train_docs);
            let gold: Vec<Vec<String>> = docs.iter().map(|d| d.abstract_tokens.clone()).collect();
            let inputs: Vec<Vec<String>> = docs.iter().map(|d| d.text_tokens.clone()).collect();
            let r = analysis::gold_token_breakdown(&gold, &outputs, &inputs, &seen).data()?;
            csv = Some(analysis::category_csv(r.rows()));
            json!(r)
        }
        Analysis::Attention | Analysis::SummaryWorthy => {
            let traces = load_traces(traces_path.as_deref().expect("checked"), &docs)?;
            let attn: Vec<Vec<Vec<f64>>> = traces.iter().map(|t| t.attention.clone()).collect();
            let inputs: Vec<Vec<String>> = traces.iter().map(|t| t.input.clone()).collect();
            let gold: Vec<Vec<String>> = docs.iter().map(|d| d.abstract_tokens.clone()).collect();
            let rate = analysis::summary_worthy_rate(&attn, &inputs, &gold).data()?;
            if let Analysis::SummaryWorthy = which {
                json!({"summary_worthy_rate": rate})
            } else {
                let anns = trace_annotations(&docs, &traces, fallback.as_ref())?;
                let mut r = analysis::attention_categorize(&attn, &anns).data()?;
                r.summary_worthy_rate = Some(rate);
                csv = Some(analysis::category_csv(r.rows()));
                json!(r)
            }
        }
    };
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    create_dir(&dir)?;
    write(&dir, &format!("{name}.json"), format!("{text}\n"))?;
    if let Some(csv) = csv {
        write(&dir, &format!("{name}.csv"), csv)?;
    }
    let mut snapshot = s.clone();
    snapshot.set("which", Some(which.as_str()));
    write_manifest(&dir, &format!("analyze-{name}"), &snapshot)?;
    println!("{text}");
    Ok(())
}

/// Reruns the command recorded in a manifest with its settings snapshot.
pub fn replay(manifest: &Manifest, out_dir: Option<&Path>) -> CmdResult<()> {
    let mut s = Settings::from_entries(manifest.settings.clone());
    s.set("out_dir", out_dir.map(|p| p.display()));
    let which = s.str("which").unwrap_or_default().to_string();
    match manifest.command.as_str() {
        "generate" => generate(&s),
        "prepare" => prepare(&s),
        "train" => train(&s),
        "pretrain" => pretrain(&s),
        "decode" => decode(&s),
        "evaluate" => evaluate(&s),
        "baseline" => {
            let b = match which.as_str() {
                "first-sentence" => Baseline::FirstSentence,
                "first-k" => Baseline::FirstK,
                _ => return Err(Failure::Data(anyhow!("manifest names no baseline"))),
            };
            baseline(&s, b)
        }
        c if c.starts_with("analyze-") => {
            let a = match which.as_str() {
                "reuse" => Analysis::Reuse,
                "distribution" => Analysis::Distribution,
                "breakdown" => Analysis::Breakdown,
                "attention" => Analysis::Attention,
                "summary-worthy" => Analysis::SummaryWorthy,
                _ => return Err(Failure::Data(anyhow!("manifest names no analysis"))),
            };
            analyze(&s, a)
        }
        other => Err(Failure::Data(anyhow!("manifest has unknown command {other:?}"))),
    }
}
