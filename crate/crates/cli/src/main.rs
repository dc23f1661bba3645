//! `pgsum`: data preparation, training regimes, decoding, evaluation,
//! baselines and analysis for pointer-generator summarization.

mod commands;
mod failure;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use failure::Failure;
use settings::Settings;

#[derive(Parser, Debug)]
#[command(name = "pgsum", version, about = "Pointer-generator summarization toolkit")]
struct Cli {
    /// Flat `key = value` config file. `--set` pairs override it; explicit
    /// flags override both.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Extra `KEY=VALUE` setting (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Directory receiving every file the command writes.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct TrainFlags {
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    eval_every: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    hidden_size: Option<usize>,
    #[arg(long)]
    embedding_size: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a seeded synthetic two-domain corpus and extract pairs.
    Generate {
        #[arg(long)]
        per_domain: Option<usize>,
        #[arg(long)]
        extract_count: Option<usize>,
    },
    /// Ingest, filter, split and build the vocabulary.
    Prepare {
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Subjectivity lexicon enabling the fallback annotator.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Train,valid,test fractions, e.g. `0.75,0.15,0.10`.
        #[arg(long)]
        split: Option<String>,
        #[arg(long)]
        vocab_size: Option<usize>,
    },
    /// Train under a regime.
    Train {
        /// in-domain, out-of-domain, mix-domain or pretrain-extracts.
        #[arg(long)]
        regime: Option<String>,
        /// Prepared directory for the source domain.
        #[arg(long)]
        source: Option<PathBuf>,
        /// Prepared directory for the target domain.
        #[arg(long)]
        target: Option<PathBuf>,
        /// Keep only documents of this domain from the source directory.
        #[arg(long)]
        source_domain: Option<String>,
        #[arg(long)]
        target_domain: Option<String>,
        /// Extract-pair file for the pretrain-extracts regime.
        #[arg(long)]
        extracts: Option<PathBuf>,
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Initial checkpoint.
        #[arg(long)]
        init: Option<PathBuf>,
        #[command(flatten)]
        flags: TrainFlags,
    },
    /// Fixed-budget extract pre-training, then fine-tuning.
    Pretrain {
        #[arg(long)]
        extracts: Option<PathBuf>,
        #[arg(long)]
        target: Option<PathBuf>,
        #[arg(long)]
        target_domain: Option<String>,
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long)]
        pretrain_steps: Option<usize>,
        #[command(flatten)]
        flags: TrainFlags,
    },
    /// Summarize every document of a corpus file.
    Decode {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
        /// greedy (default) or beam.
        #[arg(long)]
        decoder: Option<String>,
        #[arg(long)]
        beam_width: Option<usize>,
    },
    /// Score system outputs against references.
    Evaluate {
        /// One output per line.
        #[arg(long)]
        outputs: Option<PathBuf>,
        /// Corpus file (`.jsonl`, abstracts used) or one reference per line.
        #[arg(long)]
        references: Option<PathBuf>,
        /// recall (default), precision or f1.
        #[arg(long)]
        rouge_mode: Option<String>,
    },
    /// Lead baselines.
    Baseline {
        which: BaselineKind,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Prefix length overriding the domain default.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Corpus and transfer analyses.
    Analyze {
        which: AnalyzeKind,
        /// Corpus file with gold abstracts, inputs and annotations.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        outputs: Option<PathBuf>,
        /// Attention trace file written by `decode`.
        #[arg(long)]
        traces: Option<PathBuf>,
        /// Training corpus whose abstracts define "seen" tokens.
        #[arg(long)]
        train_corpus: Option<PathBuf>,
        /// pos, ne or subjectivity.
        #[arg(long)]
        field: Option<String>,
        /// abstract or text.
        #[arg(long)]
        side: Option<String>,
        /// Restrict reuse to one POS class (Noun, Verb, Adjective, Adverb, Other).
        #[arg(long)]
        pos: Option<String>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Rerun a command from its manifest.
    Replay {
        manifest: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BaselineKind {
    FirstSentence,
    FirstK,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AnalyzeKind {
    Reuse,
    Distribution,
    Breakdown,
    Attention,
    SummaryWorthy,
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut s = Settings::load(cli.config.as_deref(), &cli.set)?;
    s.set("out_dir", cli.out_dir.as_ref().map(|p| p.display()));
    s.set("seed", cli.seed);
    let apply_train = |s: &mut Settings, f: &TrainFlags| {
        s.set("learning_rate", f.learning_rate);
        s.set("batch_size", f.batch_size);
        s.set("eval_every", f.eval_every);
        s.set("patience", f.patience);
        s.set("max_steps", f.max_steps);
        s.set("hidden_size", f.hidden_size);
        s.set("embedding_size", f.embedding_size);
    };
    let show = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
    match &cli.command {
        Command::Generate {
            per_domain,
            extract_count,
        } => {
            s.set("per_domain", *per_domain);
            s.set("extract_count", *extract_count);
            commands::generate(&s)
        }
        Command::Prepare {
            corpus,
            lexicon,
            split,
            vocab_size,
        } => {
            s.set("corpus", show(corpus));
            s.set("lexicon", show(lexicon));
            s.set("split", split.clone());
            s.set("vocab_size", *vocab_size);
            commands::prepare(&s)
        }
        Command::Train {
            regime,
            source,
            target,
            source_domain,
            target_domain,
            extracts,
            vocab,
            init,
            flags,
        } => {
            s.set("regime", regime.clone());
            s.set("source", show(source));
            s.set("target", show(target));
            s.set("source_domain", source_domain.clone());
            s.set("target_domain", target_domain.clone());
            s.set("extracts", show(extracts));
            s.set("vocab", show(vocab));
            s.set("init", show(init));
            apply_train(&mut s, flags);
            commands::train(&s)
        }
        Command::Pretrain {
            extracts,
            target,
            target_domain,
            vocab,
            pretrain_steps,
            flags,
        } => {
            s.set("extracts", show(extracts));
            s.set("target", show(target));
            s.set("target_domain", target_domain.clone());
            s.set("vocab", show(vocab));
            s.set("pretrain_steps", *pretrain_steps);
            apply_train(&mut s, flags);
            commands::pretrain(&s)
        }
        Command::Decode {
            checkpoint,
            vocab,
            input,
            decoder,
            beam_width,
        } => {
            s.set("checkpoint", show(checkpoint));
            s.set("vocab", show(vocab));
            s.set("input", show(input));
            s.set("decoder", decoder.clone());
            s.set("beam_width", *beam_width);
            commands::decode(&s)
        }
        Command::Evaluate {
            outputs,
            references,
            rouge_mode,
        } => {
            s.set("outputs", show(outputs));
            s.set("references", show(references));
            s.set("rouge_mode", rouge_mode.clone());
            commands::evaluate(&s)
        }
        Command::Baseline { which, corpus, k } => {
            s.set("corpus", show(corpus));
            s.set("k", *k);
            let which = match which {
                BaselineKind::FirstSentence => commands::Baseline::FirstSentence,
                BaselineKind::FirstK => commands::Baseline::FirstK,
            };
            commands::baseline(&s, which)
        }
        Command::Analyze {
            which,
            corpus,
            outputs,
            traces,
            train_corpus,
            field,
            side,
            pos,
            lexicon,
        } => {
            s.set("corpus", show(corpus));
            s.set("outputs", show(outputs));
            s.set("traces", show(traces));
            s.set("train_corpus", show(train_corpus));
            s.set("field", field.clone());
            s.set("side", side.clone());
            s.set("pos", pos.clone());
            s.set("lexicon", show(lexicon));
            let which = match which {
                AnalyzeKind::Reuse => commands::Analysis::Reuse,
                AnalyzeKind::Distribution => commands::Analysis::Distribution,
                AnalyzeKind::Breakdown => commands::Analysis::Breakdown,
                AnalyzeKind::Attention => commands::Analysis::Attention,
                AnalyzeKind::SummaryWorthy => commands::Analysis::SummaryWorthy,
            };
            commands::analyze(&s, which)
        }
        Command::Replay { manifest } => {
            let m = commands::read_manifest(manifest)?;
            commands::replay(&m, cli.out_dir.as_deref())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("pgsum: {f}");
            f.exit_code()
        }
    }
}
