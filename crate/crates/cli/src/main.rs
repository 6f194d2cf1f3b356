mod cmd;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use memkeeper::dataset::{RandomScriptConfig, Split};
use memkeeper::session::ReplayMode;

use crate::config::{GlobalArgs, RunConfig};
use crate::error::CliResult;

/// Long-term conversational memory: update, retrieval, episodes, evaluation.
///
/// Exit status: 0 success, 1 input or schema error, 2 external service error.
#[derive(Debug, Parser)]
#[command(name = "memkeeper", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Valid,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Valid => Split::Valid,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Each update starts from the previous prediction.
    Chained,
    /// Each update starts from the gold memory of its session.
    GoldInput,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classify one (memory, summary) sentence pair.
    Classify { memory: String, summary: String },
    /// Merge a summary into a memory and print M'.
    Update {
        /// Memory file: JSON array of sentences or strings, or one per line.
        #[arg(long)]
        memory: PathBuf,
        /// Summary file, same formats.
        #[arg(long)]
        summary: PathBuf,
        /// Session the summary belongs to.
        #[arg(long, default_value_t = 2)]
        session: u32,
        #[arg(long)]
        max_size: Option<usize>,
    },
    /// Replay gold summaries under a policy and score the memory per session.
    Replay {
        dataset: PathBuf,
        /// Field mapping for non-canonical layouts.
        #[arg(long)]
        mapping: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ModeArg::Chained)]
        mode: ModeArg,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Interactive episode on stdin.
    Session {
        /// Directory holding episode logs.
        #[arg(long, default_value = "episodes")]
        store: PathBuf,
        /// Continue a stored episode.
        #[arg(long)]
        resume: Option<String>,
        /// Gold corpus backing MEMORY_GOLD.
        #[arg(long)]
        gold: Option<PathBuf>,
        #[arg(long)]
        gold_episode: Option<String>,
    },
    /// Corpus statistics.
    Stats {
        dataset: PathBuf,
        #[arg(long)]
        mapping: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Label distribution of a pair set, or export without FUSION rows.
    Pairs {
        pairs: PathBuf,
        #[arg(long, value_enum)]
        split: Option<SplitArg>,
        /// Write the exportable rows to --out.
        #[arg(long)]
        export: bool,
    },
    /// Pairwise accuracy and confusion matrix of the classifier.
    Eval {
        pairs: PathBuf,
        #[arg(long, value_enum)]
        split: Option<SplitArg>,
    },
    /// BLEU-1/2, unigram F1 and distinct-1/2 over line-aligned files.
    Metrics {
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        references: PathBuf,
    },
    /// Per-rater z-scores from JSONL {rater_id, scores}.
    Standardize { scores: PathBuf },
    /// Top-k memory sentences for a dialogue context.
    Retrieve {
        #[arg(long)]
        memory: PathBuf,
        /// Context turns, oldest first, alternating bot and user.
        #[arg(long = "turn", required = true)]
        turns: Vec<String>,
    },
    /// Triplet margin evaluation of the retrieval embedder.
    Triplets { triplets: PathBuf },
    /// Synthetic fact-drift episodes with gold labels.
    Synth {
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long, default_value_t = 5)]
        sessions: u32,
        #[arg(long, default_value_t = 6)]
        facts: usize,
    },
    /// Convert a corpus to canonical JSONL through a field mapping.
    Import {
        source: PathBuf,
        #[arg(long)]
        mapping: PathBuf,
    },
}

fn run(cli: Cli) -> CliResult {
    let cfg = RunConfig::resolve(&cli.global)?;
    match cli.command {
        Command::Classify { memory, summary } => cmd::memory::classify(&cfg, &memory, &summary),
        Command::Update {
            memory,
            summary,
            session,
            max_size,
        } => cmd::memory::update(&cfg, &memory, &summary, session, max_size),
        Command::Replay {
            dataset,
            mapping,
            mode,
            workers,
        } => {
            let mode = match mode {
                ModeArg::Chained => ReplayMode::Chained,
                ModeArg::GoldInput => ReplayMode::GoldInput,
            };
            cmd::replay::replay(&cfg, &dataset, mapping.as_deref(), mode, workers)
        }
        Command::Session {
            store,
            resume,
            gold,
            gold_episode,
        } => {
            let args = cmd::session::SessionArgs {
                store,
                resume,
                gold,
                gold_episode,
            };
            cmd::session::run(&cfg, &args, std::io::stdin().lock(), std::io::stdout().lock())
        }
        Command::Stats { dataset, mapping, json } => cmd::data::stats(&cfg, &dataset, mapping.as_deref(), json),
        Command::Pairs { pairs, split, export } => cmd::data::pairs(&cfg, &pairs, split.map(Into::into), export),
        Command::Eval { pairs, split } => cmd::data::eval(&cfg, &pairs, split.map(Into::into)),
        Command::Metrics { candidates, references } => cmd::text::metrics(&cfg, &candidates, &references),
        Command::Standardize { scores } => cmd::text::standardize(&cfg, &scores),
        Command::Retrieve { memory, turns } => cmd::text::retrieve(&cfg, &memory, &turns),
        Command::Triplets { triplets } => cmd::text::triplets(&cfg, &triplets),
        Command::Synth {
            episodes,
            sessions,
            facts,
        } => cmd::data::synth(
            &cfg,
            episodes,
            RandomScriptConfig {
                facts,
                sessions,
                ..Default::default()
            },
        ),
        Command::Import { source, mapping } => cmd::data::import(&cfg, &source, &mapping),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("MEMKEEPER_LOG").unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are input errors
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
