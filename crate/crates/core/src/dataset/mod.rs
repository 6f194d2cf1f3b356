//! Episode corpora, labeled pair sets, corpus statistics and synthetic data.

use std::path::{Path, PathBuf};

use thiserror::Error;

pub mod episodes;
pub mod import;
pub mod pairs;
pub mod stats;
pub mod synth;

pub use episodes::{
    load_episodes, read_episodes, save_episodes, validate_episode, write_episodes, EpisodeRecord, GoldOpRecord,
    SessionRecord, TurnRecord,
};
pub use import::{import_episodes, import_str, import_values, FieldMapping, SourceFormat};
pub use pairs::{load_pairs, read_pairs, LabelDistribution, PairRecord, PairSet, Split};
pub use stats::{corpus_stats, CorpusStats};
pub use synth::{
    random_script, synth_corpus, synth_drift, DriftScript, FactLifecycle, Mutation, RandomScriptConfig, Resolution,
    ResolveOp,
};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: parse error: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: schema violation in `{field}`: {message}")]
    SchemaViolation {
        line: usize,
        field: String,
        message: String,
    },
    #[error("episode {episode}: memory chain broken at session {session}")]
    ChainBreak { episode: String, session: u32 },
    #[error("line {line}: unknown label {label:?}")]
    UnknownLabel { line: usize, label: String },
    #[error("empty input")]
    EmptyInput,
    #[error("field mapping: {0}")]
    Mapping(String),
    #[error("fact {fact} ends at session {session} but the episode has {sessions}")]
    ScriptOverflow { fact: usize, session: u32, sessions: u32 },
    #[error("invalid drift script: {0}")]
    InvalidScript(String),
}

impl DatasetError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DatasetError::Io {
            path: path.to_owned(),
            source,
        }
    }
}
