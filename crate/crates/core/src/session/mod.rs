//! Multi-session episodes: per-turn generation over retrieved memory,
//! end-of-session summarization and memory update under a memory policy.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::Constant;
use crate::dialogue::Turn;
use crate::http::HttpError;
use crate::memory::{
    update_memory_with, MemOp, MemoryState, MemoryUpdateResult, Origin, SummaryBatch, UpdateError, UpdateOptions,
};
use crate::retrieval::RetrievalError;
use crate::OperationClassifier;

pub mod clients;
pub mod orchestrator;
pub mod replay;
pub mod store;

pub use clients::{EchoGenerator, Generator, HttpGenerator, HttpSummarizer, Summarizer, UserUtteranceSummarizer};
pub use orchestrator::{Orchestrator, OrchestratorConfig, SessionClosure, SharedEpisode};
pub use replay::{replay_corpus, replay_episode, CorpusReplay, ReplayMode, ReplayReport, SessionF1, SessionReplay};
pub use store::EpisodeStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MemoryPolicy {
    WithoutMemory,
    MemoryAccumulate,
    MemoryUpdate,
    MemoryGold,
}

impl MemoryPolicy {
    pub const ALL: [MemoryPolicy; 4] = [
        MemoryPolicy::WithoutMemory,
        MemoryPolicy::MemoryAccumulate,
        MemoryPolicy::MemoryUpdate,
        MemoryPolicy::MemoryGold,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MemoryPolicy::WithoutMemory => "WITHOUT_MEMORY",
            MemoryPolicy::MemoryAccumulate => "MEMORY_ACCUMULATE",
            MemoryPolicy::MemoryUpdate => "MEMORY_UPDATE",
            MemoryPolicy::MemoryGold => "MEMORY_GOLD",
        }
    }
}

impl std::fmt::Display for MemoryPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MemoryPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_uppercase().replace('-', "_");
        let key = key.strip_prefix("MEMORY_").map(|r| format!("MEMORY_{r}")).unwrap_or(key);
        match key.as_str() {
            "WITHOUT_MEMORY" | "NONE" => Ok(MemoryPolicy::WithoutMemory),
            "MEMORY_ACCUMULATE" | "ACCUMULATE" => Ok(MemoryPolicy::MemoryAccumulate),
            "MEMORY_UPDATE" | "UPDATE" => Ok(MemoryPolicy::MemoryUpdate),
            "MEMORY_GOLD" | "GOLD" => Ok(MemoryPolicy::MemoryGold),
            _ => Err(format!("unknown memory policy {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EpisodeStatus {
    Open,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "SessionWire")]
pub struct Session {
    pub session_index: u32,
    pub elapsed_days: u32,
    pub turns: Vec<Turn>,
    pub memory_before: MemoryState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<SummaryBatch>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub memory_after: Option<MemoryState>,
}

#[derive(Deserialize)]
struct SessionWire {
    session_index: u32,
    #[serde(default)]
    elapsed_days: u32,
    #[serde(default)]
    turns: Vec<Turn>,
    memory_before: MemoryState,
    #[serde(default)]
    summary: Option<SummaryBatch>,
    #[serde(default)]
    memory_after: Option<MemoryState>,
}

// session indices are not part of the sentence arrays on the wire
impl From<SessionWire> for Session {
    fn from(w: SessionWire) -> Self {
        let i = w.session_index;
        Session {
            session_index: i,
            elapsed_days: w.elapsed_days,
            turns: w.turns,
            memory_before: w.memory_before.with_session_index(i),
            summary: w.summary.map(|s| s.with_source_session(i)),
            memory_after: w.memory_after.map(|m| m.with_session_index(i + 1)),
        }
    }
}

impl Session {
    pub fn open(session_index: u32, elapsed_days: u32, memory_before: MemoryState) -> Self {
        Session {
            session_index,
            elapsed_days,
            turns: Vec::new(),
            memory_before: memory_before.with_session_index(session_index),
            summary: None,
            memory_after: None,
        }
    }

    pub fn is_closed(&self) -> bool {
        self.memory_after.is_some()
    }

    /// A trailing user turn still waiting for its bot reply.
    pub fn has_pending_reply(&self) -> bool {
        self.turns
            .last()
            .is_some_and(|t| t.speaker == crate::dialogue::Speaker::User)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Episode {
    pub episode_id: String,
    pub policy: MemoryPolicy,
    pub status: EpisodeStatus,
    pub sessions: Vec<Session>,
}

impl Episode {
    pub fn current(&self) -> Option<&Session> {
        self.sessions.last().filter(|s| !s.is_closed())
    }

    pub fn current_mut(&mut self) -> Option<&mut Session> {
        self.sessions.last_mut().filter(|s| !s.is_closed())
    }

    pub fn closed_sessions(&self) -> impl Iterator<Item = &Session> {
        self.sessions.iter().filter(|s| s.is_closed())
    }

    /// The memory the next turn would be grounded in.
    pub fn memory(&self) -> Option<&MemoryState> {
        self.current().map(|s| &s.memory_before)
    }

    /// Canonical dataset form: closed sessions plus the open one when it has
    /// turns.
    pub fn to_record(&self) -> crate::dataset::EpisodeRecord {
        use crate::dataset::{EpisodeRecord, SessionRecord, TurnRecord};
        let texts = |m: &MemoryState| m.texts().map(str::to_owned).collect::<Vec<_>>();
        EpisodeRecord {
            episode_id: self.episode_id.clone(),
            sessions: self
                .sessions
                .iter()
                .filter(|s| s.is_closed() || !s.turns.is_empty())
                .map(|s| SessionRecord {
                    index: s.session_index,
                    elapsed_days: s.elapsed_days,
                    turns: s
                        .turns
                        .iter()
                        .map(|t| TurnRecord {
                            speaker: t.speaker,
                            text: t.text.clone(),
                        })
                        .collect(),
                    summary: s.summary.as_ref().map(|b| b.texts().map(str::to_owned).collect()),
                    memory_before: texts(&s.memory_before),
                    memory_after: s.memory_after.as_ref().map(texts),
                    gold_ops: Vec::new(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("episode is closed")]
    EpisodeClosed,
    #[error("the current session has no turns")]
    NoTurns,
    #[error("the last user turn has no reply yet; retry it first")]
    PendingReply,
    #[error("no user turn is waiting for a reply")]
    NothingPending,
    #[error("episode is busy")]
    Busy,
    #[error("generator failed: {0}")]
    GeneratorFailure(#[source] HttpError),
    #[error("summarizer failed: {0}")]
    SummarizerFailure(#[source] HttpError),
    #[error(transparent)]
    ClassifierFailure(#[from] UpdateError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error("episode {episode}: no gold data for session {session}")]
    MissingGold { episode: String, session: u32 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Corrupt { path: PathBuf, message: String },
}

/// `M'` for one session boundary under `policy`. `gold_after` supplies the
/// snapshot used by MEMORY_GOLD.
pub fn apply_policy(
    policy: MemoryPolicy,
    memory_before: &MemoryState,
    summary: &SummaryBatch,
    classifier: &dyn OperationClassifier,
    gold_after: Option<&[String]>,
    options: &UpdateOptions,
) -> Result<(MemoryState, Option<MemoryUpdateResult>), SessionError> {
    let next = summary.source_session() + 1;
    match policy {
        MemoryPolicy::WithoutMemory => Ok((MemoryState::empty(next), None)),
        MemoryPolicy::MemoryAccumulate => {
            let r = update_memory_with(memory_before, summary, &Constant(MemOp::Append), options)?;
            Ok((r.new_memory.clone(), Some(r)))
        }
        MemoryPolicy::MemoryUpdate => {
            let r = update_memory_with(memory_before, summary, classifier, options)?;
            Ok((r.new_memory.clone(), Some(r)))
        }
        MemoryPolicy::MemoryGold => {
            let gold = gold_after.ok_or_else(|| SessionError::Config("no gold snapshot".into()))?;
            let m = MemoryState::from_texts(next, Origin::FromMemory, &format!("g{next}-"), gold);
            Ok((m, None))
        }
    }
}
