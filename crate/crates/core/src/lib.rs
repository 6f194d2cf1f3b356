//! Long-term conversational memory.
//!
//! A memory `M` of sentences about a user is merged with the summary `S` of
//! each finished session through pairwise PASS / REPLACE / APPEND / DELETE
//! decisions ([`update_memory`]). The crate also covers retrieval of memory
//! for response generation, multi-session orchestration against external
//! model endpoints, offline replay, dataset I/O and evaluation metrics.

pub mod classify;
pub mod dataset;
pub mod dialogue;
pub mod http;
pub mod memory;
pub mod metrics;
pub mod retrieval;
pub mod session;
pub mod text;

pub use classify::{
    classify_batch, ClassifierError, Concurrency, Constant, Counting, GoldLabel, LabelNoise, LabeledPair,
    LexicalHeuristic, NliClassifier, NliLabel, OperationClassifier, RemoteClassifier, TableOracle,
};
pub use dataset::{DatasetError, EpisodeRecord};
pub use dialogue::{Speaker, Turn};
pub use http::{EndpointConfig, HttpError};
pub use memory::{
    apply_operation, audit_memory, update_memory, update_memory_oracle, update_memory_with, MemOp, MemorySentence,
    MemoryState, MemoryUpdateResult, OpTable, Origin, SentenceId, SummaryBatch, UpdateError, UpdateOptions,
};
pub use metrics::{set_f1, SetF1Report};
pub use retrieval::{retrieve_top_k, Embedder, HashedNgramEmbedder, RetrievalResult};
pub use session::{Episode, MemoryPolicy, Orchestrator, SessionError};
