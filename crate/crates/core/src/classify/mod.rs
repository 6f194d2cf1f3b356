//! Pairwise operation classifiers.
//!
//! An [`OperationClassifier`] maps a `(memory sentence, summary sentence)`
//! pair to a [`MemOp`]. Implementations:
//!
//! - [`TableOracle`]: lookup table of gold labels (tests, replay).
//! - [`LexicalHeuristic`]: deterministic token-overlap baseline.
//! - [`NliClassifier`]: maps two NLI verdicts to an operation.
//! - [`RemoteClassifier`]: text-to-text model behind an HTTP endpoint.

mod heuristic;
mod nli;
mod remote;
mod table;

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use heuristic::{HeuristicConfig, LexicalHeuristic};
pub use nli::{nli_to_op, NliBackend, NliClassifier, NliLabel, NliVerdict, RemoteNli};
pub use remote::{RemoteClassifier, RemoteConfig};
pub use table::{TableError, TableOracle};

use crate::memory::MemOp;
use crate::text::{normalize, stable_hash};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClassifierError {
    #[error("request to {endpoint} timed out")]
    Timeout { endpoint: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("empty text")]
    EmptyText,
    #[error("{0}")]
    Backend(String),
}

/// Whether a classifier may be invoked from several threads at once.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Concurrency {
    ConcurrentSafe,
    SingleUse,
}

/// `O(m, s)`: must be deterministic for identical text pairs and total over
/// the four operations.
pub trait OperationClassifier: Send + Sync {
    fn classify(&self, memory: &str, summary: &str) -> Result<MemOp, ClassifierError>;

    fn concurrency(&self) -> Concurrency {
        Concurrency::ConcurrentSafe
    }

    fn name(&self) -> &str;
}

impl<T: OperationClassifier + ?Sized> OperationClassifier for &T {
    fn classify(&self, memory: &str, summary: &str) -> Result<MemOp, ClassifierError> {
        (**self).classify(memory, summary)
    }
    fn concurrency(&self) -> Concurrency {
        (**self).concurrency()
    }
    fn name(&self) -> &str {
        (**self).name()
    }
}

impl<T: OperationClassifier + ?Sized> OperationClassifier for Box<T> {
    fn classify(&self, memory: &str, summary: &str) -> Result<MemOp, ClassifierError> {
        (**self).classify(memory, summary)
    }
    fn concurrency(&self) -> Concurrency {
        (**self).concurrency()
    }
    fn name(&self) -> &str {
        (**self).name()
    }
}

impl<T: OperationClassifier + ?Sized> OperationClassifier for std::sync::Arc<T> {
    fn classify(&self, memory: &str, summary: &str) -> Result<MemOp, ClassifierError> {
        (**self).classify(memory, summary)
    }
    fn concurrency(&self) -> Concurrency {
        (**self).concurrency()
    }
    fn name(&self) -> &str {
        (**self).name()
    }
}

/// Annotation label, which additionally admits FUSION at ingestion time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GoldLabel {
    Pass,
    Replace,
    Append,
    Delete,
    Fusion,
}

impl GoldLabel {
    pub fn as_op(self) -> Option<MemOp> {
        match self {
            GoldLabel::Pass => Some(MemOp::Pass),
            GoldLabel::Replace => Some(MemOp::Replace),
            GoldLabel::Append => Some(MemOp::Append),
            GoldLabel::Delete => Some(MemOp::Delete),
            GoldLabel::Fusion => None,
        }
    }

    pub fn parse(label: &str) -> Option<GoldLabel> {
        match label.trim().to_ascii_uppercase().as_str() {
            "PASS" => Some(GoldLabel::Pass),
            "REPLACE" => Some(GoldLabel::Replace),
            "APPEND" => Some(GoldLabel::Append),
            "DELETE" => Some(GoldLabel::Delete),
            "FUSION" => Some(GoldLabel::Fusion),
            _ => None,
        }
    }
}

impl From<MemOp> for GoldLabel {
    fn from(op: MemOp) -> Self {
        match op {
            MemOp::Pass => GoldLabel::Pass,
            MemOp::Replace => GoldLabel::Replace,
            MemOp::Append => GoldLabel::Append,
            MemOp::Delete => GoldLabel::Delete,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub m: String,
    pub s: String,
    pub gold: GoldLabel,
}

impl LabeledPair {
    pub fn new(m: impl Into<String>, s: impl Into<String>, gold: GoldLabel) -> Self {
        LabeledPair {
            m: m.into(),
            s: s.into(),
            gold,
        }
    }
}

/// Always returns the same operation. `Constant(MemOp::Append)` is the
/// accumulate-only baseline.
#[derive(Debug, Clone, Copy)]
pub struct Constant(pub MemOp);

impl OperationClassifier for Constant {
    fn classify(&self, _: &str, _: &str) -> Result<MemOp, ClassifierError> {
        Ok(self.0)
    }

    fn name(&self) -> &str {
        "constant"
    }
}

/// Counts invocations of the wrapped classifier.
#[derive(Debug)]
pub struct Counting<C> {
    inner: C,
    calls: AtomicUsize,
}

impl<C> Counting<C> {
    pub fn new(inner: C) -> Self {
        Counting {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn inner(&self) -> &C {
        &self.inner
    }
}

impl<C: OperationClassifier> OperationClassifier for Counting<C> {
    fn classify(&self, memory: &str, summary: &str) -> Result<MemOp, ClassifierError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.classify(memory, summary)
    }

    fn concurrency(&self) -> Concurrency {
        self.inner.concurrency()
    }

    fn name(&self) -> &str {
        self.inner.name()
    }
}

/// Replaces the inner label with a uniformly drawn different label with
/// probability `epsilon`. The draw is a hash of `(seed, m, s)`, so the
/// corruption is deterministic per pair.
#[derive(Debug)]
pub struct LabelNoise<C> {
    inner: C,
    epsilon: f64,
    seed: u64,
}

impl<C> LabelNoise<C> {
    pub fn new(inner: C, epsilon: f64, seed: u64) -> Self {
        LabelNoise {
            inner,
            epsilon: epsilon.clamp(0.0, 1.0),
            seed,
        }
    }
}

impl<C: OperationClassifier> OperationClassifier for LabelNoise<C> {
    fn classify(&self, memory: &str, summary: &str) -> Result<MemOp, ClassifierError> {
        let op = self.inner.classify(memory, summary)?;
        let mut key = Vec::with_capacity(memory.len() + summary.len() + 1);
        key.extend_from_slice(memory.as_bytes());
        key.push(0);
        key.extend_from_slice(summary.as_bytes());
        let h = stable_hash(self.seed, &key);
        let u = (h >> 11) as f64 / (1u64 << 53) as f64;
        if u >= self.epsilon {
            return Ok(op);
        }
        let others: Vec<MemOp> = MemOp::ALL.into_iter().filter(|o| *o != op).collect();
        Ok(others[(h % others.len() as u64) as usize])
    }

    fn concurrency(&self) -> Concurrency {
        self.inner.concurrency()
    }

    fn name(&self) -> &str {
        "label-noise"
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("classification failed at pair {index}: {source}")]
pub struct BatchError {
    pub index: usize,
    #[source]
    pub source: ClassifierError,
}

/// Classifies `pairs` in order. Identical normalized pairs hit the
/// classifier once; the first failure aborts the batch.
pub fn classify_batch<M, S>(
    classifier: &dyn OperationClassifier,
    pairs: &[(M, S)],
) -> Result<Vec<MemOp>, BatchError>
where
    M: AsRef<str>,
    S: AsRef<str>,
{
    let mut cache: HashMap<(String, String), MemOp> = HashMap::new();
    let mut out = Vec::with_capacity(pairs.len());
    for (index, (m, s)) in pairs.iter().enumerate() {
        let key = (normalize(m.as_ref()), normalize(s.as_ref()));
        let op = match cache.get(&key) {
            Some(op) => *op,
            None => {
                let op = classifier
                    .classify(&key.0, &key.1)
                    .map_err(|source| BatchError { index, source })?;
                cache.insert(key, op);
                op
            }
        };
        out.push(op);
    }
    Ok(out)
}
