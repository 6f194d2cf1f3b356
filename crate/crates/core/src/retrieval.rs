//! Top-k memory retrieval by cosine similarity, and triplet-margin
//! evaluation of embedders.

use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialogue::{alternating_turns, Turn};
use crate::memory::{MemorySentence, MemoryState};
use crate::text::{normalize, stable_hash};

/// Default number of retrieved sentences.
pub const DEFAULT_K: usize = 5;
/// Default triplet margin.
pub const DEFAULT_MARGIN: f64 = 0.2;

#[derive(Debug, Error, PartialEq)]
pub enum RetrievalError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("margin must be non-negative, got {0}")]
    InvalidMargin(f64),
    #[error("no triplets to evaluate")]
    EmptyInput,
    #[error("triplet positive and negative are the same text: {0:?}")]
    SameText(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// A unit-norm vector. `fallback` marks inputs that produced no features
/// and were mapped to a fixed basis vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub values: Vec<f64>,
    pub fallback: bool,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed_context(&self, context: &[Turn]) -> Embedding;
    fn embed_memory(&self, text: &str) -> Embedding;
}

/// Dot product of two unit vectors, clamped to `[-1, 1]`.
pub fn cosine_sim(a: &[f64], b: &[f64]) -> Result<f64, RetrievalError> {
    if a.len() != b.len() {
        return Err(RetrievalError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok(dot.clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashedNgramConfig {
    /// Character n-gram length.
    pub ngram: usize,
    pub dim: usize,
    pub seed: u64,
    /// Number of trailing turns embedded as the dialogue context.
    pub window: usize,
}

impl Default for HashedNgramConfig {
    fn default() -> Self {
        HashedNgramConfig {
            ngram: 3,
            dim: 256,
            seed: 0,
            window: 4,
        }
    }
}

/// Feature-hashed bag of character n-grams with term-frequency weights.
#[derive(Debug, Clone, Default)]
pub struct HashedNgramEmbedder {
    config: HashedNgramConfig,
}

impl HashedNgramEmbedder {
    pub fn new(config: HashedNgramConfig) -> Self {
        assert!(config.ngram >= 1 && config.dim >= 1, "ngram and dim must be positive");
        HashedNgramEmbedder { config }
    }

    pub fn config(&self) -> &HashedNgramConfig {
        &self.config
    }

    /// Raw (unnormalized) bucket counts for `text`.
    pub fn bag(&self, text: &str) -> Vec<f64> {
        let chars: Vec<char> = normalize(text).chars().collect();
        let mut bag = vec![0.0; self.config.dim];
        if chars.len() < self.config.ngram {
            return bag;
        }
        let mut buf = String::new();
        for gram in chars.windows(self.config.ngram) {
            buf.clear();
            buf.extend(gram);
            let bucket = stable_hash(self.config.seed, buf.as_bytes()) % self.config.dim as u64;
            bag[bucket as usize] += 1.0;
        }
        bag
    }

    fn embed_text(&self, text: &str) -> Embedding {
        let mut values = self.bag(text);
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            values[0] = 1.0;
            return Embedding {
                values,
                fallback: true,
            };
        }
        for v in &mut values {
            *v /= norm;
        }
        Embedding {
            values,
            fallback: false,
        }
    }

    pub fn context_text(&self, context: &[Turn]) -> String {
        let start = context.len().saturating_sub(self.config.window);
        context[start..]
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl Embedder for HashedNgramEmbedder {
    fn dim(&self) -> usize {
        self.config.dim
    }

    fn embed_context(&self, context: &[Turn]) -> Embedding {
        self.embed_text(&self.context_text(context))
    }

    fn embed_memory(&self, text: &str) -> Embedding {
        self.embed_text(text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scored {
    pub sentence: MemorySentence,
    pub score: f64,
    /// Position of the sentence in the memory it was retrieved from.
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalResult {
    pub ranked: Vec<Scored>,
    pub k_requested: usize,
}

impl RetrievalResult {
    pub fn texts(&self) -> Vec<&str> {
        self.ranked.iter().map(|s| s.sentence.text()).collect()
    }
}

/// Embeddings of one memory snapshot. Rebuild whenever the memory is replaced.
#[derive(Debug, Clone)]
pub struct MemoryIndex {
    entries: Vec<(MemorySentence, Embedding)>,
}

impl MemoryIndex {
    pub fn build(memory: &MemoryState, embedder: &dyn Embedder) -> Self {
        MemoryIndex {
            entries: memory
                .iter()
                .map(|m| (m.clone(), embedder.embed_memory(m.text())))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Exact top-k by score; ties go to the lower memory position.
    pub fn top_k(&self, query: &Embedding, k: usize) -> Result<RetrievalResult, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::InvalidK);
        }
        let mut scored: Vec<(usize, f64)> = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, (_, e))| cosine_sim(&query.values, &e.values).map(|s| (i, s)))
            .collect::<Result<_, _>>()?;
        let order = |a: &(usize, f64), b: &(usize, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, order);
            scored.truncate(k);
        }
        scored.sort_unstable_by(order);
        Ok(RetrievalResult {
            ranked: scored
                .into_iter()
                .map(|(i, score)| Scored {
                    sentence: self.entries[i].0.clone(),
                    score,
                    position: i,
                })
                .collect(),
            k_requested: k,
        })
    }
}

/// Top-k memory sentences for the dialogue context.
pub fn retrieve_top_k(
    context: &[Turn],
    memory: &MemoryState,
    embedder: &dyn Embedder,
    k: usize,
) -> Result<RetrievalResult, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::InvalidK);
    }
    let query = embedder.embed_context(context);
    MemoryIndex::build(memory, embedder).top_k(&query, k)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TripletWire")]
pub struct Triplet {
    pub context_turns: Vec<String>,
    pub positive: String,
    pub negative: String,
}

#[derive(Deserialize)]
struct TripletWire {
    context_turns: Vec<String>,
    positive: String,
    negative: String,
}

impl TryFrom<TripletWire> for Triplet {
    type Error = RetrievalError;

    fn try_from(w: TripletWire) -> Result<Self, Self::Error> {
        Triplet::new(w.context_turns, w.positive, w.negative)
    }
}

impl Triplet {
    pub fn new(
        context_turns: Vec<String>,
        positive: impl Into<String>,
        negative: impl Into<String>,
    ) -> Result<Self, RetrievalError> {
        let positive = positive.into();
        let negative = negative.into();
        if normalize(&positive) == normalize(&negative) {
            return Err(RetrievalError::SameText(positive));
        }
        Ok(Triplet {
            context_turns,
            positive,
            negative,
        })
    }

    pub fn context(&self) -> Vec<Turn> {
        alternating_turns(self.context_turns.iter().cloned())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TripletScore {
    pub positive_sim: f64,
    pub negative_sim: f64,
    pub loss: f64,
    pub satisfied: bool,
}

/// Hinge loss `max(sim(D, m⁻) − sim(D, m⁺) + margin, 0)`: zero exactly when
/// the positive wins by at least the margin.
pub fn triplet_loss(positive_sim: f64, negative_sim: f64, margin: f64) -> f64 {
    (negative_sim - positive_sim + margin).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TripletReport {
    pub mean_loss: f64,
    pub satisfaction_rate: f64,
    pub win_rate: f64,
    pub n: usize,
    #[serde(skip)]
    pub per_triplet: Vec<TripletScore>,
}

pub fn triplet_eval(
    triplets: &[Triplet],
    embedder: &dyn Embedder,
    margin: f64,
) -> Result<TripletReport, RetrievalError> {
    if !(margin >= 0.0) {
        return Err(RetrievalError::InvalidMargin(margin));
    }
    if triplets.is_empty() {
        return Err(RetrievalError::EmptyInput);
    }
    let mut per_triplet = Vec::with_capacity(triplets.len());
    for t in triplets {
        let ctx = embedder.embed_context(&t.context());
        let pos = cosine_sim(&ctx.values, &embedder.embed_memory(&t.positive).values)?;
        let neg = cosine_sim(&ctx.values, &embedder.embed_memory(&t.negative).values)?;
        let loss = triplet_loss(pos, neg, margin);
        per_triplet.push(TripletScore {
            positive_sim: pos,
            negative_sim: neg,
            loss,
            satisfied: loss == 0.0,
        });
    }
    let n = per_triplet.len();
    let nf = n as f64;
    Ok(TripletReport {
        mean_loss: per_triplet.iter().map(|s| s.loss).sum::<f64>() / nf,
        satisfaction_rate: per_triplet.iter().filter(|s| s.satisfied).count() as f64 / nf,
        win_rate: per_triplet
            .iter()
            .filter(|s| s.positive_sim > s.negative_sim)
            .count() as f64
            / nf,
        n,
        per_triplet,
    })
}

/// Reads triplets from JSONL `{context_turns, positive, negative}`.
pub fn read_triplets(reader: impl BufRead) -> Result<Vec<Triplet>, RetrievalError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| RetrievalError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let t: Triplet = serde_json::from_str(&line).map_err(|e| RetrievalError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(t);
    }
    Ok(out)
}
