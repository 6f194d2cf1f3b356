//! Evaluation metrics: pairwise operation accuracy, set-level sentence F1,
//! corpus BLEU-1/2, unigram F1, Distinct-n and per-rater standardization.
//!
//! All text metrics tokenize on whitespace after normalization.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::memory::{MemOp, MemoryState};
use crate::text::{normalize, tokens};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("unsupported n-gram order {0}")]
    UnsupportedOrder(usize),
}

/// Fraction of positions where `pred` equals `gold`.
pub fn pairwise_accuracy(pred: &[MemOp], gold: &[MemOp]) -> Result<f64, MetricError> {
    if pred.len() != gold.len() {
        return Err(MetricError::LengthMismatch {
            left: pred.len(),
            right: gold.len(),
        });
    }
    if pred.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let hits = pred.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// 4×4 counts indexed `[gold][pred]` in `MemOp::index` order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub counts: [[usize; 4]; 4],
}

impl ConfusionMatrix {
    pub fn from_pairs(pred: &[MemOp], gold: &[MemOp]) -> Result<Self, MetricError> {
        if pred.len() != gold.len() {
            return Err(MetricError::LengthMismatch {
                left: pred.len(),
                right: gold.len(),
            });
        }
        let mut m = ConfusionMatrix::default();
        for (p, g) in pred.iter().zip(gold) {
            m.counts[g.index()][p.index()] += 1;
        }
        Ok(m)
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..4).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> Option<f64> {
        let total = self.total();
        (total > 0).then(|| self.correct() as f64 / total as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetF1Report {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub matched: usize,
    pub pred_size: usize,
    pub gold_size: usize,
}

/// Sentence-level F1 by exact normalized-text match. Two empty sets score 1.
pub fn set_f1_texts<P, G>(pred: &[P], gold: &[G]) -> SetF1Report
where
    P: AsRef<str>,
    G: AsRef<str>,
{
    let pred: HashSet<String> = pred.iter().map(|t| normalize(t.as_ref())).collect();
    let gold: HashSet<String> = gold.iter().map(|t| normalize(t.as_ref())).collect();
    let matched = pred.intersection(&gold).count();
    let (pred_size, gold_size) = (pred.len(), gold.len());
    if pred_size == 0 && gold_size == 0 {
        return SetF1Report {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
            matched,
            pred_size,
            gold_size,
        };
    }
    let precision = if pred_size == 0 { 0.0 } else { matched as f64 / pred_size as f64 };
    let recall = if gold_size == 0 { 0.0 } else { matched as f64 / gold_size as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    SetF1Report {
        precision,
        recall,
        f1,
        matched,
        pred_size,
        gold_size,
    }
}

pub fn set_f1(pred: &MemoryState, gold: &MemoryState) -> SetF1Report {
    let p: Vec<&str> = pred.texts().collect();
    let g: Vec<&str> = gold.texts().collect();
    set_f1_texts(&p, &g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BleuConfig {
    /// Pseudo-count added to the numerator of a zero n-gram precision.
    /// `None` disables smoothing.
    pub smoothing_epsilon: Option<f64>,
}

impl Default for BleuConfig {
    fn default() -> Self {
        BleuConfig {
            smoothing_epsilon: Some(0.1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BleuScore {
    pub score: f64,
    /// Unsmoothed modified precisions for orders 1..=n.
    pub precisions: Vec<f64>,
    pub brevity_penalty: f64,
    pub candidate_length: usize,
    pub reference_length: usize,
    pub smoothed: bool,
}

fn ngram_counts(toks: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if toks.len() >= n {
        for g in toks.windows(n) {
            *counts.entry(g).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus-level BLEU-n (n = 1 or 2) with one reference per candidate:
/// clipped n-gram precisions summed over the corpus, geometric mean over
/// orders 1..=n, times the brevity penalty.
pub fn bleu_n_with<C, R>(
    candidates: &[C],
    references: &[R],
    n: usize,
    config: BleuConfig,
) -> Result<BleuScore, MetricError>
where
    C: AsRef<str>,
    R: AsRef<str>,
{
    if !(1..=2).contains(&n) {
        return Err(MetricError::UnsupportedOrder(n));
    }
    if candidates.len() != references.len() {
        return Err(MetricError::LengthMismatch {
            left: candidates.len(),
            right: references.len(),
        });
    }
    let mut matched = vec![0usize; n];
    let mut total = vec![0usize; n];
    let (mut c_len, mut r_len) = (0usize, 0usize);
    for (c, r) in candidates.iter().zip(references) {
        let ct = tokens(c.as_ref());
        let rt = tokens(r.as_ref());
        c_len += ct.len();
        r_len += rt.len();
        for order in 1..=n {
            let cc = ngram_counts(&ct, order);
            let rc = ngram_counts(&rt, order);
            for (g, count) in &cc {
                matched[order - 1] += (*count).min(rc.get(g).copied().unwrap_or(0));
                total[order - 1] += count;
            }
        }
    }
    let precisions: Vec<f64> = matched
        .iter()
        .zip(&total)
        .map(|(m, t)| if *t == 0 { 0.0 } else { *m as f64 / *t as f64 })
        .collect();
    let brevity_penalty = if c_len == 0 {
        0.0
    } else if c_len > r_len {
        1.0
    } else {
        (1.0 - r_len as f64 / c_len as f64).exp()
    };
    let mut smoothed = false;
    let mut log_sum = 0.0;
    for (i, p) in precisions.iter().enumerate() {
        let p = if *p > 0.0 {
            *p
        } else {
            match config.smoothing_epsilon {
                Some(eps) if total[i] > 0 => {
                    smoothed = true;
                    eps / total[i] as f64
                }
                _ => 0.0,
            }
        };
        log_sum += if p > 0.0 { p.ln() } else { f64::NEG_INFINITY };
    }
    let geo = (log_sum / n as f64).exp();
    Ok(BleuScore {
        score: if c_len == 0 { 0.0 } else { brevity_penalty * geo },
        precisions,
        brevity_penalty,
        candidate_length: c_len,
        reference_length: r_len,
        smoothed,
    })
}

pub fn bleu_n<C, R>(candidates: &[C], references: &[R], n: usize) -> Result<f64, MetricError>
where
    C: AsRef<str>,
    R: AsRef<str>,
{
    bleu_n_with(candidates, references, n, BleuConfig::default()).map(|b| b.score)
}

/// Harmonic mean of unigram precision and recall over multiset overlap.
pub fn unigram_f1(candidate: &str, reference: &str) -> f64 {
    let c = tokens(candidate);
    let r = tokens(reference);
    if c.is_empty() && r.is_empty() {
        return 1.0;
    }
    if c.is_empty() || r.is_empty() {
        return 0.0;
    }
    let mut rc: HashMap<&str, usize> = HashMap::new();
    for t in &r {
        *rc.entry(t.as_str()).or_insert(0) += 1;
    }
    let mut overlap = 0usize;
    for t in &c {
        if let Some(n) = rc.get_mut(t.as_str()) {
            if *n > 0 {
                *n -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / c.len() as f64;
    let rr = overlap as f64 / r.len() as f64;
    2.0 * p * rr / (p + rr)
}

/// Mean unigram F1 over aligned candidate/reference pairs.
pub fn mean_unigram_f1<C, R>(candidates: &[C], references: &[R]) -> Result<f64, MetricError>
where
    C: AsRef<str>,
    R: AsRef<str>,
{
    if candidates.len() != references.len() {
        return Err(MetricError::LengthMismatch {
            left: candidates.len(),
            right: references.len(),
        });
    }
    if candidates.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let sum: f64 = candidates
        .iter()
        .zip(references)
        .map(|(c, r)| unigram_f1(c.as_ref(), r.as_ref()))
        .sum();
    Ok(sum / candidates.len() as f64)
}

struct NgramTally {
    distinct: usize,
    ngrams: usize,
    words: usize,
}

fn tally<U: AsRef<str>>(utterances: &[U], n: usize) -> Result<NgramTally, MetricError> {
    if n == 0 {
        return Err(MetricError::UnsupportedOrder(n));
    }
    let mut seen: HashSet<Vec<String>> = HashSet::new();
    let (mut ngrams, mut words) = (0usize, 0usize);
    for u in utterances {
        let toks = tokens(u.as_ref());
        words += toks.len();
        if toks.len() >= n {
            for g in toks.windows(n) {
                ngrams += 1;
                seen.insert(g.to_vec());
            }
        }
    }
    if words == 0 {
        return Err(MetricError::EmptyInput);
    }
    Ok(NgramTally {
        distinct: seen.len(),
        ngrams,
        words,
    })
}

/// Distinct n-grams across the corpus divided by the total word count.
/// n-grams do not cross utterance boundaries.
pub fn distinct_n<U: AsRef<str>>(utterances: &[U], n: usize) -> Result<f64, MetricError> {
    let t = tally(utterances, n)?;
    Ok(t.distinct as f64 / t.words as f64)
}

/// Distinct n-grams divided by the total n-gram count (the more common
/// convention; reported next to [`distinct_n`] for comparison).
pub fn distinct_n_conventional<U: AsRef<str>>(utterances: &[U], n: usize) -> Result<f64, MetricError> {
    let t = tally(utterances, n)?;
    Ok(if t.ngrams == 0 { 0.0 } else { t.distinct as f64 / t.ngrams as f64 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaterScores {
    pub rater_id: String,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizedScores {
    pub rater_id: String,
    pub z: Vec<f64>,
}

/// Per-rater z-scores with the population standard deviation. A rater with
/// zero spread maps to all zeros. Raters with no scores are passed through
/// empty.
pub fn standardize_scores(groups: &[RaterScores]) -> Vec<StandardizedScores> {
    groups
        .iter()
        .map(|g| {
            let n = g.scores.len() as f64;
            let z = if g.scores.is_empty() {
                Vec::new()
            } else {
                let mean = g.scores.iter().sum::<f64>() / n;
                let var = g.scores.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                let sd = var.sqrt();
                if sd == 0.0 {
                    vec![0.0; g.scores.len()]
                } else {
                    g.scores.iter().map(|x| (x - mean) / sd).collect()
                }
            };
            StandardizedScores {
                rater_id: g.rater_id.clone(),
                z,
            }
        })
        .collect()
}

/// Settings in force for a metrics report; embedded in every JSON report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsMetadata {
    pub tokenization: &'static str,
    pub bleu: &'static str,
    pub bleu_smoothing_epsilon: Option<f64>,
    pub distinct_denominator: &'static str,
    pub set_f1_match: &'static str,
    pub set_f1_both_empty: f64,
    pub standardization_sd: &'static str,
}

impl MetricsMetadata {
    pub fn new(bleu: BleuConfig) -> Self {
        MetricsMetadata {
            tokenization: "whitespace after NFC/trim/collapse normalization, no case folding",
            bleu: "corpus-level, single reference, clipped counts, brevity penalty",
            bleu_smoothing_epsilon: bleu.smoothing_epsilon,
            distinct_denominator: "total words",
            set_f1_match: "exact normalized text",
            set_f1_both_empty: 1.0,
            standardization_sd: "population",
        }
    }
}

impl Default for MetricsMetadata {
    fn default() -> Self {
        MetricsMetadata::new(BleuConfig::default())
    }
}

/// Generation metrics over aligned candidate/reference lists.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationReport {
    pub metadata: MetricsMetadata,
    pub n: usize,
    pub bleu1: f64,
    pub bleu2: f64,
    pub f1: f64,
    pub distinct1: f64,
    pub distinct2: f64,
    pub distinct1_conventional: f64,
    pub distinct2_conventional: f64,
}

pub fn generation_report<C, R>(candidates: &[C], references: &[R]) -> Result<GenerationReport, MetricError>
where
    C: AsRef<str>,
    R: AsRef<str>,
{
    let config = BleuConfig::default();
    Ok(GenerationReport {
        metadata: MetricsMetadata::new(config),
        n: candidates.len(),
        bleu1: bleu_n_with(candidates, references, 1, config)?.score,
        bleu2: bleu_n_with(candidates, references, 2, config)?.score,
        f1: mean_unigram_f1(candidates, references)?,
        distinct1: distinct_n(candidates, 1)?,
        distinct2: distinct_n(candidates, 2)?,
        distinct1_conventional: distinct_n_conventional(candidates, 1)?,
        distinct2_conventional: distinct_n_conventional(candidates, 2)?,
    })
}
