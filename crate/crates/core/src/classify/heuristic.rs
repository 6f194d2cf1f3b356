use std::collections::HashSet;

use super::{ClassifierError, OperationClassifier};
use crate::memory::MemOp;
use crate::text::tokens;

#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicConfig {
    /// Token-set Jaccard overlap at which a negation mismatch counts as a
    /// contradiction.
    pub jaccard_threshold: f64,
    /// Lower-cased tokens treated as negation cues.
    pub negation_cues: Vec<String>,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        let cues = [
            "not", "no", "never", "none", "nothing", "don't", "doesn't", "didn't", "isn't",
            "aren't", "wasn't", "weren't", "haven't", "hasn't", "hadn't", "can't", "cannot",
            "couldn't", "won't", "wouldn't", "안", "못", "않다", "없다",
        ];
        HeuristicConfig {
            jaccard_threshold: 0.5,
            negation_cues: cues.iter().map(|c| (*c).to_owned()).collect(),
        }
    }
}

/// Token-overlap classifier. Never emits DELETE.
///
/// Rules, first match wins:
/// 1. identical texts → PASS
/// 2. tokens(s) ⊆ tokens(m) → PASS
/// 3. tokens(m) ⊂ tokens(s) → REPLACE
/// 4. Jaccard ≥ threshold and exactly one side carries a negation cue → REPLACE
/// 5. otherwise → APPEND
#[derive(Debug, Clone, Default)]
pub struct LexicalHeuristic {
    config: HeuristicConfig,
}

impl LexicalHeuristic {
    pub fn new(config: HeuristicConfig) -> Self {
        LexicalHeuristic { config }
    }

    pub fn config(&self) -> &HeuristicConfig {
        &self.config
    }

    fn negated(&self, toks: &HashSet<String>) -> bool {
        toks.iter().any(|t| {
            let lower = t.to_lowercase();
            let bare = lower.trim_matches(|c: char| c.is_ascii_punctuation() && c != '\'');
            self.config.negation_cues.iter().any(|cue| cue == bare)
        })
    }

    pub fn decide(&self, memory: &str, summary: &str) -> Result<MemOp, ClassifierError> {
        let m_toks = tokens(memory);
        let s_toks = tokens(summary);
        if m_toks.is_empty() || s_toks.is_empty() {
            return Err(ClassifierError::EmptyText);
        }
        if m_toks == s_toks {
            return Ok(MemOp::Pass);
        }
        let m: HashSet<String> = m_toks.into_iter().collect();
        let s: HashSet<String> = s_toks.into_iter().collect();
        if s.is_subset(&m) {
            return Ok(MemOp::Pass);
        }
        if m.is_subset(&s) {
            return Ok(MemOp::Replace);
        }
        let inter = m.intersection(&s).count() as f64;
        let union = m.union(&s).count() as f64;
        if inter / union >= self.config.jaccard_threshold && self.negated(&m) != self.negated(&s) {
            return Ok(MemOp::Replace);
        }
        Ok(MemOp::Append)
    }
}

impl OperationClassifier for LexicalHeuristic {
    fn classify(&self, memory: &str, summary: &str) -> Result<MemOp, ClassifierError> {
        self.decide(memory, summary)
    }

    fn name(&self) -> &str {
        "heuristic"
    }
}
