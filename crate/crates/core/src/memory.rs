//! Memory data model and the pairwise memory update.
//!
//! At the end of a session the old memory `M` and the new summary `S` are
//! merged into `M'` by classifying every `(m, s)` pair into one of four
//! operations:
//!
//! | op      | keeps `m` | keeps `s` |
//! |---------|-----------|-----------|
//! | PASS    | yes       | no        |
//! | REPLACE | no        | yes       |
//! | APPEND  | yes       | yes       |
//! | DELETE  | no        | no        |
//!
//! [`update_memory`] runs the two-phase merge. [`update_memory_oracle`] is an
//! independent set-comprehension restatement of the same semantics used for
//! differential testing.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{ClassifierError, OperationClassifier};
use crate::text::normalize;

/// Identifier of a memory or summary sentence. Identity never depends on text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SentenceId(pub String);

impl SentenceId {
    pub fn new(id: impl Into<String>) -> Self {
        SentenceId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SentenceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SentenceId {
    fn from(s: &str) -> Self {
        SentenceId(s.to_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Origin {
    FromMemory,
    FromSummary,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MemoryError {
    #[error("sentence {id} has empty text after normalization")]
    EmptyText { id: SentenceId },
    #[error("sentence {id}: origin_session must be >= 1")]
    InvalidSession { id: SentenceId },
    #[error("duplicate sentence id {0}")]
    DuplicateId(SentenceId),
    #[error("duplicate sentence text {text:?} (ids {first} and {second})")]
    DuplicateText {
        text: String,
        first: SentenceId,
        second: SentenceId,
    },
}

/// One unstructured fact about the user. Text is stored normalized.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "SentenceWire")]
pub struct MemorySentence {
    id: SentenceId,
    text: String,
    origin_session: u32,
    origin: Origin,
}

#[derive(Deserialize)]
struct SentenceWire {
    id: SentenceId,
    text: String,
    origin_session: u32,
    origin: Origin,
}

impl TryFrom<SentenceWire> for MemorySentence {
    type Error = MemoryError;

    fn try_from(w: SentenceWire) -> Result<Self, Self::Error> {
        MemorySentence::new(w.id, &w.text, w.origin_session, w.origin)
    }
}

impl MemorySentence {
    pub fn new(
        id: impl Into<SentenceId>,
        text: &str,
        origin_session: u32,
        origin: Origin,
    ) -> Result<Self, MemoryError> {
        let id = id.into();
        let text = normalize(text);
        if text.is_empty() {
            return Err(MemoryError::EmptyText { id });
        }
        if origin_session == 0 {
            return Err(MemoryError::InvalidSession { id });
        }
        Ok(MemorySentence {
            id,
            text,
            origin_session,
            origin,
        })
    }

    pub fn id(&self) -> &SentenceId {
        &self.id
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn origin_session(&self) -> u32 {
        self.origin_session
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }
}

impl From<String> for SentenceId {
    fn from(s: String) -> Self {
        SentenceId(s)
    }
}

fn validate_sentences(sentences: &[MemorySentence]) -> Result<(), MemoryError> {
    let mut ids = HashSet::new();
    let mut texts: HashMap<&str, &SentenceId> = HashMap::new();
    for s in sentences {
        if !ids.insert(&s.id) {
            return Err(MemoryError::DuplicateId(s.id.clone()));
        }
        if let Some(first) = texts.insert(&s.text, &s.id) {
            return Err(MemoryError::DuplicateText {
                text: s.text.clone(),
                first: first.clone(),
                second: s.id.clone(),
            });
        }
    }
    Ok(())
}

/// Builds sentences from raw texts, skipping empty texts and exact
/// duplicates. Ids are `{prefix}{n}` with `n` counting kept sentences.
fn sentences_from_texts<I, T>(
    texts: I,
    origin_session: u32,
    origin: Origin,
    prefix: &str,
) -> Vec<MemorySentence>
where
    I: IntoIterator<Item = T>,
    T: AsRef<str>,
{
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for t in texts {
        let id = SentenceId(format!("{prefix}{}", out.len()));
        let Ok(s) = MemorySentence::new(id, t.as_ref(), origin_session.max(1), origin) else {
            continue;
        };
        if seen.insert(s.text.clone()) {
            out.push(s);
        }
    }
    out
}

/// The bot's current knowledge about the user: an ordered, duplicate-free
/// list of sentences. Serializes as a bare JSON array of sentences.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
#[serde(transparent)]
pub struct MemoryState {
    sentences: Vec<MemorySentence>,
    #[serde(skip)]
    session_index: u32,
}

impl MemoryState {
    pub fn new(session_index: u32, sentences: Vec<MemorySentence>) -> Result<Self, MemoryError> {
        validate_sentences(&sentences)?;
        Ok(MemoryState {
            sentences,
            session_index,
        })
    }

    pub fn empty(session_index: u32) -> Self {
        MemoryState {
            sentences: Vec::new(),
            session_index,
        }
    }

    /// Memory built from plain texts with ids `{prefix}{n}`; empty and
    /// duplicate texts are dropped.
    pub fn from_texts<I, T>(session_index: u32, origin: Origin, prefix: &str, texts: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: AsRef<str>,
    {
        MemoryState {
            sentences: sentences_from_texts(texts, session_index, origin, prefix),
            session_index,
        }
    }

    pub fn sentences(&self) -> &[MemorySentence] {
        &self.sentences
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.sentences.iter().map(|s| s.text())
    }

    pub fn session_index(&self) -> u32 {
        self.session_index
    }

    pub fn with_session_index(mut self, session_index: u32) -> Self {
        self.session_index = session_index;
        self
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MemorySentence> {
        self.sentences.iter()
    }

    /// Parses the wire form (a JSON array of sentence objects).
    pub fn from_json(session_index: u32, json: &str) -> Result<Self, MemoryLoadError> {
        let sentences: Vec<MemorySentence> = serde_json::from_str(json)?;
        Ok(MemoryState::new(session_index, sentences)?)
    }
}

impl<'de> Deserialize<'de> for MemoryState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let sentences = Vec::<MemorySentence>::deserialize(d)?;
        MemoryState::new(0, sentences).map_err(serde::de::Error::custom)
    }
}

/// End-of-session summary sentences awaiting merge into memory.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
#[serde(transparent)]
pub struct SummaryBatch {
    sentences: Vec<MemorySentence>,
    #[serde(skip)]
    source_session: u32,
}

impl SummaryBatch {
    pub fn new(source_session: u32, sentences: Vec<MemorySentence>) -> Result<Self, MemoryError> {
        validate_sentences(&sentences)?;
        Ok(SummaryBatch {
            sentences,
            source_session,
        })
    }

    pub fn empty(source_session: u32) -> Self {
        SummaryBatch {
            sentences: Vec::new(),
            source_session,
        }
    }

    /// Fresh summary sentences with ids `s{session}-{n}`.
    pub fn from_texts<I, T>(source_session: u32, texts: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: AsRef<str>,
    {
        let prefix = format!("s{source_session}-");
        SummaryBatch {
            sentences: sentences_from_texts(texts, source_session, Origin::FromSummary, &prefix),
            source_session,
        }
    }

    pub fn sentences(&self) -> &[MemorySentence] {
        &self.sentences
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.sentences.iter().map(|s| s.text())
    }

    pub fn source_session(&self) -> u32 {
        self.source_session
    }

    pub fn with_source_session(mut self, source_session: u32) -> Self {
        self.source_session = source_session;
        self
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MemorySentence> {
        self.sentences.iter()
    }

    pub fn from_json(source_session: u32, json: &str) -> Result<Self, MemoryLoadError> {
        let sentences: Vec<MemorySentence> = serde_json::from_str(json)?;
        Ok(SummaryBatch::new(source_session, sentences)?)
    }
}

impl<'de> Deserialize<'de> for SummaryBatch {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let sentences = Vec::<MemorySentence>::deserialize(d)?;
        SummaryBatch::new(0, sentences).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Error)]
pub enum MemoryLoadError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Invalid(#[from] MemoryError),
}

/// Pairwise merge decision `O(m, s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MemOp {
    Pass,
    Replace,
    Append,
    Delete,
}

impl MemOp {
    pub const ALL: [MemOp; 4] = [MemOp::Pass, MemOp::Replace, MemOp::Append, MemOp::Delete];

    /// `(keep_memory, keep_summary)` for this operation.
    pub fn apply(self) -> (bool, bool) {
        match self {
            MemOp::Pass => (true, false),
            MemOp::Replace => (false, true),
            MemOp::Append => (true, true),
            MemOp::Delete => (false, false),
        }
    }

    /// Single-character label token of the text-to-text classifier protocol.
    pub fn token(self) -> &'static str {
        match self {
            MemOp::Pass => "0",
            MemOp::Append => "1",
            MemOp::Replace => "2",
            MemOp::Delete => "3",
        }
    }

    pub fn from_token(token: &str) -> Option<MemOp> {
        match token {
            "0" => Some(MemOp::Pass),
            "1" => Some(MemOp::Append),
            "2" => Some(MemOp::Replace),
            "3" => Some(MemOp::Delete),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MemOp::Pass => "PASS",
            MemOp::Replace => "REPLACE",
            MemOp::Append => "APPEND",
            MemOp::Delete => "DELETE",
        }
    }

    pub fn index(self) -> usize {
        match self {
            MemOp::Pass => 0,
            MemOp::Replace => 1,
            MemOp::Append => 2,
            MemOp::Delete => 3,
        }
    }
}

impl fmt::Display for MemOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MemOp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "PASS" => Ok(MemOp::Pass),
            "REPLACE" => Ok(MemOp::Replace),
            "APPEND" => Ok(MemOp::Append),
            "DELETE" => Ok(MemOp::Delete),
            other => Err(format!("unknown operation {other:?}")),
        }
    }
}

/// `(keep_memory, keep_summary)` for `op`.
pub fn apply_operation(op: MemOp) -> (bool, bool) {
    op.apply()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpEntry {
    pub m_id: SentenceId,
    pub s_id: SentenceId,
    pub op: MemOp,
}

/// Every evaluated `(memory, summary)` pair, in row-major order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OpTable {
    entries: Vec<OpEntry>,
}

impl OpTable {
    pub fn entries(&self) -> &[OpEntry] {
        &self.entries
    }

    pub fn get(&self, m_id: &SentenceId, s_id: &SentenceId) -> Option<MemOp> {
        self.entries
            .iter()
            .find(|e| &e.m_id == m_id && &e.s_id == s_id)
            .map(|e| e.op)
    }

    pub fn to_map(&self) -> HashMap<(SentenceId, SentenceId), MemOp> {
        self.entries
            .iter()
            .map(|e| ((e.m_id.clone(), e.s_id.clone()), e.op))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UpdateWarning {
    /// A surviving summary sentence duplicated a surviving memory sentence;
    /// the summary copy was dropped.
    DuplicateTextConflict { m_id: SentenceId, s_id: SentenceId },
    /// Removed by the capacity limit.
    Evicted { id: SentenceId },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryUpdateResult {
    pub new_memory: MemoryState,
    pub removed_memory: Vec<MemorySentence>,
    pub removed_summary: Vec<MemorySentence>,
    pub op_table: OpTable,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub evicted: Vec<MemorySentence>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<UpdateWarning>,
    pub classifier_calls: usize,
}

#[derive(Debug, Error)]
pub enum UpdateError {
    #[error("classifier failed on pair ({m_id}, {s_id}): {source}")]
    ClassifierFailure {
        m_id: SentenceId,
        s_id: SentenceId,
        #[source]
        source: ClassifierError,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UpdateOptions {
    /// Maximum size of `M'`; the oldest `origin_session` is evicted first.
    pub max_size: Option<usize>,
}

/// Merges `memory` and `summary` into `M'`.
pub fn update_memory(
    memory: &MemoryState,
    summary: &SummaryBatch,
    classifier: &dyn OperationClassifier,
) -> Result<MemoryUpdateResult, UpdateError> {
    update_memory_with(memory, summary, classifier, &UpdateOptions::default())
}

pub fn update_memory_with(
    memory: &MemoryState,
    summary: &SummaryBatch,
    classifier: &dyn OperationClassifier,
    options: &UpdateOptions,
) -> Result<MemoryUpdateResult, UpdateError> {
    let ms = memory.sentences();
    let ss = summary.sentences();

    // Phase 1 classifies the whole cross product once; phase 2 reuses it.
    let mut cache: HashMap<(&str, &str), MemOp> = HashMap::new();
    let mut calls = 0usize;
    let mut ops = Vec::with_capacity(ms.len());
    for m in ms {
        let mut row = Vec::with_capacity(ss.len());
        for s in ss {
            let op = if m.text == s.text {
                MemOp::Pass
            } else if let Some(op) = cache.get(&(m.text(), s.text())) {
                *op
            } else {
                calls += 1;
                let op = classifier.classify(m.text(), s.text()).map_err(|source| {
                    UpdateError::ClassifierFailure {
                        m_id: m.id.clone(),
                        s_id: s.id.clone(),
                        source,
                    }
                })?;
                cache.insert((m.text(), s.text()), op);
                op
            };
            row.push(op);
        }
        ops.push(row);
    }

    let mut m_del = vec![false; ms.len()];
    let mut s_del = vec![false; ss.len()];
    for (i, row) in ops.iter().enumerate() {
        for (j, op) in row.iter().enumerate() {
            match op {
                MemOp::Replace => m_del[i] = true,
                MemOp::Delete => {
                    m_del[i] = true;
                    s_del[j] = true;
                }
                MemOp::Pass | MemOp::Append => {}
            }
        }
    }
    for j in 0..ss.len() {
        if (0..ms.len()).any(|i| !m_del[i] && ops[i][j] == MemOp::Pass) {
            s_del[j] = true;
        }
    }

    let mut warnings = Vec::new();
    let surviving: HashMap<&str, &SentenceId> = ms
        .iter()
        .zip(&m_del)
        .filter(|(_, del)| !**del)
        .map(|(m, _)| (m.text(), &m.id))
        .collect();
    for (j, s) in ss.iter().enumerate() {
        if s_del[j] {
            continue;
        }
        if let Some(m_id) = surviving.get(s.text()) {
            tracing::warn!(m_id = %m_id, s_id = %s.id, "summary duplicates surviving memory; dropping summary copy");
            warnings.push(UpdateWarning::DuplicateTextConflict {
                m_id: (*m_id).clone(),
                s_id: s.id.clone(),
            });
            s_del[j] = true;
        }
    }

    let mut new_sentences: Vec<MemorySentence> = Vec::new();
    let mut removed_memory = Vec::new();
    let mut removed_summary = Vec::new();
    for (m, del) in ms.iter().zip(&m_del) {
        if *del {
            removed_memory.push(m.clone());
        } else {
            new_sentences.push(m.clone());
        }
    }
    for (s, del) in ss.iter().zip(&s_del) {
        if *del {
            removed_summary.push(s.clone());
        } else {
            new_sentences.push(s.clone());
        }
    }

    let mut evicted = Vec::new();
    if let Some(max) = options.max_size {
        while new_sentences.len() > max {
            let oldest = new_sentences
                .iter()
                .enumerate()
                .min_by_key(|(pos, s)| (s.origin_session, *pos))
                .map(|(pos, _)| pos)
                .expect("non-empty");
            let s = new_sentences.remove(oldest);
            warnings.push(UpdateWarning::Evicted { id: s.id.clone() });
            evicted.push(s);
        }
    }

    let mut op_table = OpTable::default();
    for (m, row) in ms.iter().zip(&ops) {
        for (s, op) in ss.iter().zip(row) {
            op_table.entries.push(OpEntry {
                m_id: m.id.clone(),
                s_id: s.id.clone(),
                op: *op,
            });
        }
    }

    Ok(MemoryUpdateResult {
        new_memory: MemoryState {
            sentences: new_sentences,
            session_index: summary.source_session() + 1,
        },
        removed_memory,
        removed_summary,
        op_table,
        evicted,
        warnings,
        classifier_calls: calls,
    })
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("op table has no entry for ({m_id}, {s_id})")]
    MissingPair { m_id: SentenceId, s_id: SentenceId },
}

/// Reference semantics of the merge, stated directly over the full op table:
/// a memory sentence survives iff no summary sentence REPLACEs or DELETEs it;
/// a summary sentence survives iff nothing DELETEs it and no surviving memory
/// sentence PASSes it.
pub fn update_memory_oracle(
    memory: &MemoryState,
    summary: &SummaryBatch,
    op_table: &HashMap<(SentenceId, SentenceId), MemOp>,
) -> Result<MemoryState, OracleError> {
    let op = |m: &MemorySentence, s: &MemorySentence| -> Result<MemOp, OracleError> {
        op_table
            .get(&(m.id.clone(), s.id.clone()))
            .copied()
            .ok_or_else(|| OracleError::MissingPair {
                m_id: m.id.clone(),
                s_id: s.id.clone(),
            })
    };

    let mut kept_memory: Vec<&MemorySentence> = Vec::new();
    for m in memory.iter() {
        let ops: Vec<MemOp> = summary.iter().map(|s| op(m, s)).collect::<Result<_, _>>()?;
        if !ops.contains(&MemOp::Replace) && !ops.contains(&MemOp::Delete) {
            kept_memory.push(m);
        }
    }

    let mut kept_summary: Vec<&MemorySentence> = Vec::new();
    for s in summary.iter() {
        let deleted = memory
            .iter()
            .map(|m| op(m, s))
            .collect::<Result<Vec<_>, _>>()?
            .contains(&MemOp::Delete);
        let passed = kept_memory
            .iter()
            .map(|m| op(m, s))
            .collect::<Result<Vec<_>, _>>()?
            .contains(&MemOp::Pass);
        if !deleted && !passed {
            kept_summary.push(s);
        }
    }

    Ok(MemoryState {
        sentences: kept_memory.into_iter().chain(kept_summary).cloned().collect(),
        session_index: summary.source_session() + 1,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditViolation {
    pub first: SentenceId,
    pub second: SentenceId,
    pub op: MemOp,
}

/// Every ordered intra-memory pair that does not classify as APPEND.
pub fn audit_memory(
    memory: &MemoryState,
    classifier: &dyn OperationClassifier,
) -> Result<Vec<AuditViolation>, UpdateError> {
    let mut out = Vec::new();
    for (i, a) in memory.iter().enumerate() {
        for (j, b) in memory.iter().enumerate() {
            if i == j {
                continue;
            }
            let op = classifier
                .classify(a.text(), b.text())
                .map_err(|source| UpdateError::ClassifierFailure {
                    m_id: a.id.clone(),
                    s_id: b.id.clone(),
                    source,
                })?;
            if op != MemOp::Append {
                out.push(AuditViolation {
                    first: a.id.clone(),
                    second: b.id.clone(),
                    op,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{Constant, Counting, LabeledPair, TableOracle};

    fn mem(texts: &[&str]) -> MemoryState {
        MemoryState::from_texts(2, Origin::FromMemory, "m", texts)
    }

    fn summ(texts: &[&str]) -> SummaryBatch {
        SummaryBatch::from_texts(2, texts)
    }

    fn table(rows: &[(&str, &str, MemOp)]) -> TableOracle {
        TableOracle::new(
            rows.iter()
                .map(|(m, s, op)| LabeledPair::new(*m, *s, (*op).into()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn apply_operation_matches_semantics() {
        assert_eq!(apply_operation(MemOp::Pass), (true, false));
        assert_eq!(apply_operation(MemOp::Replace), (false, true));
        assert_eq!(apply_operation(MemOp::Append), (true, true));
        assert_eq!(apply_operation(MemOp::Delete), (false, false));
    }

    #[test]
    fn token_alphabet_round_trips() {
        for op in MemOp::ALL {
            assert_eq!(MemOp::from_token(op.token()), Some(op));
        }
        assert_eq!(MemOp::from_token("7"), None);
    }

    #[test]
    fn covid_replace() {
        let m = mem(&["Haven't got COVID tested yet"]);
        let s = summ(&["Just got positive results from COVID test"]);
        let t = table(&[(
            "Haven't got COVID tested yet",
            "Just got positive results from COVID test",
            MemOp::Replace,
        )]);
        let r = update_memory(&m, &s, &t).unwrap();
        let texts: Vec<_> = r.new_memory.texts().collect();
        assert_eq!(texts, vec!["Just got positive results from COVID test"]);
        assert_eq!(r.removed_memory.len(), 1);
        assert!(r.removed_summary.is_empty());
    }

    #[test]
    fn cold_delete() {
        let m = mem(&["having a cold and taking medicine"]);
        let s = summ(&["cold is all better now"]);
        let t = table(&[(
            "having a cold and taking medicine",
            "cold is all better now",
            MemOp::Delete,
        )]);
        let r = update_memory(&m, &s, &t).unwrap();
        assert!(r.new_memory.is_empty());
        assert_eq!(r.removed_memory.len(), 1);
        assert_eq!(r.removed_summary.len(), 1);
    }

    #[test]
    fn gym_append_keeps_order() {
        let m = mem(&["Goes to the gym"]);
        let s = summ(&["Body is sore from exercise"]);
        let t = table(&[("Goes to the gym", "Body is sore from exercise", MemOp::Append)]);
        let r = update_memory(&m, &s, &t).unwrap();
        let texts: Vec<_> = r.new_memory.texts().collect();
        assert_eq!(texts, vec!["Goes to the gym", "Body is sore from exercise"]);
    }

    #[test]
    fn empty_summary_makes_no_calls() {
        let m = mem(&["a", "b"]);
        let c = Counting::new(Constant(MemOp::Delete));
        let r = update_memory(&m, &SummaryBatch::empty(2), &c).unwrap();
        assert_eq!(r.new_memory.sentences(), m.sentences());
        assert_eq!(c.calls(), 0);
        assert!(r.op_table.is_empty());
    }

    #[test]
    fn empty_memory_yields_summary() {
        let s = summ(&["x", "y"]);
        let r = update_memory(&MemoryState::empty(1), &s, &Constant(MemOp::Delete)).unwrap();
        assert_eq!(r.new_memory.sentences(), s.sentences());
        let oracle = update_memory_oracle(&MemoryState::empty(1), &s, &HashMap::new()).unwrap();
        assert_eq!(oracle.sentences(), s.sentences());
    }

    #[test]
    fn identical_text_forces_pass() {
        let m = mem(&["Has a dog"]);
        let s = summ(&["Has  a dog"]);
        let c = Counting::new(Constant(MemOp::Delete));
        let r = update_memory(&m, &s, &c).unwrap();
        assert_eq!(c.calls(), 0);
        assert_eq!(r.op_table.entries()[0].op, MemOp::Pass);
        assert_eq!(r.new_memory.sentences(), m.sentences());
    }

    #[test]
    fn pass_only_counts_against_surviving_memory() {
        // m1 PASSes s, but m1 is itself replaced by s2, so s survives.
        let m = mem(&["m1"]);
        let s = summ(&["s1", "s2"]);
        let t = table(&[("m1", "s1", MemOp::Pass), ("m1", "s2", MemOp::Replace)]);
        let r = update_memory(&m, &s, &t).unwrap();
        let texts: Vec<_> = r.new_memory.texts().collect();
        assert_eq!(texts, vec!["s1", "s2"]);
    }

    #[test]
    fn all_append_is_concatenation() {
        let m = mem(&["a", "b"]);
        let s = summ(&["c", "d"]);
        let r = update_memory(&m, &s, &Constant(MemOp::Append)).unwrap();
        let texts: Vec<_> = r.new_memory.texts().collect();
        assert_eq!(texts, vec!["a", "b", "c", "d"]);
        assert_eq!(r.classifier_calls, 4);
    }

    #[test]
    fn capacity_evicts_oldest_session_first() {
        let old = MemorySentence::new("m0", "old fact", 1, Origin::FromSummary).unwrap();
        let newer = MemorySentence::new("m1", "newer fact", 2, Origin::FromSummary).unwrap();
        let m = MemoryState::new(3, vec![newer, old]).unwrap();
        let s = SummaryBatch::from_texts(3, ["latest fact"]);
        let opts = UpdateOptions { max_size: Some(2) };
        let r = update_memory_with(&m, &s, &Constant(MemOp::Append), &opts).unwrap();
        let texts: Vec<_> = r.new_memory.texts().collect();
        assert_eq!(texts, vec!["newer fact", "latest fact"]);
        assert_eq!(r.evicted[0].text(), "old fact");
    }

    #[test]
    fn oracle_reports_missing_pair() {
        let m = mem(&["a"]);
        let s = summ(&["b"]);
        let err = update_memory_oracle(&m, &s, &HashMap::new()).unwrap_err();
        assert!(matches!(err, OracleError::MissingPair { .. }));
    }

    #[test]
    fn audit_finds_replace_pair() {
        let m = mem(&["Not sick", "Had back surgery"]);
        let t = table(&[("Not sick", "Had back surgery", MemOp::Replace)]);
        let v = audit_memory(&m, &t).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].op, MemOp::Replace);
        assert!(audit_memory(&mem(&["only"]), &t).unwrap().is_empty());
        assert!(audit_memory(&m, &Constant(MemOp::Append)).unwrap().is_empty());
    }

    #[test]
    fn rejects_duplicates_and_empty_text() {
        let a = MemorySentence::new("a", "x", 1, Origin::FromMemory).unwrap();
        let b = MemorySentence::new("b", " x ", 1, Origin::FromMemory).unwrap();
        assert!(matches!(
            MemoryState::new(1, vec![a.clone(), b]),
            Err(MemoryError::DuplicateText { .. })
        ));
        assert!(matches!(
            MemoryState::new(1, vec![a.clone(), a]),
            Err(MemoryError::DuplicateId(_))
        ));
        assert!(matches!(
            MemorySentence::new("e", "   ", 1, Origin::FromMemory),
            Err(MemoryError::EmptyText { .. })
        ));
    }

    #[test]
    fn wire_format() {
        let m = mem(&["Has a dog"]);
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(
            json,
            r#"[{"id":"m0","text":"Has a dog","origin_session":2,"origin":"FROM_MEMORY"}]"#
        );
        let back = MemoryState::from_json(2, &json).unwrap();
        assert_eq!(back, m);

        let s = summ(&["b"]);
        let r = update_memory(&m, &s, &Constant(MemOp::Replace)).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["op_table"][0]["op"], "REPLACE");
        assert_eq!(v["op_table"][0]["m_id"], "m0");
        assert_eq!(v["op_table"][0]["s_id"], "s2-0");
    }

    #[test]
    fn duplicate_json_is_rejected() {
        let json = r#"[{"id":"a","text":"x","origin_session":1,"origin":"FROM_MEMORY"},
                       {"id":"b","text":"x","origin_session":1,"origin":"FROM_MEMORY"}]"#;
        assert!(MemoryState::from_json(1, json).is_err());
    }
}
