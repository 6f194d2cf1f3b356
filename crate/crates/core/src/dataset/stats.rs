use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::episodes::EpisodeRecord;
use super::DatasetError;
use crate::metrics::distinct_n;
use crate::text::tokens;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub episodes: usize,
    pub sessions: usize,
    pub sessions_by_index: BTreeMap<u32, usize>,
    pub turns: usize,
    pub avg_turns_per_session: f64,
    pub avg_words_per_turn: f64,
    pub unique_words: usize,
    pub distinct1: f64,
    pub distinct2: f64,
    /// Mean `|memory_before|` over sessions 2 and later (session 1 memory is
    /// empty by construction).
    pub avg_memory_per_session: f64,
    /// Mean `|summary|` over sessions that carry a summary.
    pub avg_summary_per_session: f64,
    pub avg_words_per_summary_sentence: f64,
    pub summary_distinct1: f64,
    pub summary_distinct2: f64,
}

fn mean(sum: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        sum as f64 / n as f64
    }
}

pub fn corpus_stats(episodes: &[EpisodeRecord]) -> Result<CorpusStats, DatasetError> {
    if episodes.is_empty() {
        return Err(DatasetError::EmptyInput);
    }
    let mut sessions_by_index = BTreeMap::new();
    let mut turn_texts: Vec<&str> = Vec::new();
    let mut summary_texts: Vec<&str> = Vec::new();
    let (mut sessions, mut later_sessions, mut memory_total) = (0usize, 0usize, 0usize);
    let (mut summarized_sessions, mut summary_total) = (0usize, 0usize);
    for ep in episodes {
        for s in &ep.sessions {
            sessions += 1;
            *sessions_by_index.entry(s.index).or_insert(0) += 1;
            turn_texts.extend(s.turns.iter().map(|t| t.text.as_str()));
            if s.index >= 2 {
                later_sessions += 1;
                memory_total += s.memory_before.len();
            }
            if let Some(summary) = &s.summary {
                summarized_sessions += 1;
                summary_total += summary.len();
                summary_texts.extend(summary.iter().map(String::as_str));
            }
        }
    }
    let mut unique = HashSet::new();
    let mut turn_words = 0usize;
    for t in &turn_texts {
        for w in tokens(t) {
            turn_words += 1;
            unique.insert(w);
        }
    }
    let summary_words: usize = summary_texts.iter().map(|t| tokens(t).len()).sum();
    let distinct = |texts: &[&str], n| if texts.is_empty() { Ok(0.0) } else { distinct_n(texts, n).or(Ok(0.0)) };
    Ok(CorpusStats {
        episodes: episodes.len(),
        sessions,
        sessions_by_index,
        turns: turn_texts.len(),
        avg_turns_per_session: mean(turn_texts.len(), sessions),
        avg_words_per_turn: mean(turn_words, turn_texts.len()),
        unique_words: unique.len(),
        distinct1: distinct(&turn_texts, 1)?,
        distinct2: distinct(&turn_texts, 2)?,
        avg_memory_per_session: mean(memory_total, later_sessions),
        avg_summary_per_session: mean(summary_total, summarized_sessions),
        avg_words_per_summary_sentence: mean(summary_words, summary_texts.len()),
        summary_distinct1: distinct(&summary_texts, 1)?,
        summary_distinct2: distinct(&summary_texts, 2)?,
    })
}

impl CorpusStats {
    /// Two-column table in the layout of the published corpus statistics.
    pub fn render(&self) -> String {
        let mut rows: Vec<(String, String)> = vec![("Sessions".into(), self.sessions.to_string())];
        for (idx, n) in &self.sessions_by_index {
            rows.push((format!("  Session {idx}"), n.to_string()));
        }
        rows.extend([
            ("Turns".into(), self.turns.to_string()),
            ("Avg. turns per session".into(), format!("{:.2}", self.avg_turns_per_session)),
            ("Avg. words per turn".into(), format!("{:.2}", self.avg_words_per_turn)),
            ("Unique words for all turns".into(), self.unique_words.to_string()),
            (
                "Distinct-1/2 for all turns".into(),
                format!("{:.4}/{:.4}", self.distinct1, self.distinct2),
            ),
            ("Avg. memory sentences per session |M|".into(), format!("{:.2}", self.avg_memory_per_session)),
            ("Avg. summary sentences per session |S|".into(), format!("{:.2}", self.avg_summary_per_session)),
            (
                "Avg. words per summary sentence".into(),
                format!("{:.2}", self.avg_words_per_summary_sentence),
            ),
            (
                "Distinct-1/2 for all summary sentences".into(),
                format!("{:.4}/{:.4}", self.summary_distinct1, self.summary_distinct2),
            ),
        ]);
        let width = rows.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<width$}  {v:>12}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::episodes::{SessionRecord, TurnRecord};
    use crate::dialogue::Speaker;

    fn fixture() -> EpisodeRecord {
        EpisodeRecord {
            episode_id: "e".into(),
            sessions: vec![SessionRecord {
                index: 1,
                elapsed_days: 0,
                turns: vec![
                    TurnRecord {
                        speaker: Speaker::Bot,
                        text: "how are you".into(),
                    },
                    TurnRecord {
                        speaker: Speaker::User,
                        text: "you are kind".into(),
                    },
                ],
                summary: Some(vec!["Is kind".into(), "Feels fine today".into()]),
                memory_before: vec![],
                memory_after: Some(vec!["Is kind".into(), "Feels fine today".into()]),
                gold_ops: vec![],
            }],
        }
    }

    #[test]
    fn hand_computed_fixture() {
        let s = corpus_stats(&[fixture()]).unwrap();
        assert_eq!(s.sessions, 1);
        assert_eq!(s.turns, 2);
        assert_eq!(s.avg_turns_per_session, 2.0);
        // 6 words over 2 turns
        assert_eq!(s.avg_words_per_turn, 3.0);
        // how are you kind
        assert_eq!(s.unique_words, 4);
        assert_eq!(s.distinct1, 4.0 / 6.0);
        // how are | are you | you are | are kind: 4 distinct bigrams over 6 words
        assert_eq!(s.distinct2, 4.0 / 6.0);
        assert_eq!(s.avg_memory_per_session, 0.0);
        assert_eq!(s.avg_summary_per_session, 2.0);
        // (2 + 3) / 2
        assert_eq!(s.avg_words_per_summary_sentence, 2.5);
        assert_eq!(s.summary_distinct1, 1.0);
        assert_eq!(s.summary_distinct2, 3.0 / 5.0);
    }

    #[test]
    fn permutation_invariant() {
        let mut other = fixture();
        other.episode_id = "f".into();
        other.sessions[0].turns[1].text = "fine thanks".into();
        let a = corpus_stats(&[fixture(), other.clone()]).unwrap();
        let b = corpus_stats(&[other, fixture()]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_corpus_is_error() {
        assert!(matches!(corpus_stats(&[]), Err(DatasetError::EmptyInput)));
    }
}
