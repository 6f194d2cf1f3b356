//! Canonical episode JSONL: one episode per line,
//! `{episode_id, sessions: [{index, elapsed_days, turns: [{speaker, text}],
//! summary: [text], memory_before: [text], memory_after: [text]}]}`.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::classify::{GoldLabel, LabeledPair, TableOracle};
use crate::dialogue::{Speaker, Turn};
use crate::memory::{MemOp, MemoryState, Origin, SummaryBatch};
use crate::text::normalize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub speaker: Speaker,
    pub text: String,
}

/// A gold operation label for one `(memory, summary)` pair of a session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldOpRecord {
    pub m: String,
    pub s: String,
    pub op: MemOp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub index: u32,
    #[serde(default)]
    pub elapsed_days: u32,
    #[serde(default)]
    pub turns: Vec<TurnRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<Vec<String>>,
    #[serde(default)]
    pub memory_before: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory_after: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gold_ops: Vec<GoldOpRecord>,
}

impl SessionRecord {
    pub fn turns(&self) -> Vec<Turn> {
        self.turns
            .iter()
            .enumerate()
            .map(|(i, t)| Turn::new(t.speaker, t.text.clone(), i))
            .collect()
    }

    pub fn memory_before_state(&self) -> MemoryState {
        MemoryState::from_texts(
            self.index,
            Origin::FromMemory,
            &format!("g{}-", self.index),
            &self.memory_before,
        )
    }

    pub fn summary_batch(&self) -> Option<SummaryBatch> {
        self.summary
            .as_ref()
            .map(|s| SummaryBatch::from_texts(self.index, s))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode_id: String,
    pub sessions: Vec<SessionRecord>,
}

impl EpisodeRecord {
    /// Classifier answering with this episode's gold operation labels.
    pub fn gold_table(&self) -> Result<TableOracle, DatasetError> {
        let mut seen = HashSet::new();
        let mut rows = Vec::new();
        for s in &self.sessions {
            for g in &s.gold_ops {
                let key = (normalize(&g.m), normalize(&g.s));
                if seen.insert(key) {
                    rows.push(LabeledPair::new(g.m.clone(), g.s.clone(), GoldLabel::from(g.op)));
                }
            }
        }
        TableOracle::new(rows).map_err(|e| DatasetError::SchemaViolation {
            line: 0,
            field: "gold_ops".into(),
            message: e.to_string(),
        })
    }

    pub fn has_gold_ops(&self) -> bool {
        self.sessions.iter().any(|s| !s.gold_ops.is_empty())
    }
}

fn normalized_set(texts: &[String]) -> HashSet<String> {
    texts.iter().map(|t| normalize(t)).collect()
}

/// Checks the structural invariants of one episode. `line` is reported in
/// schema errors (0 when unknown).
pub fn validate_episode(ep: &EpisodeRecord, line: usize) -> Result<(), DatasetError> {
    let violation = |field: &str, message: String| DatasetError::SchemaViolation {
        line,
        field: field.to_owned(),
        message,
    };
    if ep.episode_id.trim().is_empty() {
        return Err(violation("episode_id", "empty episode id".into()));
    }
    if ep.sessions.is_empty() {
        return Err(violation("sessions", "episode has no sessions".into()));
    }
    for (pos, s) in ep.sessions.iter().enumerate() {
        let expected = pos as u32 + 1;
        if s.index != expected {
            return Err(violation(
                "index",
                format!("session indices must run 1..n; expected {expected}, found {}", s.index),
            ));
        }
        for (i, t) in s.turns.iter().enumerate() {
            if normalize(&t.text).is_empty() {
                return Err(violation("turns.text", format!("session {expected} turn {i} is empty")));
            }
            if i > 0 && s.turns[i - 1].speaker == t.speaker {
                return Err(violation(
                    "turns.speaker",
                    format!("session {expected} turns {} and {i} have the same speaker", i - 1),
                ));
            }
        }
        let lists = [
            ("memory_before", Some(&s.memory_before)),
            ("memory_after", s.memory_after.as_ref()),
            ("summary", s.summary.as_ref()),
        ];
        for (field, list) in lists {
            if let Some(list) = list {
                if list.iter().any(|t| normalize(t).is_empty()) {
                    return Err(violation(field, format!("session {expected} has an empty sentence")));
                }
            }
        }
    }
    if !ep.sessions[0].memory_before.is_empty() {
        return Err(DatasetError::ChainBreak {
            episode: ep.episode_id.clone(),
            session: 1,
        });
    }
    for pair in ep.sessions.windows(2) {
        if let Some(after) = &pair[0].memory_after {
            if normalized_set(after) != normalized_set(&pair[1].memory_before) {
                return Err(DatasetError::ChainBreak {
                    episode: ep.episode_id.clone(),
                    session: pair[1].index,
                });
            }
        }
    }
    Ok(())
}

pub fn read_episodes(reader: impl BufRead) -> Result<Vec<EpisodeRecord>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| DatasetError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| DatasetError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let ep: EpisodeRecord = serde_json::from_value(value).map_err(|e| DatasetError::SchemaViolation {
            line: line_no,
            field: schema_field(&e.to_string()),
            message: e.to_string(),
        })?;
        validate_episode(&ep, line_no)?;
        out.push(ep);
    }
    Ok(out)
}

/// Best-effort name of the offending field from a serde error message.
fn schema_field(message: &str) -> String {
    for marker in ["missing field `", "unknown field `", "unknown variant `"] {
        if let Some(rest) = message.split(marker).nth(1) {
            if let Some(name) = rest.split('`').next() {
                return name.to_owned();
            }
        }
    }
    "episode".to_owned()
}

pub fn load_episodes(path: impl AsRef<Path>) -> Result<Vec<EpisodeRecord>, DatasetError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| DatasetError::io(path, e))?;
    read_episodes(BufReader::new(file))
}

pub fn write_episodes(mut writer: impl Write, episodes: &[EpisodeRecord]) -> std::io::Result<()> {
    for ep in episodes {
        serde_json::to_writer(&mut writer, ep)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn save_episodes(path: impl AsRef<Path>, episodes: &[EpisodeRecord]) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| DatasetError::io(path, e))?;
    write_episodes(std::io::BufWriter::new(file), episodes).map_err(|e| DatasetError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"episode_id":"e1","sessions":[{"index":1,"elapsed_days":0,"turns":[{"speaker":"BOT","text":"Hello"},{"speaker":"USER","text":"I have a cold"}],"summary":["Has a cold"],"memory_before":[],"memory_after":["Has a cold"]},{"index":2,"elapsed_days":9,"turns":[{"speaker":"BOT","text":"How is the cold?"},{"speaker":"USER","text":"All better"}],"summary":["Cold is all better now"],"memory_before":["Has a cold"],"memory_after":[]}]}"#;

    #[test]
    fn minimal_file_loads() {
        let eps = read_episodes(MINIMAL.as_bytes()).unwrap();
        assert_eq!(eps.len(), 1);
        assert_eq!(eps[0].sessions.len(), 2);
        assert!(eps[0].sessions[0].memory_before.is_empty());
    }

    #[test]
    fn chain_break_detected() {
        let bad = MINIMAL.replace(r#""memory_before":["Has a cold"]"#, r#""memory_before":["Has a dog"]"#);
        let err = read_episodes(bad.as_bytes()).unwrap_err();
        assert!(matches!(err, DatasetError::ChainBreak { session: 2, .. }), "{err:?}");
    }

    #[test]
    fn session_one_must_start_empty() {
        let bad = MINIMAL.replacen(r#""memory_before":[]"#, r#""memory_before":["x"]"#, 1);
        let err = read_episodes(bad.as_bytes()).unwrap_err();
        assert!(matches!(err, DatasetError::ChainBreak { session: 1, .. }), "{err:?}");
    }

    #[test]
    fn parse_error_reports_line() {
        let input = format!("{MINIMAL}\n{{not json\n");
        let err = read_episodes(input.as_bytes()).unwrap_err();
        assert!(matches!(err, DatasetError::Parse { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn schema_violation_names_field() {
        let err = read_episodes(r#"{"sessions":[]}"#.as_bytes()).unwrap_err();
        match err {
            DatasetError::SchemaViolation { field, .. } => assert_eq!(field, "episode_id"),
            other => panic!("{other:?}"),
        }
        let bad = MINIMAL.replace(r#""index":2"#, r#""index":3"#);
        assert!(matches!(
            read_episodes(bad.as_bytes()),
            Err(DatasetError::SchemaViolation { ref field, .. }) if field == "index"
        ));
    }

    #[test]
    fn consecutive_speakers_rejected() {
        let bad = MINIMAL.replace(r#"{"speaker":"USER","text":"I have a cold"}"#, r#"{"speaker":"BOT","text":"I have a cold"}"#);
        assert!(matches!(
            read_episodes(bad.as_bytes()),
            Err(DatasetError::SchemaViolation { ref field, .. }) if field == "turns.speaker"
        ));
    }

    #[test]
    fn write_then_read_is_identity() {
        let eps = read_episodes(MINIMAL.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_episodes(&mut buf, &eps).unwrap();
        assert_eq!(read_episodes(buf.as_slice()).unwrap(), eps);
    }
}
