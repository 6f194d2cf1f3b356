//! Declarative import of externally laid-out episode corpora.
//!
//! A [`FieldMapping`] (TOML key/value file) names where each canonical field
//! lives in the source records. Paths are dot-separated object keys.
//!
//! ```toml
//! format = "json"            # "jsonl" (one episode per line) or "json" (array)
//! episode_id = "dialogue_id"
//! sessions = "sessions"
//! turns = "dialogue"
//! speaker = "role"
//! text = "utterance"
//! summary = "summary"
//! memory_before = "memory"
//! bot_speakers = ["bot", "system"]
//! ```

use std::fs;
use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use super::episodes::{validate_episode, EpisodeRecord, SessionRecord, TurnRecord};
use super::DatasetError;
use crate::dialogue::Speaker;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SourceFormat {
    #[default]
    Jsonl,
    Json,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldMapping {
    pub format: SourceFormat,
    pub episode_id: String,
    pub sessions: String,
    pub session_index: String,
    pub elapsed_days: String,
    pub turns: String,
    pub speaker: String,
    pub text: String,
    pub summary: String,
    pub memory_before: String,
    pub memory_after: String,
    /// Key holding the text when sentence lists contain objects.
    pub sentence_text: String,
    pub bot_speakers: Vec<String>,
    pub user_speakers: Vec<String>,
    /// Fill a missing `memory_after` from the next session's `memory_before`.
    pub derive_memory_after: bool,
}

impl Default for FieldMapping {
    fn default() -> Self {
        FieldMapping {
            format: SourceFormat::Jsonl,
            episode_id: "episode_id".into(),
            sessions: "sessions".into(),
            session_index: "index".into(),
            elapsed_days: "elapsed_days".into(),
            turns: "turns".into(),
            speaker: "speaker".into(),
            text: "text".into(),
            summary: "summary".into(),
            memory_before: "memory_before".into(),
            memory_after: "memory_after".into(),
            sentence_text: "text".into(),
            bot_speakers: vec!["bot".into(), "BOT".into(), "chatbot".into(), "system".into()],
            user_speakers: vec!["user".into(), "USER".into(), "human".into()],
            derive_memory_after: true,
        }
    }
}

impl FieldMapping {
    pub fn from_toml(src: &str) -> Result<Self, DatasetError> {
        toml::from_str(src).map_err(|e| DatasetError::Mapping(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let path = path.as_ref();
        let src = fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
        Self::from_toml(&src)
    }

    fn speaker(&self, raw: &Value, line: usize) -> Result<Speaker, DatasetError> {
        let label = match raw {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        if self.bot_speakers.iter().any(|b| *b == label) {
            Ok(Speaker::Bot)
        } else if self.user_speakers.iter().any(|u| *u == label) {
            Ok(Speaker::User)
        } else {
            Err(DatasetError::SchemaViolation {
                line,
                field: self.speaker.clone(),
                message: format!("unrecognized speaker {label:?}"),
            })
        }
    }
}

fn lookup<'a>(value: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.')
        .filter(|p| !p.is_empty())
        .try_fold(value, |v, key| v.get(key))
}

fn sentence_list(
    value: Option<&Value>,
    mapping: &FieldMapping,
    field: &str,
    line: usize,
) -> Result<Option<Vec<String>>, DatasetError> {
    let Some(value) = value else { return Ok(None) };
    if value.is_null() {
        return Ok(None);
    }
    let violation = |message: String| DatasetError::SchemaViolation {
        line,
        field: field.to_owned(),
        message,
    };
    let items = match value {
        Value::Array(items) => items,
        // a single string of newline-separated sentences
        Value::String(s) => {
            return Ok(Some(
                s.lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty())
                    .map(str::to_owned)
                    .collect(),
            ))
        }
        other => return Err(violation(format!("expected a list, found {other}"))),
    };
    items
        .iter()
        .map(|item| match item {
            Value::String(s) => Ok(s.clone()),
            Value::Object(_) => lookup(item, &mapping.sentence_text)
                .and_then(Value::as_str)
                .map(str::to_owned)
                .ok_or_else(|| violation(format!("sentence object lacks {:?}", mapping.sentence_text))),
            other => Err(violation(format!("unexpected sentence {other}"))),
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
}

fn map_episode(value: &Value, mapping: &FieldMapping, line: usize) -> Result<EpisodeRecord, DatasetError> {
    let violation = |field: &str, message: String| DatasetError::SchemaViolation {
        line,
        field: field.to_owned(),
        message,
    };
    let episode_id = match lookup(value, &mapping.episode_id) {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => return Err(violation(&mapping.episode_id, "missing episode id".into())),
    };
    let sessions = lookup(value, &mapping.sessions)
        .and_then(Value::as_array)
        .ok_or_else(|| violation(&mapping.sessions, "missing session list".into()))?;

    let mut out = Vec::with_capacity(sessions.len());
    for (pos, sv) in sessions.iter().enumerate() {
        let index = lookup(sv, &mapping.session_index)
            .and_then(Value::as_u64)
            .map(|i| i as u32)
            .unwrap_or(pos as u32 + 1);
        let elapsed_days = lookup(sv, &mapping.elapsed_days)
            .and_then(Value::as_u64)
            .unwrap_or(0) as u32;
        let mut turns = Vec::new();
        if let Some(raw_turns) = lookup(sv, &mapping.turns).and_then(Value::as_array) {
            for (i, t) in raw_turns.iter().enumerate() {
                let turn = match t {
                    // bare strings alternate starting with the bot
                    Value::String(s) => TurnRecord {
                        speaker: if i % 2 == 0 { Speaker::Bot } else { Speaker::User },
                        text: s.clone(),
                    },
                    _ => {
                        let speaker = lookup(t, &mapping.speaker)
                            .ok_or_else(|| violation(&mapping.speaker, format!("turn {i} has no speaker")))?;
                        let text = lookup(t, &mapping.text)
                            .and_then(Value::as_str)
                            .ok_or_else(|| violation(&mapping.text, format!("turn {i} has no text")))?;
                        TurnRecord {
                            speaker: mapping.speaker(speaker, line)?,
                            text: text.to_owned(),
                        }
                    }
                };
                turns.push(turn);
            }
        }
        out.push(SessionRecord {
            index,
            elapsed_days,
            turns,
            summary: sentence_list(lookup(sv, &mapping.summary), mapping, &mapping.summary, line)?,
            memory_before: sentence_list(lookup(sv, &mapping.memory_before), mapping, &mapping.memory_before, line)?
                .unwrap_or_default(),
            memory_after: sentence_list(lookup(sv, &mapping.memory_after), mapping, &mapping.memory_after, line)?,
            gold_ops: Vec::new(),
        });
    }
    out.sort_by_key(|s| s.index);
    if mapping.derive_memory_after {
        for i in 0..out.len().saturating_sub(1) {
            if out[i].memory_after.is_none() {
                out[i].memory_after = Some(out[i + 1].memory_before.clone());
            }
        }
    }
    Ok(EpisodeRecord {
        episode_id,
        sessions: out,
    })
}

/// Maps already-parsed source records into validated canonical episodes.
pub fn import_values(values: &[Value], mapping: &FieldMapping) -> Result<Vec<EpisodeRecord>, DatasetError> {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let line = i + 1;
            let ep = map_episode(v, mapping, line)?;
            validate_episode(&ep, line)?;
            Ok(ep)
        })
        .collect()
}

pub fn import_str(src: &str, mapping: &FieldMapping) -> Result<Vec<EpisodeRecord>, DatasetError> {
    let values: Vec<Value> = match mapping.format {
        SourceFormat::Json => {
            let v: Value = serde_json::from_str(src).map_err(|e| DatasetError::Parse {
                line: e.line(),
                message: e.to_string(),
            })?;
            match v {
                Value::Array(items) => items,
                other => vec![other],
            }
        }
        SourceFormat::Jsonl => {
            let mut out = Vec::new();
            for (i, line) in src.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                out.push(serde_json::from_str(line).map_err(|e| DatasetError::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })?);
            }
            out
        }
    };
    import_values(&values, mapping)
}

pub fn import_episodes(path: impl AsRef<Path>, mapping: &FieldMapping) -> Result<Vec<EpisodeRecord>, DatasetError> {
    let path = path.as_ref();
    let src = fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    import_str(&src, mapping)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn remaps_foreign_layout() {
        let mapping = FieldMapping::from_toml(
            r#"
            format = "json"
            episode_id = "meta.id"
            sessions = "sessions"
            turns = "dialogue"
            speaker = "role"
            text = "utterance"
            memory_before = "memory"
            memory_after = "no_such_field"
            bot_speakers = ["system"]
            user_speakers = ["human"]
            "#,
        )
        .unwrap();
        let src = r#"[{"meta":{"id":7},"sessions":[
            {"dialogue":[{"role":"system","utterance":"hi"},{"role":"human","utterance":"hello"}],
             "summary":[{"text":"Says hello"}],"memory":[]},
            {"dialogue":["hi again","hey"],"summary":"Still here","memory":["Says hello"]}]}]"#;
        let eps = import_str(src, &mapping).unwrap();
        assert_eq!(eps[0].episode_id, "7");
        let s1 = &eps[0].sessions[0];
        assert_eq!(s1.index, 1);
        assert_eq!(s1.turns[1].speaker, Speaker::User);
        assert_eq!(s1.summary.as_deref(), Some(&["Says hello".to_string()][..]));
        // derived from session 2's memory
        assert_eq!(s1.memory_after.as_deref(), Some(&["Says hello".to_string()][..]));
        assert_eq!(eps[0].sessions[1].summary.as_ref().unwrap(), &vec!["Still here".to_string()]);
    }

    #[test]
    fn default_mapping_reads_canonical_jsonl() {
        let src = r#"{"episode_id":"a","sessions":[{"index":1,"turns":[{"speaker":"BOT","text":"x"}],"memory_before":[]}]}"#;
        let eps = import_str(src, &FieldMapping::default()).unwrap();
        assert_eq!(eps.len(), 1);
    }

    #[test]
    fn unknown_speaker_is_schema_violation() {
        let src = r#"{"episode_id":"a","sessions":[{"turns":[{"speaker":"narrator","text":"x"}]}]}"#;
        assert!(matches!(
            import_str(src, &FieldMapping::default()),
            Err(DatasetError::SchemaViolation { .. })
        ));
    }

    #[test]
    fn bad_mapping_key_rejected() {
        assert!(matches!(FieldMapping::from_toml("nope = 1"), Err(DatasetError::Mapping(_))));
    }
}
