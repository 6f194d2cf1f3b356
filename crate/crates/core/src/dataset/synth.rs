//! Synthetic fact-drift episodes with gold operation labels.
//!
//! A [`DriftScript`] lists fact lifecycles: a fact is introduced, may later
//! change (REPLACE), and may later resolve (DELETE when it no longer needs
//! remembering, PASS when the session merely restates it). Gold memory
//! snapshots are computed with [`update_memory_oracle`], so every generated
//! episode is internally consistent.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::episodes::{EpisodeRecord, GoldOpRecord, SessionRecord, TurnRecord};
use super::DatasetError;
use crate::dialogue::Speaker;
use crate::memory::{update_memory_oracle, MemOp, MemoryState, Origin, SentenceId, SummaryBatch};
use crate::text::normalize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ResolveOp {
    Delete,
    Pass,
}

impl From<ResolveOp> for MemOp {
    fn from(op: ResolveOp) -> Self {
        match op {
            ResolveOp::Delete => MemOp::Delete,
            ResolveOp::Pass => MemOp::Pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mutation {
    pub session: u32,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub session: u32,
    pub text: String,
    pub op: ResolveOp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactLifecycle {
    pub introduce_session: u32,
    pub text_v1: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutate: Option<Mutation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolve: Option<Resolution>,
}

impl FactLifecycle {
    pub fn introduce(session: u32, text: impl Into<String>) -> Self {
        FactLifecycle {
            introduce_session: session,
            text_v1: text.into(),
            mutate: None,
            resolve: None,
        }
    }

    pub fn mutated(mut self, session: u32, text: impl Into<String>) -> Self {
        self.mutate = Some(Mutation {
            session,
            text: text.into(),
        });
        self
    }

    pub fn resolved(mut self, session: u32, text: impl Into<String>, op: ResolveOp) -> Self {
        self.resolve = Some(Resolution {
            session,
            text: text.into(),
            op,
        });
        self
    }

    fn last_session(&self) -> u32 {
        self.resolve
            .as_ref()
            .map(|r| r.session)
            .or(self.mutate.as_ref().map(|m| m.session))
            .unwrap_or(self.introduce_session)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DriftScript {
    pub facts: Vec<FactLifecycle>,
    pub seed: u64,
}

impl DriftScript {
    pub fn validate(&self, sessions: u32) -> Result<(), DatasetError> {
        let mut texts: HashMap<String, usize> = HashMap::new();
        for (i, f) in self.facts.iter().enumerate() {
            let invalid = |msg: String| DatasetError::InvalidScript(format!("fact {i}: {msg}"));
            if f.introduce_session == 0 {
                return Err(invalid("sessions are numbered from 1".into()));
            }
            if let Some(m) = &f.mutate {
                if m.session <= f.introduce_session {
                    return Err(invalid("mutation must come after introduction".into()));
                }
            }
            if let Some(r) = &f.resolve {
                let after = f.mutate.as_ref().map_or(f.introduce_session, |m| m.session);
                if r.session <= after {
                    return Err(invalid("resolution must come after the last change".into()));
                }
            }
            if f.last_session() > sessions {
                return Err(DatasetError::ScriptOverflow {
                    fact: i,
                    session: f.last_session(),
                    sessions,
                });
            }
            let all = std::iter::once(&f.text_v1)
                .chain(f.mutate.as_ref().map(|m| &m.text))
                .chain(f.resolve.as_ref().map(|r| &r.text));
            for t in all {
                let t = normalize(t);
                if t.is_empty() {
                    return Err(invalid("empty text".into()));
                }
                if let Some(j) = texts.insert(t.clone(), i) {
                    return Err(invalid(format!("text {t:?} reused (also in fact {j})")));
                }
            }
        }
        Ok(())
    }
}

/// One session-level event of a fact.
struct Event<'a> {
    fact: usize,
    text: &'a str,
    /// Operation against the fact's current memory sentence, if any.
    op: Option<MemOp>,
}

const BOT_OPENERS: &[&str] = &[
    "Hello, this is your care call. How have you been?",
    "Hi there! How are you doing these days?",
    "Good morning. Did anything happen since we last talked?",
    "Hello again. How is your week going?",
];
const BOT_FOLLOWUPS: &[&str] = &[
    "I see. Thank you for telling me.",
    "Oh, I understand. Anything else?",
    "That is good to know.",
    "Thanks for sharing that with me.",
];
const USER_SMALLTALK: &[&str] = &[
    "Nothing special, just the usual.",
    "I have been staying home mostly.",
    "The weather has been nice lately.",
];
const BOT_CLOSERS: &[&str] = &["Take care, talk to you next time.", "Have a good day, goodbye."];

fn pick<'a>(rng: &mut ChaCha8Rng, items: &[&'a str]) -> &'a str {
    items.choose(rng).copied().unwrap_or("")
}

/// Generates an episode of `sessions` sessions from `script`.
pub fn synth_drift(script: &DriftScript, sessions: u32, episode_id: &str) -> Result<EpisodeRecord, DatasetError> {
    script.validate(sessions)?;
    let mut rng = ChaCha8Rng::seed_from_u64(script.seed);
    // current memory text per live fact
    let mut current: HashMap<usize, String> = HashMap::new();
    let mut memory: Vec<(usize, String)> = Vec::new();
    let mut records = Vec::with_capacity(sessions as usize);

    for index in 1..=sessions {
        let mut events: Vec<Event> = Vec::new();
        for (i, f) in script.facts.iter().enumerate() {
            if f.introduce_session == index {
                events.push(Event {
                    fact: i,
                    text: &f.text_v1,
                    op: None,
                });
            }
            if let Some(m) = f.mutate.as_ref().filter(|m| m.session == index) {
                events.push(Event {
                    fact: i,
                    text: &m.text,
                    op: Some(MemOp::Replace),
                });
            }
            if let Some(r) = f.resolve.as_ref().filter(|r| r.session == index) {
                events.push(Event {
                    fact: i,
                    text: &r.text,
                    op: Some(r.op.into()),
                });
            }
        }

        let before = MemoryState::from_texts(index, Origin::FromMemory, "m", memory.iter().map(|(_, t)| t));
        let summary = SummaryBatch::from_texts(index, events.iter().map(|e| e.text));

        let mut gold_ops = Vec::new();
        let mut table = HashMap::new();
        for (mi, (m_fact, m_text)) in memory.iter().enumerate() {
            for (si, e) in events.iter().enumerate() {
                let op = match e.op {
                    Some(op) if e.fact == *m_fact => op,
                    _ => MemOp::Append,
                };
                table.insert(
                    (before.sentences()[mi].id().clone(), summary.sentences()[si].id().clone()),
                    op,
                );
                gold_ops.push(GoldOpRecord {
                    m: m_text.clone(),
                    s: e.text.to_owned(),
                    op,
                });
            }
        }
        let after = update_memory_oracle(&before, &summary, &table)
            .map_err(|e| DatasetError::InvalidScript(e.to_string()))?;

        // carry fact ownership through to the next session
        let owner: HashMap<SentenceId, usize> = before
            .iter()
            .zip(memory.iter())
            .map(|(s, (f, _))| (s.id().clone(), *f))
            .chain(summary.iter().zip(events.iter()).map(|(s, e)| (s.id().clone(), e.fact)))
            .collect();
        memory = after
            .iter()
            .map(|s| (owner[s.id()], s.text().to_owned()))
            .collect();
        current.clear();
        current.extend(memory.iter().cloned());

        let mut turns = vec![TurnRecord {
            speaker: Speaker::Bot,
            text: pick(&mut rng, BOT_OPENERS).to_owned(),
        }];
        if events.is_empty() {
            turns.push(TurnRecord {
                speaker: Speaker::User,
                text: pick(&mut rng, USER_SMALLTALK).to_owned(),
            });
        }
        for (n, e) in events.iter().enumerate() {
            if n > 0 {
                turns.push(TurnRecord {
                    speaker: Speaker::Bot,
                    text: pick(&mut rng, BOT_FOLLOWUPS).to_owned(),
                });
            }
            turns.push(TurnRecord {
                speaker: Speaker::User,
                text: format!("Well, {}.", lower_first(e.text)),
            });
        }
        turns.push(TurnRecord {
            speaker: Speaker::Bot,
            text: pick(&mut rng, BOT_CLOSERS).to_owned(),
        });

        records.push(SessionRecord {
            index,
            elapsed_days: if index == 1 { 0 } else { rng.gen_range(7..=14) },
            turns,
            summary: Some(summary.texts().map(str::to_owned).collect()),
            memory_before: before.texts().map(str::to_owned).collect(),
            memory_after: Some(after.texts().map(str::to_owned).collect()),
            gold_ops,
        });
    }

    Ok(EpisodeRecord {
        episode_id: episode_id.to_owned(),
        sessions: records,
    })
}

fn lower_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Facts as (initial, changed, restated, resolved) texts.
const TOPICS: &[(&str, &str, &str, &str)] = &[
    ("Has a sore throat", "Sore throat turned into a fever", "Still feels the sore throat a bit", "Throat is fully recovered"),
    ("Couldn't sleep well", "Sleeping well after taking sleeping tablets", "Sleep is still a little restless", "Sleep problems are completely gone"),
    ("Has a migraine", "Takes pain relievers for a migraine", "Head still aches sometimes", "Migraine is gone"),
    ("Living alone", "Being with daughter for a while", "Mostly stays home alone", "Daughter moved back out"),
    ("Has a grandson in elementary school", "Grandson enters middle school", "Grandson studies hard", "Grandson graduated and moved away"),
    ("Goes to the gym", "Switched from the gym to swimming", "Exercises regularly", "Stopped exercising for now"),
    ("Has a cold and takes medicine", "Cold got worse and visited a clinic", "Cold lingers a little", "Cold is all better now"),
    ("Lost appetite", "Appetite came back after new medicine", "Eats small meals", "Eating normally again"),
    ("Hurt the knee while walking", "Knee needs physiotherapy", "Knee is a bit stiff", "Knee has healed"),
    ("Waiting for a COVID test", "Tested positive for COVID", "Is staying in quarantine", "Recovered from COVID"),
    ("Planning a trip to the sea", "Trip moved to the mountains", "Looking forward to the trip", "Came back from the trip"),
    ("Son is looking for a job", "Son got a job at a bank", "Son works long hours", "Son's job worries are over"),
    ("Has back pain", "Had back surgery", "Back still feels weak", "Back pain disappeared"),
    ("Gardening as a hobby", "Started growing tomatoes in the garden", "Spends mornings in the garden", "Gave up gardening"),
    ("Has a dog", "Adopted a second dog", "Walks the dog every day", "Dog passed away"),
    ("Blood pressure is high", "Started blood pressure medication", "Checks blood pressure daily", "Blood pressure is normal now"),
    ("Feeling lonely lately", "Joined a seniors club", "Talks with friends at the club", "No longer feels lonely"),
    ("Teeth hurt when chewing", "Got a dental implant", "Chews carefully", "Tooth pain is resolved"),
    ("Going to the hospital for a checkup", "Checkup found high cholesterol", "Watches diet for cholesterol", "Checkup results are fine"),
    ("Drinks coffee every morning", "Switched to green tea", "Enjoys a warm drink in the morning", "Quit caffeine"),
    ("Daughter is pregnant", "Became a grandmother", "Visits the new baby often", "Baby started kindergarten"),
    ("Eyes are tired", "Got new reading glasses", "Reads with glasses", "Eye strain went away"),
    ("Worried about the electricity bill", "Bill was paid with help from the office", "Keeps the heating low", "Bill worries are over"),
    ("Has trouble walking up stairs", "Moved to a ground floor apartment", "Takes the elevator", "Walks stairs easily again"),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomScriptConfig {
    pub facts: usize,
    pub sessions: u32,
    pub p_mutate: f64,
    pub p_resolve: f64,
    /// Probability that a resolution is DELETE rather than PASS.
    pub p_delete: f64,
}

impl Default for RandomScriptConfig {
    fn default() -> Self {
        RandomScriptConfig {
            facts: 6,
            sessions: 5,
            p_mutate: 0.5,
            p_resolve: 0.4,
            p_delete: 0.7,
        }
    }
}

/// A random drift script drawing distinct topics from a built-in pool.
pub fn random_script(seed: u64, config: &RandomScriptConfig) -> DriftScript {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut topics: Vec<usize> = (0..TOPICS.len()).collect();
    topics.shuffle(&mut rng);
    let sessions = config.sessions.max(1);
    let facts = topics
        .into_iter()
        .take(config.facts.min(TOPICS.len()))
        .map(|t| {
            let (v1, v2, restate, resolved) = TOPICS[t];
            let intro = rng.gen_range(1..=sessions);
            let mut fact = FactLifecycle::introduce(intro, v1);
            let mut last = intro;
            if last < sessions && rng.gen_bool(config.p_mutate) {
                last = rng.gen_range(last + 1..=sessions);
                fact = fact.mutated(last, v2);
            }
            if last < sessions && rng.gen_bool(config.p_resolve) {
                let at = rng.gen_range(last + 1..=sessions);
                fact = if rng.gen_bool(config.p_delete) {
                    fact.resolved(at, resolved, ResolveOp::Delete)
                } else {
                    fact.resolved(at, restate, ResolveOp::Pass)
                };
            }
            fact
        })
        .collect();
    DriftScript { facts, seed }
}

/// `episodes` random drift episodes; episode `i` uses seed `seed + i`.
pub fn synth_corpus(seed: u64, episodes: usize, config: &RandomScriptConfig) -> Result<Vec<EpisodeRecord>, DatasetError> {
    (0..episodes)
        .map(|i| {
            let s = seed.wrapping_add(i as u64);
            synth_drift(&random_script(s, config), config.sessions, &format!("synth-{seed}-{i:04}"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::episodes::validate_episode;

    #[test]
    fn sore_throat_deleted() {
        let script = DriftScript {
            facts: vec![FactLifecycle::introduce(1, "has sore throat").resolved(3, "throat recovered", ResolveOp::Delete)],
            seed: 1,
        };
        let ep = synth_drift(&script, 3, "t").unwrap();
        let after3 = ep.sessions[2].memory_after.as_ref().unwrap();
        assert!(after3.is_empty());
        assert_eq!(ep.sessions[1].memory_after.as_ref().unwrap(), &vec!["has sore throat".to_string()]);
        assert_eq!(ep.sessions[2].gold_ops[0].op, MemOp::Delete);
        validate_episode(&ep, 0).unwrap();
    }

    #[test]
    fn introductions_only_append() {
        let script = DriftScript {
            facts: vec![
                FactLifecycle::introduce(1, "a"),
                FactLifecycle::introduce(2, "b"),
                FactLifecycle::introduce(2, "c"),
                FactLifecycle::introduce(3, "d"),
            ],
            seed: 5,
        };
        let ep = synth_drift(&script, 3, "t").unwrap();
        let sizes: Vec<usize> = ep.sessions.iter().map(|s| s.memory_after.as_ref().unwrap().len()).collect();
        assert_eq!(sizes, vec![1, 3, 4]);
        assert!(ep.sessions.iter().flat_map(|s| &s.gold_ops).all(|g| g.op == MemOp::Append));
    }

    #[test]
    fn replace_then_pass() {
        let script = DriftScript {
            facts: vec![FactLifecycle::introduce(1, "v1")
                .mutated(2, "v2")
                .resolved(3, "restated", ResolveOp::Pass)],
            seed: 0,
        };
        let ep = synth_drift(&script, 3, "t").unwrap();
        assert_eq!(ep.sessions[1].memory_after.as_ref().unwrap(), &vec!["v2".to_string()]);
        assert_eq!(ep.sessions[2].memory_after.as_ref().unwrap(), &vec!["v2".to_string()]);
    }

    #[test]
    fn overflow_and_ordering_errors() {
        let over = DriftScript {
            facts: vec![FactLifecycle::introduce(4, "late")],
            seed: 0,
        };
        assert!(matches!(synth_drift(&over, 3, "t"), Err(DatasetError::ScriptOverflow { .. })));
        let bad = DriftScript {
            facts: vec![FactLifecycle::introduce(2, "x").mutated(2, "y")],
            seed: 0,
        };
        assert!(matches!(synth_drift(&bad, 3, "t"), Err(DatasetError::InvalidScript(_))));
    }

    #[test]
    fn deterministic_under_seed() {
        let cfg = RandomScriptConfig::default();
        let a = synth_corpus(7, 5, &cfg).unwrap();
        let b = synth_corpus(7, 5, &cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c = synth_corpus(8, 5, &cfg).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn random_corpus_validates() {
        for ep in synth_corpus(3, 30, &RandomScriptConfig::default()).unwrap() {
            validate_episode(&ep, 0).unwrap();
        }
    }
}
