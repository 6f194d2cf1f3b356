//! Offline replay of gold episodes: gold summaries are fed through a
//! policy's update path and the predicted memory is scored against the gold
//! snapshots of sessions 2..n.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{apply_policy, MemoryPolicy, SessionError};
use crate::classify::{Concurrency, Counting};
use crate::dataset::EpisodeRecord;
use crate::memory::{MemoryState, Origin, UpdateOptions};
use crate::metrics::{set_f1_texts, SetF1Report};
use crate::OperationClassifier;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplayMode {
    /// Each update starts from the previous prediction.
    #[default]
    Chained,
    /// Each update starts from the gold memory of that session.
    GoldInput,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionReplay {
    /// The session whose `memory_before` was predicted.
    pub session_index: u32,
    pub predicted: Vec<String>,
    pub gold: Vec<String>,
    pub f1: SetF1Report,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayReport {
    pub episode_id: String,
    pub sessions: Vec<SessionReplay>,
    pub classifier_calls: usize,
}

impl ReplayReport {
    pub fn mean_f1(&self) -> f64 {
        mean(self.sessions.iter().map(|s| s.f1.f1))
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn replay_episode(
    gold: &EpisodeRecord,
    policy: MemoryPolicy,
    classifier: &dyn OperationClassifier,
    mode: ReplayMode,
) -> Result<ReplayReport, SessionError> {
    let counting = Counting::new(classifier);
    let options = UpdateOptions::default();
    let mut sessions = Vec::new();
    let mut predicted: Option<MemoryState> = None;
    for pair in gold.sessions.windows(2) {
        let (cur, next) = (&pair[0], &pair[1]);
        let summary = cur.summary_batch().ok_or_else(|| SessionError::MissingGold {
            episode: gold.episode_id.clone(),
            session: cur.index,
        })?;
        let input = match (mode, predicted.take()) {
            (ReplayMode::Chained, Some(p)) => p.with_session_index(cur.index),
            _ => cur.memory_before_state(),
        };
        let (after, _) = apply_policy(policy, &input, &summary, &counting, Some(&next.memory_before), &options)?;
        let texts: Vec<String> = after.texts().map(str::to_owned).collect();
        sessions.push(SessionReplay {
            session_index: next.index,
            f1: set_f1_texts(&texts, &next.memory_before),
            predicted: texts,
            gold: next.memory_before.clone(),
        });
        predicted = Some(after);
    }
    Ok(ReplayReport {
        episode_id: gold.episode_id.clone(),
        sessions,
        classifier_calls: counting.calls(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionF1 {
    pub n: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusReplay {
    pub policy: MemoryPolicy,
    pub episodes: Vec<ReplayReport>,
    /// Mean scores keyed by predicted session index.
    pub by_session: BTreeMap<u32, SessionF1>,
    /// Mean F1 over every predicted snapshot.
    pub mean_f1: f64,
    pub classifier_calls: usize,
}

impl CorpusReplay {
    pub fn session_f1(&self, index: u32) -> Option<f64> {
        self.by_session.get(&index).map(|s| s.f1)
    }

    pub fn render(&self) -> String {
        let mut out = format!("policy {}\n{:>8} {:>6} {:>9} {:>9} {:>9}\n", self.policy, "session", "n", "precision", "recall", "f1");
        for (i, s) in &self.by_session {
            out.push_str(&format!("{i:>8} {:>6} {:>9.4} {:>9.4} {:>9.4}\n", s.n, s.precision, s.recall, s.f1));
        }
        out.push_str(&format!("{:>8} {:>6} {:>9} {:>9} {:>9.4}\n", "all", self.episodes.iter().map(|e| e.sessions.len()).sum::<usize>(), "", "", self.mean_f1));
        out
    }
}

pub type ClassifierFactory<'a> =
    dyn Fn(&EpisodeRecord) -> Result<Box<dyn OperationClassifier>, SessionError> + Sync + 'a;

/// Replays every episode with a classifier built per episode. Episodes run on
/// up to `workers` threads; results keep corpus order.
pub fn replay_corpus(
    episodes: &[EpisodeRecord],
    policy: MemoryPolicy,
    factory: &ClassifierFactory<'_>,
    mode: ReplayMode,
    workers: usize,
) -> Result<CorpusReplay, SessionError> {
    let mut workers = workers.clamp(1, episodes.len().max(1));
    if let Some(first) = episodes.first() {
        if factory(first)?.concurrency() == Concurrency::SingleUse {
            workers = 1;
        }
    }
    let results: Mutex<Vec<Option<Result<ReplayReport, SessionError>>>> =
        Mutex::new((0..episodes.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let run = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some(ep) = episodes.get(i) else { break };
        let r = factory(ep).and_then(|c| replay_episode(ep, policy, c.as_ref(), mode));
        results.lock().unwrap()[i] = Some(r);
    };
    if workers == 1 {
        run();
    } else {
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(run);
            }
        });
    }
    let reports = results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every episode replayed"))
        .collect::<Result<Vec<_>, _>>()?;

    let mut groups: BTreeMap<u32, Vec<&SetF1Report>> = BTreeMap::new();
    for r in &reports {
        for s in &r.sessions {
            groups.entry(s.session_index).or_default().push(&s.f1);
        }
    }
    let by_session = groups
        .into_iter()
        .map(|(i, g)| {
            (
                i,
                SessionF1 {
                    n: g.len(),
                    precision: mean(g.iter().map(|r| r.precision)),
                    recall: mean(g.iter().map(|r| r.recall)),
                    f1: mean(g.iter().map(|r| r.f1)),
                },
            )
        })
        .collect();
    Ok(CorpusReplay {
        policy,
        mean_f1: mean(reports.iter().flat_map(|r| r.sessions.iter().map(|s| s.f1.f1))),
        classifier_calls: reports.iter().map(|r| r.classifier_calls).sum(),
        by_session,
        episodes: reports,
    })
}

/// Gold memory of a session as a state, for callers comparing by hand.
pub fn gold_memory(gold: &EpisodeRecord, session_index: u32) -> Option<MemoryState> {
    gold.sessions
        .iter()
        .find(|s| s.index == session_index)
        .map(|s| MemoryState::from_texts(session_index, Origin::FromMemory, "g", &s.memory_before))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_corpus, synth_drift, DriftScript, FactLifecycle, RandomScriptConfig, ResolveOp};
    use crate::memory::MemOp;

    fn drift() -> EpisodeRecord {
        let script = DriftScript {
            facts: vec![
                FactLifecycle::introduce(1, "Has a cold").resolved(3, "Cold is all better", ResolveOp::Delete),
                FactLifecycle::introduce(1, "Has a grandson in elementary school")
                    .mutated(2, "Grandson enters middle school"),
                FactLifecycle::introduce(4, "Likes fishing"),
            ],
            seed: 3,
        };
        synth_drift(&script, 5, "drift").unwrap()
    }

    #[test]
    fn gold_table_replay_is_perfect() {
        let ep = drift();
        let table = ep.gold_table().unwrap();
        let r = replay_episode(&ep, MemoryPolicy::MemoryUpdate, &table, ReplayMode::Chained).unwrap();
        assert_eq!(r.sessions.len(), 4);
        assert_eq!(r.sessions[0].session_index, 2);
        assert!(r.sessions.iter().all(|s| s.f1.f1 == 1.0));
    }

    #[test]
    fn accumulate_overshoots_gold() {
        let ep = drift();
        let table = ep.gold_table().unwrap();
        let r = replay_episode(&ep, MemoryPolicy::MemoryAccumulate, &table, ReplayMode::Chained).unwrap();
        let s3 = &r.sessions[1];
        assert!(s3.predicted.len() > s3.gold.len());
        assert!(s3.gold.iter().all(|g| s3.predicted.contains(g)));
        assert_eq!(r.classifier_calls, 0);
    }

    #[test]
    fn gold_and_without_memory_policies() {
        let ep = drift();
        let c = crate::classify::Constant(MemOp::Append);
        let gold = replay_episode(&ep, MemoryPolicy::MemoryGold, &c, ReplayMode::Chained).unwrap();
        assert_eq!(gold.mean_f1(), 1.0);
        let none = replay_episode(&ep, MemoryPolicy::WithoutMemory, &c, ReplayMode::Chained).unwrap();
        assert!(none.sessions.iter().all(|s| s.predicted.is_empty()));
    }

    #[test]
    fn missing_summary_is_missing_gold() {
        let mut ep = drift();
        ep.sessions[1].summary = None;
        let c = crate::classify::Constant(MemOp::Append);
        assert!(matches!(
            replay_episode(&ep, MemoryPolicy::MemoryUpdate, &c, ReplayMode::Chained),
            Err(SessionError::MissingGold { session: 2, .. })
        ));
    }

    #[test]
    fn corpus_parallel_matches_serial() {
        let eps = synth_corpus(11, 12, &RandomScriptConfig::default()).unwrap();
        let factory = |ep: &EpisodeRecord| -> Result<Box<dyn OperationClassifier>, SessionError> {
            Ok(Box::new(ep.gold_table().map_err(|e| SessionError::Config(e.to_string()))?))
        };
        let a = replay_corpus(&eps, MemoryPolicy::MemoryUpdate, &factory, ReplayMode::Chained, 1).unwrap();
        let b = replay_corpus(&eps, MemoryPolicy::MemoryUpdate, &factory, ReplayMode::Chained, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.mean_f1, 1.0);
    }
}
