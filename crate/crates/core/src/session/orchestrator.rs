use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, TryLockError};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::clients::{Generator, Summarizer};
use super::store::EpisodeStore;
use super::{apply_policy, Episode, EpisodeStatus, MemoryPolicy, Session, SessionError};
use crate::dataset::EpisodeRecord;
use crate::dialogue::{Speaker, Turn};
use crate::memory::{MemoryState, MemoryUpdateResult, SummaryBatch, UpdateOptions};
use crate::retrieval::{retrieve_top_k, Embedder, HashedNgramEmbedder, DEFAULT_K};
use crate::OperationClassifier;

#[derive(Debug, Clone, PartialEq)]
pub struct OrchestratorConfig {
    pub k: usize,
    pub seed: u64,
    pub update: UpdateOptions,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        OrchestratorConfig {
            k: DEFAULT_K,
            seed: 0,
            update: UpdateOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionClosure {
    pub session_index: u32,
    pub summary: SummaryBatch,
    pub memory_before: MemoryState,
    pub memory_after: MemoryState,
    /// Present for policies that run the pairwise update.
    pub update: Option<MemoryUpdateResult>,
}

pub struct Orchestrator {
    config: OrchestratorConfig,
    generator: Arc<dyn Generator>,
    summarizer: Arc<dyn Summarizer>,
    classifier: Arc<dyn OperationClassifier>,
    embedder: Arc<dyn Embedder>,
    gold: Option<EpisodeRecord>,
    store: Option<EpisodeStore>,
    rng: Mutex<ChaCha8Rng>,
    retrievals: AtomicUsize,
}

impl Orchestrator {
    pub fn new(
        generator: Arc<dyn Generator>,
        summarizer: Arc<dyn Summarizer>,
        classifier: Arc<dyn OperationClassifier>,
    ) -> Self {
        Orchestrator::with_config(generator, summarizer, classifier, OrchestratorConfig::default())
    }

    pub fn with_config(
        generator: Arc<dyn Generator>,
        summarizer: Arc<dyn Summarizer>,
        classifier: Arc<dyn OperationClassifier>,
        config: OrchestratorConfig,
    ) -> Self {
        Orchestrator {
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(config.seed)),
            config,
            generator,
            summarizer,
            classifier,
            embedder: Arc::new(HashedNgramEmbedder::default()),
            gold: None,
            store: None,
            retrievals: AtomicUsize::new(0),
        }
    }

    pub fn embedder(mut self, embedder: Arc<dyn Embedder>) -> Self {
        self.embedder = embedder;
        self
    }

    /// Gold episode whose snapshots back the MEMORY_GOLD policy.
    pub fn gold(mut self, gold: EpisodeRecord) -> Self {
        self.gold = Some(gold);
        self
    }

    pub fn store(mut self, store: EpisodeStore) -> Self {
        self.store = Some(store);
        self
    }

    pub fn config(&self) -> &OrchestratorConfig {
        &self.config
    }

    pub fn retrieval_calls(&self) -> usize {
        self.retrievals.load(Ordering::Relaxed)
    }

    pub fn start_episode(&self, policy: MemoryPolicy) -> Result<Episode, SessionError> {
        if policy == MemoryPolicy::MemoryGold && self.gold.is_none() {
            return Err(SessionError::Config("MEMORY_GOLD needs a gold episode".into()));
        }
        let id: u64 = self.rng.lock().unwrap().gen();
        let episode = Episode {
            episode_id: format!("ep-{id:016x}"),
            policy,
            status: EpisodeStatus::Open,
            sessions: vec![Session::open(1, 0, MemoryState::empty(1))],
        };
        if let Some(store) = &self.store {
            store.save_meta(&episode)?;
        }
        Ok(episode)
    }

    /// Memory sentences the next reply would be conditioned on.
    pub fn retrieved_memory(&self, episode: &Episode) -> Result<Vec<String>, SessionError> {
        let session = episode.current().ok_or(SessionError::EpisodeClosed)?;
        if episode.policy == MemoryPolicy::WithoutMemory {
            return Ok(Vec::new());
        }
        self.retrievals.fetch_add(1, Ordering::Relaxed);
        let r = retrieve_top_k(&session.turns, &session.memory_before, self.embedder.as_ref(), self.config.k)?;
        Ok(r.texts().into_iter().map(str::to_owned).collect())
    }

    /// Records the user turn and returns the bot reply. On generator failure
    /// the user turn stays recorded; call [`Orchestrator::retry_pending`].
    pub fn step_turn(&self, episode: &mut Episode, user_text: &str) -> Result<String, SessionError> {
        let session = episode.current_mut().ok_or(SessionError::EpisodeClosed)?;
        if session.has_pending_reply() {
            return Err(SessionError::PendingReply);
        }
        let index = session.turns.len();
        session.turns.push(Turn::new(Speaker::User, user_text, index));
        self.reply(episode)
    }

    pub fn retry_pending(&self, episode: &mut Episode) -> Result<String, SessionError> {
        let session = episode.current().ok_or(SessionError::EpisodeClosed)?;
        if !session.has_pending_reply() {
            return Err(SessionError::NothingPending);
        }
        self.reply(episode)
    }

    fn reply(&self, episode: &mut Episode) -> Result<String, SessionError> {
        let memory = self.retrieved_memory(episode)?;
        let session = episode.current_mut().ok_or(SessionError::EpisodeClosed)?;
        let text = self
            .generator
            .generate(&session.turns, &memory)
            .map_err(SessionError::GeneratorFailure)?;
        let index = session.turns.len();
        session.turns.push(Turn::new(Speaker::Bot, text.clone(), index));
        Ok(text)
    }

    fn gold_after(&self, episode: &Episode, index: u32) -> Result<Vec<String>, SessionError> {
        let missing = || SessionError::MissingGold {
            episode: episode.episode_id.clone(),
            session: index,
        };
        let gold = self.gold.as_ref().ok_or_else(missing)?;
        let pos = index as usize - 1;
        gold.sessions
            .get(pos)
            .and_then(|s| s.memory_after.clone())
            .or_else(|| gold.sessions.get(pos + 1).map(|s| s.memory_before.clone()))
            .ok_or_else(missing)
    }

    /// Summarizes the current session, updates memory under the episode's
    /// policy and opens the next session. Nothing changes unless every step,
    /// including persistence, succeeds.
    pub fn end_session(&self, episode: &mut Episode) -> Result<SessionClosure, SessionError> {
        let session = episode.current().ok_or(SessionError::EpisodeClosed)?;
        if session.turns.is_empty() {
            return Err(SessionError::NoTurns);
        }
        let index = session.session_index;
        let texts = self
            .summarizer
            .summarize(&session.turns)
            .map_err(SessionError::SummarizerFailure)?;
        let summary = SummaryBatch::from_texts(index, texts);
        let gold = match episode.policy {
            MemoryPolicy::MemoryGold => Some(self.gold_after(episode, index)?),
            _ => None,
        };
        let (after, update) = apply_policy(
            episode.policy,
            &session.memory_before,
            &summary,
            self.classifier.as_ref(),
            gold.as_deref(),
            &self.config.update,
        )?;

        let mut closed = session.clone();
        closed.summary = Some(summary.clone());
        closed.memory_after = Some(after.clone());
        let elapsed = self.rng.lock().unwrap().gen_range(7..=14);
        let next = Session::open(index + 1, elapsed, after.clone());
        if let Some(store) = &self.store {
            store.persist_close(episode, &closed, &next)?;
        }

        let memory_before = closed.memory_before.clone();
        *episode.sessions.last_mut().expect("current session") = closed;
        episode.sessions.push(next);
        Ok(SessionClosure {
            session_index: index,
            summary,
            memory_before,
            memory_after: after,
            update,
        })
    }

    /// Closes the episode. The open session is dropped if it has no turns;
    /// otherwise it is closed first.
    pub fn close_episode(&self, episode: &mut Episode) -> Result<(), SessionError> {
        if episode.status == EpisodeStatus::Closed {
            return Err(SessionError::EpisodeClosed);
        }
        if episode.current().is_some_and(|s| !s.turns.is_empty()) {
            self.end_session(episode)?;
        }
        let mut closed = episode.clone();
        if closed.current().is_some() {
            closed.sessions.pop();
        }
        closed.status = EpisodeStatus::Closed;
        if let Some(store) = &self.store {
            store.save_meta(&closed)?;
        }
        *episode = closed;
        Ok(())
    }

    /// Persists the open session's transcript so far.
    pub fn save(&self, episode: &Episode) -> Result<(), SessionError> {
        match &self.store {
            Some(store) => store.save_open(episode),
            None => Ok(()),
        }
    }
}

/// An episode shared between threads; concurrent use is rejected rather than
/// queued.
#[derive(Clone)]
pub struct SharedEpisode {
    inner: Arc<Mutex<Episode>>,
}

impl SharedEpisode {
    pub fn new(episode: Episode) -> Self {
        SharedEpisode {
            inner: Arc::new(Mutex::new(episode)),
        }
    }

    pub fn with<R>(&self, f: impl FnOnce(&mut Episode) -> Result<R, SessionError>) -> Result<R, SessionError> {
        let mut guard = match self.inner.try_lock() {
            Ok(g) => g,
            Err(TryLockError::WouldBlock) => return Err(SessionError::Busy),
            Err(TryLockError::Poisoned(p)) => p.into_inner(),
        };
        f(&mut guard)
    }

    pub fn step_turn(&self, orchestrator: &Orchestrator, user_text: &str) -> Result<String, SessionError> {
        self.with(|ep| orchestrator.step_turn(ep, user_text))
    }

    pub fn snapshot(&self) -> Episode {
        match self.inner.lock() {
            Ok(g) => g.clone(),
            Err(p) => p.into_inner().clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{Constant, Counting, LexicalHeuristic};
    use crate::http::HttpError;
    use crate::memory::MemOp;
    use crate::session::clients::{EchoGenerator, UserUtteranceSummarizer};

    fn orch(policy_classifier: Arc<dyn OperationClassifier>) -> (Orchestrator, Arc<EchoGenerator>) {
        let generator = Arc::new(EchoGenerator::default());
        let o = Orchestrator::new(generator.clone(), Arc::new(UserUtteranceSummarizer), policy_classifier);
        (o, generator)
    }

    fn texts(m: &MemoryState) -> Vec<&str> {
        m.texts().collect()
    }

    #[test]
    fn episodes_start_empty_with_distinct_ids() {
        let (o, _) = orch(Arc::new(LexicalHeuristic::default()));
        let a = o.start_episode(MemoryPolicy::MemoryUpdate).unwrap();
        let b = o.start_episode(MemoryPolicy::MemoryUpdate).unwrap();
        assert_ne!(a.episode_id, b.episode_id);
        assert!(a.sessions[0].memory_before.is_empty());
        assert!(matches!(o.start_episode(MemoryPolicy::MemoryGold), Err(SessionError::Config(_))));
    }

    #[test]
    fn echo_turn_grows_transcript() {
        let (o, _) = orch(Arc::new(LexicalHeuristic::default()));
        let mut ep = o.start_episode(MemoryPolicy::MemoryUpdate).unwrap();
        assert_eq!(o.step_turn(&mut ep, "I have a cold").unwrap(), "I have a cold");
        assert_eq!(ep.sessions[0].turns.len(), 2);
    }

    #[test]
    fn session_one_memory_is_summary() {
        let (o, _) = orch(Arc::new(LexicalHeuristic::default()));
        let mut ep = o.start_episode(MemoryPolicy::MemoryUpdate).unwrap();
        o.step_turn(&mut ep, "Has a cold").unwrap();
        o.step_turn(&mut ep, "Goes to the gym").unwrap();
        let c = o.end_session(&mut ep).unwrap();
        assert_eq!(texts(&c.memory_after), ["Has a cold", "Goes to the gym"]);
        assert_eq!(ep.sessions[1].memory_before, c.memory_after.clone().with_session_index(2));
        assert_eq!(ep.current().unwrap().session_index, 2);
    }

    #[test]
    fn request_memory_respects_k_and_policy() {
        let (o, g) = orch(Arc::new(Constant(MemOp::Append)));
        let mut ep = o.start_episode(MemoryPolicy::MemoryUpdate).unwrap();
        for t in ["a cold", "a dog", "a cat"] {
            o.step_turn(&mut ep, t).unwrap();
        }
        o.end_session(&mut ep).unwrap();
        o.step_turn(&mut ep, "hello").unwrap();
        assert_eq!(g.last_memory().unwrap().len(), 3);

        let classifier = Arc::new(Counting::new(Constant(MemOp::Append)));
        let (o, g) = orch(classifier.clone());
        let mut ep = o.start_episode(MemoryPolicy::WithoutMemory).unwrap();
        o.step_turn(&mut ep, "a cold").unwrap();
        o.end_session(&mut ep).unwrap();
        o.step_turn(&mut ep, "hello").unwrap();
        assert_eq!(g.last_memory().unwrap().len(), 0);
        assert!(ep.sessions[0].memory_after.as_ref().unwrap().is_empty());
        assert_eq!(o.retrieval_calls(), 0);
        assert_eq!(classifier.calls(), 0);
    }

    struct Flaky(Mutex<bool>);

    impl Generator for Flaky {
        fn generate(&self, _: &[Turn], _: &[String]) -> Result<String, HttpError> {
            let mut fail = self.0.lock().unwrap();
            if *fail {
                *fail = false;
                Err(HttpError::Timeout { endpoint: "gen".into() })
            } else {
                Ok("ok".into())
            }
        }
    }

    #[test]
    fn generator_failure_is_retriable() {
        let o = Orchestrator::new(
            Arc::new(Flaky(Mutex::new(true))),
            Arc::new(UserUtteranceSummarizer),
            Arc::new(LexicalHeuristic::default()),
        );
        let mut ep = o.start_episode(MemoryPolicy::MemoryUpdate).unwrap();
        assert!(matches!(o.step_turn(&mut ep, "hi"), Err(SessionError::GeneratorFailure(_))));
        assert_eq!(ep.sessions[0].turns.len(), 1);
        assert!(matches!(o.step_turn(&mut ep, "again"), Err(SessionError::PendingReply)));
        assert_eq!(o.retry_pending(&mut ep).unwrap(), "ok");
        assert_eq!(ep.sessions[0].turns.len(), 2);
    }

    struct FailingSummarizer;

    impl Summarizer for FailingSummarizer {
        fn summarize(&self, _: &[Turn]) -> Result<Vec<String>, HttpError> {
            Err(HttpError::Transport {
                endpoint: "sum".into(),
                message: "down".into(),
            })
        }
    }

    #[test]
    fn failed_close_leaves_session_open() {
        let o = Orchestrator::new(
            Arc::new(EchoGenerator::default()),
            Arc::new(FailingSummarizer),
            Arc::new(LexicalHeuristic::default()),
        );
        let mut ep = o.start_episode(MemoryPolicy::MemoryUpdate).unwrap();
        o.step_turn(&mut ep, "hi").unwrap();
        let before = ep.clone();
        assert!(matches!(o.end_session(&mut ep), Err(SessionError::SummarizerFailure(_))));
        assert_eq!(ep, before);
    }

    #[test]
    fn empty_session_cannot_close() {
        let (o, _) = orch(Arc::new(LexicalHeuristic::default()));
        let mut ep = o.start_episode(MemoryPolicy::MemoryUpdate).unwrap();
        assert!(matches!(o.end_session(&mut ep), Err(SessionError::NoTurns)));
    }

    #[test]
    fn busy_episode_rejects_second_writer() {
        let (o, _) = orch(Arc::new(LexicalHeuristic::default()));
        let shared = SharedEpisode::new(o.start_episode(MemoryPolicy::MemoryUpdate).unwrap());
        let r = shared.with(|_| shared.step_turn(&o, "hi"));
        assert!(matches!(r, Err(SessionError::Busy)));
        assert!(shared.step_turn(&o, "hi").is_ok());
    }

    #[test]
    fn gold_policy_uses_snapshots() {
        use crate::dataset::{synth_drift, DriftScript, FactLifecycle};
        let gold = synth_drift(
            &DriftScript {
                facts: vec![FactLifecycle::introduce(1, "Has a dog"), FactLifecycle::introduce(2, "Has a cat")],
                seed: 1,
            },
            3,
            "g",
        )
        .unwrap();
        let (o, _) = orch(Arc::new(LexicalHeuristic::default()));
        let o = o.gold(gold);
        let mut ep = o.start_episode(MemoryPolicy::MemoryGold).unwrap();
        o.step_turn(&mut ep, "whatever").unwrap();
        let c = o.end_session(&mut ep).unwrap();
        assert_eq!(texts(&c.memory_after), ["Has a dog"]);
        o.step_turn(&mut ep, "more").unwrap();
        let c = o.end_session(&mut ep).unwrap();
        assert_eq!(texts(&c.memory_after), ["Has a dog", "Has a cat"]);
    }
}
