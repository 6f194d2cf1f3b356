//! Interactive episode loop for manual testing.

use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::sync::Arc;

use memkeeper::dataset::EpisodeRecord;
use memkeeper::session::{
    EchoGenerator, EpisodeStore, Generator, HttpGenerator, HttpSummarizer, Orchestrator, OrchestratorConfig,
    Summarizer, UserUtteranceSummarizer,
};
use memkeeper::Episode;

use super::data::load_corpus;
use super::memory::render_diff;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

const HELP: &str = "commands: :mem (retrieved memory), :end (close session), :retry (re-ask the generator), :quit (save and exit), :close (close episode and exit), :help";

pub struct SessionArgs {
    pub store: PathBuf,
    pub resume: Option<String>,
    pub gold: Option<PathBuf>,
    pub gold_episode: Option<String>,
}

fn gold_episode(path: &PathBuf, id: Option<&str>) -> CliResult<EpisodeRecord> {
    let corpus = load_corpus(path, None)?;
    match id {
        Some(id) => corpus
            .into_iter()
            .find(|e| e.episode_id == id)
            .ok_or_else(|| CliError::input(format!("no episode {id:?} in {}", path.display()))),
        None => corpus
            .into_iter()
            .next()
            .ok_or_else(|| CliError::input(format!("{} is empty", path.display()))),
    }
}

pub fn build_orchestrator(cfg: &RunConfig, args: &SessionArgs) -> CliResult<Orchestrator> {
    let generator: Arc<dyn Generator> = match &cfg.generator_url {
        Some(url) => Arc::new(HttpGenerator::new(cfg.endpoint(url))),
        None => Arc::new(EchoGenerator::new("")),
    };
    let summarizer: Arc<dyn Summarizer> = match &cfg.summarizer_url {
        Some(url) => Arc::new(HttpSummarizer::new(cfg.endpoint(url))),
        None => Arc::new(UserUtteranceSummarizer),
    };
    let config = OrchestratorConfig {
        k: cfg.k,
        seed: cfg.seed,
        ..Default::default()
    };
    let mut o = Orchestrator::with_config(generator, summarizer, cfg.classifier()?, config)
        .store(EpisodeStore::new(&args.store));
    if let Some(path) = &args.gold {
        o = o.gold(gold_episode(path, args.gold_episode.as_deref())?);
    }
    Ok(o)
}

fn list(out: &mut impl Write, texts: impl IntoIterator<Item = impl AsRef<str>>) -> std::io::Result<()> {
    let mut any = false;
    for t in texts {
        any = true;
        writeln!(out, "  - {}", t.as_ref())?;
    }
    if !any {
        writeln!(out, "  (empty)")?;
    }
    Ok(())
}

pub fn run(cfg: &RunConfig, args: &SessionArgs, input: impl BufRead, mut out: impl Write) -> CliResult {
    let o = build_orchestrator(cfg, args)?;
    let store = EpisodeStore::new(&args.store);
    let mut episode: Episode = match &args.resume {
        Some(id) => store.load(id)?,
        None => o.start_episode(cfg.policy)?,
    };
    writeln!(
        out,
        "episode {} ({}), session {}; {HELP}",
        episode.episode_id,
        episode.policy,
        episode.current().map_or(0, |s| s.session_index)
    )?;
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match line {
            ":help" => writeln!(out, "{HELP}")?,
            ":mem" => match o.retrieved_memory(&episode) {
                Ok(m) => {
                    writeln!(out, "retrieved memory:")?;
                    list(&mut out, m)?;
                }
                Err(e) => writeln!(out, "error: {e}")?,
            },
            ":end" => match o.end_session(&mut episode) {
                Ok(c) => {
                    writeln!(out, "session {} closed", c.session_index)?;
                    writeln!(out, "summary:")?;
                    list(&mut out, c.summary.texts())?;
                    if let Some(u) = &c.update {
                        let diff = render_diff(&c.memory_before, &c.summary, u);
                        if !diff.is_empty() {
                            write!(out, "changes:\n{diff}")?;
                        }
                    }
                    writeln!(out, "memory:")?;
                    list(&mut out, c.memory_after.texts())?;
                    writeln!(out, "session {} open", c.session_index + 1)?;
                }
                Err(e) => writeln!(out, "error: {e}")?,
            },
            ":retry" => match o.retry_pending(&mut episode) {
                Ok(r) => writeln!(out, "bot: {r}")?,
                Err(e) => writeln!(out, "error: {e}")?,
            },
            ":quit" => break,
            ":close" => {
                o.close_episode(&mut episode)?;
                writeln!(out, "episode {} closed", episode.episode_id)?;
                writeln!(out, "saved to {}", store.episode_dir(&episode.episode_id).display())?;
                return Ok(());
            }
            text => {
                match o.step_turn(&mut episode, text) {
                    Ok(r) => writeln!(out, "bot: {r}")?,
                    Err(e) => writeln!(out, "error: {e}")?,
                }
            }
        }
    }
    o.save(&episode)?;
    writeln!(out, "saved to {}", store.episode_dir(&episode.episode_id).display())?;
    Ok(())
}
