use std::path::Path;
use std::sync::Arc;

use memkeeper::dataset::EpisodeRecord;
use memkeeper::session::{replay_corpus, ReplayMode, SessionError};
use memkeeper::OperationClassifier;

use super::data::load_corpus;
use super::to_json;
use crate::config::{ClassifierSpec, RunConfig};
use crate::error::{CliError, CliResult};

pub fn replay(cfg: &RunConfig, corpus: &Path, mapping: Option<&Path>, mode: ReplayMode, workers: usize) -> CliResult {
    let episodes = load_corpus(corpus, mapping)?;
    if episodes.is_empty() {
        return Err(CliError::input("corpus is empty"));
    }
    let report = if cfg.classifier == ClassifierSpec::Gold {
        let factory = |ep: &EpisodeRecord| -> Result<Box<dyn OperationClassifier>, SessionError> {
            if !ep.has_gold_ops() && ep.sessions.iter().any(|s| !s.memory_before.is_empty()) {
                return Err(SessionError::Config(format!(
                    "episode {} has no gold operation labels",
                    ep.episode_id
                )));
            }
            let table = ep.gold_table().map_err(|e| SessionError::Config(e.to_string()))?;
            Ok(Box::new(cfg.with_noise(Arc::new(table))))
        };
        replay_corpus(&episodes, cfg.policy, &factory, mode, workers)?
    } else {
        let shared = cfg.classifier()?;
        let factory = |_: &EpisodeRecord| -> Result<Box<dyn OperationClassifier>, SessionError> {
            Ok(Box::new(shared.clone()))
        };
        replay_corpus(&episodes, cfg.policy, &factory, mode, workers)?
    };
    print!("{}", report.render());
    println!("classifier {} ({} calls)", cfg.backend_name(), report.classifier_calls);
    if let Some(out) = &cfg.out {
        std::fs::write(out, to_json(&report)?).map_err(|e| CliError::input(format!("{}: {e}", out.display())))?;
    }
    Ok(())
}
