use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use memkeeper::dialogue::alternating_turns;
use memkeeper::metrics::{generation_report, standardize_scores, RaterScores};
use memkeeper::retrieval::{read_triplets, retrieve_top_k, triplet_eval, HashedNgramEmbedder};
use memkeeper::{MemoryState, Origin};

use super::{emit, read_lines, read_sentences, to_json};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn metrics(cfg: &RunConfig, candidates: &Path, references: &Path) -> CliResult {
    let c = read_lines(candidates)?;
    let r = read_lines(references)?;
    let report = generation_report(&c, &r)?;
    emit(cfg.out.as_deref(), &to_json(&report)?)
}

/// Input: JSONL `{rater_id, scores}`. Output: JSONL `{rater_id, z}`.
pub fn standardize(cfg: &RunConfig, path: &Path) -> CliResult {
    let mut groups = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let g: RaterScores =
            serde_json::from_str(&line).map_err(|e| CliError::input(format!("line {}: {e}", i + 1)))?;
        if g.scores.is_empty() {
            return Err(CliError::input(format!("line {}: rater {} has no scores", i + 1, g.rater_id)));
        }
        groups.push(g);
    }
    let mut body = String::new();
    for z in standardize_scores(&groups) {
        body.push_str(&serde_json::to_string(&z)?);
        body.push('\n');
    }
    emit(cfg.out.as_deref(), &body)
}

pub fn retrieve(cfg: &RunConfig, memory: &Path, context: &[String]) -> CliResult {
    let m = MemoryState::from_texts(1, Origin::FromMemory, "m", read_sentences(memory)?);
    let turns = alternating_turns(context.iter().cloned());
    let r = retrieve_top_k(&turns, &m, &HashedNgramEmbedder::default(), cfg.k)?;
    let mut body = String::new();
    if r.ranked.is_empty() {
        body.push_str("(empty)\n");
    }
    for s in &r.ranked {
        let _ = writeln!(body, "{:.4}\t{}", s.score, s.sentence.text());
    }
    emit(cfg.out.as_deref(), &body)
}

pub fn triplets(cfg: &RunConfig, path: &Path) -> CliResult {
    let t = read_triplets(open(path)?)?;
    let r = triplet_eval(&t, &HashedNgramEmbedder::default(), cfg.margin)?;
    let body = format!(
        "triplets {}\nmargin {}\nmean loss {:.4}\nmargin satisfied {:.4}\npositive wins {:.4}\n",
        r.n, cfg.margin, r.mean_loss, r.satisfaction_rate, r.win_rate
    );
    emit(cfg.out.as_deref(), &body)
}
