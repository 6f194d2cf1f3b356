use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use memkeeper::memory::{MemoryUpdateResult, UpdateWarning};
use memkeeper::{update_memory_with, MemOp, MemoryState, Origin, SummaryBatch, UpdateOptions};

use super::{emit, read_sentences, to_json};
use crate::config::RunConfig;
use crate::error::CliResult;

pub fn classify(cfg: &RunConfig, m: &str, s: &str) -> CliResult {
    let classifier = cfg.classifier()?;
    let op = classifier.classify(m, s)?;
    println!("{op}\t{}", cfg.backend_name());
    Ok(())
}

fn load_memory(path: &Path, session: u32) -> CliResult<MemoryState> {
    // full wire form keeps ids; anything else is plain text
    let src = std::fs::read_to_string(path).map_err(|e| crate::error::CliError::input(format!("{}: {e}", path.display())))?;
    if let Ok(m) = MemoryState::from_json(session, &src) {
        return Ok(m);
    }
    Ok(MemoryState::from_texts(session, Origin::FromMemory, "m", read_sentences(path)?))
}

pub fn update(
    cfg: &RunConfig,
    memory: &Path,
    summary: &Path,
    session: u32,
    max_size: Option<usize>,
) -> CliResult {
    let classifier = cfg.classifier()?;
    let m = load_memory(memory, session)?;
    let s = SummaryBatch::from_texts(session, read_sentences(summary)?);
    let options = UpdateOptions { max_size };
    let start = Instant::now();
    let result = update_memory_with(&m, &s, classifier.as_ref(), &options)?;
    let elapsed = start.elapsed();
    let diff = render_diff(&m, &s, &result);
    if diff.is_empty() {
        eprintln!("no changes");
    } else {
        eprint!("{diff}");
    }
    eprintln!(
        "updated {}x{} in {:.2} ms ({} classifier calls, {})",
        m.len(),
        s.len(),
        elapsed.as_secs_f64() * 1e3,
        result.classifier_calls,
        cfg.backend_name()
    );
    emit(cfg.out.as_deref(), &to_json(&result.new_memory)?)
}

/// Changed sentences with the pair that decided each change. Empty when
/// `M' = M`.
pub fn render_diff(memory: &MemoryState, summary: &SummaryBatch, r: &MemoryUpdateResult) -> String {
    let mut out = String::new();
    let op = |m: &memkeeper::MemorySentence, s: &memkeeper::MemorySentence| r.op_table.get(m.id(), s.id());
    let kept = |id: &memkeeper::SentenceId| r.new_memory.iter().any(|x| x.id() == id);
    for m in memory.iter() {
        if kept(m.id()) {
            continue;
        }
        let decider = summary
            .iter()
            .find_map(|s| op(m, s).filter(|o| matches!(o, MemOp::Replace | MemOp::Delete)).map(|o| (s, o)));
        match decider {
            Some((s, MemOp::Replace)) => {
                let _ = writeln!(out, "replaced  {}  {}  <- {} {:?} (REPLACE)", m.id(), m.text(), s.id(), s.text());
            }
            Some((s, o)) => {
                let _ = writeln!(out, "deleted   {}  {}  ({o} with {} {:?})", m.id(), m.text(), s.id(), s.text());
            }
            None => {
                let _ = writeln!(out, "evicted   {}  {}", m.id(), m.text());
            }
        }
    }
    for s in summary.iter() {
        if kept(s.id()) {
            let _ = writeln!(out, "appended  {}  {}", s.id(), s.text());
            continue;
        }
        let deleted = memory.iter().find(|m| op(m, s) == Some(MemOp::Delete));
        let passed = memory.iter().find(|m| kept(m.id()) && op(m, s) == Some(MemOp::Pass));
        let dup = r
            .warnings
            .iter()
            .find_map(|w| match w {
                UpdateWarning::DuplicateTextConflict { m_id, s_id } if s_id == s.id() => Some(m_id.clone()),
                _ => None,
            });
        match (deleted, passed, dup) {
            (Some(m), _, _) => {
                let _ = writeln!(out, "dropped   {}  {}  (DELETE with {} {:?})", s.id(), s.text(), m.id(), m.text());
            }
            (None, Some(m), _) => {
                let _ = writeln!(out, "dropped   {}  {}  (PASS against {} {:?})", s.id(), s.text(), m.id(), m.text());
            }
            (None, None, Some(m_id)) => {
                let _ = writeln!(out, "dropped   {}  {}  (duplicate of {m_id})", s.id(), s.text());
            }
            _ => {
                let _ = writeln!(out, "evicted   {}  {}", s.id(), s.text());
            }
        }
    }
    out
}
