use std::fmt::Write as _;
use std::path::Path;

use memkeeper::dataset::{
    corpus_stats, import_episodes, load_episodes, load_pairs, synth_corpus, write_episodes, EpisodeRecord,
    FieldMapping, RandomScriptConfig, Split,
};
use memkeeper::metrics::{pairwise_accuracy, ConfusionMatrix};
use memkeeper::MemOp;

use super::{emit, to_json};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub fn load_corpus(path: &Path, mapping: Option<&Path>) -> CliResult<Vec<EpisodeRecord>> {
    Ok(match mapping {
        Some(m) => import_episodes(path, &FieldMapping::load(m)?)?,
        None => load_episodes(path)?,
    })
}

pub fn stats(cfg: &RunConfig, corpus: &Path, mapping: Option<&Path>, json: bool) -> CliResult {
    let episodes = load_corpus(corpus, mapping)?;
    let stats = corpus_stats(&episodes)?;
    let body = if json { to_json(&stats)? } else { stats.render() };
    emit(cfg.out.as_deref(), &body)
}

pub fn pairs(cfg: &RunConfig, path: &Path, split: Option<Split>, export: bool) -> CliResult {
    let set = load_pairs(path)?;
    if export {
        let out = cfg
            .out
            .as_deref()
            .ok_or_else(|| CliError::input("--export needs --out"))?;
        let file = std::fs::File::create(out).map_err(|e| CliError::input(format!("{}: {e}", out.display())))?;
        let n = set.export(std::io::BufWriter::new(file), split)?;
        eprintln!("exported {n} pairs ({} FUSION excluded)", set.fusion_count());
        return Ok(());
    }
    let d = set.label_distribution(split);
    let mut body = format!("pairs {} (FUSION excluded: {})\n", d.total, d.fusion_excluded);
    for op in MemOp::ALL {
        let _ = writeln!(body, "{:<8} {:>6}  {:>6.2}%", op.as_str(), d.counts[op.index()], d.percent_of(op));
    }
    emit(cfg.out.as_deref(), &body)
}

pub fn eval(cfg: &RunConfig, path: &Path, split: Option<Split>) -> CliResult {
    let set = load_pairs(path)?;
    let classifier = cfg.classifier()?;
    let rows = set.exportable(split);
    let mut pred = Vec::with_capacity(rows.len());
    let mut gold = Vec::with_capacity(rows.len());
    for r in rows {
        let Some(g) = r.gold.as_op() else { continue };
        pred.push(classifier.classify(&r.m, &r.s)?);
        gold.push(g);
    }
    let accuracy = pairwise_accuracy(&pred, &gold)?;
    let cm = ConfusionMatrix::from_pairs(&pred, &gold)?;
    let mut body = format!("backend {}\npairs {}\naccuracy {:.4}\n\ngold \\ pred", cfg.backend_name(), gold.len(), accuracy);
    for op in MemOp::ALL {
        let _ = write!(body, " {:>8}", op.as_str());
    }
    body.push('\n');
    for g in MemOp::ALL {
        let _ = write!(body, "{:<11}", g.as_str());
        for p in MemOp::ALL {
            let _ = write!(body, " {:>8}", cm.counts[g.index()][p.index()]);
        }
        body.push('\n');
    }
    emit(cfg.out.as_deref(), &body)
}

pub fn synth(cfg: &RunConfig, episodes: usize, script: RandomScriptConfig) -> CliResult {
    let corpus = synth_corpus(cfg.seed, episodes, &script)?;
    let mut buf = Vec::new();
    write_episodes(&mut buf, &corpus)?;
    emit(cfg.out.as_deref(), &String::from_utf8(buf).expect("JSON is UTF-8"))
}

pub fn import(cfg: &RunConfig, source: &Path, mapping: &Path) -> CliResult {
    let corpus = load_corpus(source, Some(mapping))?;
    let mut buf = Vec::new();
    write_episodes(&mut buf, &corpus)?;
    eprintln!("imported {} episodes", corpus.len());
    emit(cfg.out.as_deref(), &String::from_utf8(buf).expect("JSON is UTF-8"))
}
