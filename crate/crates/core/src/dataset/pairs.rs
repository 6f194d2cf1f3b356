//! Labeled `(m, s)` pair datasets, JSONL `{m, s, gold, split?}`.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::classify::{GoldLabel, LabeledPair};
use crate::memory::MemOp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Split {
    #[serde(alias = "train")]
    Train,
    #[serde(alias = "valid", alias = "VALIDATION", alias = "validation", alias = "dev")]
    Valid,
    #[serde(alias = "test")]
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairRecord {
    pub m: String,
    pub s: String,
    pub gold: GoldLabel,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

#[derive(Deserialize)]
struct PairWire {
    m: String,
    s: String,
    gold: String,
    #[serde(default)]
    split: Option<Split>,
}

/// Loaded pairs. FUSION rows are kept for counting but never exported.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairSet {
    pub records: Vec<PairRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelDistribution {
    pub total: usize,
    pub fusion_excluded: usize,
    pub counts: [usize; 4],
    /// Percentages in `MemOp::index` order over non-FUSION rows.
    pub percent: [f64; 4],
}

impl LabelDistribution {
    pub fn percent_of(&self, op: MemOp) -> f64 {
        self.percent[op.index()]
    }
}

impl PairSet {
    pub fn fusion_count(&self) -> usize {
        self.records.iter().filter(|r| r.gold == GoldLabel::Fusion).count()
    }

    /// Non-FUSION rows, optionally restricted to one split.
    pub fn exportable(&self, split: Option<Split>) -> Vec<&PairRecord> {
        self.records
            .iter()
            .filter(|r| r.gold != GoldLabel::Fusion)
            .filter(|r| split.is_none() || r.split == split)
            .collect()
    }

    pub fn labeled_pairs(&self, split: Option<Split>) -> Vec<LabeledPair> {
        self.exportable(split)
            .into_iter()
            .map(|r| LabeledPair::new(r.m.clone(), r.s.clone(), r.gold))
            .collect()
    }

    pub fn label_distribution(&self, split: Option<Split>) -> LabelDistribution {
        let rows = self.exportable(split);
        let mut counts = [0usize; 4];
        for r in &rows {
            if let Some(op) = r.gold.as_op() {
                counts[op.index()] += 1;
            }
        }
        let total = rows.len();
        let percent = counts.map(|c| if total == 0 { 0.0 } else { 100.0 * c as f64 / total as f64 });
        LabelDistribution {
            total,
            fusion_excluded: self
                .records
                .iter()
                .filter(|r| r.gold == GoldLabel::Fusion && (split.is_none() || r.split == split))
                .count(),
            counts,
            percent,
        }
    }

    /// Writes non-FUSION rows; returns how many were written.
    pub fn export(&self, mut writer: impl Write, split: Option<Split>) -> std::io::Result<usize> {
        let rows = self.exportable(split);
        for r in &rows {
            serde_json::to_writer(&mut writer, r)?;
            writer.write_all(b"\n")?;
        }
        writer.flush()?;
        let skipped = self.fusion_count();
        if skipped > 0 {
            tracing::warn!(skipped, "FUSION pairs excluded from export");
        }
        Ok(rows.len())
    }
}

pub fn read_pairs(reader: impl BufRead) -> Result<PairSet, DatasetError> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| DatasetError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let w: PairWire = serde_json::from_str(&line).map_err(|e| DatasetError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let gold = GoldLabel::parse(&w.gold).ok_or(DatasetError::UnknownLabel {
            line: line_no,
            label: w.gold.clone(),
        })?;
        records.push(PairRecord {
            m: w.m,
            s: w.s,
            gold,
            split: w.split,
        });
    }
    let set = PairSet { records };
    let fusion = set.fusion_count();
    if fusion > 0 {
        tracing::warn!(fusion, "FUSION pairs loaded; they are excluded from training and evaluation");
    }
    Ok(set)
}

pub fn load_pairs(path: impl AsRef<Path>) -> Result<PairSet, DatasetError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| DatasetError::io(path, e))?;
    read_pairs(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn only_fusion_exports_nothing() {
        let src = "{\"m\":\"a\",\"s\":\"b\",\"gold\":\"FUSION\"}\n{\"m\":\"c\",\"s\":\"d\",\"gold\":\"FUSION\"}\n";
        let set = read_pairs(src.as_bytes()).unwrap();
        assert_eq!(set.fusion_count(), 2);
        let mut out = Vec::new();
        assert_eq!(set.export(&mut out, None).unwrap(), 0);
        assert!(out.is_empty());
    }

    #[test]
    fn unknown_label() {
        let src = "{\"m\":\"a\",\"s\":\"b\",\"gold\":\"PASS\"}\n{\"m\":\"a\",\"s\":\"b\",\"gold\":\"MERGE\"}\n";
        let err = read_pairs(src.as_bytes()).unwrap_err();
        assert!(matches!(err, DatasetError::UnknownLabel { line: 2, ref label } if label == "MERGE"));
    }

    #[test]
    fn distribution_excludes_fusion() {
        let src = [
            r#"{"m":"a","s":"b","gold":"PASS","split":"TEST"}"#,
            r#"{"m":"a","s":"c","gold":"APPEND","split":"TEST"}"#,
            r#"{"m":"a","s":"d","gold":"APPEND","split":"train"}"#,
            r#"{"m":"a","s":"e","gold":"FUSION","split":"TEST"}"#,
        ]
        .join("\n");
        let set = read_pairs(src.as_bytes()).unwrap();
        let d = set.label_distribution(None);
        assert_eq!(d.total, 3);
        assert_eq!(d.fusion_excluded, 1);
        assert!((d.percent_of(MemOp::Append) - 200.0 / 3.0).abs() < 1e-9);
        let t = set.label_distribution(Some(Split::Test));
        assert_eq!(t.total, 2);
        assert_eq!(t.percent_of(MemOp::Pass), 50.0);
    }
}
