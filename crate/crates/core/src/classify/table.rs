use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use thiserror::Error;

use super::{ClassifierError, LabeledPair, OperationClassifier};
use crate::memory::MemOp;
use crate::text::normalize;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TableError {
    #[error("duplicate table key ({m:?}, {s:?})")]
    DuplicateKey { m: String, s: String },
    #[error("FUSION is not an operation; pair ({m:?}, {s:?}) cannot be loaded into a classifier")]
    FusionLabel { m: String, s: String },
}

/// Returns stored gold labels. Unknown pairs get the configured default and
/// are counted as misses.
#[derive(Debug)]
pub struct TableOracle {
    table: HashMap<(String, String), MemOp>,
    default: MemOp,
    misses: AtomicUsize,
}

impl TableOracle {
    pub fn new(pairs: Vec<LabeledPair>) -> Result<Self, TableError> {
        let mut table = HashMap::with_capacity(pairs.len());
        for p in pairs {
            let key = (normalize(&p.m), normalize(&p.s));
            let Some(op) = p.gold.as_op() else {
                return Err(TableError::FusionLabel { m: key.0, s: key.1 });
            };
            if table.insert(key.clone(), op).is_some() {
                return Err(TableError::DuplicateKey { m: key.0, s: key.1 });
            }
        }
        Ok(TableOracle {
            table,
            default: MemOp::Append,
            misses: AtomicUsize::new(0),
        })
    }

    pub fn with_default(mut self, default: MemOp) -> Self {
        self.default = default;
        self
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl OperationClassifier for TableOracle {
    fn classify(&self, memory: &str, summary: &str) -> Result<MemOp, ClassifierError> {
        // Callers usually pass normalized text already; avoid re-normalizing.
        let hit = self
            .table
            .get(&(memory.to_owned(), summary.to_owned()))
            .or_else(|| self.table.get(&(normalize(memory), normalize(summary))));
        match hit {
            Some(op) => Ok(*op),
            None => {
                self.misses.fetch_add(1, Ordering::Relaxed);
                Ok(self.default)
            }
        }
    }

    fn name(&self) -> &str {
        "table"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::GoldLabel;

    #[test]
    fn returns_stored_labels() {
        let t = TableOracle::new(vec![
            LabeledPair::new("Lost appetite and doesn't eat much", "Lost appetite", GoldLabel::Pass),
            LabeledPair::new("Had sore throat", "Throat is fully recovered", GoldLabel::Delete),
        ])
        .unwrap();
        assert_eq!(
            t.classify("Lost appetite and doesn't eat much", "Lost appetite").unwrap(),
            MemOp::Pass
        );
        assert_eq!(
            t.classify("Had sore throat", "Throat is fully recovered").unwrap(),
            MemOp::Delete
        );
        assert_eq!(t.misses(), 0);
    }

    #[test]
    fn unknown_pair_uses_default_and_counts_miss() {
        let t = TableOracle::new(vec![]).unwrap();
        assert_eq!(t.classify("a", "b").unwrap(), MemOp::Append);
        assert_eq!(t.misses(), 1);
        let t = t.with_default(MemOp::Pass);
        assert_eq!(t.classify("a", "b").unwrap(), MemOp::Pass);
    }

    #[test]
    fn rejects_duplicate_keys_and_fusion() {
        let dup = TableOracle::new(vec![
            LabeledPair::new("a", "b", GoldLabel::Pass),
            LabeledPair::new(" a", "b ", GoldLabel::Append),
        ]);
        assert!(matches!(dup, Err(TableError::DuplicateKey { .. })));
        let fusion = TableOracle::new(vec![LabeledPair::new("a", "b", GoldLabel::Fusion)]);
        assert!(matches!(fusion, Err(TableError::FusionLabel { .. })));
    }

    #[test]
    fn lookup_is_normalized() {
        let t = TableOracle::new(vec![LabeledPair::new("Has a dog", "x", GoldLabel::Replace)]).unwrap();
        assert_eq!(t.classify("Has  a dog ", "x").unwrap(), MemOp::Replace);
    }
}
