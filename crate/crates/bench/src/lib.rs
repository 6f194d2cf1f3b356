//! Deterministic workloads shared by the benches.

use memkeeper::dialogue::alternating_turns;
use memkeeper::{MemoryState, Origin, SummaryBatch, Turn};

const SUBJECTS: [&str; 8] = ["dog", "knee", "garden", "daughter", "job", "sleep", "tea", "marathon"];
const VERBS: [&str; 6] = ["likes", "worries about", "talks about", "is busy with", "misses", "plans around"];

fn sentence(i: usize, salt: usize) -> String {
    format!(
        "{} {} the {} {}",
        ["She", "He", "They"][(i + salt) % 3],
        VERBS[(i * 7 + salt) % VERBS.len()],
        SUBJECTS[(i * 3 + salt) % SUBJECTS.len()],
        i
    )
}

pub fn memory(n: usize) -> MemoryState {
    MemoryState::from_texts(1, Origin::FromMemory, "m", (0..n).map(|i| sentence(i, 0)))
}

pub fn summary(n: usize) -> SummaryBatch {
    SummaryBatch::from_texts(1, (0..n).map(|i| sentence(i, 5)))
}

pub fn context(turns: usize) -> Vec<Turn> {
    alternating_turns((0..turns).map(|i| sentence(i, 11)))
}

pub fn utterances(n: usize) -> Vec<String> {
    (0..n).map(|i| sentence(i, 2)).collect()
}
