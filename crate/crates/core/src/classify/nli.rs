//! Zero-shot operations from natural-language-inference verdicts.
//!
//! With the old memory sentence as premise and the new summary sentence as
//! hypothesis: entailment means PASS, contradiction or reverse entailment
//! means REPLACE, neutral means APPEND. DELETE has no NLI counterpart.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::remote::{LabelResponse, PairRequest};
use super::{ClassifierError, OperationClassifier};
use crate::http::{EndpointConfig, JsonClient};
use crate::memory::MemOp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum NliLabel {
    Entailment,
    Neutral,
    Contradiction,
}

impl NliLabel {
    pub const ALL: [NliLabel; 3] = [NliLabel::Entailment, NliLabel::Neutral, NliLabel::Contradiction];

    /// `{"0": entailment, "1": neutral, "2": contradiction}`, or the name itself.
    pub fn from_token(token: &str) -> Option<NliLabel> {
        match token.trim().to_ascii_lowercase().as_str() {
            "0" | "entailment" => Some(NliLabel::Entailment),
            "1" | "neutral" => Some(NliLabel::Neutral),
            "2" | "contradiction" => Some(NliLabel::Contradiction),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NliVerdict {
    pub label: NliLabel,
    /// Carried through but not used for the mapping.
    #[serde(default = "full_confidence")]
    pub confidence: f64,
}

fn full_confidence() -> f64 {
    1.0
}

impl NliVerdict {
    pub fn new(label: NliLabel) -> Self {
        NliVerdict {
            label,
            confidence: 1.0,
        }
    }
}

impl From<NliLabel> for NliVerdict {
    fn from(label: NliLabel) -> Self {
        NliVerdict::new(label)
    }
}

/// `forward` is NLI(premise = m, hypothesis = s); `reverse` swaps the roles.
///
/// Contradiction is checked before entailment; the reverse verdict only
/// matters when the forward one is neutral.
pub fn nli_to_op(forward: NliVerdict, reverse: NliVerdict) -> MemOp {
    match (forward.label, reverse.label) {
        (NliLabel::Contradiction, _) => MemOp::Replace,
        (NliLabel::Entailment, _) => MemOp::Pass,
        (NliLabel::Neutral, NliLabel::Entailment) => MemOp::Replace,
        (NliLabel::Neutral, _) => MemOp::Append,
    }
}

pub trait NliBackend: Send + Sync {
    fn infer(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict, ClassifierError>;
}

impl<F> NliBackend for F
where
    F: Fn(&str, &str) -> Result<NliVerdict, ClassifierError> + Send + Sync,
{
    fn infer(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict, ClassifierError> {
        self(premise, hypothesis)
    }
}

/// Operation classifier over an NLI backend. Runs the reverse direction only
/// when the forward verdict is neutral.
pub struct NliClassifier<B> {
    backend: B,
}

impl<B: NliBackend> NliClassifier<B> {
    pub fn new(backend: B) -> Self {
        NliClassifier { backend }
    }
}

impl<B: NliBackend> OperationClassifier for NliClassifier<B> {
    fn classify(&self, memory: &str, summary: &str) -> Result<MemOp, ClassifierError> {
        let forward = self.backend.infer(memory, summary)?;
        let reverse = if forward.label == NliLabel::Neutral {
            self.backend.infer(summary, memory)?
        } else {
            NliVerdict::new(NliLabel::Neutral)
        };
        Ok(nli_to_op(forward, reverse))
    }

    fn name(&self) -> &str {
        "nli"
    }
}

/// NLI model behind an HTTP endpoint, speaking the same text-to-text
/// protocol as the operation model with the three-token NLI alphabet.
#[derive(Debug)]
pub struct RemoteNli {
    client: JsonClient,
    cache: Mutex<HashMap<(String, String), NliLabel>>,
}

impl RemoteNli {
    pub fn new(endpoint: EndpointConfig) -> Self {
        RemoteNli {
            client: JsonClient::new(endpoint),
            cache: Mutex::new(HashMap::new()),
        }
    }
}

impl NliBackend for RemoteNli {
    fn infer(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict, ClassifierError> {
        let key = (premise.to_owned(), hypothesis.to_owned());
        if let Some(label) = self.cache.lock().ok().and_then(|c| c.get(&key).copied()) {
            return Ok(NliVerdict::new(label));
        }
        let response: LabelResponse = self.client.post(&PairRequest::new(premise, hypothesis))?;
        let label = NliLabel::from_token(&response.label).ok_or_else(|| {
            ClassifierError::MalformedResponse(format!(
                "NLI label token {:?} outside {{0,1,2}}",
                response.label
            ))
        })?;
        if let Ok(mut c) = self.cache.lock() {
            c.insert(key, label);
        }
        Ok(NliVerdict::new(label))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn v(l: NliLabel) -> NliVerdict {
        NliVerdict::new(l)
    }

    #[test]
    fn mapping_rows() {
        use NliLabel::*;
        let rows = [
            (Entailment, Neutral, MemOp::Pass),
            (Contradiction, Entailment, MemOp::Replace),
            (Contradiction, Neutral, MemOp::Replace),
            (Neutral, Entailment, MemOp::Replace),
            (Neutral, Neutral, MemOp::Append),
        ];
        for (f, r, want) in rows {
            assert_eq!(nli_to_op(v(f), v(r)), want, "{f:?}/{r:?}");
        }
    }

    #[test]
    fn never_deletes_over_full_grid() {
        for f in NliLabel::ALL {
            for r in NliLabel::ALL {
                assert_ne!(nli_to_op(v(f), v(r)), MemOp::Delete);
            }
        }
    }

    #[test]
    fn reverse_pass_only_when_forward_neutral() {
        let calls = AtomicUsize::new(0);
        let backend = |p: &str, _h: &str| {
            calls.fetch_add(1, Ordering::Relaxed);
            Ok(v(if p == "entails" { NliLabel::Entailment } else { NliLabel::Neutral }))
        };
        let c = NliClassifier::new(backend);
        assert_eq!(c.classify("entails", "x").unwrap(), MemOp::Pass);
        assert_eq!(calls.load(Ordering::Relaxed), 1);
        // forward neutral, reverse (premise "entails") entailment
        assert_eq!(c.classify("y", "entails").unwrap(), MemOp::Replace);
        assert_eq!(calls.load(Ordering::Relaxed), 3);
    }

    #[test]
    fn nli_tokens() {
        assert_eq!(NliLabel::from_token("0"), Some(NliLabel::Entailment));
        assert_eq!(NliLabel::from_token("2"), Some(NliLabel::Contradiction));
        assert_eq!(NliLabel::from_token("3"), None);
    }
}
