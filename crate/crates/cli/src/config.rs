//! Run configuration: flags override environment variables, which override
//! the TOML config file named by `--config` / `MEMKEEPER_CONFIG`.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use clap::Args;
use memkeeper::classify::{LabelNoise, NliClassifier, RemoteConfig, RemoteNli};
use memkeeper::dataset::load_pairs;
use memkeeper::retrieval::{DEFAULT_K, DEFAULT_MARGIN};
use memkeeper::{EndpointConfig, LexicalHeuristic, MemoryPolicy, OperationClassifier, RemoteClassifier, TableOracle};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// Operation classifier: heuristic, table:<pairs.jsonl>, remote:<url>,
    /// nli-remote:<url>, or gold (replay only: each episode's own labels).
    #[arg(long, global = true, env = "MEMKEEPER_CLASSIFIER")]
    pub classifier: Option<String>,
    /// WITHOUT_MEMORY, MEMORY_ACCUMULATE, MEMORY_UPDATE or MEMORY_GOLD.
    #[arg(long, global = true, env = "MEMKEEPER_POLICY")]
    pub policy: Option<MemoryPolicy>,
    /// Memory sentences retrieved per turn.
    #[arg(long, global = true, env = "MEMKEEPER_K")]
    pub k: Option<usize>,
    /// Triplet margin.
    #[arg(long, global = true, env = "MEMKEEPER_MARGIN")]
    pub margin: Option<f64>,
    #[arg(long, global = true, env = "MEMKEEPER_SEED")]
    pub seed: Option<u64>,
    #[arg(long, global = true, env = "MEMKEEPER_GENERATOR_URL")]
    pub generator_url: Option<String>,
    #[arg(long, global = true, env = "MEMKEEPER_SUMMARIZER_URL")]
    pub summarizer_url: Option<String>,
    /// Per-request timeout for remote endpoints.
    #[arg(long, global = true, env = "MEMKEEPER_TIMEOUT_MS")]
    pub timeout_ms: Option<u64>,
    /// Extra attempts after a transport failure.
    #[arg(long, global = true, env = "MEMKEEPER_RETRIES")]
    pub retries: Option<u32>,
    /// Flip classifier labels with this probability (evaluation only).
    #[arg(long, global = true)]
    pub noise: Option<f64>,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// TOML config file.
    #[arg(long, global = true, env = "MEMKEEPER_CONFIG")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    classifier: Option<String>,
    policy: Option<String>,
    k: Option<usize>,
    margin: Option<f64>,
    seed: Option<u64>,
    generator_url: Option<String>,
    summarizer_url: Option<String>,
    timeout_ms: Option<u64>,
    retries: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClassifierSpec {
    Heuristic,
    Table(PathBuf),
    Remote(String),
    NliRemote(String),
    Gold,
}

impl FromStr for ClassifierSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
        match (kind, arg) {
            ("heuristic", "") => Ok(ClassifierSpec::Heuristic),
            ("gold", "") => Ok(ClassifierSpec::Gold),
            ("table", p) if !p.is_empty() => Ok(ClassifierSpec::Table(PathBuf::from(p))),
            ("remote", u) if !u.is_empty() => Ok(ClassifierSpec::Remote(u.to_owned())),
            ("nli-remote", u) if !u.is_empty() => Ok(ClassifierSpec::NliRemote(u.to_owned())),
            _ => Err(CliError::input(format!(
                "unknown classifier {s:?}; expected heuristic, table:<path>, remote:<url>, nli-remote:<url> or gold"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub classifier: ClassifierSpec,
    pub policy: MemoryPolicy,
    pub k: usize,
    pub margin: f64,
    pub seed: u64,
    pub generator_url: Option<String>,
    pub summarizer_url: Option<String>,
    pub timeout: Duration,
    pub retries: u32,
    pub noise: Option<f64>,
    pub out: Option<PathBuf>,
}

fn load_file(path: &Path) -> CliResult<FileConfig> {
    let src = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    toml::from_str(&src).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

impl RunConfig {
    pub fn resolve(args: &GlobalArgs) -> CliResult<RunConfig> {
        let file = match &args.config {
            Some(p) => load_file(p)?,
            None => FileConfig::default(),
        };
        let classifier = args
            .classifier
            .clone()
            .or(file.classifier)
            .map(|s| s.parse())
            .transpose()?
            .unwrap_or(ClassifierSpec::Heuristic);
        let policy = match (args.policy, file.policy) {
            (Some(p), _) => p,
            (None, Some(p)) => p.parse().map_err(CliError::input)?,
            (None, None) => MemoryPolicy::MemoryUpdate,
        };
        let k = args.k.or(file.k).unwrap_or(DEFAULT_K);
        if k == 0 {
            return Err(CliError::input("k must be at least 1"));
        }
        let margin = args.margin.or(file.margin).unwrap_or(DEFAULT_MARGIN);
        if !(margin >= 0.0) {
            return Err(CliError::input("margin must be non-negative"));
        }
        if let Some(e) = args.noise {
            if !(0.0..=1.0).contains(&e) {
                return Err(CliError::input("noise must lie in [0, 1]"));
            }
        }
        Ok(RunConfig {
            classifier,
            policy,
            k,
            margin,
            seed: args.seed.or(file.seed).unwrap_or(0),
            generator_url: args.generator_url.clone().or(file.generator_url),
            summarizer_url: args.summarizer_url.clone().or(file.summarizer_url),
            timeout: Duration::from_millis(args.timeout_ms.or(file.timeout_ms).unwrap_or(10_000)),
            retries: args.retries.or(file.retries).unwrap_or(2),
            noise: args.noise,
            out: args.out.clone(),
        })
    }

    pub fn endpoint(&self, url: &str) -> EndpointConfig {
        EndpointConfig::new(url)
            .with_timeout(self.timeout)
            .with_retries(self.retries)
    }

    pub fn backend_name(&self) -> String {
        match &self.classifier {
            ClassifierSpec::Heuristic => "heuristic".into(),
            ClassifierSpec::Table(p) => format!("table:{}", p.display()),
            ClassifierSpec::Remote(u) => format!("remote:{u}"),
            ClassifierSpec::NliRemote(u) => format!("nli-remote:{u}"),
            ClassifierSpec::Gold => "gold".into(),
        }
    }

    /// The configured classifier, wrapped in label noise if requested.
    pub fn classifier(&self) -> CliResult<Arc<dyn OperationClassifier>> {
        let base: Arc<dyn OperationClassifier> = match &self.classifier {
            ClassifierSpec::Heuristic => Arc::new(LexicalHeuristic::default()),
            ClassifierSpec::Table(path) => {
                let pairs = load_pairs(path)?;
                Arc::new(TableOracle::new(pairs.labeled_pairs(None))?)
            }
            ClassifierSpec::Remote(url) => {
                let mut cfg = RemoteConfig::new(url.clone());
                cfg.endpoint = self.endpoint(url);
                Arc::new(RemoteClassifier::new(cfg))
            }
            ClassifierSpec::NliRemote(url) => Arc::new(NliClassifier::new(RemoteNli::new(self.endpoint(url)))),
            ClassifierSpec::Gold => {
                return Err(CliError::input("the gold classifier is only available to replay"));
            }
        };
        Ok(self.with_noise(base))
    }

    pub fn with_noise(&self, c: Arc<dyn OperationClassifier>) -> Arc<dyn OperationClassifier> {
        match self.noise {
            Some(e) if e > 0.0 => Arc::new(LabelNoise::new(c, e, self.seed)),
            _ => c,
        }
    }
}
