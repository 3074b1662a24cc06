use std::path::{Path, PathBuf};

use prs_core::pmatch::FpsaConfig;
use prs_core::simulator::{LoggingPolicy, SimSpec};
use prs_core::train::TrainConfig;
use prs_core::{PrsError, Result};
use serde::{Deserialize, Serialize};

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "PRS_CONFIG";

/// Which generator `gen-data` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataKind {
    /// Cascade simulator with the logging policy.
    Simulator,
    /// Every position exposed, clicked iff the previous item is pricier.
    AnchorOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub kind: DataKind,
    pub sessions: usize,
    /// Held-out requests drawn after the training sessions.
    pub requests: usize,
    pub m: usize,
    pub n: usize,
    pub logging: LoggingPolicy,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            kind: DataKind::Simulator,
            sessions: 10_000,
            requests: 500,
            m: 20,
            n: 4,
            logging: LoggingPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RerankSection {
    pub n: usize,
    pub beam_k: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Merge the descending-CTR list into every candidate set.
    pub include_greedy: bool,
}

impl Default for RerankSection {
    fn default() -> Self {
        let f = FpsaConfig::default();
        Self {
            n: f.n,
            beam_k: f.beam_k,
            alpha: f.alpha,
            beta: f.beta,
            include_greedy: true,
        }
    }
}

impl RerankSection {
    pub fn fpsa(&self) -> FpsaConfig {
        FpsaConfig {
            n: self.n,
            beam_k: self.beam_k,
            alpha: self.alpha,
            beta: self.beta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub alphas: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            alphas: vec![0.0, 1.0, 3.0, 5.0, 7.0, 9.0, 15.0, 100.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub m: usize,
    pub n: usize,
    pub beam_k: usize,
    pub calls: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            m: 100,
            n: 10,
            beam_k: 50,
            calls: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub m: usize,
    pub n: usize,
    pub instances: usize,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            m: 6,
            n: 3,
            instances: 10,
        }
    }
}

/// Artifact locations; relative paths resolve against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub dataset: PathBuf,
    pub requests: PathBuf,
    pub ctr: PathBuf,
    pub next: PathBuf,
    pub dpwn: PathBuf,
    /// Candidate-set file consumed by `rerank` instead of running FPSA.
    pub candidates_in: Option<PathBuf>,
    /// Where `rerank` writes the candidate sets it generated, if anywhere.
    pub candidates_out: Option<PathBuf>,
    pub reranked: PathBuf,
    pub report: PathBuf,
    pub sweep: PathBuf,
    pub oracle: PathBuf,
}

impl Default for PathsSection {
    fn default() -> Self {
        Self {
            dataset: "data/train.jsonl".into(),
            requests: "data/requests.jsonl".into(),
            ctr: "models/ctr.json".into(),
            next: "models/next.json".into(),
            dpwn: "models/dpwn.json".into(),
            candidates_in: None,
            candidates_out: None,
            reranked: "out/reranked.jsonl".into(),
            report: "out/report.json".into(),
            sweep: "out/sweep.tsv".into(),
            oracle: "out/oracle.tsv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Drives the simulator catalog, session draws and model initialization.
    pub seed: u64,
    pub paths: PathsSection,
    pub simulator: SimSpec,
    pub data: DataSection,
    pub train: TrainConfig,
    pub rerank: RerankSection,
    pub sweep: SweepSection,
    pub bench: BenchSection,
    pub oracle: OracleSection,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Command-line values that replace single config keys.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub n: Option<usize>,
    pub beam_k: Option<usize>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub seed: Option<u64>,
}

impl Config {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: Config =
            toml::from_str(text).map_err(|e| PrsError::Config(format!("config: {e}")))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    /// Reads `path`, or `$PRS_CONFIG`, or falls back to built-in defaults
    /// rooted at the working directory.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let env = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
        match path.map(Path::to_path_buf).or(env) {
            Some(p) => {
                let text = std::fs::read_to_string(&p).map_err(|e| {
                    PrsError::Config(format!("cannot read config {}: {e}", p.display()))
                })?;
                let dir = p.parent().map(Path::to_path_buf).unwrap_or_default();
                Self::from_toml(&text, &dir)
            }
            None => Ok(Config::default()),
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(n) = o.n {
            self.rerank.n = n;
        }
        if let Some(k) = o.beam_k {
            self.rerank.beam_k = k;
        }
        if let Some(a) = o.alpha {
            self.rerank.alpha = a;
        }
        if let Some(b) = o.beta {
            self.rerank.beta = b;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
    }

    /// Simulator spec with the top-level seed in place of its own.
    pub fn sim_spec(&self) -> SimSpec {
        SimSpec {
            seed: self.seed,
            ..self.simulator.clone()
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}
