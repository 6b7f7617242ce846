//! Experiment configuration: one JSON file plus dotted-key overrides.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use aot_core::backend::OpenAiConfig;
use aot_core::eval::{SimulatorConfig, SimulatorKind, DEFAULT_MISMATCH_REGEX};
use aot_core::problem::parse_stage_set;
use aot_core::{Strategy, StrategyConfig};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub problems: ProblemsSection,
    #[serde(default)]
    pub models: ModelsSection,
    #[serde(default)]
    pub strategy: StrategySection,
    #[serde(default)]
    pub sampling: SamplingSection,
    #[serde(default)]
    pub simulator: SimulatorSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Directory of template files overriding the built-in prompts.
    #[serde(default)]
    pub templates_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemsSection {
    pub problem_file: PathBuf,
    #[serde(default)]
    pub description_file: Option<PathBuf>,
    /// Only these task ids, in file order.
    #[serde(default)]
    pub task_ids: Option<Vec<String>>,
    /// Keep the first `limit` problems after filtering.
    #[serde(default)]
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSection {
    Mock { script: PathBuf },
    Openai(OpenAiConfig),
}

impl Default for BackendSection {
    fn default() -> Self {
        BackendSection::Openai(OpenAiConfig {
            base_url: "https://api.openai.com/v1".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            api_model: None,
            timeout_secs: 300,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelsSection {
    #[serde(default)]
    pub backend: BackendSection,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_concurrency")]
    pub max_concurrency: usize,
}

impl Default for ModelsSection {
    fn default() -> Self {
        ModelsSection { backend: BackendSection::default(), cache_dir: None, max_retries: default_retries(), max_concurrency: default_concurrency() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySection {
    #[serde(default = "default_strategy")]
    pub name: String,
    #[serde(default = "default_stages")]
    pub stages: String,
    #[serde(default = "default_model")]
    pub abstraction_model: String,
    #[serde(default = "default_model")]
    pub translation_model: String,
}

impl Default for StrategySection {
    fn default() -> Self {
        StrategySection { name: default_strategy(), stages: default_stages(), abstraction_model: default_model(), translation_model: default_model() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingSection {
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_top_p")]
    pub top_p: f64,
    #[serde(default)]
    pub top_k: Option<u32>,
    #[serde(default)]
    pub max_output_tokens: Option<u32>,
    #[serde(default = "default_five")]
    pub n: u32,
    #[serde(default = "default_five")]
    pub runs: u32,
}

impl Default for SamplingSection {
    fn default() -> Self {
        SamplingSection { temperature: default_temperature(), top_p: default_top_p(), top_k: None, max_output_tokens: None, n: 5, runs: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Iverilog,
    Builtin,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatorSection {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "default_engine")]
    pub engine: Engine,
    /// Commands for the `external` engine.
    #[serde(default)]
    pub compile: Vec<String>,
    #[serde(default)]
    pub run: Vec<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_regex")]
    pub mismatch_regex: String,
    #[serde(default)]
    pub keep_scratch: bool,
    #[serde(default)]
    pub scratch_root: Option<PathBuf>,
}

impl Default for SimulatorSection {
    fn default() -> Self {
        SimulatorSection {
            enabled: true,
            engine: Engine::Iverilog,
            compile: Vec::new(),
            run: Vec::new(),
            timeout_secs: default_timeout(),
            mismatch_regex: default_regex(),
            keep_scratch: false,
            scratch_root: None,
        }
    }
}

impl SimulatorSection {
    pub fn to_core(&self) -> SimulatorConfig {
        let kind = match self.engine {
            Engine::Iverilog => SimulatorKind::iverilog(),
            Engine::Builtin => SimulatorKind::Builtin,
            Engine::External => SimulatorKind::External { compile: self.compile.clone(), run: self.run.clone() },
        };
        SimulatorConfig {
            kind,
            timeout_secs: self.timeout_secs,
            mismatch_regex: self.mismatch_regex.clone(),
            keep_scratch: self.keep_scratch,
            scratch_root: self.scratch_root.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSection {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
    /// pass@k values to report; defaults to 1 and n.
    #[serde(default)]
    pub ks: Option<Vec<u32>>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: default_out(), ks: None }
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(4, |n| n.get().min(8))
}
fn default_retries() -> u32 {
    3
}
fn default_concurrency() -> usize {
    8
}
fn default_strategy() -> String {
    "aot".into()
}
fn default_stages() -> String {
    "base+ir+pseudo".into()
}
fn default_model() -> String {
    "gpt-4o".into()
}
fn default_temperature() -> f64 {
    0.6
}
fn default_top_p() -> f64 {
    0.99
}
fn default_five() -> u32 {
    5
}
fn default_true() -> bool {
    true
}
fn default_engine() -> Engine {
    Engine::Iverilog
}
fn default_timeout() -> u64 {
    30
}
fn default_regex() -> String {
    DEFAULT_MISMATCH_REGEX.into()
}
fn default_out() -> PathBuf {
    "aot-out".into()
}

/// Every problem found in a configuration, keyed by dotted path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub problems: Vec<(String, String)>,
}

impl ConfigError {
    fn one(key: &str, message: impl Into<String>) -> Self {
        ConfigError { problems: vec![(key.into(), message.into())] }
    }

    pub fn keys(&self) -> Vec<&str> {
        self.problems.iter().map(|(k, _)| k.as_str()).collect()
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration:")?;
        for (k, m) in &self.problems {
            write!(f, "\n  {k}: {m}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

/// Keys holding paths; relative values are taken from the config file's directory.
const PATH_KEYS: [&str; 7] = [
    "problems.problem_file",
    "problems.description_file",
    "models.backend.script",
    "models.cache_dir",
    "simulator.scratch_root",
    "output.dir",
    "templates_dir",
];

fn lookup_mut<'a>(v: &'a mut Value, key: &str) -> Option<&'a mut Value> {
    key.split('.').try_fold(v, |cur, part| cur.get_mut(part))
}

/// Sets `key` (dotted) to `value`, creating objects along the way.
pub fn set_key(root: &mut Value, key: &str, value: Value) -> Result<(), ConfigError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::one(key, "malformed key"));
    }
    let mut cur = root;
    for (i, part) in parts.iter().enumerate() {
        if !cur.is_object() {
            return Err(ConfigError::one(key, format!("'{}' is not a section", parts[..i].join("."))));
        }
        let obj = cur.as_object_mut().expect("checked above");
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    unreachable!("key has at least one part")
}

/// Parses `key=value`; the value is JSON when it parses as such, else a string.
pub fn parse_assignment(s: &str) -> Result<(String, Value), ConfigError> {
    let (k, v) = s.split_once('=').ok_or_else(|| ConfigError::one(s, "expected key=value"))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}

/// Reads a config file into a JSON tree with paths made absolute.
pub fn read_tree(path: &Path) -> Result<Value, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::one("--config", format!("{}: {e}", path.display())))?;
    let mut v: Value = serde_json::from_str(&text).map_err(|e| ConfigError::one("--config", format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    for key in PATH_KEYS {
        if let Some(Value::String(s)) = lookup_mut(&mut v, key) {
            if Path::new(s.as_str()).is_relative() {
                *s = base.join(&*s).to_string_lossy().into_owned();
            }
        }
    }
    Ok(v)
}

fn plain(e: aot_core::Error) -> String {
    match e {
        aot_core::Error::Config(m) => m,
        other => other.to_string(),
    }
}

impl Config {
    /// Deserializes and validates, reporting unknown keys and all semantic
    /// problems together.
    pub fn from_tree(v: Value) -> Result<Config, ConfigError> {
        let mut unknown = Vec::new();
        let parsed: Result<Config, _> = serde_ignored::deserialize(v.clone(), |p| unknown.push(p.to_string()));
        let mut problems: Vec<(String, String)> = unknown.into_iter().map(|k| (k, "unknown key".to_string())).collect();
        let cfg = match parsed {
            Ok(c) => c,
            Err(_) => {
                let e = serde_path_to_error::deserialize::<_, Config>(v).expect_err("same input failed above");
                let path = e.path().to_string();
                let key = if path == "." { "(root)".to_string() } else { path };
                problems.push((key, e.into_inner().to_string()));
                return Err(ConfigError { problems });
            }
        };
        problems.extend(cfg.check());
        if problems.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigError { problems })
        }
    }

    pub fn load(path: &Path, overrides: &[(String, Value)]) -> Result<Config, ConfigError> {
        let mut tree = read_tree(path)?;
        for (k, v) in overrides {
            set_key(&mut tree, k, v.clone())?;
        }
        Config::from_tree(tree)
    }

    fn check(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut bad = |k: &str, m: String| out.push((k.to_string(), m));
        match self.strategy.name.parse::<Strategy>() {
            Err(e) => bad("strategy.name", plain(e)),
            Ok(s) if !s.is_supported() => bad("strategy.name", format!("'{s}' is not implemented")),
            Ok(_) => {}
        }
        if let Err(e) = parse_stage_set(&self.strategy.stages) {
            bad("strategy.stages", plain(e));
        }
        for (k, m) in [("strategy.abstraction_model", &self.strategy.abstraction_model), ("strategy.translation_model", &self.strategy.translation_model)] {
            if m.trim().is_empty() {
                bad(k, "must not be empty".into());
            }
        }
        let s = &self.sampling;
        if !(0.0..=2.0).contains(&s.temperature) {
            bad("sampling.temperature", format!("{} is outside [0, 2]", s.temperature));
        }
        if !(s.top_p > 0.0 && s.top_p <= 1.0) {
            bad("sampling.top_p", format!("{} is outside (0, 1]", s.top_p));
        }
        if s.n < 1 {
            bad("sampling.n", "must be at least 1".into());
        }
        if s.runs < 1 {
            bad("sampling.runs", "must be at least 1".into());
        }
        if let (Some(ks), true) = (&self.output.ks, s.n >= 1) {
            if ks.is_empty() {
                bad("output.ks", "must list at least one k".into());
            }
            for k in ks {
                if *k < 1 || *k > s.n {
                    bad("output.ks", format!("k = {k} is outside 1..={}", s.n));
                }
            }
        }
        if self.workers < 1 {
            bad("workers", "must be at least 1".into());
        }
        if self.models.max_concurrency < 1 {
            bad("models.max_concurrency", "must be at least 1".into());
        }
        if self.simulator.timeout_secs < 1 {
            bad("simulator.timeout_secs", "must be at least 1".into());
        }
        if self.simulator.engine == Engine::External {
            if self.simulator.compile.is_empty() {
                bad("simulator.compile", "required by the external engine".into());
            }
            if self.simulator.run.is_empty() {
                bad("simulator.run", "required by the external engine".into());
            }
        }
        if self.problems.limit == Some(0) {
            bad("problems.limit", "must be at least 1".into());
        }
        out
    }

    pub fn ks(&self) -> Vec<u32> {
        let ks = self.output.ks.clone().unwrap_or_else(|| vec![1, self.sampling.n]);
        ks.into_iter().collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// The core strategy configuration. Only valid after [`Config::from_tree`].
    pub fn strategy_config(&self) -> StrategyConfig {
        StrategyConfig {
            strategy: self.strategy.name.parse().expect("validated"),
            aot_stages: parse_stage_set(&self.strategy.stages).expect("validated"),
            abstraction_model: self.strategy.abstraction_model.clone(),
            translation_model: self.strategy.translation_model.clone(),
            n: self.sampling.n,
            temperature: self.sampling.temperature,
            top_p: self.sampling.top_p,
            top_k: self.sampling.top_k,
            max_output_tokens: self.sampling.max_output_tokens,
            runs: self.sampling.runs,
        }
    }
}
