use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use aot_core::backend::{BackendHandle, Backends, MockProvider, MockScript, OpenAiProvider, ResponseCache, RetryPolicy};
use aot_core::eval::{check_traces, render_comparison_table, render_summary, score_run, EvalError, EvalReport, SimulatorConfig};
use aot_core::problem::{ablation_stage_sets, load_problems, stage_set_label};
use aot_core::{run_benchmark, AbstractionTrace, BenchmarkOptions, DesignProblem, Pipeline, Strategy, StrategyConfig, TemplateSet};
use serde::Serialize;

use crate::config::{BackendSection, Config, ConfigError};
use crate::CliError;

/// Everything a command needs once the configuration checks out.
pub struct Prepared {
    pub cfg: Config,
    pub problems: Vec<DesignProblem>,
    pub backend: Arc<BackendHandle>,
    pub templates: TemplateSet,
    /// `None` when evaluation is disabled.
    pub sim: Option<SimulatorConfig>,
}

fn key_err(key: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Config(ConfigError { problems: vec![(key.to_string(), e.to_string())] })
}

fn environment(e: EvalError) -> CliError {
    match e {
        EvalError::Environment(m) => CliError::Environment(m),
        other => CliError::Failed(other.to_string()),
    }
}

fn core_err(e: aot_core::Error) -> CliError {
    match e {
        aot_core::Error::Eval(e) => environment(e),
        other => CliError::Failed(other.to_string()),
    }
}

pub fn prepare(cfg: Config) -> Result<Prepared, CliError> {
    let p = &cfg.problems;
    let loaded = load_problems(&p.problem_file, p.description_file.as_deref()).map_err(|e| key_err("problems", e))?;
    for w in &loaded.warnings {
        log::warn!("{w}");
    }
    let mut problems = loaded.problems;
    if let Some(ids) = &p.task_ids {
        let missing: Vec<&str> = ids.iter().filter(|id| !problems.iter().any(|q| &q.task_id == *id)).map(String::as_str).collect();
        if !missing.is_empty() {
            return Err(key_err("problems.task_ids", format!("unknown task ids: {}", missing.join(", "))));
        }
        problems.retain(|q| ids.contains(&q.task_id));
    }
    if let Some(limit) = p.limit {
        problems.truncate(limit);
    }
    if problems.is_empty() {
        return Err(CliError::Failed("the problem set is empty".into()));
    }

    let templates = match &cfg.templates_dir {
        Some(dir) => TemplateSet::with_overrides(dir).map_err(|e| key_err("templates_dir", e))?,
        None => TemplateSet::builtin(),
    };

    let provider: Arc<dyn aot_core::backend::ChatProvider> = match &cfg.models.backend {
        BackendSection::Mock { script } => Arc::new(MockProvider::new(MockScript::load(script).map_err(|e| key_err("models.backend.script", e))?)),
        BackendSection::Openai(o) => Arc::new(OpenAiProvider::new(o.clone()).map_err(|e| CliError::Environment(e.to_string()))?),
    };
    let retry = RetryPolicy { max_retries: cfg.models.max_retries, ..Default::default() };
    let mut handle = BackendHandle::new(provider).with_retry(retry).with_max_concurrency(cfg.models.max_concurrency);
    if let Some(dir) = &cfg.models.cache_dir {
        let cache = ResponseCache::on_disk(dir).map_err(|e| key_err("models.cache_dir", format!("{}: {e}", dir.display())))?;
        handle = handle.with_cache(Arc::new(cache));
    }

    let sim = if cfg.simulator.enabled {
        let sim = cfg.simulator.to_core();
        // Before any model call, so a broken install costs nothing.
        sim.probe().map_err(environment)?;
        Some(sim)
    } else {
        None
    };
    Ok(Prepared { cfg, problems, backend: Arc::new(handle), templates, sim })
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), CliError> {
    let mut text = String::new();
    for it in items {
        text.push_str(&serde_json::to_string(it).expect("serializable"));
        text.push('\n');
    }
    write_file(path, &text)
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Failed(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write_file(path, &text)
}

/// What one configuration produced.
pub struct Execution {
    pub dir: PathBuf,
    pub traces: Vec<AbstractionTrace>,
    pub report: Option<EvalReport>,
}

/// Generates, evaluates and scores one strategy configuration into `dir`.
pub fn execute(prep: &Prepared, scfg: StrategyConfig, dir: &Path) -> Result<Execution, CliError> {
    let pipeline = Pipeline::new(scfg.clone(), Backends::single(prep.backend.clone()), prep.templates.clone()).map_err(core_err)?;
    std::fs::create_dir_all(dir).map_err(|e| CliError::Failed(format!("{}: {e}", dir.display())))?;
    let opts = BenchmarkOptions { workers: prep.cfg.workers, journal: Some(dir.join("journal.jsonl")) };
    let traces = run_benchmark(&pipeline, &prep.problems, &opts).map_err(core_err)?;
    write_jsonl(&dir.join("traces.jsonl"), &traces)?;
    let failed = traces.iter().filter(|t| t.failure.is_some()).count();
    if failed > 0 {
        log::warn!("{failed} of {} samples stopped early; see traces.jsonl", traces.len());
    }
    let report = match &prep.sim {
        Some(sim) => Some(evaluate(prep, &scfg, &traces, sim, dir)?),
        None => {
            log::info!("evaluation disabled; no report written");
            None
        }
    };
    Ok(Execution { dir: dir.to_path_buf(), traces, report })
}

fn evaluate(prep: &Prepared, scfg: &StrategyConfig, traces: &[AbstractionTrace], sim: &SimulatorConfig, dir: &Path) -> Result<EvalReport, CliError> {
    let outcomes = check_traces(&prep.problems, traces, sim, prep.cfg.workers).map_err(environment)?;
    write_jsonl(&dir.join("outcomes.jsonl"), &outcomes)?;
    let report = score_run(traces, &outcomes, scfg, &prep.cfg.ks()).map_err(|e| CliError::Failed(e.to_string()))?;
    write_json(&dir.join("report.json"), &report)?;
    write_file(&dir.join("summary.txt"), &render_summary(&report))?;
    Ok(report)
}

fn print(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes());
    if !text.ends_with('\n') {
        let _ = out.write_all(b"\n");
    }
}

pub fn cmd_run(cfg: Config) -> Result<Execution, CliError> {
    let scfg = cfg.strategy_config();
    let dir = cfg.output.dir.clone();
    let prep = prepare(cfg)?;
    let ex = execute(&prep, scfg, &dir)?;
    match &ex.report {
        Some(r) => print(&render_summary(r)),
        None => print(&format!("{} traces written to {}", ex.traces.len(), dir.join("traces.jsonl").display())),
    }
    Ok(ex)
}

/// Directory name for a stage set, e.g. `base-ir-pseudo`.
pub fn ablation_slug(label: &str) -> String {
    label.to_lowercase().replace('+', "-")
}

/// Runs the six stage-set configurations in order.
pub fn cmd_ablate(cfg: Config) -> Result<Vec<Execution>, CliError> {
    let base = StrategyConfig { strategy: Strategy::Aot, ..cfg.strategy_config() };
    let root = cfg.output.dir.join("ablation");
    let ks = cfg.ks();
    let prep = prepare(cfg)?;
    let mut runs = Vec::new();
    for stages in ablation_stage_sets() {
        let label = stage_set_label(&stages);
        log::info!("ablation: {label}");
        let scfg = StrategyConfig { aot_stages: stages, ..base.clone() };
        runs.push(execute(&prep, scfg, &root.join(ablation_slug(&label)))?);
    }
    let reports: Vec<EvalReport> = runs.iter().filter_map(|r| r.report.clone()).collect();
    if reports.len() == runs.len() {
        let table: Vec<String> = ks.iter().map(|k| render_comparison_table(&reports, *k)).collect();
        let table = table.join("\n");
        write_file(&root.join("ablation.txt"), &table)?;
        write_json(&root.join("ablation.json"), &reports)?;
        print(&table);
    } else {
        print(&format!("{} configurations generated under {}", runs.len(), root.display()));
    }
    Ok(runs)
}

/// Re-evaluates traces already on disk.
pub fn cmd_score(cfg: Config, traces_path: Option<PathBuf>) -> Result<EvalReport, CliError> {
    let scfg = cfg.strategy_config();
    let dir = cfg.output.dir.clone();
    let path = traces_path.unwrap_or_else(|| dir.join("traces.jsonl"));
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))?;
    let traces: Vec<AbstractionTrace> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| CliError::Failed(format!("{}:{}: {e}", path.display(), i + 1))))
        .collect::<Result<_, _>>()?;
    let prep = prepare(cfg)?;
    let sim = prep.sim.clone().ok_or_else(|| key_err("simulator.enabled", "scoring needs the simulator"))?;
    let report = evaluate(&prep, &scfg, &traces, &sim, &dir)?;
    print(&render_summary(&report));
    Ok(report)
}
