//! Runs the stages of one strategy for each (problem, sample, run).

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backend::{BackendError, Backends, GenerationRequest, RequestTag};
use crate::error::{Error, Result};
use crate::extract::{assemble_candidate, extract_classification1, extract_classification2, extract_json_block, extract_pseudocode};
use crate::ir::{parse_ir, Strictness};
use crate::problem::{AbstractionTrace, AotStage, Classification1, Classification2, DesignProblem, Stage, StageFailure, StageRecord, Strategy, StrategyConfig};
use crate::templates::TemplateSet;

pub const JOURNAL_SCHEMA_VERSION: u32 = 1;

/// Which model serves each stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRouting {
    pub models: BTreeMap<Stage, String>,
}

impl StageRouting {
    pub fn from_config(cfg: &StrategyConfig) -> Self {
        let a = &cfg.abstraction_model;
        let t = &cfg.translation_model;
        let mut m = BTreeMap::new();
        match cfg.strategy {
            Strategy::Aot => {
                for s in [Stage::Cls1, Stage::Cls2, Stage::Ir, Stage::Pseudocode] {
                    m.insert(s, a.clone());
                }
                m.insert(Stage::Final, t.clone());
            }
            Strategy::Baseline => {
                m.insert(Stage::Baseline, t.clone());
            }
            Strategy::OneShot => {
                m.insert(Stage::OneShot, t.clone());
            }
            Strategy::CotExplicit => {
                m.insert(Stage::CoT, t.clone());
            }
            Strategy::CotImplicitMultiModel => {
                m.insert(Stage::CoT, a.clone());
                m.insert(Stage::Final, t.clone());
            }
            Strategy::Sot | Strategy::Tot => {}
        }
        StageRouting { models: m }
    }

    pub fn model(&self, stage: Stage) -> Result<&str> {
        self.models.get(&stage).map(String::as_str).ok_or_else(|| Error::Config(format!("no model routed for stage {stage}")))
    }
}

/// Everything needed to run samples. Shared read-only across workers.
pub struct Pipeline {
    pub cfg: StrategyConfig,
    pub routing: StageRouting,
    pub backends: Backends,
    pub templates: TemplateSet,
    pub strictness: Strictness,
}

/// Why a stage call did not yield a usable artifact.
enum StageError {
    /// The backend gave up; the trace fails here.
    Backend(BackendError),
    /// The response could not be used; the caller may retry or degrade.
    Unusable(String),
}

impl Pipeline {
    /// Checks the config and that every routed model has a backend.
    pub fn new(cfg: StrategyConfig, backends: Backends, templates: TemplateSet) -> Result<Self> {
        cfg.validate()?;
        let routing = StageRouting::from_config(&cfg);
        for model in routing.models.values() {
            backends.get(model)?;
        }
        Ok(Pipeline { cfg, routing, backends, templates, strictness: Strictness::Lenient })
    }

    fn call(&self, trace: &mut AbstractionTrace, stage: Stage, prompt: String, attempt: u32) -> std::result::Result<String, BackendError> {
        let model = self.routing.model(stage).map_err(|e| BackendError::UnknownModel(e.to_string()))?.to_string();
        let req = GenerationRequest {
            model: model.clone(),
            prompt,
            temperature: self.cfg.temperature,
            top_p: self.cfg.top_p,
            top_k: self.cfg.top_k,
            max_output_tokens: self.cfg.max_output_tokens,
            tag: RequestTag { task_id: trace.task_id.clone(), stage, sample_index: trace.sample_index, run_index: trace.run_index, attempt },
        };
        let r = self.backends.get(&model)?.generate(&req)?;
        trace.stage_records.push(StageRecord {
            stage,
            prompt: req.prompt,
            response: r.text.clone(),
            model,
            input_tokens: r.input_tokens,
            output_tokens: r.output_tokens,
            attempt,
            cached: r.cached,
        });
        Ok(r.text)
    }

    /// Calls `stage` and parses the answer, re-prompting up to `retries`
    /// times when the answer cannot be used.
    fn call_parsed<T>(
        &self,
        trace: &mut AbstractionTrace,
        stage: Stage,
        prompt: &str,
        retries: u32,
        parse: impl Fn(&str) -> std::result::Result<T, String>,
    ) -> std::result::Result<T, StageError> {
        let mut last = String::new();
        for attempt in 0..=retries {
            let text = if attempt == 0 { prompt.to_string() } else { retry_prompt(prompt, &last) };
            let response = self.call(trace, stage, text, attempt).map_err(StageError::Backend)?;
            match parse(&response) {
                Ok(v) => return Ok(v),
                Err(e) => {
                    log::info!("{} sample {}: unusable {stage} answer (attempt {attempt}): {e}", trace.task_id, trace.sample_index);
                    last = e;
                }
            }
        }
        Err(StageError::Unusable(last))
    }

    /// Runs one sample. Never fails: errors are recorded in the trace.
    pub fn run_sample(&self, p: &DesignProblem, sample_index: u32, run_index: u32) -> AbstractionTrace {
        let mut trace = AbstractionTrace::new(&p.task_id, sample_index, run_index);
        if let Err((stage, message)) = self.run_into(p, &mut trace) {
            log::warn!("{} sample {} run {}: failed at {stage}: {message}", p.task_id, sample_index, run_index);
            trace.failure = Some(StageFailure { stage, message });
        }
        trace
    }

    fn run_into(&self, p: &DesignProblem, trace: &mut AbstractionTrace) -> std::result::Result<(), (Stage, String)> {
        match self.cfg.strategy {
            Strategy::Aot => self.run_aot(p, trace),
            Strategy::Baseline | Strategy::OneShot | Strategy::CotExplicit => {
                let r = self.templates.render_comparison(p, self.cfg.strategy).map_err(|e| (stage_of(self.cfg.strategy), e.to_string()))?;
                self.translate(p, trace, r.stage, r.text)
            }
            Strategy::CotImplicitMultiModel => {
                let r = self.templates.render_comparison(p, self.cfg.strategy).map_err(|e| (Stage::CoT, e.to_string()))?;
                let reasoning = self.call(trace, Stage::CoT, r.text, 0).map_err(|e| (Stage::CoT, e.to_string()))?;
                let f = self.templates.render_cot_final(p, &reasoning).map_err(|e| (Stage::Final, e.to_string()))?;
                self.translate(p, trace, Stage::Final, f.text)
            }
            Strategy::Sot | Strategy::Tot => Err((Stage::Final, format!("unsupported strategy '{}'", self.cfg.strategy))),
        }
    }

    fn translate(&self, p: &DesignProblem, trace: &mut AbstractionTrace, stage: Stage, prompt: String) -> std::result::Result<(), (Stage, String)> {
        let response = self.call(trace, stage, prompt, 0).map_err(|e| (stage, e.to_string()))?;
        let name = p.module_name().ok_or_else(|| (stage, "module header has no name".to_string()))?;
        let v = assemble_candidate(&response, &p.module_header, &name).map_err(|e| (stage, e.to_string()))?;
        trace.final_verilog = Some(v);
        Ok(())
    }

    fn run_aot(&self, p: &DesignProblem, trace: &mut AbstractionTrace) -> std::result::Result<(), (Stage, String)> {
        let stages = &self.cfg.aot_stages;
        let want_ir = stages.contains(&AotStage::Ir);
        let want_ps = stages.contains(&AotStage::Pseudocode);
        let fail = |stage: Stage| move |e: Error| (stage, e.to_string());

        if want_ir || want_ps {
            self.classify(p, trace)?;
        }

        if want_ir {
            match (trace.c1, trace.c2) {
                (Some(_), Some(Classification2::Other)) => log::debug!("{}: 'other' design, no IR", p.task_id),
                (Some(c1), Some(c2)) => {
                    let prompt = self.templates.render_ir(p, c1, c2).map_err(fail(Stage::Ir))?;
                    let strict = self.strictness;
                    let parsed = self.call_parsed(trace, Stage::Ir, &prompt.text, 1, |text| {
                        let json = extract_json_block(text).map_err(|e| e.to_string())?;
                        parse_ir(json, c2, strict).map_err(|e| e.to_string())
                    });
                    match parsed {
                        Ok(ir) => {
                            for w in &ir.warnings {
                                log::debug!("{} IR: {w}", p.task_id);
                            }
                            trace.ir = Some(ir.ir);
                        }
                        Err(StageError::Unusable(e)) => trace.degradations.push(format!("ir: {e}")),
                        Err(StageError::Backend(e)) => return Err((Stage::Ir, e.to_string())),
                    }
                }
                _ => trace.degradations.push("ir: skipped, classification unavailable".into()),
            }
        }

        if want_ps {
            let prompt = self.templates.render_pseudocode(p, trace.c1, trace.c2, trace.ir.as_ref()).map_err(fail(Stage::Pseudocode))?;
            match self.call_parsed(trace, Stage::Pseudocode, &prompt.text, 1, |t| extract_pseudocode(t).map_err(|e| e.to_string())) {
                Ok(lines) => trace.pseudocode = Some(lines),
                Err(StageError::Unusable(e)) => trace.degradations.push(format!("pseudocode: {e}")),
                Err(StageError::Backend(e)) => return Err((Stage::Pseudocode, e.to_string())),
            }
        }

        let mut effective: BTreeSet<AotStage> = stages
            .iter()
            .copied()
            .filter(|s| match s {
                AotStage::Base => true,
                AotStage::Ir => trace.ir.is_some() && trace.c1.is_some(),
                AotStage::Pseudocode => trace.pseudocode.is_some(),
            })
            .collect();
        if effective.is_empty() {
            trace.degradations.push("final: no abstraction available, using the base prompt".into());
            effective.insert(AotStage::Base);
        }
        let prompt = self.templates.render_final(p, trace, &effective).map_err(fail(Stage::Final))?;
        self.translate(p, trace, Stage::Final, prompt.text)
    }

    /// Fills `c1` and `c2`. An unusable answer leaves them unset.
    fn classify(&self, p: &DesignProblem, trace: &mut AbstractionTrace) -> std::result::Result<(), (Stage, String)> {
        let prompt = self.templates.render_cls1(p).map_err(|e| (Stage::Cls1, e.to_string()))?;
        let c1 = match self.call_parsed(trace, Stage::Cls1, &prompt.text, 0, |t| extract_classification1(t).map_err(|e| e.to_string())) {
            Ok(c) => c,
            Err(StageError::Unusable(e)) => {
                trace.degradations.push(format!("cls1: {e}"));
                return Ok(());
            }
            Err(StageError::Backend(e)) => return Err((Stage::Cls1, e.to_string())),
        };
        trace.c1 = Some(c1);
        let Some(prompt) = self.templates.render_cls2(p, c1).map_err(|e| (Stage::Cls2, e.to_string()))? else {
            trace.c2 = Some(Classification2::FsmImplied);
            return Ok(());
        };
        let parse = |t: &str| match extract_classification2(t) {
            Ok(c) if c.consistent_with(Classification1::Combinational) => Ok(c),
            Ok(c) => Err(format!("'{}' is not a combinational structure", c.as_str())),
            Err(e) => Err(e.to_string()),
        };
        match self.call_parsed(trace, Stage::Cls2, &prompt.text, 0, parse) {
            Ok(c) => trace.c2 = Some(c),
            Err(StageError::Unusable(e)) => trace.degradations.push(format!("cls2: {e}")),
            Err(StageError::Backend(e)) => return Err((Stage::Cls2, e.to_string())),
        }
        Ok(())
    }
}

fn stage_of(s: Strategy) -> Stage {
    match s {
        Strategy::Baseline => Stage::Baseline,
        Strategy::OneShot => Stage::OneShot,
        _ => Stage::CoT,
    }
}

fn retry_prompt(prompt: &str, problem: &str) -> String {
    format!("{prompt}\n\nYour previous answer could not be used ({problem}). Answer again in the requested format only.")
}

/// Identifies a configuration for resuming: strategy, sampling and the
/// template text all feed the hash.
pub fn config_hash(cfg: &StrategyConfig, templates: &TemplateSet) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(cfg).expect("config serializes"));
    for name in TemplateSet::names() {
        h.update(name.as_bytes());
        h.update([0]);
        h.update(templates.text(name).unwrap_or_default().as_bytes());
        h.update([0]);
    }
    hex::encode(h.finalize())
}

#[derive(Serialize, Deserialize)]
struct JournalLine {
    schema_version: u32,
    config_hash: String,
    trace: AbstractionTrace,
}

#[derive(Debug, Clone, Default)]
pub struct BenchmarkOptions {
    pub workers: usize,
    /// Append-only JSON Lines file of finished traces; reused on restart.
    pub journal: Option<std::path::PathBuf>,
}

type UnitKey = (String, u32, u32);

fn read_journal(path: &Path, hash: &str) -> Result<HashMap<UnitKey, AbstractionTrace>> {
    let mut done = HashMap::new();
    let f = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(done),
        Err(e) => return Err(Error::io(path, e)),
    };
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<JournalLine>(&line) {
            Ok(j) if j.schema_version == JOURNAL_SCHEMA_VERSION && j.config_hash == hash => {
                let t = j.trace;
                done.insert((t.task_id.clone(), t.sample_index, t.run_index), t);
            }
            Ok(_) => {}
            Err(e) => log::warn!("{}:{}: skipping unreadable journal line: {e}", path.display(), i + 1),
        }
    }
    Ok(done)
}

/// All `runs × n × problems` traces, ordered by run, then sample, then
/// problem. Units already in the journal under the same config are reused.
pub fn run_benchmark(pipeline: &Pipeline, problems: &[DesignProblem], opts: &BenchmarkOptions) -> Result<Vec<AbstractionTrace>> {
    use rayon::prelude::*;
    let mut ids = HashSet::new();
    for p in problems {
        if !ids.insert(p.task_id.as_str()) {
            return Err(Error::DuplicateTaskId(p.task_id.clone()));
        }
    }
    let hash = config_hash(&pipeline.cfg, &pipeline.templates);
    let mut done = match &opts.journal {
        Some(path) => read_journal(path, &hash)?,
        None => HashMap::new(),
    };
    let journal = match &opts.journal {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            let f = OpenOptions::new().create(true).append(true).open(path).map_err(|e| Error::io(path, e))?;
            Some(Mutex::new(f))
        }
        None => None,
    };

    let mut units = Vec::new();
    for r in 0..pipeline.cfg.runs {
        for s in 0..pipeline.cfg.n {
            for p in problems {
                units.push((p, s, r));
            }
        }
    }
    let reused = units.iter().filter(|(p, s, r)| done.contains_key(&(p.task_id.clone(), *s, *r))).count();
    if reused > 0 {
        log::info!("resuming: {reused} of {} samples already in the journal", units.len());
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(opts.workers.max(1)).build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let fresh: Vec<Result<AbstractionTrace>> = pool.install(|| {
        units
            .par_iter()
            .filter(|(p, s, r)| !done.contains_key(&(p.task_id.clone(), *s, *r)))
            .map(|&(p, s, r)| {
                let t = pipeline.run_sample(p, s, r);
                if let Some(j) = &journal {
                    let line = JournalLine { schema_version: JOURNAL_SCHEMA_VERSION, config_hash: hash.clone(), trace: t.clone() };
                    let mut text = serde_json::to_string(&line).expect("trace serializes");
                    text.push('\n');
                    let mut f = j.lock().unwrap_or_else(|e| e.into_inner());
                    f.write_all(text.as_bytes()).and_then(|_| f.flush()).map_err(|e| Error::io(opts.journal.as_ref().unwrap(), e))?;
                }
                log::info!("{} sample {} run {}: {}", p.task_id, s, r, t.failure.as_ref().map_or("done".to_string(), |f| format!("failed at {}", f.stage)));
                Ok(t)
            })
            .collect()
    });
    for t in fresh {
        let t = t?;
        done.insert((t.task_id.clone(), t.sample_index, t.run_index), t);
    }
    Ok(units.iter().map(|(p, s, r)| done.remove(&(p.task_id.clone(), *s, *r)).expect("every unit has a trace")).collect())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::backend::{BackendHandle, MockEntry, MockProvider, MockScript};

    fn problem(id: &str) -> DesignProblem {
        DesignProblem {
            task_id: id.into(),
            description: "Build an AND gate.".into(),
            module_header: "module top_module(input a, input b, output y);".into(),
            testbench: String::new(),
            canonical_solution: None,
            extra: Default::default(),
        }
    }

    fn backends(entries: Vec<MockEntry>) -> Backends {
        Backends::single(Arc::new(BackendHandle::new(Arc::new(MockProvider::new(MockScript { entries })))))
    }

    const GATE: &str = "module top_module(input a, input b, output y); assign y = a & b; endmodule";

    fn aot(stages: &[AotStage]) -> StrategyConfig {
        StrategyConfig { aot_stages: stages.iter().copied().collect(), n: 1, runs: 1, ..Default::default() }
    }

    #[test]
    fn base_only_is_single_final_stage() {
        let b = backends(vec![MockEntry { stage: Some(Stage::Final), ..MockEntry::reply(Stage::Final, "g", GATE) }]);
        let pl = Pipeline::new(aot(&[AotStage::Base]), b, TemplateSet::builtin()).unwrap();
        let t = pl.run_sample(&problem("g"), 0, 0);
        assert_eq!(t.stages(), [Stage::Final]);
        assert_eq!(t.stage_records[0].prompt, problem("g").base_prompt());
        assert!(t.final_verilog.is_some());
    }

    #[test]
    fn other_skips_ir() {
        let b = backends(vec![
            MockEntry::reply(Stage::Cls1, "g", "combinational"),
            MockEntry::reply(Stage::Cls2, "g", "other"),
            MockEntry::reply(Stage::Pseudocode, "g", "y <- a AND b"),
            MockEntry::reply(Stage::Final, "g", GATE),
        ]);
        let pl = Pipeline::new(aot(&[AotStage::Base, AotStage::Ir, AotStage::Pseudocode]), b, TemplateSet::builtin()).unwrap();
        let t = pl.run_sample(&problem("g"), 0, 0);
        assert_eq!(t.stages(), [Stage::Cls1, Stage::Cls2, Stage::Pseudocode, Stage::Final]);
        assert_eq!(t.c2, Some(Classification2::Other));
        assert!(t.ir.is_none() && t.failure.is_none());
    }

    #[test]
    fn bad_ir_retries_then_degrades() {
        let b = backends(vec![
            MockEntry::reply(Stage::Cls1, "g", "combinational"),
            MockEntry::reply(Stage::Cls2, "g", "truth_table"),
            MockEntry::reply(Stage::Ir, "g", "no json here"),
            MockEntry::reply(Stage::Final, "g", GATE),
        ]);
        let pl = Pipeline::new(aot(&[AotStage::Base, AotStage::Ir]), b, TemplateSet::builtin()).unwrap();
        let t = pl.run_sample(&problem("g"), 0, 0);
        assert_eq!(t.stages(), [Stage::Cls1, Stage::Cls2, Stage::Ir, Stage::Ir, Stage::Final]);
        assert_eq!(t.stage_records[3].attempt, 1);
        assert_eq!(t.degradations.len(), 1);
        // the degraded IR leaves only the base block, which is the baseline prompt
        assert_eq!(t.stage_records[4].prompt, problem("g").base_prompt());
    }

    #[test]
    fn missing_reply_fails_trace() {
        let pl = Pipeline::new(aot(&[AotStage::Base]), backends(vec![]), TemplateSet::builtin()).unwrap();
        let t = pl.run_sample(&problem("g"), 0, 0);
        assert_eq!(t.failure.unwrap().stage, Stage::Final);
    }

    #[test]
    fn routing_splits_models() {
        let cfg = StrategyConfig { abstraction_model: "small".into(), translation_model: "big".into(), ..Default::default() };
        let r = StageRouting::from_config(&cfg);
        assert_eq!(r.model(Stage::Ir).unwrap(), "small");
        assert_eq!(r.model(Stage::Final).unwrap(), "big");
        let mut b = Backends::new();
        b.register("small", Arc::new(BackendHandle::new(Arc::new(MockProvider::new(MockScript::default())))));
        assert!(Pipeline::new(cfg, b, TemplateSet::builtin()).is_err());
    }

    #[test]
    fn benchmark_counts_and_resume() {
        let dir = tempfile::tempdir().unwrap();
        let journal = dir.path().join("traces.journal");
        let b = backends(vec![MockEntry { task_id: None, ..MockEntry::reply(Stage::Final, "", GATE) }]);
        let cfg = StrategyConfig { aot_stages: [AotStage::Base].into_iter().collect(), n: 1, runs: 5, ..Default::default() };
        let pl = Pipeline::new(cfg, b, TemplateSet::builtin()).unwrap();
        let probs = [problem("a"), problem("b")];
        let opts = BenchmarkOptions { workers: 3, journal: Some(journal.clone()) };
        let first = run_benchmark(&pl, &probs, &opts).unwrap();
        assert_eq!(first.len(), 10);
        let again = run_benchmark(&pl, &probs, &opts).unwrap();
        assert_eq!(first, again);
        assert_eq!(std::fs::read_to_string(&journal).unwrap().lines().count(), 10);
        assert!(run_benchmark(&pl, &[], &BenchmarkOptions::default()).unwrap().is_empty());
    }
}
