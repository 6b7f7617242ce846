//! Compiling and running one candidate against its testbench.

use std::fs::File;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use super::EvalError;
use crate::extract::assemble_candidate;
use crate::problem::{AbstractionTrace, DesignProblem};

pub const DEFAULT_MISMATCH_REGEX: &str = r"Mismatches:\s*(\d+)\s+in\s+\d+\s+samples";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimulatorKind {
    /// Two external commands. Arguments may contain `{scratch}`,
    /// `{testbench}` and `{candidate}`.
    External { compile: Vec<String>, run: Vec<String> },
    /// The in-process simulator.
    Builtin,
}

impl SimulatorKind {
    pub fn iverilog() -> Self {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect();
        SimulatorKind::External {
            compile: s(&["iverilog", "-Wall", "-Winfloop", "-Wno-timescale", "-g2012", "-o", "{scratch}/sim.vvp", "{testbench}", "{candidate}"]),
            run: s(&["vvp", "-n", "{scratch}/sim.vvp"]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulatorConfig {
    pub kind: SimulatorKind,
    pub timeout_secs: u64,
    pub mismatch_regex: String,
    /// Keep the scratch directory of samples that fail.
    #[serde(default)]
    pub keep_scratch: bool,
    /// Parent of scratch directories; the system temp dir when absent.
    #[serde(default)]
    pub scratch_root: Option<PathBuf>,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        SimulatorConfig {
            kind: SimulatorKind::iverilog(),
            timeout_secs: 30,
            mismatch_regex: DEFAULT_MISMATCH_REGEX.to_string(),
            keep_scratch: false,
            scratch_root: None,
        }
    }
}

impl SimulatorConfig {
    pub fn builtin() -> Self {
        SimulatorConfig { kind: SimulatorKind::Builtin, ..Default::default() }
    }

    /// Fails with an environment error when an external binary is missing.
    pub fn probe(&self) -> Result<(), EvalError> {
        if let SimulatorKind::External { compile, run } = &self.kind {
            for argv in [compile, run] {
                let prog = argv.first().ok_or_else(|| EvalError::Environment("empty simulator command".into()))?;
                if prog.contains('{') {
                    continue;
                }
                if which(prog).is_none() {
                    return Err(EvalError::Environment(format!("simulator binary '{prog}' not found on PATH")));
                }
            }
        }
        Regex::new(&self.mismatch_regex).map_err(|e| EvalError::Environment(format!("mismatch_regex: {e}")))?;
        Ok(())
    }
}

fn which(prog: &str) -> Option<PathBuf> {
    let p = Path::new(prog);
    if p.components().count() > 1 {
        return p.is_file().then(|| p.to_path_buf());
    }
    std::env::split_paths(&std::env::var_os("PATH")?).map(|d| d.join(prog)).find(|c| c.is_file())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub task_id: String,
    pub sample_index: u32,
    pub run_index: u32,
    pub compiled: bool,
    pub functional: bool,
    #[serde(default)]
    pub timed_out: bool,
    pub log: String,
    pub wall_ms: u64,
}

const LOG_LIMIT: usize = 4000;

fn excerpt(s: &str) -> String {
    if s.len() <= LOG_LIMIT {
        return s.to_string();
    }
    let mut start = s.len() - LOG_LIMIT;
    while !s.is_char_boundary(start) {
        start += 1;
    }
    format!("...{}", &s[start..])
}

fn mismatches(re: &Regex, out: &str) -> Option<u64> {
    re.captures_iter(out).last().and_then(|c| c.get(1)).and_then(|m| m.as_str().parse().ok())
}

/// Compiles `verilog` with the problem's testbench and runs it.
pub fn check_sample(problem: &DesignProblem, verilog: &str, sim: &SimulatorConfig) -> Result<SampleOutcome, EvalError> {
    let started = Instant::now();
    let re = Regex::new(&sim.mismatch_regex).map_err(|e| EvalError::Environment(format!("mismatch_regex: {e}")))?;
    let mut o = SampleOutcome {
        task_id: problem.task_id.clone(),
        sample_index: 0,
        run_index: 0,
        compiled: false,
        functional: false,
        timed_out: false,
        log: String::new(),
        wall_ms: 0,
    };
    if verilog.trim().is_empty() {
        o.log = "empty candidate".into();
        return Ok(o);
    }
    let timeout = Duration::from_secs(sim.timeout_secs);
    match &sim.kind {
        SimulatorKind::Builtin => match vsim::compile(&[("testbench.sv", &problem.testbench), ("candidate.sv", verilog)]) {
            Err(e) => o.log = format!("compile: {e}"),
            Ok(design) => {
                o.compiled = true;
                let limits = vsim::Limits { deadline: Some(Instant::now() + timeout), ..Default::default() };
                match design.run(limits) {
                    Ok(run) => {
                        let zero = mismatches(&re, &run.output) == Some(0);
                        o.functional = zero && !run.fatal && !run.truncated;
                        o.log = excerpt(&run.output);
                    }
                    Err(vsim::RuntimeError::Deadline(t)) => {
                        o.timed_out = true;
                        o.log = format!("timed out at simulation time {t}");
                    }
                    Err(e) => o.log = e.to_string(),
                }
            }
        },
        SimulatorKind::External { compile, run } => {
            let mut b = tempfile::Builder::new();
            b.prefix("aot-sim-");
            let dir = match &sim.scratch_root {
                Some(root) => {
                    std::fs::create_dir_all(root).map_err(|e| EvalError::Io(format!("{}: {e}", root.display())))?;
                    b.tempdir_in(root)
                }
                None => b.tempdir(),
            }
            .map_err(|e| EvalError::Io(format!("scratch directory: {e}")))?;
            let tb = dir.path().join("testbench.sv");
            let cand = dir.path().join("candidate.sv");
            std::fs::write(&tb, &problem.testbench).map_err(|e| EvalError::Io(e.to_string()))?;
            std::fs::write(&cand, verilog).map_err(|e| EvalError::Io(e.to_string()))?;
            let subst = |argv: &[String]| -> Vec<String> {
                argv.iter()
                    .map(|a| {
                        a.replace("{scratch}", &dir.path().to_string_lossy())
                            .replace("{testbench}", &tb.to_string_lossy())
                            .replace("{candidate}", &cand.to_string_lossy())
                    })
                    .collect()
            };
            let c = run_step(&subst(compile), dir.path(), "compile", timeout)?;
            o.compiled = c.success;
            o.timed_out = c.timed_out;
            o.log = c.output;
            if o.compiled {
                let r = run_step(&subst(run), dir.path(), "run", timeout)?;
                o.timed_out = r.timed_out;
                o.functional = r.success && mismatches(&re, &r.output) == Some(0);
                o.log = excerpt(&r.output);
            } else {
                o.log = excerpt(&o.log);
            }
            if !o.functional && sim.keep_scratch {
                let kept = dir.keep();
                o.log.push_str(&format!("\n[scratch kept at {}]", kept.display()));
            }
        }
    }
    o.wall_ms = started.elapsed().as_millis() as u64;
    Ok(o)
}

struct Step {
    success: bool,
    timed_out: bool,
    output: String,
}

fn run_step(argv: &[String], scratch: &Path, name: &str, timeout: Duration) -> Result<Step, EvalError> {
    let (prog, args) = argv.split_first().ok_or_else(|| EvalError::Environment(format!("empty {name} command")))?;
    let out_path = scratch.join(format!("{name}.out"));
    let err_path = scratch.join(format!("{name}.err"));
    let io = |e: std::io::Error| EvalError::Io(format!("{name}: {e}"));
    let mut child = match Command::new(prog)
        .args(args)
        .current_dir(scratch)
        .stdin(Stdio::null())
        .stdout(File::create(&out_path).map_err(io)?)
        .stderr(File::create(&err_path).map_err(io)?)
        .spawn()
    {
        Ok(c) => c,
        Err(e) if e.kind() == ErrorKind::NotFound => {
            return Err(EvalError::Environment(format!("simulator binary '{prog}' not found")));
        }
        Err(e) => return Err(io(e)),
    };
    let (success, timed_out) = match child.wait_timeout(timeout).map_err(io)? {
        Some(status) => (status.success(), false),
        None => {
            let _ = child.kill();
            let _ = child.wait();
            (false, true)
        }
    };
    let mut output = String::from_utf8_lossy(&std::fs::read(&out_path).unwrap_or_default()).into_owned();
    output.push_str(&String::from_utf8_lossy(&std::fs::read(&err_path).unwrap_or_default()));
    if timed_out {
        output.push_str(&format!("\n[{name} timed out after {}s]", timeout.as_secs()));
    }
    Ok(Step { success, timed_out, output })
}

/// Scores the Verilog a trace produced. Failed or empty traces count as
/// not compiled.
pub fn check_trace(problem: &DesignProblem, trace: &AbstractionTrace, sim: &SimulatorConfig) -> Result<SampleOutcome, EvalError> {
    let candidate = match (&trace.failure, &trace.final_verilog) {
        (None, Some(v)) => Some(v.clone()),
        _ => None,
    };
    let mut o = match candidate {
        Some(v) => check_sample(problem, &v, sim)?,
        None => SampleOutcome {
            task_id: problem.task_id.clone(),
            sample_index: 0,
            run_index: 0,
            compiled: false,
            functional: false,
            timed_out: false,
            log: match &trace.failure {
                Some(f) => format!("pipeline failed at {}: {}", f.stage, f.message),
                None => "no Verilog produced".into(),
            },
            wall_ms: 0,
        },
    };
    o.sample_index = trace.sample_index;
    o.run_index = trace.run_index;
    Ok(o)
}

/// Checks every trace on `workers` threads, in trace order. The first
/// environment error aborts the whole evaluation.
pub fn check_traces(problems: &[DesignProblem], traces: &[AbstractionTrace], sim: &SimulatorConfig, workers: usize) -> Result<Vec<SampleOutcome>, EvalError> {
    use rayon::prelude::*;
    sim.probe()?;
    let by_id: std::collections::HashMap<&str, &DesignProblem> = problems.iter().map(|p| (p.task_id.as_str(), p)).collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build().map_err(|e| EvalError::Environment(format!("thread pool: {e}")))?;
    pool.install(|| {
        traces
            .par_iter()
            .map(|t| {
                let p = by_id.get(t.task_id.as_str()).ok_or_else(|| EvalError::Dimension(format!("trace for unknown problem '{}'", t.task_id)))?;
                let o = check_trace(p, t, sim)?;
                log::debug!("{} sample {} run {}: compiled={} functional={}", o.task_id, o.sample_index, o.run_index, o.compiled, o.functional);
                Ok(o)
            })
            .collect()
    })
}

/// A final-stage response as a compilable unit, if one can be formed.
pub fn candidate_source(problem: &DesignProblem, response: &str) -> Option<String> {
    let name = problem.module_name()?;
    assemble_candidate(response, &problem.module_header, &name).ok()
}
