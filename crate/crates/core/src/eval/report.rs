use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{mean_sd, pass_at_k, EvalError, MeanSd, SampleOutcome};
use crate::problem::{stage_set_label, AbstractionTrace, Strategy, StrategyConfig};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Successes of one problem in one run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunCounts {
    pub compiled: u32,
    pub functional: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemRow {
    pub task_id: String,
    /// Indexed by run.
    pub runs: Vec<RunCounts>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunScore {
    pub run_index: u32,
    /// k to pass@k averaged over problems, as a fraction.
    pub compile: BTreeMap<u32, f64>,
    pub functional: BTreeMap<u32, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSummary {
    pub k: u32,
    pub compile: MeanSd,
    pub functional: MeanSd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenStats {
    /// Per sample, summed over its stages.
    pub avg_input: f64,
    pub avg_output: f64,
    /// AoT only: abstraction-stage output tokens per sample divided by 3.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_abstraction: Option<f64>,
    pub total_input: u64,
    pub total_output: u64,
    pub total_abstraction_output: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub samples: u32,
    pub compiled: u32,
    pub functional: u32,
    pub timed_out: u32,
    /// Traces whose pipeline stopped before producing Verilog.
    pub failed_traces: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    /// e.g. "aot Base+IR+Pseudo" or "baseline".
    pub label: String,
    pub config: StrategyConfig,
    pub n: u32,
    pub runs: u32,
    pub ks: Vec<u32>,
    pub problems: Vec<ProblemRow>,
    pub per_run: Vec<RunScore>,
    pub summary: Vec<KSummary>,
    pub tokens: TokenStats,
    pub totals: Totals,
}

pub fn config_label(cfg: &StrategyConfig) -> String {
    match cfg.strategy {
        Strategy::Aot => format!("aot {}", stage_set_label(&cfg.aot_stages)),
        s => s.to_string(),
    }
}

/// Folds outcomes into a report. Every trace needs exactly one outcome,
/// and every problem exactly `cfg.n` samples in each of `cfg.runs` runs.
pub fn score_run(traces: &[AbstractionTrace], outcomes: &[SampleOutcome], cfg: &StrategyConfig, ks: &[u32]) -> Result<EvalReport, EvalError> {
    let n = cfg.n;
    let mut ks: Vec<u32> = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() {
        return Err(EvalError::Domain("no k values requested".into()));
    }
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > n) {
        return Err(EvalError::Domain(format!("k = {k} is outside 1..={n}")));
    }
    if traces.len() != outcomes.len() {
        return Err(EvalError::Dimension(format!("{} traces but {} outcomes", traces.len(), outcomes.len())));
    }

    let mut order: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for t in traces {
        if !index.contains_key(&t.task_id) {
            index.insert(t.task_id.clone(), order.len());
            order.push(t.task_id.clone());
        }
    }
    let mut seen: HashMap<(usize, u32, u32), bool> = HashMap::new();
    let mut counts = vec![vec![RunCounts::default(); cfg.runs as usize]; order.len()];
    let mut samples = vec![vec![0u32; cfg.runs as usize]; order.len()];
    let mut totals = Totals::default();
    for (t, o) in traces.iter().zip(outcomes) {
        if (t.task_id.as_str(), t.sample_index, t.run_index) != (o.task_id.as_str(), o.sample_index, o.run_index) {
            return Err(EvalError::Dimension(format!(
                "outcome {}#{}/{} does not belong to trace {}#{}/{}",
                o.task_id, o.sample_index, o.run_index, t.task_id, t.sample_index, t.run_index
            )));
        }
        if t.run_index >= cfg.runs || t.sample_index >= n {
            return Err(EvalError::Dimension(format!("{} sample {} run {} is outside n = {n}, runs = {}", t.task_id, t.sample_index, t.run_index, cfg.runs)));
        }
        let p = index[&t.task_id];
        if seen.insert((p, t.sample_index, t.run_index), true).is_some() {
            return Err(EvalError::Dimension(format!("duplicate sample {} run {} for {}", t.sample_index, t.run_index, t.task_id)));
        }
        let c = &mut counts[p][t.run_index as usize];
        samples[p][t.run_index as usize] += 1;
        totals.samples += 1;
        if o.compiled {
            c.compiled += 1;
            totals.compiled += 1;
        }
        if o.functional {
            if !o.compiled {
                return Err(EvalError::Dimension(format!("{} sample {}: functional without compiling", o.task_id, o.sample_index)));
            }
            c.functional += 1;
            totals.functional += 1;
        }
        if o.timed_out {
            totals.timed_out += 1;
        }
        if t.failure.is_some() {
            totals.failed_traces += 1;
        }
    }
    for (p, per_run) in samples.iter().enumerate() {
        if let Some((r, &got)) = per_run.iter().enumerate().find(|(_, &s)| s != n) {
            return Err(EvalError::Dimension(format!("{} has {got} samples in run {r}, expected {n}", order[p])));
        }
    }

    let mut per_run = Vec::new();
    if !order.is_empty() {
        for r in 0..cfg.runs as usize {
            let mut compile = BTreeMap::new();
            let mut functional = BTreeMap::new();
            for &k in &ks {
                let mut sc = 0.0;
                let mut sf = 0.0;
                for row in &counts {
                    sc += pass_at_k(n, row[r].compiled, k)?;
                    sf += pass_at_k(n, row[r].functional, k)?;
                }
                compile.insert(k, sc / order.len() as f64);
                functional.insert(k, sf / order.len() as f64);
            }
            per_run.push(RunScore { run_index: r as u32, compile, functional });
        }
    }
    let mut summary = Vec::new();
    if !per_run.is_empty() {
        for &k in &ks {
            let c: Vec<f64> = per_run.iter().map(|r| r.compile[&k]).collect();
            let f: Vec<f64> = per_run.iter().map(|r| r.functional[&k]).collect();
            summary.push(KSummary { k, compile: mean_sd(&c)?, functional: mean_sd(&f)? });
        }
    }

    let total_input: u64 = traces.iter().map(|t| t.total_input_tokens()).sum();
    let total_output: u64 = traces.iter().map(|t| t.total_output_tokens()).sum();
    let total_abstraction_output: u64 = traces.iter().map(|t| t.abstraction_output_tokens()).sum();
    let count = traces.len().max(1) as f64;
    let tokens = TokenStats {
        avg_input: total_input as f64 / count,
        avg_output: total_output as f64 / count,
        per_abstraction: (cfg.strategy == Strategy::Aot && !traces.is_empty()).then(|| total_abstraction_output as f64 / count / 3.0),
        total_input,
        total_output,
        total_abstraction_output,
    };

    let problems = order.into_iter().zip(counts).map(|(task_id, runs)| ProblemRow { task_id, runs }).collect();
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        label: config_label(cfg),
        config: cfg.clone(),
        n,
        runs: cfg.runs,
        ks,
        problems,
        per_run,
        summary,
        tokens,
        totals,
    })
}

fn pct(m: &MeanSd) -> String {
    match m.sd {
        Some(sd) => format!("{:.1} ± {:.1}", m.mean * 100.0, sd * 100.0),
        None => format!("{:.1}", m.mean * 100.0),
    }
}

/// Plain-text summary of one report.
pub fn render_summary(r: &EvalReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{}: {} problems, n = {}, runs = {}", r.label, r.problems.len(), r.n, r.runs);
    let _ = writeln!(s, "{:<8} {:>16} {:>16}", "metric", "compile %", "functional %");
    for k in &r.summary {
        let _ = writeln!(s, "{:<8} {:>16} {:>16}", format!("pass@{}", k.k), pct(&k.compile), pct(&k.functional));
    }
    let _ = writeln!(s, "avg input tokens  {:.1}", r.tokens.avg_input);
    let _ = writeln!(s, "avg output tokens {:.1}", r.tokens.avg_output);
    if let Some(pa) = r.tokens.per_abstraction {
        let _ = writeln!(s, "per abstraction   {pa:.1}");
    }
    let t = &r.totals;
    let _ = writeln!(
        s,
        "samples {}  compiled {}  functional {}  timed out {}  failed traces {}",
        t.samples, t.compiled, t.functional, t.timed_out, t.failed_traces
    );
    s
}

/// One row per report, at pass@`k`.
pub fn render_comparison_table(reports: &[EvalReport], k: u32) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<28} {:>16} {:>16} {:>10} {:>10}", "configuration", format!("compile@{k} %"), format!("func@{k} %"), "avg in", "avg out");
    for r in reports {
        let cell = |f: fn(&KSummary) -> &MeanSd| r.summary.iter().find(|x| x.k == k).map(|x| pct(f(x))).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            s,
            "{:<28} {:>16} {:>16} {:>10.1} {:>10.1}",
            r.label,
            cell(|x| &x.compile),
            cell(|x| &x.functional),
            r.tokens.avg_input,
            r.tokens.avg_output
        );
    }
    s
}
