use std::collections::BTreeSet;
use std::sync::Arc;

use aot_core::backend::{BackendHandle, Backends, MockEntry, MockProvider, MockScript};
use aot_core::problem::ablation_stage_sets;
use aot_core::{run_benchmark, AotStage, BenchmarkOptions, DesignProblem, Pipeline, Stage, Strategy, StrategyConfig, TemplateSet};
use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest};
use proptest::strategy::Strategy as _;

const GATE: &str = "module top_module(input clk, input reset, input a, output y);\n  assign y = ~a;\nendmodule";
const TABLE: &str = r#"{"inputs": ["a"], "output": "y", "rows": [{"in": "0", "out": "1"}, {"in": "1", "out": "0"}]}"#;
const FSM: &str = r#"{"states": ["A", "B"], "transitions": [{"from": "A", "to": "B", "cond": "a"}], "outputs": [{"state": "B", "signal": "y", "value": 1}]}"#;

fn problem(id: &str) -> DesignProblem {
    DesignProblem {
        task_id: id.into(),
        description: "Drive y with the inverse of a.".into(),
        module_header: "module top_module(input clk, input reset, input a, output y);".into(),
        testbench: String::new(),
        canonical_solution: None,
        extra: Default::default(),
    }
}

#[derive(Debug, Clone)]
struct Script {
    sequential: bool,
    other: bool,
    ir_ok: bool,
    ps_ok: bool,
}

fn entry(stage: Stage, text: &str) -> MockEntry {
    MockEntry { task_id: None, ..MockEntry::reply(stage, "", text) }
}

fn backends(s: &Script) -> Backends {
    let ir = match (s.ir_ok, s.sequential) {
        (false, _) => "Sorry, no JSON today.",
        (true, true) => FSM,
        (true, false) => TABLE,
    };
    let entries = vec![
        entry(Stage::Cls1, if s.sequential { "This is sequential" } else { "Answer: combinational" }),
        entry(Stage::Cls2, if s.other { "other" } else { "truth_table" }),
        entry(Stage::Ir, ir),
        entry(Stage::Pseudocode, if s.ps_ok { "Declare module\ny <- NOT a" } else { "always @(*) y = ~a;\nendmodule" }),
        entry(Stage::Final, GATE),
        entry(Stage::Baseline, GATE),
        entry(Stage::OneShot, GATE),
        entry(Stage::CoT, "Step 1: invert a.\n```verilog\nmodule top_module(input clk, input reset, input a, output y); assign y = ~a; endmodule\n```"),
    ];
    Backends::single(Arc::new(BackendHandle::new(Arc::new(MockProvider::new(MockScript { entries })))))
}

fn aot_cfg(stages: &BTreeSet<AotStage>) -> StrategyConfig {
    StrategyConfig {
        strategy: Strategy::Aot,
        aot_stages: stages.clone(),
        abstraction_model: "abs".into(),
        translation_model: "tr".into(),
        n: 1,
        runs: 1,
        ..Default::default()
    }
}

/// Stage sequence the pipeline must produce, derived from the rules alone.
fn expected_stages(stages: &BTreeSet<AotStage>, s: &Script) -> Vec<Stage> {
    let mut v = Vec::new();
    let ir = stages.contains(&AotStage::Ir);
    let ps = stages.contains(&AotStage::Pseudocode);
    if ir || ps {
        v.push(Stage::Cls1);
        if !s.sequential {
            v.push(Stage::Cls2);
        }
    }
    if ir && (s.sequential || !s.other) {
        v.push(Stage::Ir);
        if !s.ir_ok {
            v.push(Stage::Ir);
        }
    }
    if ps {
        v.push(Stage::Pseudocode);
        if !s.ps_ok {
            v.push(Stage::Pseudocode);
        }
    }
    v.push(Stage::Final);
    v
}

fn script() -> impl proptest::strategy::Strategy<Value = Script> {
    (any::<bool>(), any::<bool>(), any::<bool>(), any::<bool>()).prop_map(|(sequential, other, ir_ok, ps_ok)| Script { sequential, other, ir_ok, ps_ok })
}

fn stage_set() -> impl proptest::strategy::Strategy<Value = BTreeSet<AotStage>> {
    (0..6usize).prop_map(|i| ablation_stage_sets()[i].clone())
}

proptest! {
    #[test]
    fn stage_records_follow_the_stage_set_law(stages in stage_set(), s in script()) {
        let pl = Pipeline::new(aot_cfg(&stages), backends(&s), TemplateSet::builtin()).unwrap();
        let t = pl.run_sample(&problem("p"), 0, 0);
        prop_assert!(t.failure.is_none(), "{:?}", t.failure);
        prop_assert_eq!(t.stages(), expected_stages(&stages, &s));
        for r in &t.stage_records {
            let want = if r.stage == Stage::Final { "tr" } else { "abs" };
            prop_assert_eq!(&r.model, want);
        }
        prop_assert!(t.ir.is_none() || t.c2.is_some_and(|c| c != aot_core::Classification2::Other));
        prop_assert!(t.final_verilog.is_some());
    }
}

#[test]
fn base_ablation_equals_baseline() {
    let s = Script { sequential: false, other: false, ir_ok: true, ps_ok: true };
    let base = Pipeline::new(aot_cfg(&[AotStage::Base].into()), backends(&s), TemplateSet::builtin()).unwrap();
    let baseline_cfg = StrategyConfig { strategy: Strategy::Baseline, ..aot_cfg(&[AotStage::Base].into()) };
    let baseline = Pipeline::new(baseline_cfg, backends(&s), TemplateSet::builtin()).unwrap();
    let a = base.run_sample(&problem("p"), 0, 0);
    let b = baseline.run_sample(&problem("p"), 0, 0);
    assert_eq!(a.stage_records.len(), 1);
    assert_eq!(a.stage_records[0].prompt, b.stage_records[0].prompt);
    assert_eq!(a.final_verilog, b.final_verilog);
}

#[test]
fn full_prompt_orders_blocks() {
    let s = Script { sequential: false, other: false, ir_ok: true, ps_ok: true };
    let full: BTreeSet<AotStage> = [AotStage::Base, AotStage::Ir, AotStage::Pseudocode].into();
    let t = Pipeline::new(aot_cfg(&full), backends(&s), TemplateSet::builtin()).unwrap().run_sample(&problem("p"), 0, 0);
    let prompt = &t.stage_records.last().unwrap().prompt;
    let pos = |needle: &str| prompt.find(needle).unwrap_or_else(|| panic!("missing {needle:?} in\n{prompt}"));
    let order = [pos("Drive y with the inverse"), pos("combinational, truth_table"), pos("\"rows\""), pos("y <- NOT a")];
    assert!(order.windows(2).all(|w| w[0] < w[1]), "{order:?}");
}

#[test]
fn comparison_strategies() {
    let s = Script { sequential: false, other: false, ir_ok: true, ps_ok: true };
    let run = |strategy| {
        let cfg = StrategyConfig { strategy, ..aot_cfg(&[AotStage::Base].into()) };
        Pipeline::new(cfg, backends(&s), TemplateSet::builtin()).unwrap().run_sample(&problem("p"), 0, 0)
    };
    let one = run(Strategy::OneShot);
    assert_eq!(one.stages(), [Stage::OneShot]);
    let cot = run(Strategy::CotExplicit);
    assert_eq!(cot.stages(), [Stage::CoT]);
    assert_eq!(cot.stage_records[0].model, "tr");
    assert!(cot.final_verilog.is_some(), "{:?}", cot.failure);
    let multi = run(Strategy::CotImplicitMultiModel);
    assert_eq!(multi.stages(), [Stage::CoT, Stage::Final]);
    assert_eq!(multi.stage_records[0].model, "abs");
    assert_eq!(multi.stage_records[1].model, "tr");
    assert!(multi.stage_records[1].prompt.contains("Step 1: invert a."));
    let sot = StrategyConfig { strategy: Strategy::Sot, ..aot_cfg(&[AotStage::Base].into()) };
    assert!(Pipeline::new(sot, backends(&s), TemplateSet::builtin()).is_err());
}

#[test]
fn benchmark_output_is_deterministic() {
    let s = Script { sequential: true, other: false, ir_ok: true, ps_ok: false };
    let full: BTreeSet<AotStage> = [AotStage::Base, AotStage::Ir, AotStage::Pseudocode].into();
    let cfg = StrategyConfig { n: 3, runs: 2, ..aot_cfg(&full) };
    let probs: Vec<DesignProblem> = (0..4).map(|i| problem(&format!("p{i}"))).collect();
    let go = || {
        let pl = Pipeline::new(cfg.clone(), backends(&s), TemplateSet::builtin()).unwrap();
        let traces = run_benchmark(&pl, &probs, &BenchmarkOptions { workers: 4, journal: None }).unwrap();
        serde_json::to_string(&traces).unwrap()
    };
    let first = go();
    assert_eq!(first, go());
    let traces: Vec<aot_core::AbstractionTrace> = serde_json::from_str(&first).unwrap();
    assert_eq!(traces.len(), 24);
    let keys: Vec<(u32, u32, String)> = traces.iter().map(|t| (t.run_index, t.sample_index, t.task_id.clone())).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
}
