//! Inputs shared by the benchmarks.

use std::sync::Arc;

use aot_core::backend::{BackendHandle, Backends, MockEntry, MockProvider, MockScript};
use aot_core::ir::{Cell, FsmIr, FsmOutput, IntermediateRep, KMapIr, KMapOrder, Transition, TruthRow, TruthTableIr};
use aot_core::{DesignProblem, Stage};

pub const COUNTER_HEADER: &str = "module top_module (\n\tinput clk,\n\tinput reset,\n\toutput reg [3:0] q\n);";

/// Decade counter: S1..S10, reset to S1.
pub fn counter_fsm() -> IntermediateRep {
    let states: Vec<String> = (1..=10).map(|i| format!("S{i}")).collect();
    let mut transitions = Vec::new();
    for i in 1..=10 {
        let next = if i == 10 { 1 } else { i + 1 };
        transitions.push(Transition { from: format!("S{i}"), to: "S1".into(), cond: "reset".into() });
        transitions.push(Transition { from: format!("S{i}"), to: format!("S{next}"), cond: "!reset".into() });
    }
    let outputs = (1..=10).map(|i| FsmOutput { state: format!("S{i}"), signal: "q".into(), value: i }).collect();
    IntermediateRep::Fsm(FsmIr { states, transitions, outputs })
}

/// A 4-input table with a fixed pseudo-random output column.
pub fn truth_table4() -> (IntermediateRep, &'static str) {
    let rows = (0..16u32).map(|m| TruthRow { inputs: (0..4).rev().map(|i| m >> i & 1 == 1).collect(), outputs: vec![(m * 7 + 3) % 5 < 2] }).collect();
    let ir = IntermediateRep::TruthTable(TruthTableIr { inputs: vec!["a".into(), "b".into(), "c".into(), "d".into()], output: "y".into(), rows });
    (ir, "module top_module(input a, input b, input c, input d, output y);")
}

/// 4-variable K-maps whose cells follow `seed`.
pub fn kmaps(count: usize) -> Vec<KMapIr> {
    (0..count as u64)
        .map(|seed| {
            let mut x = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
            let cells = (0..4)
                .map(|_| {
                    (0..4)
                        .map(|_| {
                            x ^= x << 13;
                            x ^= x >> 7;
                            x ^= x << 17;
                            match x % 5 {
                                0 | 1 => Cell::One,
                                2 => Cell::DontCare,
                                _ => Cell::Zero,
                            }
                        })
                        .collect()
                })
                .collect();
            KMapIr { row_vars: vec!["a".into(), "b".into()], col_vars: vec!["c".into(), "d".into()], cells, output: Some("f".into()), order: KMapOrder::Gray }
        })
        .collect()
}

/// A chatty model answer with the module buried in prose.
pub fn long_response() -> String {
    let mut s = "Let us think about the design carefully. ".repeat(200);
    s.push_str("\n```verilog\nmodule top_module(input a, input b, output y);\n  assign y = a & b;\nendmodule\n```\n");
    s.push_str(&"That completes the design. ".repeat(50));
    s
}

pub fn and_problem(id: &str) -> DesignProblem {
    DesignProblem {
        task_id: id.into(),
        description: "Drive y with a AND b.".into(),
        module_header: "module top_module(input a, input b, output y);".into(),
        testbench: "module tb;\n  reg a, b;\n  wire y;\n  integer errors = 0;\n  integer i;\n  top_module dut(.a(a), .b(b), .y(y));\n  initial begin\n    \
                    for (i = 0; i < 4; i = i + 1) begin\n      {a, b} = i[1:0];\n      #1 if (y !== (a & b)) errors = errors + 1;\n    end\n    \
                    $display(\"Mismatches: %0d in 4 samples\", errors);\n    $finish;\n  end\nendmodule\n"
            .into(),
        canonical_solution: None,
        extra: Default::default(),
    }
}

/// Mock backend answering every stage for [`and_problem`].
pub fn mock_backends() -> Backends {
    let reply = |stage, text: &str| MockEntry { task_id: None, ..MockEntry::reply(stage, "", text) };
    let module = "module top_module(input a, input b, output y);\n  assign y = a & b;\nendmodule";
    let script = MockScript {
        entries: vec![
            reply(Stage::Cls1, "combinational"),
            reply(Stage::Cls2, "boolean_expression"),
            reply(Stage::Ir, r#"{"inputs": ["a", "b"], "outputs": ["y"], "expressions": {"y": "a & b"}}"#),
            reply(Stage::Pseudocode, "y <- a AND b"),
            reply(Stage::Final, module),
            reply(Stage::Baseline, module),
        ],
    };
    Backends::single(Arc::new(BackendHandle::new(Arc::new(MockProvider::new(script)))))
}
