#![allow(dead_code)]

use aot_core::ir::{parse_ir, IntermediateRep, Strictness};
use aot_core::Classification2;

pub const COUNTER_HEADER: &str = "module top_module (\n\tinput clk,\n\tinput reset,\n\toutput reg [3:0] q\n);";

/// The decade counter FSM: S1..S10 output 1..10, reset returns to S1.
pub fn counter_fsm_json() -> String {
    let mut t = Vec::new();
    let mut o = Vec::new();
    for i in 1..=10 {
        let next = if i == 10 { 1 } else { i + 1 };
        t.push(format!(r#"    {{"from": "S{i}", "to": "S1", "cond": "reset"}}"#));
        t.push(format!(r#"    {{"from": "S{i}", "to": "S{next}", "cond": "!reset"}}"#));
        o.push(format!(r#"    {{"state": "S{i}", "signal": "q", "value": {i}}}"#));
    }
    let states: Vec<String> = (1..=10).map(|i| format!("\"S{i}\"")).collect();
    format!("{{\n  \"states\": [{}],\n  \"transitions\": [\n{}\n  ],\n  \"outputs\": [\n{}\n  ]\n}}", states.join(", "), t.join(",\n"), o.join(",\n"))
}

pub fn counter_ir() -> IntermediateRep {
    parse_ir(&counter_fsm_json(), Classification2::FsmImplied, Strictness::Strict).unwrap().ir
}

/// Resets in cycles 0 and 23; prints q after every rising edge.
pub const COUNTER_TB: &str = r#"module tb;
    reg clk = 0;
    reg reset = 1;
    wire [3:0] q;
    integer expected = 1;
    integer errors = 0;
    integer cycle;
    top_module dut(.clk(clk), .reset(reset), .q(q));
    always #5 clk = ~clk;
    initial begin
        for (cycle = 0; cycle < 40; cycle = cycle + 1) begin
            reset = (cycle == 0) || (cycle == 23);
            @(posedge clk);
            #1;
            if (reset) expected = 1;
            else if (expected == 10) expected = 1;
            else expected = expected + 1;
            $display("q=%0d", q);
            if (q !== expected) errors = errors + 1;
            @(negedge clk);
        end
        $display("Mismatches: %0d in 40 samples", errors);
        $finish;
    end
endmodule
"#;

/// Sequence the counter must show with resets at cycles 0 and 23,
/// computed without reference to the testbench's own model.
pub fn counter_expected() -> Vec<u32> {
    let mut q = 0;
    (0..40)
        .map(|c| {
            q = if c == 0 || c == 23 { 1 } else { q % 10 + 1 };
            q
        })
        .collect()
}

pub fn simulate(sources: &[(&str, &str)]) -> String {
    let d = vsim::compile(sources).unwrap_or_else(|e| panic!("compile failed: {e}\n{}", sources.last().unwrap().1));
    let out = d.run(vsim::Limits::default()).expect("simulation ran");
    assert!(out.finished, "testbench did not finish:\n{}", out.output);
    out.output
}
