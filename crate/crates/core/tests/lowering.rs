mod common;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use aot_core::eval::{check_sample, SimulatorConfig};
use aot_core::ir::{
    lower_to_verilog, parse_bool, BooleanEqnsIr, Cell, IntermediateRep, KMapIr, KMapOrder, MuxEntry, MuxIr, MuxSelect, MuxSource, TruthRow, TruthTableIr,
};
use aot_core::DesignProblem;
use common::*;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRng, TestRunner};

const VARS: [&str; 4] = ["a", "b", "c", "d"];

fn comb_header(n: usize) -> String {
    let ins: Vec<String> = VARS[..n].iter().map(|v| format!("input {v}")).collect();
    format!("module top_module({}, output y);", ins.join(", "))
}

/// Drives every given input vector and counts mismatches against `want`.
fn comb_testbench(n: usize, cases: &[(Vec<bool>, bool)]) -> String {
    let vars = &VARS[..n];
    let mut tb = String::from("module tb;\n");
    let _ = writeln!(tb, "    reg {};\n    wire y;\n    integer errors = 0;", vars.join(", "));
    let conns: Vec<String> = vars.iter().map(|v| format!(".{v}({v})")).collect();
    let _ = writeln!(tb, "    top_module dut({}, .y(y));\n    initial begin", conns.join(", "));
    for (ins, want) in cases {
        let drive: Vec<String> = vars.iter().zip(ins).map(|(v, b)| format!("{v} = {};", *b as u8)).collect();
        let _ = writeln!(tb, "        {} #1 if (y !== 1'b{}) errors = errors + 1;", drive.join(" "), *want as u8);
    }
    let _ = writeln!(tb, "        $display(\"Mismatches: %0d in {} samples\", errors);\n        $finish;\n    end\nendmodule", cases.len());
    tb
}

fn assert_zero_mismatches(out: &str) {
    assert!(out.contains("Mismatches: 0 in"), "{out}");
}

fn bits(m: u32, n: usize) -> Vec<bool> {
    (0..n).rev().map(|i| m >> i & 1 == 1).collect()
}

fn deterministic(cases: u32) -> TestRunner {
    let config = Config { cases, ..Config::default() };
    TestRunner::new_with_rng(config.clone(), TestRng::deterministic_rng(config.rng_algorithm))
}

#[test]
fn counter_fsm_counts_and_resets() {
    let lowered = lower_to_verilog(&counter_ir(), COUNTER_HEADER).unwrap();
    assert!(lowered.warnings.is_empty(), "{:?}", lowered.warnings);
    let out = simulate(&[("tb.v", COUNTER_TB), ("dut.v", &lowered.verilog)]);
    let seen: Vec<u32> = out.lines().filter_map(|l| l.strip_prefix("q=")).map(|v| v.parse().unwrap()).collect();
    assert_eq!(seen, counter_expected());
    assert_zero_mismatches(&out);
}

#[test]
fn counter_fsm_passes_the_harness() {
    let lowered = lower_to_verilog(&counter_ir(), COUNTER_HEADER).unwrap();
    let p = DesignProblem {
        task_id: "counter".into(),
        description: "Decade counter.".into(),
        module_header: COUNTER_HEADER.into(),
        testbench: COUNTER_TB.into(),
        canonical_solution: None,
        extra: Default::default(),
    };
    let o = check_sample(&p, &lowered.verilog, &SimulatorConfig::builtin()).unwrap();
    assert!(o.compiled && o.functional, "{}", o.log);
}

fn table_strategy() -> impl Strategy<Value = (usize, Vec<bool>, Vec<u32>)> {
    (2usize..=4).prop_flat_map(|n| {
        let rows = 1u32 << n;
        (Just(n), proptest::collection::vec(any::<bool>(), rows as usize), Just((0..rows).collect::<Vec<u32>>()).prop_shuffle())
    })
}

#[test]
fn random_truth_tables_simulate_exactly() {
    let mut runner = deterministic(50);
    runner
        .run(&table_strategy(), |(n, outs, order)| {
            let rows: Vec<TruthRow> = order.iter().map(|&m| TruthRow { inputs: bits(m, n), outputs: vec![outs[m as usize]] }).collect();
            let ir =
                IntermediateRep::TruthTable(TruthTableIr { inputs: VARS[..n].iter().map(|s| s.to_string()).collect(), output: "y".into(), rows: rows.clone() });
            let v = lower_to_verilog(&ir, &comb_header(n)).unwrap();
            prop_assert!(v.warnings.is_empty());
            let cases: Vec<(Vec<bool>, bool)> = rows.iter().map(|r| (r.inputs.clone(), r.outputs[0])).collect();
            let out = simulate(&[("tb.v", &comb_testbench(n, &cases)), ("dut.v", &v.verilog)]);
            prop_assert!(out.contains("Mismatches: 0 in"), "{}", out);
            Ok(())
        })
        .unwrap();
}

const GRAY: [usize; 4] = [0, 1, 3, 2];

fn kmap_4var(cells: &[Cell]) -> KMapIr {
    KMapIr {
        row_vars: vec!["a".into(), "b".into()],
        col_vars: vec!["c".into(), "d".into()],
        cells: cells.chunks(4).map(|r| r.to_vec()).collect(),
        output: Some("y".into()),
        order: KMapOrder::Gray,
    }
}

#[test]
fn kmaps_lower_to_matching_logic() {
    let cell = prop_oneof![Just(Cell::Zero), Just(Cell::One), Just(Cell::DontCare)];
    let mut runner = deterministic(20);
    runner
        .run(&proptest::collection::vec(cell, 16), |cells| {
            let k = kmap_4var(&cells);
            let v = lower_to_verilog(&IntermediateRep::KMap(k), &comb_header(4)).unwrap();
            let mut cases = Vec::new();
            for r in 0..4 {
                for c in 0..4 {
                    let want = match cells[r * 4 + c] {
                        Cell::Zero => false,
                        Cell::One => true,
                        Cell::DontCare => continue,
                    };
                    let m = (GRAY[r] << 2 | GRAY[c]) as u32;
                    cases.push((bits(m, 4), want));
                }
            }
            let out = simulate(&[("tb.v", &comb_testbench(4, &cases)), ("dut.v", &v.verilog)]);
            prop_assert!(out.contains("Mismatches: 0 in"), "{}\n{}", out, v.verilog);
            Ok(())
        })
        .unwrap();
}

#[test]
fn boolean_equations_lower_to_matching_logic() {
    let exprs = ["(a AND b) OR (NOT c AND d)", "a ^ b ^ c", "!(a | b) & (c | ~d)", "a'.b + c.d'"];
    for text in exprs {
        let e = parse_bool(text).unwrap();
        let ir = IntermediateRep::Boolean(BooleanEqnsIr {
            inputs: VARS.iter().map(|s| s.to_string()).collect(),
            outputs: vec!["y".into()],
            expressions: BTreeMap::from([("y".to_string(), text.to_string())]),
        });
        let v = lower_to_verilog(&ir, &comb_header(4)).unwrap();
        let cases: Vec<(Vec<bool>, bool)> = (0..16u32)
            .map(|m| {
                let b = bits(m, 4);
                let want = e.eval(&|name| b[VARS.iter().position(|v| *v == name).unwrap()]);
                (b, want)
            })
            .collect();
        assert_zero_mismatches(&simulate(&[("tb.v", &comb_testbench(4, &cases)), ("dut.v", &v.verilog)]));
    }
}

#[test]
fn mux_lowers_to_a_selector() {
    let ir = IntermediateRep::Mux(MuxIr {
        data_inputs: vec!["a".into(), "b".into(), "c".into()],
        select: MuxSelect { name: "sel".into(), width: 2 },
        mapping: vec![
            MuxEntry { select: 0, input: MuxSource::Input("a".into()) },
            MuxEntry { select: 1, input: MuxSource::Input("b".into()) },
            MuxEntry { select: 2, input: MuxSource::Input("c".into()) },
            MuxEntry { select: 3, input: MuxSource::Const(1) },
        ],
        output: Some("y".into()),
    });
    let header = "module top_module(input a, input b, input c, input [1:0] sel, output y);";
    let v = lower_to_verilog(&ir, header).unwrap();
    assert!(v.warnings.is_empty(), "{:?}", v.warnings);
    let mut tb = String::from(
        "module tb;\n    reg a, b, c;\n    reg [1:0] sel;\n    wire y;\n    integer errors = 0;\n    integer i;\n    \
         top_module dut(.a(a), .b(b), .c(c), .sel(sel), .y(y));\n    initial begin\n",
    );
    tb.push_str(
        "        for (i = 0; i < 32; i = i + 1) begin\n            {a, b, c} = i[2:0]; sel = i[4:3];\n            #1;\n            \
         if (y !== (sel == 0 ? a : sel == 1 ? b : sel == 2 ? c : 1'b1)) errors = errors + 1;\n        end\n        \
         $display(\"Mismatches: %0d in 32 samples\", errors);\n        $finish;\n    end\nendmodule\n",
    );
    assert_zero_mismatches(&simulate(&[("tb.v", &tb), ("dut.v", &v.verilog)]));
}
