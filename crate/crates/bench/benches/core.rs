use std::hint::black_box;

use aot_bench::*;
use aot_core::eval::{check_sample, pass_at_k, SimulatorConfig};
use aot_core::extract::assemble_candidate;
use aot_core::ir::{lower_to_verilog, minimize_kmap};
use aot_core::{Pipeline, StrategyConfig, TemplateSet};
use criterion::{criterion_group, criterion_main, Criterion};

fn stats(c: &mut Criterion) {
    c.bench_function("pass_at_k grid n=200", |b| {
        b.iter(|| {
            let mut s = 0.0;
            for cnt in (0..=200).step_by(10) {
                for k in [1, 5, 10, 100] {
                    s += pass_at_k(black_box(200), cnt, k).unwrap();
                }
            }
            s
        })
    });
}

fn ir(c: &mut Criterion) {
    let maps = kmaps(64);
    c.bench_function("minimize 64 four-variable maps", |b| b.iter(|| maps.iter().map(|k| minimize_kmap(black_box(k)).expressions.len()).sum::<usize>()));
    let fsm = counter_fsm();
    c.bench_function("lower counter fsm", |b| b.iter(|| lower_to_verilog(black_box(&fsm), COUNTER_HEADER).unwrap()));
    let (tt, header) = truth_table4();
    c.bench_function("lower 4-input truth table", |b| b.iter(|| lower_to_verilog(black_box(&tt), header).unwrap()));
}

fn extraction(c: &mut Criterion) {
    let text = long_response();
    c.bench_function("assemble candidate from long response", |b| {
        b.iter(|| assemble_candidate(black_box(&text), "module top_module(input a, input b, output y);", "top_module").unwrap())
    });
}

fn end_to_end(c: &mut Criterion) {
    let p = and_problem("and");
    let module = "module top_module(input a, input b, output y);\n  assign y = a & b;\nendmodule";
    let sim = SimulatorConfig::builtin();
    c.bench_function("builtin simulation of a gate", |b| b.iter(|| check_sample(&p, black_box(module), &sim).unwrap()));
    let cfg = StrategyConfig { n: 1, runs: 1, ..Default::default() };
    let pipeline = Pipeline::new(cfg, mock_backends(), TemplateSet::builtin()).unwrap();
    c.bench_function("full pipeline sample on mock", |b| b.iter(|| pipeline.run_sample(black_box(&p), 0, 0)));
}

criterion_group!(benches, stats, ir, extraction, end_to_end);
criterion_main!(benches);
