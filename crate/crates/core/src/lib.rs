//! Abstraction-guided Verilog generation: prompts, intermediate
//! representations, model backends, the stage pipeline and scoring.

pub mod backend;
pub mod error;
pub mod eval;
pub mod extract;
pub mod header;
pub mod ir;
pub mod pipeline;
pub mod problem;
pub mod templates;

pub use error::{Error, Result};
pub use ir::IntermediateRep;
pub use pipeline::{run_benchmark, BenchmarkOptions, Pipeline, StageRouting};
pub use problem::{AbstractionTrace, AotStage, Classification1, Classification2, DesignProblem, Stage, StageRecord, Strategy, StrategyConfig};
pub use templates::TemplateSet;
