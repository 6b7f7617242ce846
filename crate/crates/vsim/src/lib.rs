//! A small event-driven simulator for a synthesizable-plus-testbench subset
//! of Verilog-2001.
//!
//! ```
//! let design = vsim::compile(&[("tb.v", "module tb; initial $display(\"%0d\", 6 * 7); endmodule")]).unwrap();
//! let out = design.run(vsim::Limits::default()).unwrap();
//! assert_eq!(out.output, "42\n");
//! ```

mod ast;
mod elab;
mod error;
mod format;
mod lexer;
mod parser;
mod sim;
pub mod value;

pub use elab::Design;
pub use error::{CompileError, RuntimeError};
pub use sim::{Limits, RunOutput};

/// Parses and elaborates `(file name, source)` pairs. Top-level modules are
/// the ones no other module instantiates.
pub fn compile(sources: &[(&str, &str)]) -> Result<Design, CompileError> {
    compile_with_top(sources, None)
}

/// Like [`compile`], but elaborates only the named top module.
pub fn compile_with_top(sources: &[(&str, &str)], top: Option<&str>) -> Result<Design, CompileError> {
    let mut modules = Vec::new();
    let mut files = Vec::new();
    for (name, src) in sources {
        let toks = lexer::tokenize(src).map_err(|e| e.in_file(name))?;
        let mut p = parser::Parser::new(toks);
        for m in p.parse_source().map_err(|e| e.in_file(name))? {
            modules.push(m);
            files.push(*name);
        }
    }
    elab::elaborate(&modules, &files, top)
}

impl Design {
    pub fn run(&self, limits: Limits) -> Result<RunOutput, RuntimeError> {
        sim::run(self, limits)
    }

    pub fn top_modules(&self) -> &[String] {
        &self.tops
    }
}
