use std::path::{Path, PathBuf};

use aot_core::ir::{lower_to_verilog, minimize_kmap, parse_ir, IntermediateRep, IrError, Strictness};
use aot_core::Classification2;
use serde_json::Value;

use crate::commands::write_file;
use crate::CliError;

/// Guesses the structure kind from the keys present.
pub fn infer_kind(obj: &Value) -> Option<Classification2> {
    let has = |k: &str| obj.get(k).is_some();
    if has("states") || has("transitions") {
        Some(Classification2::FsmImplied)
    } else if has("rows") {
        Some(Classification2::TruthTable)
    } else if has("cells") {
        Some(Classification2::KMap)
    } else if has("mapping") || has("select") {
        Some(Classification2::MuxMapping)
    } else if has("expressions") {
        Some(Classification2::BooleanExpression)
    } else {
        None
    }
}

fn parse_kind(s: &str) -> Result<Classification2, CliError> {
    serde_json::from_value(Value::String(s.to_string()))
        .map_err(|_| CliError::Failed(format!("unknown IR kind '{s}' (fsm, truth_table, boolean_expression, kmap, mux_mapping)")))
}

/// Reads an IR file, bare or wrapped as `{"kind": ..., "ir": ...}`.
pub fn read_ir(path: &Path, kind: Option<&str>, mode: Strictness) -> Result<(IntermediateRep, Vec<String>), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Failed(format!("{}: not valid JSON: {e}", path.display())))?;
    let (body, tagged) = match (v.get("kind").and_then(Value::as_str), v.get("ir")) {
        (Some(k), Some(ir)) => (ir.clone(), Some(k.to_string())),
        _ => (v, None),
    };
    let kind = match kind.map(String::from).or(tagged) {
        Some(k) => parse_kind(&k)?,
        None => infer_kind(&body).ok_or_else(|| CliError::Failed(format!("{}: cannot tell the IR kind; pass --kind", path.display())))?,
    };
    match parse_ir(&body.to_string(), kind, mode) {
        Ok(p) => Ok((p.ir, p.warnings)),
        Err(e) => Err(CliError::Invalid(describe(path, &e))),
    }
}

fn describe(path: &Path, e: &IrError) -> Vec<String> {
    let v = e.violations();
    if v.is_empty() {
        vec![format!("{}: {e}", path.display())]
    } else {
        v.iter().map(|x| format!("{}: [{}] {x}", path.display(), x.class())).collect()
    }
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn validate(path: &Path, kind: Option<&str>, strict: bool) -> Result<(), CliError> {
    let mode = if strict { Strictness::Strict } else { Strictness::Lenient };
    let (ir, warnings) = read_ir(path, kind, mode)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    println!("{}: valid {}", path.display(), ir.classification());
    Ok(())
}

pub fn lower(path: &Path, header: &Path, kind: Option<&str>, out: Option<&PathBuf>) -> Result<(), CliError> {
    let (ir, warnings) = read_ir(path, kind, Strictness::Lenient)?;
    let header = std::fs::read_to_string(header).map_err(|e| CliError::Failed(format!("{}: {e}", header.display())))?;
    let lowered = lower_to_verilog(&ir, &header).map_err(|e| CliError::Invalid(describe(path, &e)))?;
    for w in warnings.iter().chain(&lowered.warnings) {
        eprintln!("warning: {w}");
    }
    emit(out, &lowered.verilog)
}

pub fn minimize(path: &Path, out: Option<&PathBuf>) -> Result<(), CliError> {
    let (ir, _) = read_ir(path, None, Strictness::Lenient)?;
    let IntermediateRep::KMap(k) = ir else {
        return Err(CliError::Failed(format!("{}: minimize expects a K-map, found {}", path.display(), ir.classification())));
    };
    let mut text = serde_json::to_string_pretty(&minimize_kmap(&k)).expect("serializable");
    text.push('\n');
    emit(out, &text)
}
