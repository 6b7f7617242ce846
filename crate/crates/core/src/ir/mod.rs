//! Typed intermediate representations (FSM, truth table, Boolean equations,
//! K-map, MUX) with JSON parsing, validation and lowering to Verilog.

pub mod expr;
mod lower;
pub mod minimize;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::problem::Classification2;
pub use expr::{parse_bool, BoolExpr, ExprError};
pub use lower::{lower_to_verilog, Lowered};
pub use minimize::{minimize, minimize_kmap, Cover, Implicant};

/// Truth tables and K-maps describe at most this many input variables.
pub const MAX_TABLE_VARS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub from: String,
    pub to: String,
    pub cond: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FsmOutput {
    pub state: String,
    pub signal: String,
    pub value: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FsmIr {
    pub states: Vec<String>,
    pub transitions: Vec<Transition>,
    pub outputs: Vec<FsmOutput>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthRow {
    #[serde(rename = "in", serialize_with = "ser_bits", deserialize_with = "de_bits")]
    pub inputs: Vec<bool>,
    #[serde(rename = "out", serialize_with = "ser_bits", deserialize_with = "de_bits")]
    pub outputs: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthTableIr {
    pub inputs: Vec<String>,
    pub output: String,
    pub rows: Vec<TruthRow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BooleanEqnsIr {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub expressions: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    Zero,
    One,
    DontCare,
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Cell::Zero => s.serialize_u8(0),
            Cell::One => s.serialize_u8(1),
            Cell::DontCare => s.serialize_str("X"),
        }
    }
}

impl<'de> Deserialize<'de> for Cell {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        cell_from_value(&v).ok_or_else(|| serde::de::Error::custom(format!("bad K-map cell {v}")))
    }
}

fn cell_from_value(v: &Value) -> Option<Cell> {
    match v {
        Value::Number(n) => match n.as_u64() {
            Some(0) => Some(Cell::Zero),
            Some(1) => Some(Cell::One),
            _ => None,
        },
        Value::Bool(b) => Some(if *b { Cell::One } else { Cell::Zero }),
        Value::String(s) => match s.trim() {
            "0" => Some(Cell::Zero),
            "1" => Some(Cell::One),
            "X" | "x" | "-" | "d" | "D" => Some(Cell::DontCare),
            _ => None,
        },
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KMapOrder {
    /// Rows and columns follow the reflected Gray sequence (00, 01, 11, 10).
    #[default]
    Gray,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KMapIr {
    pub row_vars: Vec<String>,
    pub col_vars: Vec<String>,
    pub cells: Vec<Vec<Cell>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default)]
    pub order: KMapOrder,
}

impl KMapIr {
    /// Variables in minterm order, most significant first.
    pub fn vars(&self) -> Vec<String> {
        self.row_vars.iter().chain(&self.col_vars).cloned().collect()
    }

    /// Minterm index of the cell at grid position (row, col).
    pub fn minterm(&self, row: usize, col: usize) -> u32 {
        let (r, c) = match self.order {
            KMapOrder::Gray => (gray(row as u32), gray(col as u32)),
            KMapOrder::Binary => (row as u32, col as u32),
        };
        (r << self.col_vars.len()) | c
    }
}

fn gray(i: u32) -> u32 {
    i ^ (i >> 1)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MuxSelect {
    pub name: String,
    pub width: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MuxSource {
    Const(u64),
    Input(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MuxEntry {
    pub select: u64,
    pub input: MuxSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MuxIr {
    pub data_inputs: Vec<String>,
    pub select: MuxSelect,
    pub mapping: Vec<MuxEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "ir", rename_all = "snake_case")]
pub enum IntermediateRep {
    Fsm(FsmIr),
    TruthTable(TruthTableIr),
    Boolean(BooleanEqnsIr),
    #[serde(rename = "kmap")]
    KMap(KMapIr),
    Mux(MuxIr),
}

impl IntermediateRep {
    pub fn classification(&self) -> Classification2 {
        match self {
            IntermediateRep::Fsm(_) => Classification2::FsmImplied,
            IntermediateRep::TruthTable(_) => Classification2::TruthTable,
            IntermediateRep::Boolean(_) => Classification2::BooleanExpression,
            IntermediateRep::KMap(_) => Classification2::KMap,
            IntermediateRep::Mux(_) => Classification2::MuxMapping,
        }
    }

    /// Canonical JSON text of the structure alone (the form the model is asked for).
    pub fn to_json(&self) -> String {
        let r = match self {
            IntermediateRep::Fsm(x) => serde_json::to_string_pretty(x),
            IntermediateRep::TruthTable(x) => serde_json::to_string_pretty(x),
            IntermediateRep::Boolean(x) => serde_json::to_string_pretty(x),
            IntermediateRep::KMap(x) => serde_json::to_string_pretty(x),
            IntermediateRep::Mux(x) => serde_json::to_string_pretty(x),
        };
        r.expect("IR serialization cannot fail")
    }
}

fn ser_bits<S: Serializer>(bits: &[bool], s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&bits.iter().map(|b| if *b { '1' } else { '0' }).collect::<String>())
}

fn de_bits<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<bool>, D::Error> {
    let v = Value::deserialize(d)?;
    bits_from_value(&v).ok_or_else(|| serde::de::Error::custom(format!("bad bit vector {v}")))
}

fn bits_from_value(v: &Value) -> Option<Vec<bool>> {
    match v {
        Value::String(s) => {
            let s = s.trim();
            let s = s.find('\'').map_or(s, |q| s[q + 1..].trim_start_matches(['b', 'B']));
            s.chars()
                .filter(|c| *c != '_' && !c.is_whitespace())
                .map(|c| match c {
                    '0' => Some(false),
                    '1' => Some(true),
                    _ => None,
                })
                .collect()
        }
        Value::Array(a) => a
            .iter()
            .map(|x| match x {
                Value::Number(n) if n.as_u64() == Some(0) => Some(false),
                Value::Number(n) if n.as_u64() == Some(1) => Some(true),
                Value::Bool(b) => Some(*b),
                Value::String(s) if s == "0" || s == "1" => Some(s == "1"),
                _ => None,
            })
            .collect(),
        Value::Number(n) => match n.as_u64() {
            Some(0) => Some(vec![false]),
            Some(1) => Some(vec![true]),
            _ => None,
        },
        Value::Bool(b) => Some(vec![*b]),
        _ => None,
    }
}

/// One problem found while reading or validating an IR.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    MissingKey(String),
    WrongType { key: String, expected: &'static str },
    EmptyStates,
    DuplicateState(String),
    UndeclaredState(String),
    BadCondition { index: usize, error: String },
    TooManyInputs { count: usize },
    RowWidth { row: usize, expected: usize, got: usize },
    OutputWidth { row: usize, expected: usize, got: usize },
    DuplicateRow(String),
    IncompleteTable { expected: usize, got: usize },
    MissingExpression(String),
    UnknownOutput(String),
    BadExpression { output: String, error: String },
    UndeclaredInput { context: String, name: String },
    GridSize { expected_rows: usize, expected_cols: usize, rows: usize, cols: Vec<usize> },
    OverlappingVars(String),
    SelectOutOfRange { value: u64, width: u32 },
    DuplicateSelect(u64),
    BadSelectWidth(u32),
}

impl Violation {
    /// Stable category name, used by tests and the CLI.
    pub fn class(&self) -> &'static str {
        match self {
            Violation::MissingKey(_) => "missing_key",
            Violation::WrongType { .. } => "wrong_type",
            Violation::EmptyStates => "empty_states",
            Violation::DuplicateState(_) => "duplicate_state",
            Violation::UndeclaredState(_) => "undeclared_state",
            Violation::BadCondition { .. } => "bad_condition",
            Violation::TooManyInputs { .. } => "too_many_inputs",
            Violation::RowWidth { .. } => "row_width",
            Violation::OutputWidth { .. } => "output_width",
            Violation::DuplicateRow(_) => "duplicate_row",
            Violation::IncompleteTable { .. } => "incomplete_table",
            Violation::MissingExpression(_) => "missing_expression",
            Violation::UnknownOutput(_) => "unknown_output",
            Violation::BadExpression { .. } => "bad_expression",
            Violation::UndeclaredInput { .. } => "undeclared_input",
            Violation::GridSize { .. } => "grid_size",
            Violation::OverlappingVars(_) => "overlapping_vars",
            Violation::SelectOutOfRange { .. } => "select_out_of_range",
            Violation::DuplicateSelect(_) => "duplicate_select",
            Violation::BadSelectWidth(_) => "bad_select_width",
        }
    }

    fn is_schema(&self) -> bool {
        matches!(self, Violation::MissingKey(_) | Violation::WrongType { .. })
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingKey(k) => write!(f, "missing required key \"{k}\""),
            Violation::WrongType { key, expected } => write!(f, "key \"{key}\" should be {expected}"),
            Violation::EmptyStates => write!(f, "state list is empty"),
            Violation::DuplicateState(s) => write!(f, "duplicate state {s}"),
            Violation::UndeclaredState(s) => write!(f, "undeclared state {s}"),
            Violation::BadCondition { index, error } => write!(f, "transition {index}: bad condition ({error})"),
            Violation::TooManyInputs { count } => write!(f, "{count} input variables (at most {MAX_TABLE_VARS} allowed)"),
            Violation::RowWidth { row, expected, got } => write!(f, "row {row}: {got} input bits, expected {expected}"),
            Violation::OutputWidth { row, expected, got } => write!(f, "row {row}: {got} output bits, expected {expected}"),
            Violation::DuplicateRow(bits) => write!(f, "duplicate input vector {bits}"),
            Violation::IncompleteTable { expected, got } => write!(f, "incomplete truth table: {got} of {expected} rows"),
            Violation::MissingExpression(o) => write!(f, "output {o} has no expression"),
            Violation::UnknownOutput(o) => write!(f, "expression for undeclared output {o}"),
            Violation::BadExpression { output, error } => write!(f, "expression for {output}: {error}"),
            Violation::UndeclaredInput { context, name } => write!(f, "{context}: undeclared input {name}"),
            Violation::GridSize { expected_rows, expected_cols, rows, cols } => {
                write!(f, "K-map grid is {rows} rows with widths {cols:?}, expected {expected_rows}x{expected_cols}")
            }
            Violation::OverlappingVars(v) => write!(f, "variable {v} is both a row and a column variable"),
            Violation::SelectOutOfRange { value, width } => write!(f, "select value {value} does not fit in {width} bits"),
            Violation::DuplicateSelect(v) => write!(f, "duplicate select value {v}"),
            Violation::BadSelectWidth(w) => write!(f, "select width {w} must be between 1 and 32"),
        }
    }
}

#[derive(Debug, Error)]
pub enum IrError {
    #[error("IR is not valid JSON: {0}")]
    Json(String),
    #[error("IR schema error: {}", join(.0))]
    Schema(Vec<Violation>),
    #[error("IR validation failed: {}", join(.0))]
    Invalid(Vec<Violation>),
    #[error("no IR exists for classification '{0}'")]
    NoStructure(&'static str),
    #[error("lowering: {0}")]
    Lower(String),
    #[error("{context}: {error}")]
    Expr { context: String, error: ExprError },
}

impl IrError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            IrError::Schema(v) | IrError::Invalid(v) => v,
            _ => &[],
        }
    }
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    /// Incomplete truth tables are violations.
    Strict,
    /// Incomplete truth tables are accepted with a warning.
    #[default]
    Lenient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedIr {
    pub ir: IntermediateRep,
    pub warnings: Vec<String>,
}

/// Reads `raw` as the JSON structure matching `expected` and validates it.
pub fn parse_ir(raw: &str, expected: Classification2, mode: Strictness) -> Result<ParsedIr, IrError> {
    let v: Value = serde_json::from_str(raw).map_err(|e| IrError::Json(e.to_string()))?;
    let Value::Object(obj) = v else {
        return Err(IrError::Schema(vec![Violation::WrongType { key: "(root)".into(), expected: "an object" }]));
    };
    let mut r = Reader { warnings: Vec::new(), schema: Vec::new() };
    let ir = match expected {
        Classification2::FsmImplied => r.fsm(&obj).map(IntermediateRep::Fsm),
        Classification2::TruthTable => r.truth_table(&obj).map(IntermediateRep::TruthTable),
        Classification2::BooleanExpression => r.boolean(&obj).map(IntermediateRep::Boolean),
        Classification2::KMap => r.kmap(&obj).map(IntermediateRep::KMap),
        Classification2::MuxMapping => r.mux(&obj).map(IntermediateRep::Mux),
        Classification2::Other => return Err(IrError::NoStructure("other")),
    };
    let Some(ir) = ir.filter(|_| r.schema.is_empty()) else {
        return Err(IrError::Schema(r.schema));
    };
    let mut warnings = r.warnings;
    let violations = validate(&ir, mode, &mut warnings);
    if violations.is_empty() {
        Ok(ParsedIr { ir, warnings })
    } else {
        Err(IrError::Invalid(violations))
    }
}

struct Reader {
    warnings: Vec<String>,
    schema: Vec<Violation>,
}

impl Reader {
    fn known(&mut self, obj: &Map<String, Value>, ctx: &str, keys: &[&str]) {
        for k in obj.keys() {
            if !keys.contains(&k.as_str()) {
                self.warnings.push(format!("ignored unknown key \"{k}\" in {ctx}"));
            }
        }
    }

    fn req<'a>(&mut self, obj: &'a Map<String, Value>, key: &str) -> Option<&'a Value> {
        let v = obj.get(key);
        if v.is_none() {
            self.schema.push(Violation::MissingKey(key.to_string()));
        }
        v
    }

    fn wrong(&mut self, key: &str, expected: &'static str) {
        self.schema.push(Violation::WrongType { key: key.to_string(), expected });
    }

    fn string(&mut self, obj: &Map<String, Value>, key: &str) -> Option<String> {
        match self.req(obj, key)? {
            Value::String(s) => Some(s.clone()),
            _ => {
                self.wrong(key, "a string");
                None
            }
        }
    }

    fn strings(&mut self, obj: &Map<String, Value>, key: &str) -> Option<Vec<String>> {
        let v = self.req(obj, key)?;
        let out: Option<Vec<String>> = v.as_array().and_then(|a| a.iter().map(|x| x.as_str().map(str::to_string)).collect());
        if out.is_none() {
            self.wrong(key, "an array of strings");
        }
        out
    }

    fn objects<'a>(&mut self, obj: &'a Map<String, Value>, key: &str) -> Option<Vec<&'a Map<String, Value>>> {
        let v = self.req(obj, key)?;
        let out: Option<Vec<_>> = v.as_array().and_then(|a| a.iter().map(Value::as_object).collect());
        if out.is_none() {
            self.wrong(key, "an array of objects");
        }
        out
    }

    fn fsm(&mut self, obj: &Map<String, Value>) -> Option<FsmIr> {
        self.known(obj, "FSM", &["states", "transitions", "outputs"]);
        let states = self.strings(obj, "states");
        let mut transitions = Vec::new();
        for t in self.objects(obj, "transitions").unwrap_or_default() {
            self.known(t, "transition", &["from", "to", "cond"]);
            let from = self.string(t, "from");
            let to = self.string(t, "to");
            let cond = match t.get("cond") {
                None => {
                    self.schema.push(Violation::MissingKey("cond".into()));
                    None
                }
                Some(Value::String(s)) => Some(s.clone()),
                Some(Value::Bool(b)) => Some(if *b { "1" } else { "0" }.to_string()),
                Some(Value::Number(n)) => Some(n.to_string()),
                Some(_) => {
                    self.wrong("cond", "a string");
                    None
                }
            };
            if let (Some(from), Some(to), Some(cond)) = (from, to, cond) {
                transitions.push(Transition { from, to, cond });
            }
        }
        let mut outputs = Vec::new();
        let outs = match obj.get("outputs") {
            // an FSM without outputs is legal
            None => Vec::new(),
            Some(_) => self.objects(obj, "outputs").unwrap_or_default(),
        };
        for o in outs {
            self.known(o, "output", &["state", "signal", "value"]);
            let state = self.string(o, "state");
            let signal = self.string(o, "signal");
            let value = match self.req(o, "value") {
                Some(Value::Number(n)) if n.as_i64().is_some() => n.as_i64(),
                Some(Value::Bool(b)) => Some(*b as i64),
                Some(Value::String(s)) if parse_int(s).is_some() => parse_int(s),
                Some(_) => {
                    self.wrong("value", "an integer");
                    None
                }
                None => None,
            };
            if let (Some(state), Some(signal), Some(value)) = (state, signal, value) {
                outputs.push(FsmOutput { state, signal, value });
            }
        }
        Some(FsmIr { states: states?, transitions, outputs })
    }

    fn truth_table(&mut self, obj: &Map<String, Value>) -> Option<TruthTableIr> {
        self.known(obj, "truth table", &["inputs", "output", "rows"]);
        let inputs = self.strings(obj, "inputs");
        let output = self.string(obj, "output");
        let mut rows = Vec::new();
        for r in self.objects(obj, "rows").unwrap_or_default() {
            self.known(r, "row", &["in", "out"]);
            let i = self.req(r, "in").map(bits_from_value);
            let o = self.req(r, "out").map(bits_from_value);
            match (i, o) {
                (Some(Some(inputs)), Some(Some(outputs))) => rows.push(TruthRow { inputs, outputs }),
                (Some(None), _) => self.wrong("in", "a bit vector"),
                (_, Some(None)) => self.wrong("out", "a bit vector"),
                _ => {}
            }
        }
        Some(TruthTableIr { inputs: inputs?, output: output?, rows })
    }

    fn boolean(&mut self, obj: &Map<String, Value>) -> Option<BooleanEqnsIr> {
        self.known(obj, "Boolean equations", &["inputs", "outputs", "expressions"]);
        let inputs = self.strings(obj, "inputs");
        let outputs = self.strings(obj, "outputs");
        let mut expressions = BTreeMap::new();
        match self.req(obj, "expressions") {
            Some(Value::Object(m)) => {
                for (k, v) in m {
                    match v.as_str() {
                        Some(s) => {
                            expressions.insert(k.clone(), s.to_string());
                        }
                        None => self.wrong(k, "an expression string"),
                    }
                }
            }
            Some(_) => self.wrong("expressions", "an object"),
            None => {}
        }
        Some(BooleanEqnsIr { inputs: inputs?, outputs: outputs?, expressions })
    }

    fn kmap(&mut self, obj: &Map<String, Value>) -> Option<KMapIr> {
        self.known(obj, "K-map", &["row_vars", "col_vars", "cells", "output", "order"]);
        let row_vars = self.strings(obj, "row_vars");
        let col_vars = self.strings(obj, "col_vars");
        let cells = match self.req(obj, "cells") {
            Some(Value::Array(rows)) => {
                let parsed: Option<Vec<Vec<Cell>>> = rows.iter().map(|r| r.as_array().and_then(|c| c.iter().map(cell_from_value).collect())).collect();
                if parsed.is_none() {
                    self.wrong("cells", "a 2D array of 0, 1 or \"X\"");
                }
                parsed
            }
            Some(_) => {
                self.wrong("cells", "a 2D array of 0, 1 or \"X\"");
                None
            }
            None => None,
        };
        let output = match obj.get("output") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                self.wrong("output", "a string");
                None
            }
        };
        let order = match obj.get("order").and_then(Value::as_str) {
            None => KMapOrder::Gray,
            Some(s) if s.eq_ignore_ascii_case("gray") => KMapOrder::Gray,
            Some(s) if s.eq_ignore_ascii_case("binary") => KMapOrder::Binary,
            Some(_) => {
                self.wrong("order", "\"gray\" or \"binary\"");
                KMapOrder::Gray
            }
        };
        Some(KMapIr { row_vars: row_vars?, col_vars: col_vars?, cells: cells?, output, order })
    }

    fn mux(&mut self, obj: &Map<String, Value>) -> Option<MuxIr> {
        self.known(obj, "MUX", &["data_inputs", "select", "mapping", "output"]);
        let data_inputs = self.strings(obj, "data_inputs");
        let select = match self.req(obj, "select") {
            Some(Value::Object(s)) => {
                self.known(s, "select", &["name", "width"]);
                let name = self.string(s, "name");
                let width = match self.req(s, "width") {
                    Some(Value::Number(n)) if n.as_u64().is_some() => n.as_u64().map(|w| w.min(u32::MAX as u64) as u32),
                    Some(_) => {
                        self.wrong("width", "a non-negative integer");
                        None
                    }
                    None => None,
                };
                name.zip(width).map(|(name, width)| MuxSelect { name, width })
            }
            Some(_) => {
                self.wrong("select", "an object with name and width");
                None
            }
            None => None,
        };
        let mut mapping = Vec::new();
        for m in self.objects(obj, "mapping").unwrap_or_default() {
            self.known(m, "mapping entry", &["select", "input"]);
            let sel = match self.req(m, "select") {
                Some(Value::Number(n)) if n.as_u64().is_some() => n.as_u64(),
                Some(Value::String(s)) if parse_int(s).is_some_and(|v| v >= 0) => parse_int(s).map(|v| v as u64),
                Some(_) => {
                    self.wrong("select", "a non-negative integer");
                    None
                }
                None => None,
            };
            let input = match self.req(m, "input") {
                Some(Value::Number(n)) if n.as_u64().is_some() => n.as_u64().map(MuxSource::Const),
                Some(Value::String(s)) => Some(match parse_int(s) {
                    Some(v) if v >= 0 => MuxSource::Const(v as u64),
                    _ => MuxSource::Input(s.clone()),
                }),
                Some(_) => {
                    self.wrong("input", "an input name or constant");
                    None
                }
                None => None,
            };
            if let (Some(select), Some(input)) = (sel, input) {
                mapping.push(MuxEntry { select, input });
            }
        }
        let output = obj.get("output").and_then(Value::as_str).map(str::to_string);
        Some(MuxIr { data_inputs: data_inputs?, select: select?, mapping, output })
    }
}

/// Integer literal in decimal or Verilog sized/based form.
pub(crate) fn parse_int(s: &str) -> Option<i64> {
    let s = s.trim().replace('_', "");
    match s.find('\'') {
        None => s.parse().ok(),
        Some(q) => {
            let rest = s[q + 1..].trim_start_matches(['s', 'S']);
            let radix = match rest.chars().next()?.to_ascii_lowercase() {
                'b' => 2,
                'd' => 10,
                'h' => 16,
                'o' => 8,
                _ => return None,
            };
            i64::from_str_radix(&rest[1..], radix).ok()
        }
    }
}

fn bits_text(bits: &[bool]) -> String {
    bits.iter().map(|b| if *b { '1' } else { '0' }).collect()
}

/// Checks structural invariants, returning every violation found.
pub fn validate(ir: &IntermediateRep, mode: Strictness, warnings: &mut Vec<String>) -> Vec<Violation> {
    let mut v = Vec::new();
    match ir {
        IntermediateRep::Fsm(f) => validate_fsm(f, &mut v, warnings),
        IntermediateRep::TruthTable(t) => validate_table(t, mode, &mut v, warnings),
        IntermediateRep::Boolean(b) => validate_boolean(b, &mut v),
        IntermediateRep::KMap(k) => validate_kmap(k, &mut v),
        IntermediateRep::Mux(m) => validate_mux(m, &mut v),
    }
    debug_assert!(v.iter().all(|x| !x.is_schema()));
    v
}

fn validate_fsm(f: &FsmIr, v: &mut Vec<Violation>, warnings: &mut Vec<String>) {
    if f.states.is_empty() {
        v.push(Violation::EmptyStates);
    }
    let mut seen = BTreeSet::new();
    for s in &f.states {
        if !seen.insert(s.as_str()) {
            v.push(Violation::DuplicateState(s.clone()));
        }
    }
    let mut reported = BTreeSet::new();
    let mut check = |name: &str, v: &mut Vec<Violation>| {
        if !seen.contains(name) && reported.insert(name.to_string()) {
            v.push(Violation::UndeclaredState(name.to_string()));
        }
    };
    for (i, t) in f.transitions.iter().enumerate() {
        check(&t.from, v);
        check(&t.to, v);
        if let Err(e) = condition(&t.cond) {
            v.push(Violation::BadCondition { index: i, error: e.to_string() });
        }
    }
    for o in &f.outputs {
        check(&o.state, v);
    }
    if v.is_empty() {
        warnings.extend(overlap_warnings(f));
    }
}

/// Parses a transition condition; an empty condition is always true.
pub fn condition(text: &str) -> Result<BoolExpr, ExprError> {
    if text.trim().is_empty() {
        Ok(BoolExpr::Const(true))
    } else {
        parse_bool(text)
    }
}

/// Variables over which overlap checks enumerate assignments.
const OVERLAP_VAR_LIMIT: usize = 12;

fn overlap_warnings(f: &FsmIr) -> Vec<String> {
    let mut out = Vec::new();
    for s in &f.states {
        let ts: Vec<(usize, &Transition, BoolExpr)> =
            f.transitions.iter().enumerate().filter(|(_, t)| &t.from == s).filter_map(|(i, t)| condition(&t.cond).ok().map(|e| (i, t, e))).collect();
        for a in 0..ts.len() {
            for b in a + 1..ts.len() {
                if ts[a].1.to == ts[b].1.to {
                    continue;
                }
                let vars: Vec<String> = ts[a].2.vars().union(&ts[b].2.vars()).cloned().collect();
                if vars.len() > OVERLAP_VAR_LIMIT {
                    continue;
                }
                let overlap = (0u32..1 << vars.len()).any(|m| {
                    let env = |name: &str| vars.iter().position(|x| x == name).is_some_and(|i| m >> i & 1 == 1);
                    ts[a].2.eval(&env) && ts[b].2.eval(&env)
                });
                if overlap {
                    out.push(format!("state {s}: conditions of transitions {} and {} overlap; the earlier one takes priority", ts[a].0, ts[b].0));
                }
            }
        }
    }
    out
}

/// Next state under list-order priority, or `None` when no condition holds
/// (the machine then stays put).
pub fn fsm_next_state(f: &FsmIr, state: &str, env: &dyn Fn(&str) -> bool) -> Option<String> {
    f.transitions.iter().filter(|t| t.from == state).find(|t| condition(&t.cond).map(|e| e.eval(env)).unwrap_or(false)).map(|t| t.to.clone())
}

fn check_vars_limit(n: usize, v: &mut Vec<Violation>) {
    if n > MAX_TABLE_VARS {
        v.push(Violation::TooManyInputs { count: n });
    }
}

fn validate_table(t: &TruthTableIr, mode: Strictness, v: &mut Vec<Violation>, warnings: &mut Vec<String>) {
    let n = t.inputs.len();
    check_vars_limit(n, v);
    let out_w = t.rows.first().map_or(1, |r| r.outputs.len());
    let mut seen = BTreeSet::new();
    for (i, r) in t.rows.iter().enumerate() {
        if r.inputs.len() != n {
            v.push(Violation::RowWidth { row: i, expected: n, got: r.inputs.len() });
        } else if !seen.insert(r.inputs.clone()) {
            v.push(Violation::DuplicateRow(bits_text(&r.inputs)));
        }
        if r.outputs.len() != out_w || out_w == 0 {
            v.push(Violation::OutputWidth { row: i, expected: out_w.max(1), got: r.outputs.len() });
        }
    }
    if n <= MAX_TABLE_VARS {
        let expected = 1usize << n;
        if seen.len() < expected {
            match mode {
                Strictness::Strict => v.push(Violation::IncompleteTable { expected, got: t.rows.len() }),
                Strictness::Lenient => warnings.push(format!("truth table lists {} of {expected} rows; missing rows read as 0", seen.len())),
            }
        }
    }
}

fn declared(inputs: &[String], var: &str) -> bool {
    inputs.iter().any(|i| i == var || i == expr::base_name(var))
}

fn validate_boolean(b: &BooleanEqnsIr, v: &mut Vec<Violation>) {
    for o in &b.outputs {
        if !b.expressions.contains_key(o) {
            v.push(Violation::MissingExpression(o.clone()));
        }
    }
    for (o, text) in &b.expressions {
        if !b.outputs.contains(o) {
            v.push(Violation::UnknownOutput(o.clone()));
        }
        match parse_bool(text) {
            Err(e) => v.push(Violation::BadExpression { output: o.clone(), error: e.to_string() }),
            Ok(e) => {
                for var in e.vars() {
                    if !declared(&b.inputs, &var) {
                        v.push(Violation::UndeclaredInput { context: format!("expression for {o}"), name: var });
                    }
                }
            }
        }
    }
}

fn validate_kmap(k: &KMapIr, v: &mut Vec<Violation>) {
    check_vars_limit(k.row_vars.len() + k.col_vars.len(), v);
    for r in &k.row_vars {
        if k.col_vars.contains(r) {
            v.push(Violation::OverlappingVars(r.clone()));
        }
    }
    if k.row_vars.len() + k.col_vars.len() <= MAX_TABLE_VARS {
        let (er, ec) = (1usize << k.row_vars.len(), 1usize << k.col_vars.len());
        let cols: Vec<usize> = k.cells.iter().map(Vec::len).collect();
        if k.cells.len() != er || cols.iter().any(|c| *c != ec) {
            v.push(Violation::GridSize { expected_rows: er, expected_cols: ec, rows: k.cells.len(), cols });
        }
    }
}

fn validate_mux(m: &MuxIr, v: &mut Vec<Violation>) {
    let w = m.select.width;
    if w == 0 || w > 32 {
        v.push(Violation::BadSelectWidth(w));
    }
    let mut seen = BTreeSet::new();
    for e in &m.mapping {
        if (1..=32).contains(&w) && e.select >> w != 0 {
            v.push(Violation::SelectOutOfRange { value: e.select, width: w });
        }
        if !seen.insert(e.select) {
            v.push(Violation::DuplicateSelect(e.select));
        }
        if let MuxSource::Input(name) = &e.input {
            if !declared(&m.data_inputs, name) {
                v.push(Violation::UndeclaredInput { context: format!("select value {}", e.select), name: name.clone() });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counter_json() -> String {
        let mut t = Vec::new();
        let mut o = Vec::new();
        for i in 1..=10 {
            let next = if i == 10 { 1 } else { i + 1 };
            t.push(format!(r#"{{"from": "S{i}", "to": "S1", "cond": "reset"}}"#));
            t.push(format!(r#"{{"from": "S{i}", "to": "S{next}", "cond": "!reset"}}"#));
            o.push(format!(r#"{{"state": "S{i}", "signal": "q", "value": {i}}}"#));
        }
        let states: Vec<String> = (1..=10).map(|i| format!("\"S{i}\"")).collect();
        format!(r#"{{"states": [{}], "transitions": [{}], "outputs": [{}]}}"#, states.join(","), t.join(","), o.join(","))
    }

    #[test]
    fn counter_fsm_parses() {
        let p = parse_ir(&counter_json(), Classification2::FsmImplied, Strictness::Strict).unwrap();
        let IntermediateRep::Fsm(f) = &p.ir else { panic!() };
        assert_eq!(f.states.len(), 10);
        assert_eq!(f.outputs.iter().map(|o| o.value).collect::<Vec<_>>(), (1..=10).collect::<Vec<_>>());
        assert!(p.warnings.is_empty(), "{:?}", p.warnings);
    }

    #[test]
    fn undeclared_state_is_named() {
        let raw = r#"{"states": ["S1"], "transitions": [{"from": "S99", "to": "S1", "cond": "1"}], "outputs": []}"#;
        let e = parse_ir(raw, Classification2::FsmImplied, Strictness::Strict).unwrap_err();
        assert!(e.to_string().contains("undeclared state S99"), "{e}");
    }

    #[test]
    fn strict_tables_must_be_complete() {
        let raw = r#"{"inputs": ["a", "b"], "output": "y", "rows": [{"in": "00", "out": "0"}, {"in": "01", "out": "1"}, {"in": [1, 0], "out": 1}]}"#;
        let e = parse_ir(raw, Classification2::TruthTable, Strictness::Strict).unwrap_err();
        assert_eq!(e.violations()[0].class(), "incomplete_table");
        let ok = parse_ir(raw, Classification2::TruthTable, Strictness::Lenient).unwrap();
        assert_eq!(ok.warnings.len(), 1);
    }

    #[test]
    fn missing_key_is_schema_error() {
        let e = parse_ir(r#"{"states": ["A"]}"#, Classification2::FsmImplied, Strictness::Strict).unwrap_err();
        assert!(matches!(&e, IrError::Schema(v) if v[0] == Violation::MissingKey("transitions".into())));
        let e = parse_ir(r#"{"states": "A", "transitions": []}"#, Classification2::FsmImplied, Strictness::Strict).unwrap_err();
        assert_eq!(e.violations()[0].class(), "wrong_type");
    }

    #[test]
    fn unknown_keys_warn() {
        let raw = r#"{"inputs": ["a"], "outputs": ["y"], "expressions": {"y": "NOT a"}, "comment": "inverter"}"#;
        let p = parse_ir(raw, Classification2::BooleanExpression, Strictness::Strict).unwrap();
        assert_eq!(p.warnings.len(), 1);
    }

    #[test]
    fn overlapping_conditions_warn() {
        let raw = r#"{"states": ["A", "B", "C"], "transitions": [{"from": "A", "to": "B", "cond": "x"}, {"from": "A", "to": "C", "cond": "x && y"}]}"#;
        let p = parse_ir(raw, Classification2::FsmImplied, Strictness::Strict).unwrap();
        assert_eq!(p.warnings.len(), 1);
    }

    #[test]
    fn kmap_gray_minterms() {
        let k = KMapIr {
            row_vars: vec!["a".into()],
            col_vars: vec!["b".into(), "c".into()],
            cells: vec![vec![Cell::Zero; 4]; 2],
            output: None,
            order: KMapOrder::Gray,
        };
        // column order 00, 01, 11, 10
        assert_eq!(k.minterm(0, 2), 0b011);
        assert_eq!(k.minterm(1, 3), 0b110);
    }

    #[test]
    fn other_has_no_structure() {
        assert!(matches!(parse_ir("{}", Classification2::Other, Strictness::Strict), Err(IrError::NoStructure(_))));
    }

    #[test]
    fn json_round_trip_of_mux() {
        let raw = r#"{"data_inputs": ["a", "b"], "select": {"name": "sel", "width": 1}, "mapping": [{"select": 0, "input": "a"}, {"select": 1, "input": "1'b0"}], "output": "out"}"#;
        let p = parse_ir(raw, Classification2::MuxMapping, Strictness::Strict).unwrap();
        let again = parse_ir(&p.ir.to_json(), Classification2::MuxMapping, Strictness::Strict).unwrap();
        assert_eq!(p.ir, again.ir);
    }
}
