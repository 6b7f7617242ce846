//! Domain types shared across the pipeline and problem-file ingestion.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::ir::IntermediateRep;

/// One benchmark item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignProblem {
    pub task_id: String,
    pub description: String,
    pub module_header: String,
    pub testbench: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canonical_solution: Option<String>,
    /// Fields of the problem record this crate does not interpret.
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub extra: Map<String, Value>,
}

impl DesignProblem {
    pub fn validate(&self) -> Result<()> {
        let bad = |message: &str| Error::InvalidProblem { task_id: self.task_id.clone(), message: message.into() };
        if self.task_id.trim().is_empty() {
            return Err(bad("task_id is empty"));
        }
        let header = crate::header::parse_header(&self.module_header).map_err(|e| bad(&e.to_string()))?;
        if header.ports.is_empty() {
            return Err(bad("module header declares no ports"));
        }
        Ok(())
    }

    /// Module name declared by the header.
    pub fn module_name(&self) -> Option<String> {
        crate::header::parse_header(&self.module_header).ok().map(|h| h.name)
    }

    /// The plain benchmark prompt: description, blank line, module header.
    pub fn base_prompt(&self) -> String {
        format!("{}\n\n{}", self.description, self.module_header)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification1 {
    Combinational,
    Sequential,
}

impl Classification1 {
    pub const ALL: [Classification1; 2] = [Classification1::Combinational, Classification1::Sequential];

    pub fn as_str(self) -> &'static str {
        match self {
            Classification1::Combinational => "combinational",
            Classification1::Sequential => "sequential",
        }
    }
}

impl fmt::Display for Classification1 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification2 {
    TruthTable,
    BooleanExpression,
    #[serde(rename = "kmap")]
    KMap,
    MuxMapping,
    #[serde(rename = "fsm")]
    FsmImplied,
    Other,
}

impl Classification2 {
    /// The terms a second-stage classification answer may use.
    pub const COMBINATIONAL: [Classification2; 5] =
        [Classification2::TruthTable, Classification2::BooleanExpression, Classification2::KMap, Classification2::MuxMapping, Classification2::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            Classification2::TruthTable => "truth_table",
            Classification2::BooleanExpression => "boolean_expression",
            Classification2::KMap => "kmap",
            Classification2::MuxMapping => "mux_mapping",
            Classification2::FsmImplied => "fsm",
            Classification2::Other => "other",
        }
    }

    /// Checks the pairing rule between the two classification stages.
    pub fn consistent_with(self, c1: Classification1) -> bool {
        match c1 {
            Classification1::Sequential => self == Classification2::FsmImplied,
            Classification1::Combinational => self != Classification2::FsmImplied,
        }
    }
}

impl fmt::Display for Classification2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Every kind of prompt the system renders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Cls1,
    Cls2,
    Ir,
    Pseudocode,
    Final,
    Baseline,
    OneShot,
    CoT,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Cls1 => "cls1",
            Stage::Cls2 => "cls2",
            Stage::Ir => "ir",
            Stage::Pseudocode => "pseudocode",
            Stage::Final => "final",
            Stage::Baseline => "baseline",
            Stage::OneShot => "oneshot",
            Stage::CoT => "cot",
        }
    }

    /// Stages whose output is Verilog for scoring.
    pub fn produces_verilog(self) -> bool {
        matches!(self, Stage::Final | Stage::Baseline | Stage::OneShot)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "cls1" => Stage::Cls1,
            "cls2" => Stage::Cls2,
            "ir" => Stage::Ir,
            "pseudocode" | "pseudo" => Stage::Pseudocode,
            "final" => Stage::Final,
            "baseline" => Stage::Baseline,
            "oneshot" | "one_shot" => Stage::OneShot,
            "cot" => Stage::CoT,
            _ => return Err(Error::Config(format!("unknown stage '{s}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub prompt: String,
    pub response: String,
    pub model: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    /// 0 for the first request, 1 for the re-prompt after a malformed answer.
    #[serde(default)]
    pub attempt: u32,
    #[serde(default)]
    pub cached: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: Stage,
    pub message: String,
}

/// Everything one sample produced, stage by stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractionTrace {
    pub task_id: String,
    pub sample_index: u32,
    pub run_index: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<Classification1>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<Classification2>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ir: Option<IntermediateRep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pseudocode: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_verilog: Option<String>,
    #[serde(default)]
    pub stage_records: Vec<StageRecord>,
    #[serde(default)]
    pub degradations: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<StageFailure>,
}

impl AbstractionTrace {
    pub fn new(task_id: &str, sample_index: u32, run_index: u32) -> Self {
        AbstractionTrace {
            task_id: task_id.to_string(),
            sample_index,
            run_index,
            c1: None,
            c2: None,
            ir: None,
            pseudocode: None,
            final_verilog: None,
            stage_records: Vec::new(),
            degradations: Vec::new(),
            failure: None,
        }
    }

    pub fn total_input_tokens(&self) -> u64 {
        self.stage_records.iter().map(|r| r.input_tokens).sum()
    }

    pub fn total_output_tokens(&self) -> u64 {
        self.stage_records.iter().map(|r| r.output_tokens).sum()
    }

    /// Output tokens of every stage before the one producing Verilog.
    pub fn abstraction_output_tokens(&self) -> u64 {
        self.stage_records.iter().filter(|r| !r.stage.produces_verilog()).map(|r| r.output_tokens).sum()
    }

    pub fn stages(&self) -> Vec<Stage> {
        self.stage_records.iter().map(|r| r.stage).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Baseline,
    OneShot,
    CotExplicit,
    CotImplicitMultiModel,
    Aot,
    /// Recognised so configs naming it get a clear error; not implemented.
    Sot,
    /// Recognised so configs naming it get a clear error; not implemented.
    Tot,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Baseline => "baseline",
            Strategy::OneShot => "one_shot",
            Strategy::CotExplicit => "cot_explicit",
            Strategy::CotImplicitMultiModel => "cot_implicit_multi_model",
            Strategy::Aot => "aot",
            Strategy::Sot => "sot",
            Strategy::Tot => "tot",
        }
    }

    pub fn is_supported(self) -> bool {
        !matches!(self, Strategy::Sot | Strategy::Tot)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace(['-', ' '], "_");
        Ok(match norm.as_str() {
            "baseline" => Strategy::Baseline,
            "one_shot" | "oneshot" | "1shot" | "1_shot" => Strategy::OneShot,
            "cot" | "cot_explicit" => Strategy::CotExplicit,
            "cot_implicit" | "cot_implicit_multi_model" | "cot_multi_model" => Strategy::CotImplicitMultiModel,
            "aot" => Strategy::Aot,
            "sot" => Strategy::Sot,
            "tot" => Strategy::Tot,
            _ => return Err(Error::Config(format!("unknown strategy '{s}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AotStage {
    Base,
    Ir,
    Pseudocode,
}

impl AotStage {
    pub fn as_str(self) -> &'static str {
        match self {
            AotStage::Base => "base",
            AotStage::Ir => "ir",
            AotStage::Pseudocode => "pseudocode",
        }
    }
}

impl FromStr for AotStage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "base" => Ok(AotStage::Base),
            "ir" => Ok(AotStage::Ir),
            "pseudo" | "pseudocode" => Ok(AotStage::Pseudocode),
            other => Err(Error::Config(format!("unknown AoT stage '{other}'"))),
        }
    }
}

/// Parses "base+ir+pseudo" or "base,ir" style stage lists.
pub fn parse_stage_set(s: &str) -> Result<BTreeSet<AotStage>> {
    s.split(['+', ',']).filter(|p| !p.trim().is_empty()).map(AotStage::from_str).collect()
}

pub fn stage_set_label(stages: &BTreeSet<AotStage>) -> String {
    let names: Vec<&str> = stages
        .iter()
        .map(|s| match s {
            AotStage::Base => "Base",
            AotStage::Ir => "IR",
            AotStage::Pseudocode => "Pseudo",
        })
        .collect();
    names.join("+")
}

/// The six stage sets of the ablation study, in report order.
pub fn ablation_stage_sets() -> Vec<BTreeSet<AotStage>> {
    use AotStage::*;
    [vec![Base], vec![Pseudocode], vec![Base, Pseudocode], vec![Ir], vec![Base, Ir], vec![Base, Ir, Pseudocode]]
        .into_iter()
        .map(|v| v.into_iter().collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub strategy: Strategy,
    pub aot_stages: BTreeSet<AotStage>,
    pub abstraction_model: String,
    pub translation_model: String,
    pub n: u32,
    pub temperature: f64,
    pub top_p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_output_tokens: Option<u32>,
    pub runs: u32,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            strategy: Strategy::Aot,
            aot_stages: [AotStage::Base, AotStage::Ir, AotStage::Pseudocode].into_iter().collect(),
            abstraction_model: "gpt-4o".into(),
            translation_model: "gpt-4o".into(),
            n: 5,
            temperature: 0.6,
            top_p: 0.99,
            top_k: None,
            max_output_tokens: None,
            runs: 5,
        }
    }
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !self.strategy.is_supported() {
            return Err(Error::UnsupportedStrategy(self.strategy.to_string()));
        }
        if self.n < 1 {
            problems.push("n must be at least 1".to_string());
        }
        if self.runs < 1 {
            problems.push("runs must be at least 1".to_string());
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            problems.push(format!("temperature {} outside [0, 2]", self.temperature));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            problems.push(format!("top_p {} outside (0, 1]", self.top_p));
        }
        if self.abstraction_model.is_empty() || self.translation_model.is_empty() {
            problems.push("model ids must be non-empty".into());
        }
        if self.strategy == Strategy::Aot && self.aot_stages.is_empty() {
            problems.push("AoT needs at least one stage".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

#[derive(Debug, Deserialize)]
struct ProblemRecord {
    task_id: String,
    prompt: String,
    test: String,
    #[serde(default)]
    canonical_solution: Option<String>,
    #[serde(flatten)]
    extra: Map<String, Value>,
}

#[derive(Debug, Deserialize)]
struct DescriptionRecord {
    task_id: String,
    detail_description: String,
}

/// Result of loading a problem set: the problems plus non-fatal warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedProblems {
    pub problems: Vec<DesignProblem>,
    pub warnings: Vec<String>,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn load_problems(problem_file: &Path, description_file: Option<&Path>) -> Result<LoadedProblems> {
    let problems = read(problem_file)?;
    let descriptions = description_file.map(read).transpose()?;
    parse_problems(&problems, problem_file, descriptions.as_deref().map(|d| (d, description_file.unwrap())))
}

fn jsonl<'a, T: serde::de::DeserializeOwned>(text: &'a str, path: &'a Path) -> impl Iterator<Item = Result<T>> + 'a {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(move |(i, line)| serde_json::from_str(line).map_err(|e| Error::Parse { path: path.to_path_buf(), line: i + 1, message: e.to_string() }))
}

/// Parses problem and description JSON Lines text already in memory.
pub fn parse_problems(problems: &str, problem_path: &Path, descriptions: Option<(&str, &Path)>) -> Result<LoadedProblems> {
    let mut warnings = Vec::new();
    let mut desc: HashMap<String, String> = HashMap::new();
    let mut desc_order = Vec::new();
    if let Some((text, path)) = descriptions {
        for rec in jsonl::<DescriptionRecord>(text, path) {
            let rec = rec?;
            desc_order.push(rec.task_id.clone());
            desc.insert(rec.task_id, rec.detail_description);
        }
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for rec in jsonl::<ProblemRecord>(problems, problem_path) {
        let mut rec = rec?;
        if !seen.insert(rec.task_id.clone()) {
            return Err(Error::DuplicateTaskId(rec.task_id));
        }
        let inline = rec.extra.remove("detail_description").and_then(|v| v.as_str().map(String::from));
        let description = match desc.get(&rec.task_id).cloned().or(inline) {
            Some(d) if !d.trim().is_empty() => d,
            _ => return Err(Error::MissingDescription(rec.task_id)),
        };
        let p = DesignProblem {
            task_id: rec.task_id,
            description,
            module_header: rec.prompt,
            testbench: rec.test,
            canonical_solution: rec.canonical_solution,
            extra: rec.extra,
        };
        p.validate()?;
        out.push(p);
    }
    for id in desc_order {
        if !seen.contains(&id) {
            warnings.push(format!("description for '{id}' has no problem record; skipped"));
        }
    }
    Ok(LoadedProblems { problems: out, warnings })
}

/// Serializes problems back to the two-file ingestion layout
/// (problem records, description records).
pub fn to_jsonl(problems: &[DesignProblem]) -> (String, String) {
    let mut prob = String::new();
    let mut desc = String::new();
    for p in problems {
        let mut m = p.extra.clone();
        m.insert("task_id".into(), Value::String(p.task_id.clone()));
        m.insert("prompt".into(), Value::String(p.module_header.clone()));
        m.insert("test".into(), Value::String(p.testbench.clone()));
        if let Some(c) = &p.canonical_solution {
            m.insert("canonical_solution".into(), Value::String(c.clone()));
        }
        prob.push_str(&Value::Object(m).to_string());
        prob.push('\n');
        let d = serde_json::json!({"task_id": p.task_id, "detail_description": p.description});
        desc.push_str(&d.to_string());
        desc.push('\n');
    }
    (prob, desc)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "module top_module (\n\tinput a,\n\tinput b,\n\toutput out\n);\n";

    fn rec(id: &str) -> String {
        serde_json::json!({"task_id": id, "prompt": HEADER, "test": "module tb; endmodule"}).to_string()
    }

    fn desc(id: &str, d: &str) -> String {
        serde_json::json!({"task_id": id, "detail_description": d}).to_string()
    }

    fn parse(p: &str, d: &str) -> Result<LoadedProblems> {
        parse_problems(p, Path::new("p.jsonl"), Some((d, Path::new("d.jsonl"))))
    }

    #[test]
    fn loads_in_file_order() {
        let p = [rec("b"), rec("a")].join("\n");
        let d = [desc("a", "A gate."), desc("b", "B gate.")].join("\n");
        let loaded = parse(&p, &d).unwrap();
        let ids: Vec<_> = loaded.problems.iter().map(|p| p.task_id.as_str()).collect();
        assert_eq!(ids, ["b", "a"]);
        assert_eq!(loaded.problems[1].description, "A gate.");
    }

    #[test]
    fn empty_file_is_empty_list() {
        assert!(parse("", "").unwrap().problems.is_empty());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let p = [rec("adder"), rec("adder")].join("\n");
        let d = desc("adder", "x");
        assert!(matches!(parse(&p, &d), Err(Error::DuplicateTaskId(id)) if id == "adder"));
    }

    #[test]
    fn malformed_line_names_line_number() {
        let p = format!("{}\n{{not json\n", rec("a"));
        match parse(&p, &desc("a", "x")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_description_rejected_and_orphans_warned() {
        assert!(matches!(parse(&rec("a"), &desc("z", "x")), Err(Error::MissingDescription(_))));
        let loaded = parse(&rec("a"), &[desc("a", "x"), desc("z", "y")].join("\n")).unwrap();
        assert_eq!(loaded.warnings.len(), 1);
    }

    #[test]
    fn extra_fields_preserved() {
        let p = serde_json::json!({"task_id": "a", "prompt": HEADER, "test": "", "difficulty": 3}).to_string();
        let loaded = parse(&p, &desc("a", "x")).unwrap();
        assert_eq!(loaded.problems[0].extra["difficulty"], 3);
        let (p2, d2) = to_jsonl(&loaded.problems);
        assert_eq!(parse(&p2, &d2).unwrap(), loaded);
    }

    #[test]
    fn header_without_ports_rejected() {
        let p = serde_json::json!({"task_id": "a", "prompt": "module m();", "test": ""}).to_string();
        assert!(matches!(parse(&p, &desc("a", "x")), Err(Error::InvalidProblem { .. })));
    }

    #[test]
    fn classification_pairing() {
        use Classification1::*;
        assert!(Classification2::FsmImplied.consistent_with(Sequential));
        assert!(!Classification2::Other.consistent_with(Sequential));
        assert!(Classification2::Other.consistent_with(Combinational));
    }

    #[test]
    fn stage_set_parsing() {
        let s = parse_stage_set("base+ir+pseudo").unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(stage_set_label(&s), "Base+IR+Pseudo");
        assert!(parse_stage_set("base+foo").is_err());
        assert_eq!(ablation_stage_sets().len(), 6);
    }
}
