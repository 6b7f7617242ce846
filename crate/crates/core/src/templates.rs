//! Prompt rendering from `{{placeholder}}` text assets.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::error::{Error, Result};
use crate::ir::IntermediateRep;
use crate::problem::{AbstractionTrace, AotStage, Classification1, Classification2, DesignProblem, Stage, Strategy};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPrompt {
    pub stage: Stage,
    pub text: String,
    /// Placeholder name to a short note on where its value came from.
    pub placeholders_filled: BTreeMap<String, String>,
}

/// (file name, allowed placeholders, built-in text)
const ASSETS: &[(&str, &[&str], &str)] = &[
    ("cls1.txt", &["description"], include_str!("../templates/cls1.txt")),
    ("cls2.txt", &["description", "classification"], include_str!("../templates/cls2.txt")),
    ("ir_fsm.txt", &["description", "classification"], include_str!("../templates/ir_fsm.txt")),
    ("ir_truth_table.txt", &["description", "classification"], include_str!("../templates/ir_truth_table.txt")),
    ("ir_boolean.txt", &["description", "classification"], include_str!("../templates/ir_boolean.txt")),
    ("ir_kmap.txt", &["description", "classification"], include_str!("../templates/ir_kmap.txt")),
    ("ir_mux.txt", &["description", "classification"], include_str!("../templates/ir_mux.txt")),
    ("pseudocode.txt", &["description", "abstractions"], include_str!("../templates/pseudocode.txt")),
    ("final.txt", &[], include_str!("../templates/final.txt")),
    ("block_classification.txt", &["classification"], include_str!("../templates/block_classification.txt")),
    ("block_ir.txt", &["ir_json"], include_str!("../templates/block_ir.txt")),
    ("block_pseudocode.txt", &["pseudocode"], include_str!("../templates/block_pseudocode.txt")),
    ("oneshot.txt", &["description"], include_str!("../templates/oneshot.txt")),
    ("cot_explicit.txt", &["description"], include_str!("../templates/cot_explicit.txt")),
    ("cot_implicit.txt", &["description"], include_str!("../templates/cot_implicit.txt")),
    ("cot_final.txt", &["description", "reasoning"], include_str!("../templates/cot_final.txt")),
];

/// Placeholder names in order of appearance.
pub fn placeholders(template: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(i) = rest.find("{{") {
        let after = &rest[i + 2..];
        match after.find("}}") {
            Some(j) if is_name(&after[..j]) => {
                out.push(after[..j].to_string());
                rest = &after[j + 2..];
            }
            _ => rest = after,
        }
    }
    out
}

fn is_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Replaces every `{{name}}` with its value in one left-to-right pass;
/// values are never re-scanned.
pub fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(i) = rest.find("{{") {
        out.push_str(&rest[..i]);
        let after = &rest[i + 2..];
        let hit = after.find("}}").and_then(|j| {
            let name = &after[..j];
            values.iter().find(|(k, _)| *k == name).map(|(_, v)| (j, *v))
        });
        match hit {
            Some((j, v)) => {
                out.push_str(v);
                rest = &after[j + 2..];
            }
            None => {
                out.push_str("{{");
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// The full set of prompt assets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    texts: BTreeMap<&'static str, String>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        TemplateSet::builtin()
    }
}

impl TemplateSet {
    pub fn builtin() -> Self {
        TemplateSet { texts: ASSETS.iter().map(|(n, _, t)| (*n, t.trim_end_matches('\n').to_string())).collect() }
    }

    /// Built-in set with any same-named files in `dir` taking precedence.
    pub fn with_overrides(dir: &Path) -> Result<Self> {
        let mut set = TemplateSet::builtin();
        for (name, allowed, _) in ASSETS {
            let p = dir.join(name);
            if !p.exists() {
                continue;
            }
            let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            for ph in placeholders(&text) {
                if !allowed.contains(&ph.as_str()) {
                    return Err(Error::Config(format!("{}: unknown placeholder {{{{{ph}}}}}", p.display())));
                }
            }
            set.texts.insert(name, text.trim_end_matches('\n').to_string());
        }
        Ok(set)
    }

    fn get(&self, name: &str) -> &str {
        self.texts.get(name).map(String::as_str).unwrap_or_else(|| panic!("missing template asset {name}"))
    }

    pub fn names() -> impl Iterator<Item = &'static str> {
        ASSETS.iter().map(|(n, _, _)| *n)
    }

    pub fn text(&self, name: &str) -> Option<&str> {
        self.texts.get(name).map(String::as_str)
    }
}

fn prompt(stage: Stage, text: String, filled: &[(&str, String)]) -> RenderedPrompt {
    RenderedPrompt { stage, text, placeholders_filled: filled.iter().map(|(k, v)| (k.to_string(), v.clone())).collect() }
}

fn require_description(p: &DesignProblem) -> Result<()> {
    if p.description.trim().is_empty() {
        return Err(Error::Precondition(format!("problem '{}' has an empty description", p.task_id)));
    }
    Ok(())
}

/// Text standing for the classification so far.
pub fn classification_text(c1: Classification1, c2: Option<Classification2>) -> String {
    match (c1, c2) {
        (Classification1::Sequential, _) => "sequential (FSM)".to_string(),
        (Classification1::Combinational, None) => "combinational".to_string(),
        (Classification1::Combinational, Some(c)) => format!("combinational, {}", c.as_str()),
    }
}

fn ir_template(c2: Classification2) -> Option<&'static str> {
    Some(match c2 {
        Classification2::FsmImplied => "ir_fsm.txt",
        Classification2::TruthTable => "ir_truth_table.txt",
        Classification2::BooleanExpression => "ir_boolean.txt",
        Classification2::KMap => "ir_kmap.txt",
        Classification2::MuxMapping => "ir_mux.txt",
        Classification2::Other => return None,
    })
}

impl TemplateSet {
    fn block_classification(&self, c1: Classification1, c2: Option<Classification2>) -> String {
        fill(self.get("block_classification.txt"), &[("classification", &classification_text(c1, c2))])
    }

    fn block_ir(&self, ir: &IntermediateRep) -> String {
        fill(self.get("block_ir.txt"), &[("ir_json", &ir.to_json())])
    }

    fn block_pseudocode(&self, lines: &[String]) -> String {
        fill(self.get("block_pseudocode.txt"), &[("pseudocode", &lines.join("\n"))])
    }

    pub fn render_cls1(&self, p: &DesignProblem) -> Result<RenderedPrompt> {
        require_description(p)?;
        let text = fill(self.get("cls1.txt"), &[("description", &p.base_prompt())]);
        Ok(prompt(Stage::Cls1, text, &[("description", p.task_id.clone())]))
    }

    /// `None` for sequential designs, whose structure is always an FSM.
    pub fn render_cls2(&self, p: &DesignProblem, c1: Classification1) -> Result<Option<RenderedPrompt>> {
        require_description(p)?;
        if c1 == Classification1::Sequential {
            return Ok(None);
        }
        let text = fill(self.get("cls2.txt"), &[("description", &p.base_prompt()), ("classification", &self.block_classification(c1, None))]);
        Ok(Some(prompt(Stage::Cls2, text, &[("description", p.task_id.clone()), ("classification", "cls1".into())])))
    }

    pub fn render_ir(&self, p: &DesignProblem, c1: Classification1, c2: Classification2) -> Result<RenderedPrompt> {
        require_description(p)?;
        if !c2.consistent_with(c1) {
            return Err(Error::Precondition(format!("classification {} is not valid for a {} design", c2.as_str(), c1.as_str())));
        }
        let name = ir_template(c2).ok_or_else(|| Error::Precondition("no IR is generated for 'other' designs".into()))?;
        let text = fill(self.get(name), &[("description", &p.base_prompt()), ("classification", &self.block_classification(c1, Some(c2)))]);
        Ok(prompt(Stage::Ir, text, &[("description", p.task_id.clone()), ("classification", "cls1+cls2".into())]))
    }

    /// Classification and IR blocks are appended only when given.
    pub fn render_pseudocode(
        &self,
        p: &DesignProblem,
        c1: Option<Classification1>,
        c2: Option<Classification2>,
        ir: Option<&IntermediateRep>,
    ) -> Result<RenderedPrompt> {
        require_description(p)?;
        let mut blocks = Vec::new();
        let mut filled = vec![("description", p.task_id.clone())];
        if let Some(c1) = c1 {
            blocks.push(self.block_classification(c1, c2));
            filled.push(("classification", "cls".into()));
        }
        if let Some(ir) = ir {
            blocks.push(self.block_ir(ir));
            filled.push(("ir_json", "ir".into()));
        }
        let abstractions = if blocks.is_empty() { String::new() } else { format!("\n{}\n", blocks.join("\n\n")) };
        let text = fill(self.get("pseudocode.txt"), &[("description", &p.base_prompt()), ("abstractions", &abstractions)]);
        Ok(prompt(Stage::Pseudocode, text, &filled))
    }

    /// Final AoT prompt over exactly `stages`. The classification block
    /// accompanies the IR. `{Base}` alone gives the baseline prompt.
    pub fn render_final(&self, p: &DesignProblem, trace: &AbstractionTrace, stages: &BTreeSet<AotStage>) -> Result<RenderedPrompt> {
        if stages.is_empty() {
            return Err(Error::Composition("(empty stage set)".into()));
        }
        let mut blocks = Vec::new();
        let mut filled = Vec::new();
        if stages.contains(&AotStage::Base) {
            require_description(p)?;
            blocks.push(p.base_prompt());
            filled.push(("description", p.task_id.clone()));
        }
        if stages.contains(&AotStage::Ir) {
            let ir = trace.ir.as_ref().ok_or_else(|| Error::Composition("ir".into()))?;
            let c1 = trace.c1.ok_or_else(|| Error::Composition("ir".into()))?;
            blocks.push(self.block_classification(c1, trace.c2));
            blocks.push(self.block_ir(ir));
            filled.push(("classification", "cls".into()));
            filled.push(("ir_json", "ir".into()));
        }
        if stages.contains(&AotStage::Pseudocode) {
            let ps = trace.pseudocode.as_ref().ok_or_else(|| Error::Composition("pseudocode".into()))?;
            blocks.push(self.block_pseudocode(ps));
            filled.push(("pseudocode", "pseudocode".into()));
        }
        let text = if stages.len() == 1 && stages.contains(&AotStage::Base) {
            blocks.remove(0)
        } else {
            format!("{}\n\n{}", self.get("final.txt"), blocks.join("\n\n"))
        };
        Ok(prompt(Stage::Final, text, &filled))
    }

    pub fn render_comparison(&self, p: &DesignProblem, strategy: Strategy) -> Result<RenderedPrompt> {
        require_description(p)?;
        let base = p.base_prompt();
        let (stage, name) = match strategy {
            Strategy::Baseline => return Ok(prompt(Stage::Baseline, base, &[("description", p.task_id.clone())])),
            Strategy::OneShot => (Stage::OneShot, "oneshot.txt"),
            Strategy::CotExplicit => (Stage::CoT, "cot_explicit.txt"),
            Strategy::CotImplicitMultiModel => (Stage::CoT, "cot_implicit.txt"),
            Strategy::Sot | Strategy::Tot => return Err(Error::UnsupportedStrategy(strategy.to_string())),
            Strategy::Aot => return Err(Error::Precondition("AoT prompts are rendered stage by stage".into())),
        };
        let text = fill(self.get(name), &[("description", &base)]);
        Ok(prompt(stage, text, &[("description", p.task_id.clone())]))
    }

    /// Translation prompt of the two-model chain of thought.
    pub fn render_cot_final(&self, p: &DesignProblem, reasoning: &str) -> Result<RenderedPrompt> {
        require_description(p)?;
        let text = fill(self.get("cot_final.txt"), &[("description", &p.base_prompt()), ("reasoning", reasoning.trim())]);
        Ok(prompt(Stage::Final, text, &[("description", p.task_id.clone()), ("reasoning", "cot".into())]))
    }
}
