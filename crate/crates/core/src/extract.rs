//! Pulling typed artifacts out of free-form model responses.

use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use crate::problem::{Classification1, Classification2};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("no answer from {{{}}} found in response", vocabulary.join(", "))]
    NoAnswer { vocabulary: Vec<String>, raw: String },
    #[error("no parseable JSON object in response")]
    NoJson { raw: String },
    #[error("response contains no pseudocode")]
    EmptyPseudocode { raw: String },
    #[error("pseudocode contains Verilog ({0})")]
    VerilogLeak(String),
    #[error("no module named '{expected}' in response")]
    NoModule { expected: String, raw: String },
    #[error("module '{0}' has no matching endmodule")]
    Unbalanced(String),
}

impl ExtractError {
    /// Raw response text, when the error kept it.
    pub fn raw(&self) -> Option<&str> {
        match self {
            ExtractError::NoAnswer { raw, .. } | ExtractError::NoJson { raw } | ExtractError::EmptyPseudocode { raw } | ExtractError::NoModule { raw, .. } => {
                Some(raw)
            }
            _ => None,
        }
    }
}

/// Folds case and turns every non-alphanumeric character except `_` into a
/// space, so terms can be matched as whole words.
fn words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !(c.is_alphanumeric() || c == '_' || c == '-'))
        .flat_map(|w| {
            let w = w.trim_matches('-');
            // "K-map" stays one word; other hyphenations split
            if w == "k-map" || w == "kmap" {
                vec![w.to_string()]
            } else {
                w.split('-').map(str::to_string).collect()
            }
        })
        .filter(|w| !w.is_empty())
        .collect()
}

/// Last whole-word occurrence of a vocabulary term. Multi-word terms
/// (written with `_` or spaces) also match when the model separates the
/// parts with spaces, e.g. "truth table" for `truth_table`.
pub fn extract_final_word(text: &str, vocabulary: &[&str]) -> Result<String, ExtractError> {
    let ws = words(text);
    let terms: Vec<(String, Vec<String>)> = vocabulary
        .iter()
        .map(|t| {
            let l = t.to_lowercase();
            let parts = l.split(['_', ' ']).map(str::to_string).collect();
            (l, parts)
        })
        .collect();
    let mut best: Option<(usize, usize, &str)> = None; // (end index, length, term)
    for (term, parts) in &terms {
        for i in 0..ws.len() {
            let joined = ws[i] == *term;
            let split = parts.len() > 1 && ws.len() - i >= parts.len() && ws[i..i + parts.len()] == parts[..];
            let len = if joined {
                1
            } else if split {
                parts.len()
            } else {
                continue;
            };
            let end = i + len;
            if best.is_none_or(|(e, l, _)| end > e || (end == e && len > l)) {
                best = Some((end, len, term));
            }
        }
    }
    best.map(|(_, _, t)| t.to_string())
        .ok_or_else(|| ExtractError::NoAnswer { vocabulary: vocabulary.iter().map(|s| s.to_string()).collect(), raw: text.to_string() })
}

pub fn extract_classification1(text: &str) -> Result<Classification1, ExtractError> {
    let w = extract_final_word(text, &["combinational", "sequential"])?;
    Ok(if w == "sequential" { Classification1::Sequential } else { Classification1::Combinational })
}

/// Accepted spellings for each second-stage answer.
const C2_TERMS: &[(&str, Classification2)] = &[
    ("truth_table", Classification2::TruthTable),
    ("boolean_expression", Classification2::BooleanExpression),
    ("boolean_equation", Classification2::BooleanExpression),
    ("boolean", Classification2::BooleanExpression),
    ("k-map", Classification2::KMap),
    ("kmap", Classification2::KMap),
    ("karnaugh_map", Classification2::KMap),
    ("mux_mapping", Classification2::MuxMapping),
    ("mux", Classification2::MuxMapping),
    ("multiplexer", Classification2::MuxMapping),
    ("other", Classification2::Other),
];

pub fn extract_classification2(text: &str) -> Result<Classification2, ExtractError> {
    let vocab: Vec<&str> = C2_TERMS.iter().map(|(t, _)| *t).collect();
    let w = extract_final_word(text, &vocab)?;
    Ok(C2_TERMS.iter().find(|(t, _)| *t == w).map(|(_, c)| *c).expect("term comes from the vocabulary"))
}

static FENCE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?s)```[A-Za-z0-9_+-]*[^\S\n]*\n(.*?)```").unwrap());

fn is_object(s: &str) -> bool {
    matches!(serde_json::from_str::<serde_json::Value>(s), Ok(serde_json::Value::Object(_)))
}

/// First fenced block holding one JSON object, else the largest
/// brace-balanced substring that parses as one.
pub fn extract_json_block(text: &str) -> Result<&str, ExtractError> {
    for c in FENCE.captures_iter(text) {
        let m = c.get(1).unwrap();
        let t = m.as_str().trim();
        if is_object(t) {
            let start = m.start() + (m.as_str().len() - m.as_str().trim_start().len());
            return Ok(&text[start..start + t.len()]);
        }
    }
    let b = text.as_bytes();
    let mut spans: Vec<(usize, usize)> = Vec::new();
    for (i, _) in text.match_indices('{') {
        let mut depth = 0i32;
        let mut in_str = false;
        let mut esc = false;
        for (j, &c) in b.iter().enumerate().skip(i) {
            if in_str {
                match (esc, c) {
                    (true, _) => esc = false,
                    (false, b'\\') => esc = true,
                    (false, b'"') => in_str = false,
                    _ => {}
                }
                continue;
            }
            match c {
                b'"' => in_str = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        spans.push((i, j + 1));
                        break;
                    }
                }
                _ => {}
            }
        }
    }
    spans.sort_by_key(|(s, e)| (std::cmp::Reverse(e - s), *s));
    spans.into_iter().map(|(s, e)| &text[s..e]).find(|t| is_object(t)).ok_or_else(|| ExtractError::NoJson { raw: text.to_string() })
}

static LEAK_ALWAYS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\balways\s*@").unwrap());
static LEAK_END: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bendmodule\b").unwrap());
// `assign x = ...;` is Verilog; "assign q <- 1" style prose is not.
static LEAK_ASSIGN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bassign\s+[A-Za-z_][\w\[\]:]*\s*=[^=].*;").unwrap());
static QUOTED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#""[^"\n]*"|`[^`\n]*`"#).unwrap());

/// Non-empty trimmed lines of the pseudocode, with prose and fences removed.
pub fn extract_pseudocode(text: &str) -> Result<Vec<String>, ExtractError> {
    let fenced: Vec<&str> = FENCE.captures_iter(text).map(|c| c.get(1).unwrap().as_str()).collect();
    let body: Vec<&str> = if fenced.is_empty() {
        let mut lines: Vec<&str> = text.lines().filter(|l| !l.trim_start().starts_with("```")).collect();
        // drop an introductory sentence ending with ':' before the first line
        if lines.len() > 1 && lines[0].trim_end().ends_with(':') && !lines[0].contains("declaration") {
            lines.remove(0);
        }
        lines
    } else {
        fenced.iter().flat_map(|f| f.lines()).collect()
    };
    let lines: Vec<String> = body.iter().map(|l| l.trim()).filter(|l| !l.is_empty()).map(str::to_string).collect();
    if lines.is_empty() {
        return Err(ExtractError::EmptyPseudocode { raw: text.to_string() });
    }
    for l in &lines {
        let unquoted = QUOTED.replace_all(l, "\"\"");
        for (re, what) in [(&*LEAK_ALWAYS, "always @"), (&*LEAK_END, "endmodule"), (&*LEAK_ASSIGN, "assign")] {
            if re.is_match(&unquoted) {
                return Err(ExtractError::VerilogLeak(format!("{what} in line: {l}")));
            }
        }
    }
    Ok(lines)
}

static MODULE_DECL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bmodule\s+([A-Za-z_][A-Za-z0-9_$]*)").unwrap());
static ENDMODULE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bendmodule\b").unwrap());

/// The module named `expected` through its `endmodule`.
pub fn extract_verilog_module<'a>(text: &'a str, expected: &str) -> Result<&'a str, ExtractError> {
    let decls: Vec<(usize, &str)> = MODULE_DECL.captures_iter(text).map(|c| (c.get(0).unwrap().start(), c.get(1).unwrap().as_str())).collect();
    let Some(&(start, _)) = decls.iter().find(|(_, n)| *n == expected) else {
        return Err(ExtractError::NoModule { expected: expected.to_string(), raw: text.to_string() });
    };
    let end = ENDMODULE.find_at(text, start).ok_or_else(|| ExtractError::Unbalanced(expected.to_string()))?;
    // another module declared before this endmodule means nesting
    if decls.iter().any(|(s, _)| *s > start && *s < end.start()) {
        return Err(ExtractError::Unbalanced(expected.to_string()));
    }
    Ok(&text[start..end.end()])
}

/// Strips code fences, keeping the contents of the first fenced block if
/// there is one.
pub fn strip_fences(text: &str) -> &str {
    match FENCE.captures(text) {
        Some(c) => c.get(1).unwrap().as_str(),
        None => text,
    }
}

/// Compilable source for a final-stage response: the named module if
/// present, else `header` + body + `endmodule` for body-only completions.
pub fn assemble_candidate(text: &str, header: &str, expected: &str) -> Result<String, ExtractError> {
    match extract_verilog_module(text, expected) {
        Ok(m) => Ok(m.to_string()),
        Err(ExtractError::NoModule { .. }) => {
            let body = strip_fences(text).trim();
            if body.is_empty() || MODULE_DECL.is_match(body) {
                return Err(ExtractError::NoModule { expected: expected.to_string(), raw: text.to_string() });
            }
            let body = ENDMODULE.find(body).map_or(body, |m| body[..m.start()].trim_end());
            let mut out = header.trim_end().to_string();
            if !out.ends_with(';') {
                out.push(';');
            }
            out.push('\n');
            out.push_str(body);
            out.push_str("\nendmodule\n");
            Ok(out)
        }
        Err(e) => Err(e),
    }
}
