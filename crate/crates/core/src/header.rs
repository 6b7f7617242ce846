//! Parsing of ANSI-style Verilog module headers.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PortDir {
    Input,
    Output,
    Inout,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Port {
    pub name: String,
    pub dir: PortDir,
    pub msb: i64,
    pub lsb: i64,
    pub is_reg: bool,
    pub signed: bool,
}

impl Port {
    pub fn width(&self) -> u32 {
        ((self.msb - self.lsb).unsigned_abs() + 1) as u32
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleHeader {
    pub name: String,
    pub ports: Vec<Port>,
}

impl ModuleHeader {
    pub fn port(&self, name: &str) -> Option<&Port> {
        self.ports.iter().find(|p| p.name == name)
    }

    pub fn inputs(&self) -> impl Iterator<Item = &Port> {
        self.ports.iter().filter(|p| p.dir == PortDir::Input)
    }

    pub fn outputs(&self) -> impl Iterator<Item = &Port> {
        self.ports.iter().filter(|p| p.dir != PortDir::Input)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeaderError(pub String);

impl fmt::Display for HeaderError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "module header: {}", self.0)
    }
}

impl std::error::Error for HeaderError {}

fn strip_comments(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let b = s.as_bytes();
    let mut i = 0;
    while i < b.len() {
        if b[i] == b'/' && b.get(i + 1) == Some(&b'/') {
            while i < b.len() && b[i] != b'\n' {
                i += 1;
            }
        } else if b[i] == b'/' && b.get(i + 1) == Some(&b'*') {
            i += 2;
            while i + 1 < b.len() && !(b[i] == b'*' && b[i + 1] == b'/') {
                i += 1;
            }
            i += 2;
            out.push(' ');
        } else {
            let ch = s[i..].chars().next().unwrap();
            out.push(ch);
            i += ch.len_utf8();
        }
    }
    out
}

fn tokens(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in s.chars() {
        if ch.is_alphanumeric() || ch == '_' || ch == '$' || ch == '\'' {
            cur.push(ch);
        } else {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            if !ch.is_whitespace() {
                out.push(ch.to_string());
            }
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Parses the first `module` declaration in `text` up to its port list.
pub fn parse_header(text: &str) -> Result<ModuleHeader, HeaderError> {
    let clean = strip_comments(text);
    let toks = tokens(&clean);
    let err = |m: &str| HeaderError(m.to_string());
    let start = toks.iter().position(|t| t == "module").ok_or_else(|| err("no 'module' keyword"))?;
    let name = toks.get(start + 1).filter(|t| is_ident(t)).ok_or_else(|| err("missing module name"))?.clone();
    let mut i = start + 2;
    if toks.get(i).map(String::as_str) == Some("#") {
        // skip a parameter port list
        i += 1;
        let mut depth = 0;
        while i < toks.len() {
            match toks[i].as_str() {
                "(" => depth += 1,
                ")" => {
                    depth -= 1;
                    if depth == 0 {
                        i += 1;
                        break;
                    }
                }
                _ => {}
            }
            i += 1;
        }
    }
    let mut ports = Vec::new();
    match toks.get(i).map(String::as_str) {
        Some(";") | None => return Ok(ModuleHeader { name, ports }),
        Some("(") => i += 1,
        Some(t) => return Err(err(&format!("unexpected '{t}' after module name"))),
    }
    let mut dir: Option<PortDir> = None;
    let mut is_reg = false;
    let mut signed = false;
    let mut range = (0i64, 0i64);
    loop {
        let Some(t) = toks.get(i) else { return Err(err("unterminated port list")) };
        match t.as_str() {
            ")" => break,
            "," => i += 1,
            "input" | "output" | "inout" => {
                dir = Some(match t.as_str() {
                    "input" => PortDir::Input,
                    "output" => PortDir::Output,
                    _ => PortDir::Inout,
                });
                is_reg = false;
                signed = false;
                range = (0, 0);
                i += 1;
                while let Some(k) = toks.get(i) {
                    match k.as_str() {
                        "reg" | "logic" => is_reg = true,
                        "wire" | "tri" => {}
                        "signed" => signed = true,
                        "unsigned" => {}
                        _ => break,
                    }
                    i += 1;
                }
                if toks.get(i).map(String::as_str) == Some("[") {
                    let close = toks[i..].iter().position(|t| t == "]").ok_or_else(|| err("unterminated range"))? + i;
                    let inner = &toks[i + 1..close];
                    let colon = inner.iter().position(|t| t == ":").ok_or_else(|| err("range without ':'"))?;
                    let msb = const_int(&inner[..colon]).ok_or_else(|| err("non-constant range"))?;
                    let lsb = const_int(&inner[colon + 1..]).ok_or_else(|| err("non-constant range"))?;
                    range = (msb, lsb);
                    i = close + 1;
                }
            }
            name if is_ident(name) => {
                let d = dir.ok_or_else(|| err(&format!("port '{name}' has no direction (non-ANSI headers are unsupported)")))?;
                if ports.iter().any(|p: &Port| p.name == name) {
                    return Err(err(&format!("duplicate port '{name}'")));
                }
                ports.push(Port { name: name.to_string(), dir: d, msb: range.0, lsb: range.1, is_reg, signed });
                i += 1;
            }
            other => return Err(err(&format!("unexpected '{other}' in port list"))),
        }
    }
    Ok(ModuleHeader { name, ports })
}

fn is_ident(t: &str) -> bool {
    let mut c = t.chars();
    matches!(c.next(), Some(ch) if ch.is_ascii_alphabetic() || ch == '_') && !t.contains('\'')
}

fn const_int(toks: &[String]) -> Option<i64> {
    // decimal literal, optionally with a single + or - between literals
    match toks {
        [a] => a.replace('_', "").parse().ok(),
        [a, op, b] => {
            let (x, y): (i64, i64) = (a.parse().ok()?, b.parse().ok()?);
            match op.as_str() {
                "+" => Some(x + y),
                "-" => Some(x - y),
                _ => None,
            }
        }
        _ => None,
    }
}
