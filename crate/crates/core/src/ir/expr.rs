//! Boolean expression language shared by Boolean-equation IRs and FSM
//! transition conditions.
//!
//! Accepted operators, loosest binding first: `OR`/`||`/`|`/`+`,
//! `XOR`/`^`, `AND`/`&&`/`&`/`*`, and prefix `NOT`/`!`/`~` or postfix `'`.
//! `sig == k` and `sig != k` compare a signal against an integer literal.

use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BoolExpr {
    Const(bool),
    Var(String),
    /// `signal == value` (or `!=` when `eq` is false).
    Cmp {
        var: String,
        eq: bool,
        value: u64,
    },
    Not(Box<BoolExpr>),
    And(Box<BoolExpr>, Box<BoolExpr>),
    Or(Box<BoolExpr>, Box<BoolExpr>),
    Xor(Box<BoolExpr>, Box<BoolExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExprError {
    /// Byte offset into the source text.
    pub pos: usize,
    pub message: String,
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at offset {}: {}", self.pos, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(u64),
    And,
    Or,
    Xor,
    Not,
    Prime,
    Eq,
    Ne,
    LParen,
    RParen,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let b = src.as_bytes();
    let mut i = 0;
    let mut out = Vec::new();
    while i < b.len() {
        let c = b[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let two = src.get(i..i + 2).unwrap_or("");
        let tok = if two == "&&" {
            i += 2;
            Tok::And
        } else if two == "||" {
            i += 2;
            Tok::Or
        } else if two == "==" {
            i += 2;
            Tok::Eq
        } else if two == "!=" {
            i += 2;
            Tok::Ne
        } else if c.is_ascii_digit() {
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'\'' || b[i] == b'_') {
                i += 1;
            }
            Tok::Num(parse_literal(&src[start..i]).ok_or_else(|| ExprError { pos: start, message: format!("bad literal '{}'", &src[start..i]) })?)
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            // optional bit select
            if i < b.len() && b[i] == b'[' {
                let close = src[i..].find(']').ok_or_else(|| ExprError { pos: i, message: "unterminated '['".into() })? + i;
                if src[i + 1..close].trim().parse::<u32>().is_err() {
                    return Err(ExprError { pos: i, message: "bit select must be a constant".into() });
                }
                i = close + 1;
            }
            let word = &src[start..i];
            match word.to_ascii_uppercase().as_str() {
                "AND" => Tok::And,
                "OR" => Tok::Or,
                "XOR" => Tok::Xor,
                "NOT" => Tok::Not,
                "TRUE" => Tok::Num(1),
                "FALSE" => Tok::Num(0),
                _ => Tok::Ident(word.replace(' ', "")),
            }
        } else {
            i += 1;
            match c {
                b'&' | b'*' | b'.' => Tok::And,
                b'|' | b'+' => Tok::Or,
                b'^' => Tok::Xor,
                b'!' | b'~' => Tok::Not,
                b'\'' => Tok::Prime,
                b'(' => Tok::LParen,
                b')' => Tok::RParen,
                _ => {
                    let ch = src[start..].chars().next().unwrap();
                    return Err(ExprError { pos: start, message: format!("unexpected character '{ch}'") });
                }
            }
        };
        out.push((tok, start));
    }
    Ok(out)
}

fn parse_literal(s: &str) -> Option<u64> {
    let s = s.replace('_', "");
    match s.find('\'') {
        None => s.parse().ok(),
        Some(q) => {
            let rest = &s[q + 1..];
            let (radix, digits) = match rest.chars().next()?.to_ascii_lowercase() {
                'b' => (2, &rest[1..]),
                'd' => (10, &rest[1..]),
                'h' => (16, &rest[1..]),
                'o' => (8, &rest[1..]),
                _ => return None,
            };
            u64::from_str_radix(digits, radix).ok()
        }
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |t| t.1)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError { pos: self.offset(), message: message.into() })
    }

    fn or(&mut self) -> Result<BoolExpr, ExprError> {
        let mut l = self.xor()?;
        while self.peek() == Some(&Tok::Or) {
            self.pos += 1;
            l = BoolExpr::Or(Box::new(l), Box::new(self.xor()?));
        }
        Ok(l)
    }

    fn xor(&mut self) -> Result<BoolExpr, ExprError> {
        let mut l = self.and()?;
        while self.peek() == Some(&Tok::Xor) {
            self.pos += 1;
            l = BoolExpr::Xor(Box::new(l), Box::new(self.and()?));
        }
        Ok(l)
    }

    fn and(&mut self) -> Result<BoolExpr, ExprError> {
        let mut l = self.unary()?;
        while self.peek() == Some(&Tok::And) {
            self.pos += 1;
            l = BoolExpr::And(Box::new(l), Box::new(self.unary()?));
        }
        Ok(l)
    }

    fn unary(&mut self) -> Result<BoolExpr, ExprError> {
        if self.peek() == Some(&Tok::Not) {
            self.pos += 1;
            return Ok(BoolExpr::Not(Box::new(self.unary()?)));
        }
        let mut e = self.primary()?;
        while self.peek() == Some(&Tok::Prime) {
            self.pos += 1;
            e = BoolExpr::Not(Box::new(e));
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<BoolExpr, ExprError> {
        match self.peek().cloned() {
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.or()?;
                if self.peek() != Some(&Tok::RParen) {
                    return self.err("expected ')'");
                }
                self.pos += 1;
                Ok(e)
            }
            Some(Tok::Num(n)) => {
                self.pos += 1;
                match n {
                    0 => Ok(BoolExpr::Const(false)),
                    1 => Ok(BoolExpr::Const(true)),
                    _ => self.err(format!("constant {n} is not a Boolean value")),
                }
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                let eq = match self.peek() {
                    Some(Tok::Eq) => true,
                    Some(Tok::Ne) => false,
                    _ => return Ok(BoolExpr::Var(name)),
                };
                self.pos += 1;
                match self.peek().cloned() {
                    Some(Tok::Num(value)) => {
                        self.pos += 1;
                        Ok(BoolExpr::Cmp { var: name, eq, value })
                    }
                    _ => self.err("expected a literal after comparison"),
                }
            }
            Some(t) => self.err(format!("unexpected {t:?}")),
            None => self.err("unexpected end of expression"),
        }
    }
}

/// Parses an expression. An empty (or whitespace-only) string is an error.
pub fn parse_bool(src: &str) -> Result<BoolExpr, ExprError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, end: src.len() };
    if p.toks.is_empty() {
        return p.err("empty expression");
    }
    let e = p.or()?;
    if p.pos != p.toks.len() {
        return p.err("trailing input");
    }
    Ok(e)
}

/// Signal name without any bit select.
pub fn base_name(var: &str) -> &str {
    var.split('[').next().unwrap_or(var)
}

impl BoolExpr {
    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect(&mut out);
        out
    }

    fn collect(&self, out: &mut BTreeSet<String>) {
        match self {
            BoolExpr::Const(_) => {}
            BoolExpr::Var(v) | BoolExpr::Cmp { var: v, .. } => {
                out.insert(v.clone());
            }
            BoolExpr::Not(a) => a.collect(out),
            BoolExpr::And(a, b) | BoolExpr::Or(a, b) | BoolExpr::Xor(a, b) => {
                a.collect(out);
                b.collect(out);
            }
        }
    }

    /// Evaluates with each variable taken as a single bit.
    pub fn eval(&self, env: &dyn Fn(&str) -> bool) -> bool {
        match self {
            BoolExpr::Const(c) => *c,
            BoolExpr::Var(v) => env(v),
            BoolExpr::Cmp { var, eq, value } => (env(var) as u64 == *value) == *eq,
            BoolExpr::Not(a) => !a.eval(env),
            BoolExpr::And(a, b) => a.eval(env) && b.eval(env),
            BoolExpr::Or(a, b) => a.eval(env) || b.eval(env),
            BoolExpr::Xor(a, b) => a.eval(env) ^ b.eval(env),
        }
    }

    /// Verilog expression text, fully parenthesized.
    pub fn to_verilog(&self) -> String {
        match self {
            BoolExpr::Const(c) => if *c { "1'b1" } else { "1'b0" }.into(),
            BoolExpr::Var(v) => v.clone(),
            BoolExpr::Cmp { var, eq, value } => format!("({var} {} {value})", if *eq { "==" } else { "!=" }),
            BoolExpr::Not(a) => format!("~{}", a.atom_verilog()),
            BoolExpr::And(a, b) => format!("({} & {})", a.to_verilog(), b.to_verilog()),
            BoolExpr::Or(a, b) => format!("({} | {})", a.to_verilog(), b.to_verilog()),
            BoolExpr::Xor(a, b) => format!("({} ^ {})", a.to_verilog(), b.to_verilog()),
        }
    }

    fn atom_verilog(&self) -> String {
        match self {
            BoolExpr::Var(_) | BoolExpr::Const(_) => self.to_verilog(),
            BoolExpr::Not(_) => format!("({})", self.to_verilog()),
            _ => self.to_verilog(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth(src: &str, a: bool, b: bool) -> bool {
        parse_bool(src).unwrap().eval(&|v| match v {
            "a" => a,
            "b" => b,
            _ => panic!("unknown {v}"),
        })
    }

    #[test]
    fn word_and_symbol_forms_agree() {
        let forms = ["(a AND NOT b) OR (NOT a AND b)", "a & !b | ~a & b", "a*b' + a'*b", "a XOR b", "a ^ b", "(a && !b) || (!a && b)"];
        for f in forms {
            for (x, y) in [(false, false), (false, true), (true, false), (true, true)] {
                assert_eq!(truth(f, x, y), x ^ y, "{f} at {x} {y}");
            }
        }
    }

    #[test]
    fn precedence_not_and_xor_or() {
        // a OR b AND NOT a  ==  a OR (b AND (NOT a))
        assert!(truth("a OR b AND NOT a", false, true));
        assert!(!truth("NOT a AND b", true, true));
    }

    #[test]
    fn comparisons_and_constants() {
        assert!(truth("a == 1 && b != 1", true, false));
        assert!(truth("1", false, false));
        assert!(!truth("a == 1'b0", true, false));
    }

    #[test]
    fn errors_carry_position() {
        let e = parse_bool("a AND (b").unwrap_err();
        assert_eq!(e.pos, 8);
        let e = parse_bool("a # b").unwrap_err();
        assert_eq!(e.pos, 2);
        assert!(parse_bool("   ").is_err());
        assert!(parse_bool("a b").is_err());
    }

    #[test]
    fn vars_and_bit_selects() {
        let e = parse_bool("in[0] & !in[1] | reset").unwrap();
        let v: Vec<_> = e.vars().into_iter().collect();
        assert_eq!(v, ["in[0]", "in[1]", "reset"]);
        assert_eq!(base_name("in[1]"), "in");
    }

    #[test]
    fn verilog_rendering() {
        assert_eq!(parse_bool("!reset").unwrap().to_verilog(), "~reset");
        assert_eq!(parse_bool("a AND NOT (b OR c)").unwrap().to_verilog(), "(a & ~(b | c))");
    }
}
