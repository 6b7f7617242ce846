use crate::error::CompileError;
use crate::value::{Value, MAX_WIDTH};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    System(String),
    Number(Value),
    Str(String),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
}

const PUNCTS: &[&str] = &[
    "<<<", ">>>", "===", "!==", "==", "!=", "<=", ">=", "&&", "||", "<<", ">>", "~&", "~|", "~^", "^~", "**", "+:", "-:", "+", "-", "*", "/", "%", "&", "|",
    "^", "~", "!", "<", ">", "=", "?", ":", ";", ",", ".", "(", ")", "[", "]", "{", "}", "#", "@",
];

const IGNORED_DIRECTIVES: &[&str] = &["timescale", "default_nettype", "resetall", "celldefine", "endcelldefine"];

pub fn tokenize(src: &str) -> Result<Vec<Token>, CompileError> {
    let bytes = src.as_bytes();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut out = Vec::new();
    while i < bytes.len() {
        let c = bytes[i];
        if c == b'\n' {
            line += 1;
            i += 1;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'*') {
            i += 2;
            while i < bytes.len() && !(bytes[i] == b'*' && bytes.get(i + 1) == Some(&b'/')) {
                if bytes[i] == b'\n' {
                    line += 1;
                }
                i += 1;
            }
            if i >= bytes.len() {
                return Err(CompileError::new(line, "unterminated block comment"));
            }
            i += 2;
            continue;
        }
        if c == b'`' {
            let start = i + 1;
            let mut j = start;
            while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                j += 1;
            }
            let name = &src[start..j];
            if IGNORED_DIRECTIVES.contains(&name) {
                while j < bytes.len() && bytes[j] != b'\n' {
                    j += 1;
                }
                i = j;
                continue;
            }
            return Err(CompileError::new(line, format!("unsupported compiler directive `{name}")));
        }
        if c == b'"' {
            let mut s = String::new();
            i += 1;
            loop {
                match bytes.get(i) {
                    None | Some(b'\n') => return Err(CompileError::new(line, "unterminated string")),
                    Some(b'"') => {
                        i += 1;
                        break;
                    }
                    Some(b'\\') => {
                        let e = bytes.get(i + 1).copied().unwrap_or(b'\\');
                        match e {
                            b'n' => s.push('\n'),
                            b't' => s.push('\t'),
                            b'\\' => s.push('\\'),
                            b'"' => s.push('"'),
                            other => {
                                s.push('\\');
                                s.push(other as char);
                            }
                        }
                        i += 2;
                    }
                    Some(_) => {
                        // copy one UTF-8 scalar
                        let ch = src[i..].chars().next().unwrap();
                        s.push(ch);
                        i += ch.len_utf8();
                    }
                }
            }
            out.push(Token { tok: Tok::Str(s), line });
            continue;
        }
        if c == b'$' {
            let start = i;
            i += 1;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token { tok: Tok::System(src[start..i].to_string()), line });
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'$') {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident(src[start..i].to_string()), line });
            continue;
        }
        if c == b'\\' {
            // escaped identifier
            let start = i + 1;
            i += 1;
            while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident(src[start..i].to_string()), line });
            continue;
        }
        if c.is_ascii_digit() || c == b'\'' {
            let (v, next) = lex_number(src, i, line)?;
            out.push(Token { tok: Tok::Number(v), line });
            i = next;
            continue;
        }
        let rest = &src[i..];
        match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                out.push(Token { tok: Tok::Punct(p), line });
                i += p.len();
            }
            None => return Err(CompileError::new(line, format!("unexpected character '{}'", rest.chars().next().unwrap()))),
        }
    }
    out.push(Token { tok: Tok::Eof, line });
    Ok(out)
}

fn skip_ws(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len() && (bytes[i] == b' ' || bytes[i] == b'\t') {
        i += 1;
    }
    i
}

fn lex_number(src: &str, start: usize, line: u32) -> Result<(Value, usize), CompileError> {
    let bytes = src.as_bytes();
    let mut i = start;
    let mut size: Option<u32> = None;
    if bytes[i].is_ascii_digit() {
        let s = i;
        while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'_') {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'.' && bytes.get(i + 1).is_some_and(|b| b.is_ascii_digit()) {
            return Err(CompileError::new(line, "real literals are not supported"));
        }
        let digits: String = src[s..i].chars().filter(|c| *c != '_').collect();
        let j = skip_ws(bytes, i);
        if bytes.get(j) == Some(&b'\'') {
            let n: u32 = digits.parse().map_err(|_| CompileError::new(line, "bad literal size"))?;
            if n == 0 || n > MAX_WIDTH {
                return Err(CompileError::new(line, format!("literal width {n} out of supported range 1..={MAX_WIDTH}")));
            }
            size = Some(n);
            i = j;
        } else {
            let v: u128 = digits.parse().map_err(|_| CompileError::new(line, "decimal literal too large"))?;
            // unsized decimals are 32-bit signed
            let w = if v > u32::MAX as u128 { 64 } else { 32 };
            return Ok((Value::new(w, v).with_signed(true), i));
        }
    }
    // at the apostrophe
    i += 1;
    let mut signed = false;
    if matches!(bytes.get(i), Some(b's') | Some(b'S')) {
        signed = true;
        i += 1;
    }
    let base = match bytes.get(i).map(|b| b.to_ascii_lowercase()) {
        Some(b'b') => 2u32,
        Some(b'o') => 8,
        Some(b'd') => 10,
        Some(b'h') => 16,
        _ => return Err(CompileError::new(line, "malformed based literal")),
    };
    i = skip_ws(bytes, i + 1);
    let s = i;
    while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'?') {
        i += 1;
    }
    let digits: Vec<char> = src[s..i].chars().filter(|c| *c != '_').collect();
    if digits.is_empty() {
        return Err(CompileError::new(line, "based literal without digits"));
    }
    let width = size.unwrap_or(32);
    let mut val: u128 = 0;
    let mut unk: u128 = 0;
    if base == 10 {
        if digits.len() == 1 && matches!(digits[0], 'x' | 'X') {
            return Ok((Value::x(width).with_signed(signed), i));
        }
        if digits.len() == 1 && matches!(digits[0], 'z' | 'Z' | '?') {
            return Ok((Value::z(width).with_signed(signed), i));
        }
        let text: String = digits.iter().collect();
        val = text.parse().map_err(|_| CompileError::new(line, format!("bad decimal digits '{text}'")))?;
    } else {
        let bits = base.trailing_zeros();
        let mut total_bits = 0u32;
        for ch in &digits {
            let (dv, du) = match ch.to_ascii_lowercase() {
                'x' => (0, (1u128 << bits) - 1),
                'z' | '?' => ((1u128 << bits) - 1, (1u128 << bits) - 1),
                d => {
                    let v = d.to_digit(base).ok_or_else(|| CompileError::new(line, format!("invalid digit '{d}'")))?;
                    (v as u128, 0)
                }
            };
            val = (val << bits) | dv;
            unk = (unk << bits) | du;
            total_bits += bits;
        }
        // extend a leading x/z digit to the full width
        if total_bits < width {
            let top = total_bits - 1;
            let ext = crate::value::mask(width) & !crate::value::mask(total_bits);
            if (unk >> top) & 1 == 1 {
                unk |= ext;
                if (val >> top) & 1 == 1 {
                    val |= ext;
                }
            }
        }
    }
    Ok((Value::from_planes(width, val, unk).with_signed(signed), i))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn num(src: &str) -> Value {
        match &tokenize(src).unwrap()[0].tok {
            Tok::Number(v) => *v,
            t => panic!("not a number: {t:?}"),
        }
    }

    #[test]
    fn based_literals() {
        assert_eq!(num("4'b1010").to_u128(), Some(10));
        assert_eq!(num("8'hFF").to_u128(), Some(255));
        assert_eq!(num("3'd5").to_u128(), Some(5));
        assert_eq!(num("12").width(), 32);
        assert_eq!(num("4'bx").bin_string(), "xxxx");
        assert_eq!(num("4'b1?0z").bin_string(), "1z0z");
        assert_eq!(num("'h3").width(), 32);
    }

    #[test]
    fn skips_comments_and_timescale() {
        let toks = tokenize("`timescale 1ns/1ps\n// hi\nmodule /* x */ m;").unwrap();
        assert_eq!(toks[0].tok, Tok::Ident("module".into()));
        assert_eq!(toks[0].line, 3);
    }

    #[test]
    fn rejects_define() {
        assert!(tokenize("`define FOO 1").is_err());
    }
}
