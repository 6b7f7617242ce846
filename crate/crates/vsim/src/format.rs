//! `$display`-style formatting.

use crate::value::Value;

/// A formatted argument: either literal text or an evaluated value.
#[derive(Debug, Clone)]
pub enum FmtArg {
    Str(String),
    Val(Value),
}

/// Formats a system-task argument list. Each string literal acts as a format
/// string consuming the values that follow it; stray values print in decimal.
pub fn format_args(args: &[FmtArg], time: u64, scope: &str) -> String {
    let mut out = String::new();
    let mut i = 0;
    while i < args.len() {
        match &args[i] {
            FmtArg::Str(f) => {
                i += 1;
                let consumed = apply_format(f, &args[i..], time, scope, &mut out);
                i += consumed;
            }
            FmtArg::Val(v) => {
                out.push_str(&pad_left(&v.dec_string(), dec_width(v)));
                i += 1;
            }
        }
    }
    out
}

fn apply_format(f: &str, rest: &[FmtArg], time: u64, scope: &str, out: &mut String) -> usize {
    let mut used = 0usize;
    let mut chars = f.chars().peekable();
    let next = |used: &mut usize| -> Option<FmtArg> {
        let a = rest.get(*used).cloned();
        if a.is_some() {
            *used += 1;
        }
        a
    };
    while let Some(c) = chars.next() {
        if c != '%' {
            out.push(c);
            continue;
        }
        let mut width = String::new();
        while let Some(d) = chars.peek().copied().filter(|d| d.is_ascii_digit() || *d == '.') {
            width.push(d);
            chars.next();
        }
        let explicit: Option<usize> = width.split('.').next().and_then(|w| w.parse().ok());
        let Some(spec) = chars.next() else {
            out.push('%');
            break;
        };
        match spec.to_ascii_lowercase() {
            '%' => out.push('%'),
            'm' => out.push_str(scope),
            'l' => out.push_str("work"),
            't' => {
                let s = match next(&mut used) {
                    Some(FmtArg::Val(v)) => v.dec_string(),
                    Some(FmtArg::Str(s)) => s,
                    None => time.to_string(),
                };
                out.push_str(&pad_left(&s, explicit.unwrap_or(20)));
            }
            'd' | 'b' | 'h' | 'x' | 'o' | 'c' | 's' | 'e' | 'f' | 'g' | 'u' | 'z' | 'v' => {
                let Some(arg) = next(&mut used) else {
                    out.push('%');
                    out.push(spec);
                    continue;
                };
                let v = match arg {
                    FmtArg::Val(v) => v,
                    FmtArg::Str(s) => {
                        if spec.eq_ignore_ascii_case(&'s') {
                            out.push_str(&pad_left(&s, explicit.unwrap_or(0)));
                        } else {
                            out.push_str(&s);
                        }
                        continue;
                    }
                };
                let s = match spec.to_ascii_lowercase() {
                    'd' | 'e' | 'f' | 'g' | 'u' | 'v' => pad_left(&v.dec_string(), explicit.unwrap_or_else(|| dec_width(&v))),
                    'b' | 'z' => radix(&v, 1, explicit),
                    'o' => radix(&v, 3, explicit),
                    'h' | 'x' => radix(&v, 4, explicit),
                    'c' => {
                        let b = v.to_u128().map(|x| (x & 0xff) as u8).unwrap_or(b'?');
                        (b as char).to_string()
                    }
                    's' => pad_left(&value_string(&v), explicit.unwrap_or(0)),
                    _ => unreachable!(),
                };
                out.push_str(&s);
            }
            other => {
                out.push('%');
                out.push(other);
            }
        }
    }
    used
}

fn radix(v: &Value, bits: u32, explicit: Option<usize>) -> String {
    let full = if bits == 1 { v.bin_string() } else { v.radix_string(bits) };
    match explicit {
        Some(w) => {
            let trimmed = full.trim_start_matches('0');
            let trimmed = if trimmed.is_empty() { "0" } else { trimmed };
            pad_left(trimmed, w)
        }
        None => full,
    }
}

fn value_string(v: &Value) -> String {
    let Some(n) = v.to_u128() else { return String::new() };
    let bytes = v.width().div_ceil(8);
    (0..bytes).rev().map(|i| ((n >> (i * 8)) & 0xff) as u8).skip_while(|b| *b == 0).map(|b| b as char).collect()
}

/// Column width `%d` uses by default: the digits of the largest value.
fn dec_width(v: &Value) -> usize {
    let w = v.width();
    if v.is_signed() {
        let max = if w >= 128 { u128::MAX / 2 + 1 } else { 1u128 << (w - 1) };
        max.to_string().len() + 1
    } else {
        let max = if w >= 128 { u128::MAX } else { (1u128 << w) - 1 };
        max.to_string().len()
    }
}

fn pad_left(s: &str, width: usize) -> String {
    format!("{s:>width$}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(w: u32, n: u128) -> FmtArg {
        FmtArg::Val(Value::new(w, n))
    }

    #[test]
    fn decimal_padding() {
        assert_eq!(format_args(&[FmtArg::Str("%d".into()), v(8, 5)], 0, "t"), "  5");
        assert_eq!(format_args(&[FmtArg::Str("%0d|%1d".into()), v(8, 5), v(8, 42)], 0, "t"), "5|42");
    }

    #[test]
    fn radix_forms() {
        assert_eq!(format_args(&[FmtArg::Str("%b %h %0h".into()), v(4, 5), v(12, 0xab), v(12, 0xab)], 0, "t"), "0101 0ab ab");
        assert_eq!(format_args(&[FmtArg::Str("%b".into()), FmtArg::Val(Value::x(2))], 0, "t"), "xx");
    }

    #[test]
    fn time_scope_and_percent() {
        assert_eq!(format_args(&[FmtArg::Str("%0t %m 100%%".into())], 7, "top.u"), "7 top.u 100%");
    }

    #[test]
    fn mismatch_line() {
        let s = format_args(&[FmtArg::Str("Mismatches: %1d in %1d samples".into()), v(32, 0), v(32, 20)], 0, "t");
        assert_eq!(s, "Mismatches: 0 in 20 samples");
    }
}
