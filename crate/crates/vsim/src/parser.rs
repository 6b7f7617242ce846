//! Recursive-descent parser for the supported Verilog subset.

use crate::ast::*;
use crate::error::CompileError;
use crate::lexer::{Tok, Token};

pub struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, CompileError>;

fn is_dir(s: &str) -> bool {
    matches!(s, "input" | "output" | "inout")
}

impl Parser {
    pub fn new(toks: Vec<Token>) -> Self {
        Parser { toks, pos: 0 }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn line(&self) -> u32 {
        self.toks[self.pos].line
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err(CompileError::new(self.line(), msg))
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == k)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if self.is_kw(k) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.err(format!("expected '{p}', found {}", describe(self.peek())))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            t => self.err(format!("expected identifier, found {}", describe(&t))),
        }
    }

    pub fn parse_source(&mut self) -> PResult<Vec<Module>> {
        let mut mods = Vec::new();
        loop {
            match self.peek() {
                Tok::Eof => break,
                Tok::Ident(s) if s == "module" || s == "macromodule" => mods.push(self.module()?),
                t => return self.err(format!("expected 'module', found {}", describe(t))),
            }
        }
        Ok(mods)
    }

    fn module(&mut self) -> PResult<Module> {
        let line = self.line();
        self.bump();
        let name = self.ident()?;
        let mut items = Vec::new();
        let mut ports = Vec::new();
        if self.eat_punct("#") {
            self.expect_punct("(")?;
            loop {
                let pline = self.line();
                self.eat_kw("parameter");
                self.skip_type_words();
                let pname = self.ident()?;
                self.expect_punct("=")?;
                let value = self.expr()?;
                items.push(Item::Param { line: pline, name: pname, value, local: false });
                if !self.eat_punct(",") {
                    break;
                }
            }
            self.expect_punct(")")?;
        }
        if self.eat_punct("(") {
            if !self.is_punct(")") {
                let ansi = matches!(self.peek(), Tok::Ident(s) if is_dir(s));
                if ansi {
                    self.ansi_ports(&mut ports, &mut items)?;
                } else {
                    loop {
                        ports.push(self.ident()?);
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                }
            }
            self.expect_punct(")")?;
        }
        self.expect_punct(";")?;
        while !self.is_kw("endmodule") {
            if matches!(self.peek(), Tok::Eof) {
                return self.err(format!("missing 'endmodule' for module '{name}'"));
            }
            self.item(&mut items)?;
        }
        self.bump();
        Ok(Module { name, line, ports, items })
    }

    fn skip_type_words(&mut self) {
        while self.is_kw("integer") || self.is_kw("signed") || self.is_kw("unsigned") {
            self.bump();
        }
        if self.is_punct("[") {
            let _ = self.range();
        }
    }

    fn ansi_ports(&mut self, ports: &mut Vec<String>, items: &mut Vec<Item>) -> PResult<()> {
        loop {
            let line = self.line();
            let dir = match self.ident()?.as_str() {
                "input" => Dir::Input,
                "output" => Dir::Output,
                "inout" => Dir::Inout,
                other => return self.err(format!("expected port direction, found '{other}'")),
            };
            let (kind, signed, range) = self.net_type()?;
            let mut decl = Decl { line, dir: Some(dir), kind, signed, range, names: Vec::new() };
            loop {
                let n = self.ident()?;
                ports.push(n.clone());
                let init = if self.eat_punct("=") { Some(self.expr()?) } else { None };
                decl.names.push(Declarator { name: n, array: None, init });
                if self.is_punct(",") && matches!(self.peek_at(1), Tok::Ident(s) if !is_dir(s)) {
                    self.bump();
                    continue;
                }
                break;
            }
            items.push(Item::Decl(decl));
            if !self.eat_punct(",") {
                return Ok(());
            }
        }
    }

    fn net_type(&mut self) -> PResult<(Option<NetKind>, bool, Option<Range>)> {
        let mut kind = None;
        loop {
            if self.eat_kw("wire") || self.eat_kw("tri") || self.eat_kw("wand") || self.eat_kw("wor") {
                kind = Some(NetKind::Wire);
            } else if self.eat_kw("reg") || self.eat_kw("logic") || self.eat_kw("bit") {
                kind = Some(NetKind::Reg);
            } else if self.eat_kw("integer") || self.eat_kw("int") {
                kind = Some(NetKind::Integer);
            } else {
                break;
            }
        }
        let mut signed = false;
        if self.eat_kw("signed") {
            signed = true;
        } else {
            self.eat_kw("unsigned");
        }
        let range = if self.is_punct("[") { Some(self.range()?) } else { None };
        Ok((kind, signed, range))
    }

    fn range(&mut self) -> PResult<Range> {
        self.expect_punct("[")?;
        let msb = self.expr()?;
        self.expect_punct(":")?;
        let lsb = self.expr()?;
        self.expect_punct("]")?;
        Ok(Range { msb, lsb })
    }

    fn item(&mut self, items: &mut Vec<Item>) -> PResult<()> {
        let line = self.line();
        let kw = match self.peek() {
            Tok::Ident(s) => s.clone(),
            Tok::Punct(";") => {
                self.bump();
                return Ok(());
            }
            t => return self.err(format!("unexpected {} in module body", describe(t))),
        };
        match kw.as_str() {
            "input" | "output" | "inout" => {
                self.bump();
                let dir = match kw.as_str() {
                    "input" => Dir::Input,
                    "output" => Dir::Output,
                    _ => Dir::Inout,
                };
                let (kind, signed, range) = self.net_type()?;
                let names = self.declarators()?;
                items.push(Item::Decl(Decl { line, dir: Some(dir), kind, signed, range, names }));
            }
            "wire" | "reg" | "logic" | "integer" | "tri" | "bit" | "int" => {
                let (kind, signed, range) = self.net_type()?;
                let names = self.declarators()?;
                items.push(Item::Decl(Decl { line, dir: None, kind, signed, range, names }));
            }
            "parameter" | "localparam" => {
                self.bump();
                self.skip_type_words();
                loop {
                    let name = self.ident()?;
                    self.expect_punct("=")?;
                    let value = self.expr()?;
                    items.push(Item::Param { line, name, value, local: kw == "localparam" });
                    if !self.eat_punct(",") {
                        break;
                    }
                }
                self.expect_punct(";")?;
            }
            "assign" => {
                self.bump();
                loop {
                    let lhs = self.lvalue()?;
                    self.expect_punct("=")?;
                    let rhs = self.expr()?;
                    items.push(Item::Assign { line, lhs, rhs });
                    if !self.eat_punct(",") {
                        break;
                    }
                }
                self.expect_punct(";")?;
            }
            "always" | "always_ff" | "always_latch" => {
                self.bump();
                let body = self.stmt()?;
                items.push(Item::Always { line, body });
            }
            "always_comb" => {
                self.bump();
                let body = self.stmt()?;
                items.push(Item::Always { line, body: Stmt::Event { ctl: EventCtl::Star, body: Box::new(body) } });
            }
            "initial" => {
                self.bump();
                let body = self.stmt()?;
                items.push(Item::Initial { line, body });
            }
            "function" | "task" | "generate" | "genvar" | "specify" | "primitive" | "defparam" => {
                return self.err(format!("'{kw}' is not supported by the built-in simulator"));
            }
            _ => {
                // module instantiation
                let module = self.ident()?;
                let params = if self.eat_punct("#") { self.connections()? } else { Connections::Positional(vec![]) };
                let name = self.ident()?;
                let conns = self.connections()?;
                self.expect_punct(";")?;
                items.push(Item::Instance(Instance { line, module, name, params, conns }));
            }
        }
        Ok(())
    }

    fn declarators(&mut self) -> PResult<Vec<Declarator>> {
        let mut names = Vec::new();
        loop {
            let name = self.ident()?;
            let array = if self.is_punct("[") { Some(self.range()?) } else { None };
            let init = if self.eat_punct("=") { Some(self.expr()?) } else { None };
            names.push(Declarator { name, array, init });
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct(";")?;
        Ok(names)
    }

    fn connections(&mut self) -> PResult<Connections> {
        self.expect_punct("(")?;
        if self.eat_punct(")") {
            return Ok(Connections::Positional(vec![]));
        }
        if self.is_punct(".") {
            let mut v = Vec::new();
            loop {
                self.expect_punct(".")?;
                let port = self.ident()?;
                self.expect_punct("(")?;
                let e = if self.is_punct(")") { None } else { Some(self.expr()?) };
                self.expect_punct(")")?;
                v.push((port, e));
                if !self.eat_punct(",") {
                    break;
                }
            }
            self.expect_punct(")")?;
            Ok(Connections::Named(v))
        } else {
            let mut v = Vec::new();
            loop {
                if self.is_punct(",") || self.is_punct(")") {
                    v.push(None);
                } else {
                    v.push(Some(self.expr()?));
                }
                if !self.eat_punct(",") {
                    break;
                }
            }
            self.expect_punct(")")?;
            Ok(Connections::Positional(v))
        }
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let line = self.line();
        match self.peek().clone() {
            Tok::Punct(";") => {
                self.bump();
                Ok(Stmt::Null)
            }
            Tok::Punct("#") => {
                self.bump();
                let amount = self.delay_value()?;
                let body = self.stmt()?;
                Ok(Stmt::Delay { amount, body: Box::new(body) })
            }
            Tok::Punct("@") => {
                self.bump();
                let ctl = self.event_ctl()?;
                let body = self.stmt()?;
                Ok(Stmt::Event { ctl, body: Box::new(body) })
            }
            Tok::System(name) => {
                self.bump();
                let mut args = Vec::new();
                if self.eat_punct("(") {
                    if !self.is_punct(")") {
                        loop {
                            if self.is_punct(",") {
                                // empty argument
                                args.push(Expr::Str(String::new()));
                            } else {
                                args.push(self.expr()?);
                            }
                            if !self.eat_punct(",") {
                                break;
                            }
                        }
                    }
                    self.expect_punct(")")?;
                }
                self.expect_punct(";")?;
                Ok(Stmt::SysTask { line, name, args })
            }
            Tok::Ident(kw) => match kw.as_str() {
                "begin" => {
                    self.bump();
                    if self.eat_punct(":") {
                        self.ident()?;
                    }
                    let mut v = Vec::new();
                    while !self.is_kw("end") {
                        if matches!(self.peek(), Tok::Eof) {
                            return self.err("missing 'end'");
                        }
                        if self.is_kw("integer") || self.is_kw("reg") {
                            return self.err("declarations inside blocks are not supported");
                        }
                        v.push(self.stmt()?);
                    }
                    self.bump();
                    if self.eat_punct(":") {
                        self.ident()?;
                    }
                    Ok(Stmt::Block(v))
                }
                "if" => {
                    self.bump();
                    self.expect_punct("(")?;
                    let cond = self.expr()?;
                    self.expect_punct(")")?;
                    let then = Box::new(self.stmt()?);
                    let els = if self.eat_kw("else") { Some(Box::new(self.stmt()?)) } else { None };
                    Ok(Stmt::If { cond, then, els })
                }
                "case" | "casez" | "casex" => {
                    self.bump();
                    let kind = match kw.as_str() {
                        "case" => CaseKind::Case,
                        "casez" => CaseKind::Casez,
                        _ => CaseKind::Casex,
                    };
                    self.expect_punct("(")?;
                    let subject = self.expr()?;
                    self.expect_punct(")")?;
                    let mut arms = Vec::new();
                    let mut default = None;
                    while !self.eat_kw("endcase") {
                        if matches!(self.peek(), Tok::Eof) {
                            return self.err("missing 'endcase'");
                        }
                        if self.eat_kw("default") {
                            self.eat_punct(":");
                            default = Some(Box::new(self.stmt()?));
                            continue;
                        }
                        let mut labels = vec![self.expr()?];
                        while self.eat_punct(",") {
                            labels.push(self.expr()?);
                        }
                        self.expect_punct(":")?;
                        arms.push((labels, self.stmt()?));
                    }
                    Ok(Stmt::Case { kind, subject, arms, default })
                }
                "for" => {
                    self.bump();
                    self.expect_punct("(")?;
                    let init = Box::new(self.assign_stmt(false)?);
                    self.expect_punct(";")?;
                    let cond = self.expr()?;
                    self.expect_punct(";")?;
                    let step = Box::new(self.assign_stmt(false)?);
                    self.expect_punct(")")?;
                    let body = Box::new(self.stmt()?);
                    Ok(Stmt::For { init, cond, step, body })
                }
                "while" => {
                    self.bump();
                    self.expect_punct("(")?;
                    let cond = self.expr()?;
                    self.expect_punct(")")?;
                    Ok(Stmt::While { cond, body: Box::new(self.stmt()?) })
                }
                "repeat" => {
                    self.bump();
                    self.expect_punct("(")?;
                    let count = self.expr()?;
                    self.expect_punct(")")?;
                    Ok(Stmt::Repeat { count, body: Box::new(self.stmt()?) })
                }
                "forever" => {
                    self.bump();
                    Ok(Stmt::Forever(Box::new(self.stmt()?)))
                }
                "wait" => {
                    self.bump();
                    self.expect_punct("(")?;
                    let cond = self.expr()?;
                    self.expect_punct(")")?;
                    Ok(Stmt::Wait { cond, body: Box::new(self.stmt()?) })
                }
                "fork" | "disable" | "force" | "release" | "deassign" => self.err(format!("'{kw}' is not supported by the built-in simulator")),
                _ => {
                    let s = self.assign_stmt(true)?;
                    self.expect_punct(";")?;
                    Ok(s)
                }
            },
            Tok::Punct("{") => {
                let s = self.assign_stmt(true)?;
                self.expect_punct(";")?;
                Ok(s)
            }
            t => self.err(format!("unexpected {} at start of statement", describe(&t))),
        }
    }

    fn assign_stmt(&mut self, allow_nb: bool) -> PResult<Stmt> {
        let line = self.line();
        let lhs = self.lvalue()?;
        let nonblocking = if self.eat_punct("=") {
            false
        } else if allow_nb && self.eat_punct("<=") {
            true
        } else {
            return self.err(format!("expected assignment, found {}", describe(self.peek())));
        };
        let delay = if self.eat_punct("#") { Some(self.delay_value()?) } else { None };
        let rhs = self.expr()?;
        Ok(Stmt::Assign { line, lhs, rhs, nonblocking, delay })
    }

    fn delay_value(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Number(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::Ident(n) => {
                self.bump();
                Ok(Expr::Ident(n))
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            t => self.err(format!("bad delay value {}", describe(&t))),
        }
    }

    fn event_ctl(&mut self) -> PResult<EventCtl> {
        if self.eat_punct("*") {
            return Ok(EventCtl::Star);
        }
        if let Tok::Ident(n) = self.peek().clone() {
            self.bump();
            return Ok(EventCtl::List(vec![(Edge::Any, Expr::Ident(n))]));
        }
        self.expect_punct("(")?;
        if self.eat_punct("*") {
            self.expect_punct(")")?;
            return Ok(EventCtl::Star);
        }
        let mut list = Vec::new();
        loop {
            let edge = if self.eat_kw("posedge") {
                Edge::Pos
            } else if self.eat_kw("negedge") {
                Edge::Neg
            } else {
                Edge::Any
            };
            list.push((edge, self.expr()?));
            if self.eat_punct(",") || self.eat_kw("or") {
                continue;
            }
            break;
        }
        self.expect_punct(")")?;
        Ok(EventCtl::List(list))
    }

    fn lvalue(&mut self) -> PResult<Expr> {
        if self.is_punct("{") {
            self.bump();
            let mut parts = vec![self.lvalue()?];
            while self.eat_punct(",") {
                parts.push(self.lvalue()?);
            }
            self.expect_punct("}")?;
            return Ok(Expr::Concat(parts));
        }
        let name = self.ident()?;
        self.selects(name)
    }

    fn selects(&mut self, name: String) -> PResult<Expr> {
        if !self.eat_punct("[") {
            return Ok(Expr::Ident(name));
        }
        let first = self.expr()?;
        let e = if self.eat_punct(":") {
            let lsb = self.expr()?;
            self.expect_punct("]")?;
            return Ok(Expr::Part(name, Box::new(first), Box::new(lsb)));
        } else if self.is_punct("+:") || self.is_punct("-:") {
            let up = self.is_punct("+:");
            self.bump();
            let width = self.expr()?;
            self.expect_punct("]")?;
            return Ok(Expr::IndexedPart { name, base: Box::new(first), width: Box::new(width), up });
        } else {
            self.expect_punct("]")?;
            first
        };
        if self.eat_punct("[") {
            let a = self.expr()?;
            let b = if self.eat_punct(":") { Some(Box::new(self.expr()?)) } else { None };
            self.expect_punct("]")?;
            return Ok(Expr::WordSelect(name, Box::new(e), Box::new(a), b));
        }
        Ok(Expr::Index(name, Box::new(e)))
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        let cond = self.binary(0)?;
        if self.eat_punct("?") {
            let a = self.expr()?;
            self.expect_punct(":")?;
            let b = self.expr()?;
            return Ok(Expr::Ternary(Box::new(cond), Box::new(a), Box::new(b)));
        }
        Ok(cond)
    }

    fn binop(&self) -> Option<(BinOp, u8)> {
        let p = match self.peek() {
            Tok::Punct(p) => *p,
            _ => return None,
        };
        Some(match p {
            "||" => (BinOp::LogOr, 1),
            "&&" => (BinOp::LogAnd, 2),
            "|" => (BinOp::Or, 3),
            "^" => (BinOp::Xor, 4),
            "~^" | "^~" => (BinOp::Xnor, 4),
            "&" => (BinOp::And, 5),
            "==" => (BinOp::Eq, 6),
            "!=" => (BinOp::Ne, 6),
            "===" => (BinOp::CaseEq, 6),
            "!==" => (BinOp::CaseNe, 6),
            "<" => (BinOp::Lt, 7),
            "<=" => (BinOp::Le, 7),
            ">" => (BinOp::Gt, 7),
            ">=" => (BinOp::Ge, 7),
            "<<" => (BinOp::Shl, 8),
            ">>" => (BinOp::Shr, 8),
            "<<<" => (BinOp::AShl, 8),
            ">>>" => (BinOp::AShr, 8),
            "+" => (BinOp::Add, 9),
            "-" => (BinOp::Sub, 9),
            "*" => (BinOp::Mul, 10),
            "/" => (BinOp::Div, 10),
            "%" => (BinOp::Mod, 10),
            "**" => (BinOp::Pow, 11),
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some((op, prec)) = self.binop() {
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let op = match self.peek() {
            Tok::Punct("+") => Some(UnOp::Plus),
            Tok::Punct("-") => Some(UnOp::Neg),
            Tok::Punct("~") => Some(UnOp::Not),
            Tok::Punct("!") => Some(UnOp::LogNot),
            Tok::Punct("&") => Some(UnOp::RedAnd),
            Tok::Punct("|") => Some(UnOp::RedOr),
            Tok::Punct("^") => Some(UnOp::RedXor),
            Tok::Punct("~&") => Some(UnOp::RedNand),
            Tok::Punct("~|") => Some(UnOp::RedNor),
            Tok::Punct("~^") | Tok::Punct("^~") => Some(UnOp::RedXnor),
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let e = self.unary()?;
            return Ok(Expr::Unary(op, Box::new(e)));
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Number(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::Str(s))
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Punct("{") => {
                self.bump();
                let first = self.expr()?;
                if self.is_punct("{") {
                    self.bump();
                    let mut parts = vec![self.expr()?];
                    while self.eat_punct(",") {
                        parts.push(self.expr()?);
                    }
                    self.expect_punct("}")?;
                    self.expect_punct("}")?;
                    return Ok(Expr::Repl(Box::new(first), parts));
                }
                let mut parts = vec![first];
                while self.eat_punct(",") {
                    parts.push(self.expr()?);
                }
                self.expect_punct("}")?;
                Ok(Expr::Concat(parts))
            }
            Tok::System(name) => {
                self.bump();
                let mut args = Vec::new();
                if self.eat_punct("(") {
                    if !self.is_punct(")") {
                        loop {
                            args.push(self.expr()?);
                            if !self.eat_punct(",") {
                                break;
                            }
                        }
                    }
                    self.expect_punct(")")?;
                }
                Ok(Expr::SysCall(name, args))
            }
            Tok::Ident(name) => {
                self.bump();
                if self.is_punct(".") {
                    return self.err("hierarchical references are not supported");
                }
                self.selects(name)
            }
            t => self.err(format!("unexpected {} in expression", describe(&t))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("'{s}'"),
        Tok::System(s) => format!("'{s}'"),
        Tok::Number(v) => format!("number {v:?}"),
        Tok::Str(_) => "string".into(),
        Tok::Punct(p) => format!("'{p}'"),
        Tok::Eof => "end of input".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexer::tokenize;

    fn parse(src: &str) -> Vec<Module> {
        Parser::new(tokenize(src).unwrap()).parse_source().unwrap()
    }

    #[test]
    fn ansi_header_with_shared_direction() {
        let m = &parse("module top_module(input a, b, input [3:0] c, output reg [3:0] q); endmodule")[0];
        assert_eq!(m.ports, vec!["a", "b", "c", "q"]);
        assert_eq!(m.items.len(), 3);
    }

    #[test]
    fn precedence_mul_over_add() {
        let m = &parse("module m; wire [7:0] y; assign y = 1 + 2 * 3; endmodule")[0];
        match &m.items[1] {
            Item::Assign { rhs: Expr::Binary(BinOp::Add, _, r), .. } => {
                assert!(matches!(**r, Expr::Binary(BinOp::Mul, _, _)))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn case_and_event_controls() {
        let src = "module m(input clk, input [1:0] s, output reg y);
            always @(posedge clk or negedge s[0]) case (s) 2'b00, 2'b01: y <= 1; default: y <= 0; endcase
            always @(*) begin : blk y = s[1]; end
        endmodule";
        let m = &parse(src)[0];
        assert_eq!(m.items.len(), 5);
    }

    #[test]
    fn missing_endmodule_is_reported() {
        let err = Parser::new(tokenize("module m;").unwrap()).parse_source().unwrap_err();
        assert!(err.message.contains("endmodule"));
    }
}
