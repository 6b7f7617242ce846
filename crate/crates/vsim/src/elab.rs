//! Elaboration: flattens the instance tree and lowers processes to bytecode.

use std::collections::{BTreeSet, HashMap};

use crate::ast::*;
use crate::error::CompileError;
use crate::value::{Value, MAX_WIDTH};

pub type SigId = usize;

#[derive(Debug, Clone)]
pub struct SigInfo {
    pub name: String,
    pub width: u32,
    pub signed: bool,
    pub map: IndexMap,
    pub array: Option<IndexMap>,
    pub is_net: bool,
}

impl SigInfo {
    pub fn words(&self) -> usize {
        self.array.map_or(1, |a| a.len() as usize)
    }
}

/// Maps declared indices (`[msb:lsb]`) onto zero-based offsets.
#[derive(Debug, Clone, Copy)]
pub struct IndexMap {
    pub msb: i64,
    pub lsb: i64,
}

impl IndexMap {
    pub fn len(&self) -> u32 {
        ((self.msb - self.lsb).unsigned_abs() + 1) as u32
    }

    pub fn offset(&self, index: i64) -> Option<u32> {
        let off = if self.msb >= self.lsb { index - self.lsb } else { self.lsb - index };
        (off >= 0 && off < self.len() as i64).then_some(off as u32)
    }
}

#[derive(Debug, Clone)]
pub struct CE {
    pub kind: K,
    pub width: u32,
    pub signed: bool,
}

#[derive(Debug, Clone)]
pub enum K {
    Const(Value),
    Sig(SigId),
    Word(SigId, Box<CE>),
    Select { base: Box<CE>, sel: Sel },
    Concat(Vec<CE>),
    Repl(u32, Box<CE>),
    Unary(UnOp, Box<CE>),
    Binary(BinOp, Box<CE>, Box<CE>),
    Ternary(Box<CE>, Box<CE>, Box<CE>),
    Time,
    Random,
    Cast(Box<CE>),
}

#[derive(Debug, Clone)]
pub enum Sel {
    Bit { index: Box<CE>, map: IndexMap },
    Part { offset: u32, width: u32 },
    DynPart { base: Box<CE>, map: IndexMap, width: u32, up: bool },
}

#[derive(Debug, Clone)]
pub enum LV {
    Sig(SigId),
    Slice { sig: SigId, word: Option<CE>, sel: Option<Sel>, width: u32 },
    Concat(Vec<LV>),
}

#[derive(Debug, Clone)]
pub struct WaitItem {
    pub edge: Edge,
    pub expr: CE,
    pub sigs: Vec<SigId>,
}

#[derive(Debug, Clone)]
pub enum Arg {
    Str(String),
    Expr(CE),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Display,
    Write,
    Strobe,
    Monitor,
    Error,
}

#[derive(Debug, Clone)]
pub enum Op {
    Assign { lv: LV, rhs: CE },
    NbAssign { lv: LV, rhs: CE, delay: Option<CE> },
    Jump(usize),
    JumpIfNot(CE, usize),
    Case { kind: CaseKind, subject: CE, arms: Vec<(Vec<CE>, usize)>, default: usize, width: u32, signed: bool },
    Delay(CE),
    Wait(Vec<WaitItem>),
    SetCounter(usize, CE),
    DecJumpIfZero(usize, usize),
    Print(TaskKind, Vec<Arg>),
    Finish,
    Fatal(Vec<Arg>),
    Halt,
}

#[derive(Debug, Clone)]
pub struct ProcCode {
    pub scope: String,
    pub ops: Vec<Op>,
    pub counters: usize,
}

/// A fully elaborated, ready-to-run design.
#[derive(Debug, Clone)]
pub struct Design {
    pub sigs: Vec<SigInfo>,
    pub inits: Vec<(SigId, Value)>,
    pub procs: Vec<ProcCode>,
    pub tops: Vec<String>,
}

#[derive(Clone)]
enum Entry {
    Sig(SigId),
    Param(Value),
}

struct Scope {
    path: String,
    names: HashMap<String, Entry>,
}

struct Elab<'a> {
    modules: HashMap<&'a str, &'a Module>,
    file_of: HashMap<&'a str, &'a str>,
    sigs: Vec<SigInfo>,
    inits: Vec<(SigId, Value)>,
    procs: Vec<ProcCode>,
    depth: usize,
}

fn err<T>(line: u32, msg: impl Into<String>) -> Result<T, CompileError> {
    Err(CompileError::new(line, msg))
}

/// `files[i]` names the source file module `mods[i]` came from.
pub fn elaborate(mods: &[Module], files: &[&str], top: Option<&str>) -> Result<Design, CompileError> {
    let mut modules = HashMap::new();
    let file_of: HashMap<&str, &str> = mods.iter().zip(files).map(|(m, f)| (m.name.as_str(), *f)).collect();
    for m in mods {
        if modules.insert(m.name.as_str(), m).is_some() {
            return err(m.line, format!("module '{}' defined more than once", m.name));
        }
    }
    let tops: Vec<&Module> = match top {
        Some(t) => vec![*modules.get(t).ok_or_else(|| CompileError::new(0, format!("top module '{t}' not found")))?],
        None => {
            let mut instantiated = BTreeSet::new();
            for m in mods {
                for it in &m.items {
                    if let Item::Instance(i) = it {
                        instantiated.insert(i.module.as_str());
                    }
                }
            }
            mods.iter().filter(|m| !instantiated.contains(m.name.as_str())).collect()
        }
    };
    if tops.is_empty() {
        return err(0, "no top-level module found");
    }
    let mut e = Elab { modules, file_of, sigs: Vec::new(), inits: Vec::new(), procs: Vec::new(), depth: 0 };
    for t in &tops {
        e.instantiate(t, t.name.clone(), &HashMap::new())?;
    }
    Ok(Design { sigs: e.sigs, inits: e.inits, procs: e.procs, tops: tops.iter().map(|m| m.name.clone()).collect() })
}

#[derive(Default)]
struct DeclInfo {
    line: u32,
    dir: Option<Dir>,
    kind: Option<NetKind>,
    signed: bool,
    range: Option<Range>,
    array: Option<Range>,
    init: Option<Expr>,
}

impl<'a> Elab<'a> {
    fn instantiate(&mut self, m: &Module, path: String, overrides: &HashMap<String, Value>) -> Result<Scope, CompileError> {
        let file = self.file_of.get(m.name.as_str()).copied();
        self.instantiate_inner(m, path, overrides).map_err(|e| match file {
            Some(f) => e.in_file(f),
            None => e,
        })
    }

    fn instantiate_inner(&mut self, m: &Module, path: String, overrides: &HashMap<String, Value>) -> Result<Scope, CompileError> {
        self.depth += 1;
        if self.depth > 64 {
            return err(m.line, "instance hierarchy too deep (recursive instantiation?)");
        }
        let mut scope = Scope { path: path.clone(), names: HashMap::new() };

        // parameters first, in order
        for it in &m.items {
            if let Item::Param { line, name, value, local } = it {
                let v = match overrides.get(name) {
                    Some(v) if !local => *v,
                    _ => self.const_eval(&scope, value, *line)?,
                };
                scope.names.insert(name.clone(), Entry::Param(v));
            }
        }

        // merge declarations by name
        let mut order: Vec<String> = Vec::new();
        let mut decls: HashMap<String, DeclInfo> = HashMap::new();
        for it in &m.items {
            let Item::Decl(d) = it else { continue };
            for n in &d.names {
                let entry = decls.entry(n.name.clone()).or_insert_with(|| {
                    order.push(n.name.clone());
                    DeclInfo { line: d.line, ..Default::default() }
                });
                if d.dir.is_some() {
                    if entry.dir.is_some() {
                        return err(d.line, format!("port '{}' declared twice", n.name));
                    }
                    entry.dir = d.dir;
                }
                if let Some(k) = d.kind {
                    if entry.kind.is_some() && d.dir.is_none() {
                        return err(d.line, format!("'{}' redeclared", n.name));
                    }
                    entry.kind = Some(k);
                }
                entry.signed |= d.signed;
                if d.range.is_some() {
                    entry.range = d.range.clone();
                }
                if n.array.is_some() {
                    entry.array = n.array.clone();
                }
                if n.init.is_some() {
                    entry.init = n.init.clone();
                }
            }
        }
        for p in &m.ports {
            match decls.get(p) {
                Some(d) if d.dir.is_some() => {}
                _ => return err(m.line, format!("port '{p}' of module '{}' has no direction declaration", m.name)),
            }
        }
        for name in &order {
            let d = &decls[name];
            if d.dir.is_some() && !m.ports.contains(name) {
                return err(d.line, format!("'{name}' declared as a port but not in the port list"));
            }
            let (width, map) = match (&d.range, d.kind) {
                (Some(r), _) => {
                    let msb = self.const_int(&scope, &r.msb, d.line)?;
                    let lsb = self.const_int(&scope, &r.lsb, d.line)?;
                    let map = IndexMap { msb, lsb };
                    (map.len(), map)
                }
                (None, Some(NetKind::Integer)) => (32, IndexMap { msb: 31, lsb: 0 }),
                (None, _) => (1, IndexMap { msb: 0, lsb: 0 }),
            };
            if width > MAX_WIDTH {
                return err(d.line, format!("'{name}' is {width} bits wide; the built-in simulator supports at most {MAX_WIDTH}"));
            }
            let array = match &d.array {
                Some(r) => {
                    let a = IndexMap { msb: self.const_int(&scope, &r.msb, d.line)?, lsb: self.const_int(&scope, &r.lsb, d.line)? };
                    if a.len() > 1 << 20 {
                        return err(d.line, "memory too large");
                    }
                    Some(a)
                }
                None => None,
            };
            let is_net = !matches!(d.kind, Some(NetKind::Reg) | Some(NetKind::Integer));
            let signed = d.signed || d.kind == Some(NetKind::Integer);
            let id = self.sigs.len();
            self.sigs.push(SigInfo { name: format!("{path}.{name}"), width, signed, map, array, is_net });
            if scope.names.insert(name.clone(), Entry::Sig(id)).is_some() {
                return err(d.line, format!("'{name}' conflicts with a parameter"));
            }
        }
        // initializers
        for name in &order {
            let d = &decls[name];
            let Some(init) = &d.init else { continue };
            let Entry::Sig(id) = scope.names[name] else { unreachable!() };
            if self.sigs[id].is_net {
                let rhs = self.expr(&mut scope, init, d.line)?;
                self.cont_assign(&scope, LV::Sig(id), rhs);
            } else {
                let v = self.const_eval(&scope, init, d.line)?;
                let info = &self.sigs[id];
                self.inits.push((id, v.resize(info.width, v.is_signed()).with_signed(info.signed)));
            }
        }

        for it in &m.items {
            match it {
                Item::Decl(_) | Item::Param { .. } => {}
                Item::Assign { line, lhs, rhs } => {
                    self.declare_implicit(&mut scope, lhs);
                    let lv = self.lvalue(&scope, lhs, *line, true)?;
                    let rhs = self.expr(&mut scope, rhs, *line)?;
                    self.cont_assign(&scope, lv, rhs);
                }
                Item::Always { line, body } => {
                    let mut c = Codegen::new(self, &scope);
                    if let Stmt::Event { ctl: EventCtl::Star, body: inner } = body {
                        c.stmt(inner, *line)?;
                        let items = c.star_items(inner, *line)?;
                        if !items.is_empty() {
                            c.ops.push(Op::Wait(items));
                            c.ops.push(Op::Jump(0));
                        } else {
                            c.ops.push(Op::Halt);
                        }
                    } else {
                        c.stmt(body, *line)?;
                        if !c.has_timing() {
                            return err(*line, "always block has no timing control and would never yield");
                        }
                        c.ops.push(Op::Jump(0));
                    }
                    let code = c.finish();
                    self.procs.push(code);
                }
                Item::Initial { line, body } => {
                    let mut c = Codegen::new(self, &scope);
                    c.stmt(body, *line)?;
                    c.ops.push(Op::Halt);
                    let code = c.finish();
                    self.procs.push(code);
                }
                Item::Instance(inst) => self.instance(&mut scope, inst)?,
            }
        }
        self.depth -= 1;
        Ok(scope)
    }

    fn declare_implicit(&mut self, scope: &mut Scope, e: &Expr) {
        let mut names = Vec::new();
        match e {
            Expr::Ident(n) => names.push(n.as_str()),
            Expr::Concat(parts) => {
                for p in parts {
                    if let Expr::Ident(n) = p {
                        names.push(n.as_str());
                    }
                }
            }
            _ => {}
        }
        for n in names {
            if !scope.names.contains_key(n) {
                let id = self.sigs.len();
                self.sigs.push(SigInfo {
                    name: format!("{}.{n}", scope.path),
                    width: 1,
                    signed: false,
                    map: IndexMap { msb: 0, lsb: 0 },
                    array: None,
                    is_net: true,
                });
                scope.names.insert(n.to_string(), Entry::Sig(id));
            }
        }
    }

    fn instance(&mut self, scope: &mut Scope, inst: &Instance) -> Result<(), CompileError> {
        let module = *self.modules.get(inst.module.as_str()).ok_or_else(|| CompileError::new(inst.line, format!("unknown module '{}'", inst.module)))?;
        let param_names: Vec<&str> = module
            .items
            .iter()
            .filter_map(|it| match it {
                Item::Param { name, local: false, .. } => Some(name.as_str()),
                _ => None,
            })
            .collect();
        let mut overrides = HashMap::new();
        match &inst.params {
            Connections::Positional(v) => {
                for (i, e) in v.iter().enumerate() {
                    let (Some(e), Some(name)) = (e, param_names.get(i)) else { continue };
                    overrides.insert(name.to_string(), self.const_eval(scope, e, inst.line)?);
                }
            }
            Connections::Named(v) => {
                for (name, e) in v {
                    if !param_names.contains(&name.as_str()) {
                        return err(inst.line, format!("module '{}' has no parameter '{name}'", inst.module));
                    }
                    if let Some(e) = e {
                        overrides.insert(name.clone(), self.const_eval(scope, e, inst.line)?);
                    }
                }
            }
        }
        let child_path = format!("{}.{}", scope.path, inst.name);
        let child = self.instantiate(module, child_path, &overrides)?;
        let pairs: Vec<(String, Option<&Expr>)> = match &inst.conns {
            Connections::Positional(v) => {
                if v.len() > module.ports.len() {
                    return err(inst.line, format!("too many port connections for '{}'", inst.module));
                }
                v.iter().enumerate().map(|(i, e)| (module.ports[i].clone(), e.as_ref())).collect()
            }
            Connections::Named(v) => {
                let mut out = Vec::new();
                for (p, e) in v {
                    if !module.ports.contains(p) {
                        return err(inst.line, format!("module '{}' has no port '{p}'", inst.module));
                    }
                    out.push((p.clone(), e.as_ref()));
                }
                out
            }
        };
        for (port, e) in pairs {
            let Some(e) = e else { continue };
            let Some(Entry::Sig(pid)) = child.names.get(&port).cloned() else { unreachable!() };
            let dir = port_dir(module, &port);
            match dir {
                Dir::Input => {
                    self.declare_implicit(scope, e);
                    let rhs = self.expr(scope, e, inst.line)?;
                    self.cont_assign(&child, LV::Sig(pid), rhs);
                }
                Dir::Output | Dir::Inout => {
                    self.declare_implicit(scope, e);
                    let lv = self.lvalue(scope, e, inst.line, true).map_err(|mut er| {
                        er.message = format!("output port '{port}' of '{}': {}", inst.name, er.message);
                        er
                    })?;
                    let info = &self.sigs[pid];
                    let rhs = CE { kind: K::Sig(pid), width: info.width, signed: info.signed };
                    self.cont_assign(scope, lv, rhs);
                }
            }
        }
        Ok(())
    }

    fn cont_assign(&mut self, scope: &Scope, lv: LV, rhs: CE) {
        let mut sigs = BTreeSet::new();
        reads(&rhs, &mut sigs);
        lv_reads(&lv, &mut sigs);
        let mut ops = vec![Op::Assign { lv, rhs }];
        if sigs.is_empty() {
            ops.push(Op::Halt);
        } else {
            let items = sigs
                .into_iter()
                .map(|s| {
                    let info = &self.sigs[s];
                    WaitItem { edge: Edge::Any, expr: CE { kind: K::Sig(s), width: info.width, signed: info.signed }, sigs: vec![s] }
                })
                .collect();
            ops.push(Op::Wait(items));
            ops.push(Op::Jump(0));
        }
        self.procs.push(ProcCode { scope: scope.path.clone(), ops, counters: 0 });
    }

    fn const_eval(&mut self, scope: &Scope, e: &Expr, line: u32) -> Result<Value, CompileError> {
        let mut tmp = Scope { path: scope.path.clone(), names: scope.names.clone() };
        let ce = self.expr(&mut tmp, e, line)?;
        let mut sigs = BTreeSet::new();
        reads(&ce, &mut sigs);
        if !sigs.is_empty() || contains_runtime(&ce) {
            return err(line, "expression is not constant");
        }
        let store = crate::sim::Store::empty();
        Ok(store.eval_self(&ce))
    }

    fn const_int(&mut self, scope: &Scope, e: &Expr, line: u32) -> Result<i64, CompileError> {
        let v = self.const_eval(scope, e, line)?;
        v.to_i128().map(|v| v as i64).ok_or_else(|| CompileError::new(line, "constant contains x/z bits"))
    }

    fn lookup(&self, scope: &Scope, name: &str, line: u32) -> Result<Entry, CompileError> {
        scope.names.get(name).cloned().ok_or_else(|| CompileError::new(line, format!("'{name}' is not declared")))
    }

    fn sig_ce(&self, id: SigId) -> CE {
        let info = &self.sigs[id];
        CE { kind: K::Sig(id), width: info.width, signed: info.signed }
    }

    fn expr(&mut self, scope: &mut Scope, e: &Expr, line: u32) -> Result<CE, CompileError> {
        let ce = match e {
            Expr::Num(v) => CE { kind: K::Const(*v), width: v.width(), signed: v.is_signed() },
            Expr::Str(s) => {
                let bytes = s.as_bytes();
                if bytes.is_empty() || bytes.len() > 16 {
                    return err(line, "string used as a value must be 1..=16 characters");
                }
                let mut v = 0u128;
                for b in bytes {
                    v = (v << 8) | *b as u128;
                }
                let w = bytes.len() as u32 * 8;
                CE { kind: K::Const(Value::new(w, v)), width: w, signed: false }
            }
            Expr::Ident(n) => match self.lookup(scope, n, line)? {
                Entry::Param(v) => CE { kind: K::Const(v), width: v.width(), signed: v.is_signed() },
                Entry::Sig(id) => {
                    if self.sigs[id].array.is_some() {
                        return err(line, format!("memory '{n}' used without an index"));
                    }
                    self.sig_ce(id)
                }
            },
            Expr::Index(n, idx) => {
                let idx = self.expr(scope, idx, line)?;
                match self.lookup(scope, n, line)? {
                    Entry::Param(v) => {
                        let base = CE { kind: K::Const(v), width: v.width(), signed: false };
                        let map = IndexMap { msb: v.width() as i64 - 1, lsb: 0 };
                        CE { kind: K::Select { base: Box::new(base), sel: Sel::Bit { index: Box::new(idx), map } }, width: 1, signed: false }
                    }
                    Entry::Sig(id) => {
                        let info = self.sigs[id].clone();
                        match info.array {
                            Some(_) => CE { kind: K::Word(id, Box::new(idx)), width: info.width, signed: info.signed },
                            None => CE {
                                kind: K::Select { base: Box::new(self.sig_ce(id)), sel: Sel::Bit { index: Box::new(idx), map: info.map } },
                                width: 1,
                                signed: false,
                            },
                        }
                    }
                }
            }
            Expr::WordSelect(n, word, a, b) => {
                let Entry::Sig(id) = self.lookup(scope, n, line)? else {
                    return err(line, format!("'{n}' is not a memory"));
                };
                let info = self.sigs[id].clone();
                if info.array.is_none() {
                    return err(line, format!("'{n}' is not a memory"));
                }
                let word = self.expr(scope, word, line)?;
                let base = CE { kind: K::Word(id, Box::new(word)), width: info.width, signed: info.signed };
                let sel = match b {
                    None => Sel::Bit { index: Box::new(self.expr(scope, a, line)?), map: info.map },
                    Some(b) => self.part_sel(scope, &info.map, a, b, line)?,
                };
                let width = sel_width(&sel);
                CE { kind: K::Select { base: Box::new(base), sel }, width, signed: false }
            }
            Expr::Part(n, a, b) => {
                let (base, map) = self.select_base(scope, n, line)?;
                let sel = self.part_sel(scope, &map, a, b, line)?;
                let width = sel_width(&sel);
                CE { kind: K::Select { base: Box::new(base), sel }, width, signed: false }
            }
            Expr::IndexedPart { name, base, width, up } => {
                let (b, map) = self.select_base(scope, name, line)?;
                let w = self.const_int(scope, width, line)?;
                if w < 1 || w > MAX_WIDTH as i64 {
                    return err(line, "indexed part-select width out of range");
                }
                let start = self.expr(scope, base, line)?;
                let sel = Sel::DynPart { base: Box::new(start), map, width: w as u32, up: *up };
                CE { kind: K::Select { base: Box::new(b), sel }, width: w as u32, signed: false }
            }
            Expr::Concat(parts) => {
                let parts = parts.iter().map(|p| self.expr(scope, p, line)).collect::<Result<Vec<_>, _>>()?;
                let width: u32 = parts.iter().map(|p| p.width).sum();
                CE { kind: K::Concat(parts), width, signed: false }
            }
            Expr::Repl(n, parts) => {
                let count = self.const_int(scope, n, line)?;
                if count < 1 {
                    return err(line, "replication count must be positive");
                }
                let parts = parts.iter().map(|p| self.expr(scope, p, line)).collect::<Result<Vec<_>, _>>()?;
                let w: u32 = parts.iter().map(|p| p.width).sum();
                let inner = CE { kind: K::Concat(parts), width: w, signed: false };
                CE { kind: K::Repl(count as u32, Box::new(inner)), width: w.saturating_mul(count as u32), signed: false }
            }
            Expr::Unary(op, a) => {
                let a = self.expr(scope, a, line)?;
                let (width, signed) = match op {
                    UnOp::Plus | UnOp::Neg | UnOp::Not => (a.width, a.signed),
                    _ => (1, false),
                };
                CE { kind: K::Unary(*op, Box::new(a)), width, signed }
            }
            Expr::Binary(op, a, b) => {
                let a = self.expr(scope, a, line)?;
                let b = self.expr(scope, b, line)?;
                use BinOp::*;
                let (width, signed) = match op {
                    Add | Sub | Mul | Div | Mod | And | Or | Xor | Xnor => (a.width.max(b.width), a.signed && b.signed),
                    Pow | Shl | Shr | AShl | AShr => (a.width, a.signed),
                    _ => (1, false),
                };
                CE { kind: K::Binary(*op, Box::new(a), Box::new(b)), width, signed }
            }
            Expr::Ternary(c, a, b) => {
                let c = self.expr(scope, c, line)?;
                let a = self.expr(scope, a, line)?;
                let b = self.expr(scope, b, line)?;
                let (width, signed) = (a.width.max(b.width), a.signed && b.signed);
                CE { kind: K::Ternary(Box::new(c), Box::new(a), Box::new(b)), width, signed }
            }
            Expr::SysCall(name, args) => match name.as_str() {
                "$time" | "$stime" => CE { kind: K::Time, width: if name == "$time" { 64 } else { 32 }, signed: false },
                "$random" | "$urandom" => CE { kind: K::Random, width: 32, signed: name == "$random" },
                "$signed" | "$unsigned" => {
                    let [a] = args.as_slice() else { return err(line, format!("{name} takes one argument")) };
                    let a = self.expr(scope, a, line)?;
                    let w = a.width;
                    CE { kind: K::Cast(Box::new(a)), width: w, signed: name == "$signed" }
                }
                "$clog2" => {
                    let [a] = args.as_slice() else { return err(line, "$clog2 takes one argument") };
                    let v = self.const_eval(scope, a, line)?;
                    let n = v.to_u128().ok_or_else(|| CompileError::new(line, "$clog2 of x"))?;
                    let r = if n <= 1 { 0 } else { 128 - (n - 1).leading_zeros() };
                    CE { kind: K::Const(Value::new(32, r as u128).with_signed(true)), width: 32, signed: true }
                }
                _ => return err(line, format!("unsupported system function {name}")),
            },
        };
        if ce.width > MAX_WIDTH || ce.width == 0 {
            return err(line, format!("expression width {} exceeds the supported {MAX_WIDTH} bits", ce.width));
        }
        Ok(ce)
    }

    fn select_base(&mut self, scope: &Scope, n: &str, line: u32) -> Result<(CE, IndexMap), CompileError> {
        match self.lookup(scope, n, line)? {
            Entry::Param(v) => Ok((CE { kind: K::Const(v), width: v.width(), signed: false }, IndexMap { msb: v.width() as i64 - 1, lsb: 0 })),
            Entry::Sig(id) => {
                let info = &self.sigs[id];
                if info.array.is_some() {
                    return err(line, format!("memory '{n}' needs a word index before a part-select"));
                }
                Ok((self.sig_ce(id), info.map))
            }
        }
    }

    fn part_sel(&mut self, scope: &Scope, map: &IndexMap, a: &Expr, b: &Expr, line: u32) -> Result<Sel, CompileError> {
        let hi = self.const_int(scope, a, line)?;
        let lo = self.const_int(scope, b, line)?;
        let (o1, o2) = match (map.offset(hi), map.offset(lo)) {
            (Some(x), Some(y)) => (x, y),
            _ => return err(line, format!("part-select [{hi}:{lo}] is out of range")),
        };
        if o1 < o2 {
            return err(line, format!("part-select [{hi}:{lo}] is reversed"));
        }
        Ok(Sel::Part { offset: o2, width: o1 - o2 + 1 })
    }

    fn lvalue(&mut self, scope: &Scope, e: &Expr, line: u32, continuous: bool) -> Result<LV, CompileError> {
        let mut tmp = Scope { path: scope.path.clone(), names: scope.names.clone() };
        let check = |info: &SigInfo, name: &str| -> Result<(), CompileError> {
            if continuous && !info.is_net {
                return err(line, format!("'{name}' is a reg and cannot be driven by a continuous assignment"));
            }
            if !continuous && info.is_net {
                return err(line, format!("'{name}' is a net and is not a valid procedural l-value"));
            }
            Ok(())
        };
        match e {
            Expr::Ident(n) => match self.lookup(scope, n, line)? {
                Entry::Sig(id) => {
                    check(&self.sigs[id], n)?;
                    if self.sigs[id].array.is_some() {
                        return err(line, format!("cannot assign to memory '{n}' without an index"));
                    }
                    Ok(LV::Sig(id))
                }
                Entry::Param(_) => err(line, format!("cannot assign to parameter '{n}'")),
            },
            Expr::Index(n, idx) | Expr::Part(n, idx, _) | Expr::IndexedPart { name: n, base: idx, .. } | Expr::WordSelect(n, idx, _, _) => {
                let Entry::Sig(id) = self.lookup(scope, n, line)? else {
                    return err(line, format!("cannot assign to parameter '{n}'"));
                };
                let info = self.sigs[id].clone();
                check(&info, n)?;
                let (word, sel) = match (e, info.array.is_some()) {
                    (Expr::Index(_, _), true) => (Some(self.expr(&mut tmp, idx, line)?), None),
                    (Expr::Index(_, _), false) => (None, Some(Sel::Bit { index: Box::new(self.expr(&mut tmp, idx, line)?), map: info.map })),
                    (Expr::WordSelect(_, w, a, b), true) => {
                        let word = self.expr(&mut tmp, w, line)?;
                        let sel = match b {
                            None => Sel::Bit { index: Box::new(self.expr(&mut tmp, a, line)?), map: info.map },
                            Some(b) => self.part_sel(scope, &info.map, a, b, line)?,
                        };
                        (Some(word), Some(sel))
                    }
                    (Expr::Part(_, a, b), false) => (None, Some(self.part_sel(scope, &info.map, a, b, line)?)),
                    (Expr::IndexedPart { base, width, up, .. }, false) => {
                        let w = self.const_int(scope, width, line)?;
                        if w < 1 || w > MAX_WIDTH as i64 {
                            return err(line, "indexed part-select width out of range");
                        }
                        let start = self.expr(&mut tmp, base, line)?;
                        (None, Some(Sel::DynPart { base: Box::new(start), map: info.map, width: w as u32, up: *up }))
                    }
                    _ => return err(line, format!("unsupported select on '{n}'")),
                };
                let width = sel.as_ref().map_or(info.width, sel_width);
                Ok(LV::Slice { sig: id, word, sel, width })
            }
            Expr::Concat(parts) => {
                let parts = parts.iter().map(|p| self.lvalue(scope, p, line, continuous)).collect::<Result<Vec<_>, _>>()?;
                Ok(LV::Concat(parts))
            }
            _ => err(line, "invalid assignment target"),
        }
    }
}

fn port_dir(m: &Module, port: &str) -> Dir {
    for it in &m.items {
        if let Item::Decl(d) = it {
            if d.names.iter().any(|n| n.name == port) {
                if let Some(dir) = d.dir {
                    return dir;
                }
            }
        }
    }
    Dir::Input
}

pub fn sel_width(sel: &Sel) -> u32 {
    match sel {
        Sel::Bit { .. } => 1,
        Sel::Part { width, .. } | Sel::DynPart { width, .. } => *width,
    }
}

pub fn lv_width(lv: &LV, sigs: &[SigInfo]) -> u32 {
    match lv {
        LV::Sig(id) => sigs[*id].width,
        LV::Slice { width, .. } => *width,
        LV::Concat(parts) => parts.iter().map(|p| lv_width(p, sigs)).sum(),
    }
}

pub fn reads(e: &CE, out: &mut BTreeSet<SigId>) {
    match &e.kind {
        K::Const(_) | K::Time | K::Random => {}
        K::Sig(id) => {
            out.insert(*id);
        }
        K::Word(id, idx) => {
            out.insert(*id);
            reads(idx, out);
        }
        K::Select { base, sel } => {
            reads(base, out);
            match sel {
                Sel::Bit { index, .. } => reads(index, out),
                Sel::DynPart { base, .. } => reads(base, out),
                Sel::Part { .. } => {}
            }
        }
        K::Concat(v) => v.iter().for_each(|p| reads(p, out)),
        K::Repl(_, a) | K::Unary(_, a) | K::Cast(a) => reads(a, out),
        K::Binary(_, a, b) => {
            reads(a, out);
            reads(b, out);
        }
        K::Ternary(c, a, b) => {
            reads(c, out);
            reads(a, out);
            reads(b, out);
        }
    }
}

fn contains_runtime(e: &CE) -> bool {
    match &e.kind {
        K::Time | K::Random => true,
        K::Const(_) | K::Sig(_) => false,
        K::Word(_, a) | K::Repl(_, a) | K::Unary(_, a) | K::Cast(a) => contains_runtime(a),
        K::Select { base, .. } => contains_runtime(base),
        K::Concat(v) => v.iter().any(contains_runtime),
        K::Binary(_, a, b) => contains_runtime(a) || contains_runtime(b),
        K::Ternary(c, a, b) => contains_runtime(c) || contains_runtime(a) || contains_runtime(b),
    }
}

fn lv_reads(lv: &LV, out: &mut BTreeSet<SigId>) {
    match lv {
        LV::Sig(_) => {}
        LV::Slice { word, sel, .. } => {
            if let Some(w) = word {
                reads(w, out);
            }
            match sel {
                Some(Sel::Bit { index, .. }) => reads(index, out),
                Some(Sel::DynPart { base, .. }) => reads(base, out),
                _ => {}
            }
        }
        LV::Concat(parts) => parts.iter().for_each(|p| lv_reads(p, out)),
    }
}

struct Codegen<'e, 'a> {
    elab: &'e mut Elab<'a>,
    scope: Scope,
    ops: Vec<Op>,
    counters: usize,
}

impl<'e, 'a> Codegen<'e, 'a> {
    fn new(elab: &'e mut Elab<'a>, scope: &Scope) -> Self {
        Codegen { elab, scope: Scope { path: scope.path.clone(), names: scope.names.clone() }, ops: Vec::new(), counters: 0 }
    }

    fn finish(self) -> ProcCode {
        ProcCode { scope: self.scope.path, ops: self.ops, counters: self.counters }
    }

    fn has_timing(&self) -> bool {
        self.ops.iter().any(|o| matches!(o, Op::Delay(_) | Op::Wait(_)))
    }

    fn expr(&mut self, e: &Expr, line: u32) -> Result<CE, CompileError> {
        self.elab.expr(&mut self.scope, e, line)
    }

    fn star_items(&mut self, body: &Stmt, line: u32) -> Result<Vec<WaitItem>, CompileError> {
        let mut names = Vec::new();
        stmt_reads(body, &mut names);
        let mut sigs = BTreeSet::new();
        for n in names {
            if let Some(Entry::Sig(id)) = self.scope.names.get(n) {
                sigs.insert(*id);
            } else if !self.scope.names.contains_key(n) {
                return err(line, format!("'{n}' is not declared"));
            }
        }
        Ok(sigs.into_iter().map(|s| WaitItem { edge: Edge::Any, expr: self.elab.sig_ce(s), sigs: vec![s] }).collect())
    }

    fn wait_items(&mut self, list: &[(Edge, Expr)], line: u32) -> Result<Vec<WaitItem>, CompileError> {
        let mut items = Vec::new();
        for (edge, e) in list {
            let expr = self.expr(e, line)?;
            let mut sigs = BTreeSet::new();
            reads(&expr, &mut sigs);
            items.push(WaitItem { edge: *edge, expr, sigs: sigs.into_iter().collect() });
        }
        Ok(items)
    }

    fn args(&mut self, args: &[Expr], line: u32) -> Result<Vec<Arg>, CompileError> {
        args.iter()
            .map(|a| match a {
                Expr::Str(s) => Ok(Arg::Str(s.clone())),
                e => Ok(Arg::Expr(self.expr(e, line)?)),
            })
            .collect()
    }

    fn stmt(&mut self, s: &Stmt, line: u32) -> Result<(), CompileError> {
        match s {
            Stmt::Null => {}
            Stmt::Block(v) => {
                for s in v {
                    self.stmt(s, line)?;
                }
            }
            Stmt::Assign { line, lhs, rhs, nonblocking, delay } => {
                let lv = self.elab.lvalue(&self.scope, lhs, *line, false)?;
                let rhs = self.expr(rhs, *line)?;
                if *nonblocking {
                    let delay = match delay {
                        Some(d) => Some(self.expr(d, *line)?),
                        None => None,
                    };
                    self.ops.push(Op::NbAssign { lv, rhs, delay });
                } else {
                    if delay.is_some() {
                        return err(*line, "intra-assignment delays on blocking assignments are not supported");
                    }
                    self.ops.push(Op::Assign { lv, rhs });
                }
            }
            Stmt::If { cond, then, els } => {
                let c = self.expr(cond, line)?;
                let jif = self.ops.len();
                self.ops.push(Op::JumpIfNot(c, 0));
                self.stmt(then, line)?;
                match els {
                    Some(e) => {
                        let j = self.ops.len();
                        self.ops.push(Op::Jump(0));
                        let else_at = self.ops.len();
                        self.patch(jif, else_at);
                        self.stmt(e, line)?;
                        let end = self.ops.len();
                        self.patch(j, end);
                    }
                    None => {
                        let end = self.ops.len();
                        self.patch(jif, end);
                    }
                }
            }
            Stmt::Case { kind, subject, arms, default } => {
                let subject = self.expr(subject, line)?;
                let mut width = subject.width;
                let mut signed = subject.signed;
                let mut carms = Vec::new();
                for (labels, _) in arms {
                    let mut ls = Vec::new();
                    for l in labels {
                        let c = self.expr(l, line)?;
                        width = width.max(c.width);
                        signed &= c.signed;
                        ls.push(c);
                    }
                    carms.push((ls, 0usize));
                }
                let at = self.ops.len();
                self.ops.push(Op::Halt);
                let mut jumps = Vec::new();
                let mut targets = Vec::new();
                for (_, body) in arms {
                    targets.push(self.ops.len());
                    self.stmt(body, line)?;
                    jumps.push(self.ops.len());
                    self.ops.push(Op::Jump(0));
                }
                let default_at = self.ops.len();
                if let Some(d) = default {
                    self.stmt(d, line)?;
                }
                let end = self.ops.len();
                for j in jumps {
                    self.patch(j, end);
                }
                for (arm, t) in carms.iter_mut().zip(targets) {
                    arm.1 = t;
                }
                self.ops[at] = Op::Case { kind: *kind, subject, arms: carms, default: default_at, width, signed };
            }
            Stmt::For { init, cond, step, body } => {
                self.stmt(init, line)?;
                let top = self.ops.len();
                let c = self.expr(cond, line)?;
                let jif = self.ops.len();
                self.ops.push(Op::JumpIfNot(c, 0));
                self.stmt(body, line)?;
                self.stmt(step, line)?;
                self.ops.push(Op::Jump(top));
                let end = self.ops.len();
                self.patch(jif, end);
            }
            Stmt::While { cond, body } => {
                let top = self.ops.len();
                let c = self.expr(cond, line)?;
                let jif = self.ops.len();
                self.ops.push(Op::JumpIfNot(c, 0));
                self.stmt(body, line)?;
                self.ops.push(Op::Jump(top));
                let end = self.ops.len();
                self.patch(jif, end);
            }
            Stmt::Repeat { count, body } => {
                let slot = self.counters;
                self.counters += 1;
                let c = self.expr(count, line)?;
                self.ops.push(Op::SetCounter(slot, c));
                let top = self.ops.len();
                self.ops.push(Op::DecJumpIfZero(slot, 0));
                self.stmt(body, line)?;
                self.ops.push(Op::Jump(top));
                let end = self.ops.len();
                self.ops[top] = Op::DecJumpIfZero(slot, end);
            }
            Stmt::Forever(body) => {
                let top = self.ops.len();
                let before = self.ops.len();
                self.stmt(body, line)?;
                if !self.ops[before..].iter().any(|o| matches!(o, Op::Delay(_) | Op::Wait(_))) {
                    return err(line, "forever loop without timing control");
                }
                self.ops.push(Op::Jump(top));
            }
            Stmt::Delay { amount, body } => {
                let d = self.expr(amount, line)?;
                self.ops.push(Op::Delay(d));
                self.stmt(body, line)?;
            }
            Stmt::Event { ctl, body } => {
                let items = match ctl {
                    EventCtl::Star => self.star_items(body, line)?,
                    EventCtl::List(l) => self.wait_items(l, line)?,
                };
                self.ops.push(Op::Wait(items));
                self.stmt(body, line)?;
            }
            Stmt::Wait { cond, body } => {
                let top = self.ops.len();
                let c = self.expr(cond, line)?;
                let mut sigs = BTreeSet::new();
                reads(&c, &mut sigs);
                let jif = self.ops.len();
                self.ops.push(Op::JumpIfNot(c, 0));
                let jbody = self.ops.len();
                self.ops.push(Op::Jump(0));
                let wait_at = self.ops.len();
                self.patch(jif, wait_at);
                let items = sigs.into_iter().map(|s| WaitItem { edge: Edge::Any, expr: self.elab.sig_ce(s), sigs: vec![s] }).collect();
                self.ops.push(Op::Wait(items));
                self.ops.push(Op::Jump(top));
                let body_at = self.ops.len();
                self.patch(jbody, body_at);
                self.stmt(body, line)?;
            }
            Stmt::SysTask { line, name, args } => {
                let op = match name.as_str() {
                    "$display" | "$displayb" | "$displayh" | "$fdisplay" => Op::Print(TaskKind::Display, self.task_args(name, args, *line)?),
                    "$write" | "$fwrite" => Op::Print(TaskKind::Write, self.task_args(name, args, *line)?),
                    "$strobe" => Op::Print(TaskKind::Strobe, self.task_args(name, args, *line)?),
                    "$monitor" => Op::Print(TaskKind::Monitor, self.task_args(name, args, *line)?),
                    "$error" | "$warning" | "$info" => Op::Print(TaskKind::Error, self.task_args(name, args, *line)?),
                    "$finish" | "$stop" => Op::Finish,
                    "$fatal" => Op::Fatal(self.task_args(name, args, *line)?),
                    "$dumpfile" | "$dumpvars" | "$dumpon" | "$dumpoff" | "$dumpall" | "$fflush" | "$timeformat" => return Ok(()),
                    "$random" | "$urandom" => return Ok(()),
                    other => return err(*line, format!("unsupported system task {other}")),
                };
                self.ops.push(op);
            }
        }
        Ok(())
    }

    fn task_args(&mut self, name: &str, args: &[Expr], line: u32) -> Result<Vec<Arg>, CompileError> {
        // $fdisplay/$fwrite: the descriptor is dropped and output goes to the log
        let args = if name.starts_with("$f") && !args.is_empty() { &args[1..] } else { args };
        // $fatal takes an optional leading finish number
        let args = if name == "$fatal" && matches!(args.first(), Some(Expr::Num(_))) { &args[1..] } else { args };
        self.args(args, line)
    }

    fn patch(&mut self, at: usize, target: usize) {
        match &mut self.ops[at] {
            Op::Jump(t) | Op::JumpIfNot(_, t) => *t = target,
            _ => unreachable!("patching a non-jump"),
        }
    }
}

/// Identifiers read anywhere in a statement (for `@*`).
fn stmt_reads<'s>(s: &'s Stmt, out: &mut Vec<&'s str>) {
    match s {
        Stmt::Null => {}
        Stmt::Block(v) => v.iter().for_each(|s| stmt_reads(s, out)),
        Stmt::Assign { lhs, rhs, .. } => {
            rhs.idents(out);
            match lhs {
                Expr::Index(_, i) => i.idents(out),
                Expr::IndexedPart { base, .. } => base.idents(out),
                _ => {}
            }
        }
        Stmt::If { cond, then, els } => {
            cond.idents(out);
            stmt_reads(then, out);
            if let Some(e) = els {
                stmt_reads(e, out);
            }
        }
        Stmt::Case { subject, arms, default, .. } => {
            subject.idents(out);
            for (labels, body) in arms {
                labels.iter().for_each(|l| l.idents(out));
                stmt_reads(body, out);
            }
            if let Some(d) = default {
                stmt_reads(d, out);
            }
        }
        Stmt::For { init, cond, step, body } => {
            stmt_reads(init, out);
            cond.idents(out);
            stmt_reads(step, out);
            stmt_reads(body, out);
        }
        Stmt::While { cond, body } | Stmt::Wait { cond, body } => {
            cond.idents(out);
            stmt_reads(body, out);
        }
        Stmt::Repeat { count, body } => {
            count.idents(out);
            stmt_reads(body, out);
        }
        Stmt::Forever(b) | Stmt::Delay { body: b, .. } | Stmt::Event { body: b, .. } => stmt_reads(b, out),
        Stmt::SysTask { args, .. } => args.iter().for_each(|a| a.idents(out)),
    }
}
