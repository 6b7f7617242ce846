//! Expression evaluation and the event-driven scheduler.

use std::cell::Cell;
use std::collections::{BTreeMap, VecDeque};
use std::time::Instant;

use crate::ast::{BinOp, CaseKind, Edge, UnOp};
use crate::elab::{lv_width, Arg, Design, Op, Sel, SigId, SigInfo, TaskKind, WaitItem, CE, K, LV};
use crate::error::RuntimeError;
use crate::format::{format_args, FmtArg};
use crate::value::Value;

/// Signal storage plus the bits of simulator state expressions can observe.
pub struct Store {
    vals: Vec<Vec<Value>>,
    sigs: Vec<SigInfo>,
    time: u64,
    seed: Cell<u32>,
}

impl Store {
    pub fn empty() -> Store {
        Store { vals: Vec::new(), sigs: Vec::new(), time: 0, seed: Cell::new(0) }
    }

    fn new(sigs: &[SigInfo]) -> Store {
        let vals = sigs
            .iter()
            .map(|s| {
                let init = if s.is_net { Value::z(s.width) } else { Value::x(s.width) };
                vec![init.with_signed(s.signed); s.words()]
            })
            .collect();
        Store { vals, sigs: sigs.to_vec(), time: 0, seed: Cell::new(0) }
    }

    fn random(&self) -> u32 {
        // Numerical Recipes LCG
        let s = self.seed.get().wrapping_mul(1_664_525).wrapping_add(1_013_904_223);
        self.seed.set(s);
        s
    }

    pub fn eval_self(&self, e: &CE) -> Value {
        self.eval(e, e.width, e.signed)
    }

    fn word_index(&self, sig: SigId, idx: &CE) -> Option<usize> {
        let i = self.eval_self(idx).to_i128()?;
        let map = self.sigs[sig].array?;
        map.offset(i as i64).map(|o| o as usize)
    }

    fn sel_offset(&self, sel: &Sel) -> Option<(u32, u32)> {
        match sel {
            Sel::Bit { index, map } => {
                let i = self.eval_self(index).to_i128()?;
                map.offset(i as i64).map(|o| (o, 1))
            }
            Sel::Part { offset, width } => Some((*offset, *width)),
            Sel::DynPart { base, map, width, up } => {
                let b = self.eval_self(base).to_i128()? as i64;
                let (hi, lo) = if *up { (b + *width as i64 - 1, b) } else { (b, b - *width as i64 + 1) };
                // the select may hang off either end; take the offset of the low end
                let (a, c) = (map.offset(hi), map.offset(lo));
                match (a, c) {
                    (Some(x), Some(y)) => Some((x.min(y), *width)),
                    _ => None,
                }
            }
        }
    }

    /// Evaluates `e` in a context `w` bits wide with signedness `s`.
    fn eval(&self, e: &CE, w: u32, s: bool) -> Value {
        let fit = |v: Value| v.resize(w, s && e.signed).with_signed(s);
        match &e.kind {
            K::Const(v) => fit(v.with_signed(e.signed)),
            K::Sig(id) => fit(self.vals[*id][0]),
            K::Word(id, idx) => match self.word_index(*id, idx) {
                Some(i) => fit(self.vals[*id][i]),
                None => fit(Value::x(e.width)),
            },
            K::Select { base, sel } => {
                let b = self.eval_self(base);
                let v = match self.sel_offset(sel) {
                    Some((off, width)) => b.extract(off, width),
                    None => Value::x(e.width),
                };
                fit(v.with_signed(false))
            }
            K::Concat(parts) => fit(Value::concat(&parts.iter().map(|p| self.eval_self(p)).collect::<Vec<_>>())),
            K::Repl(n, inner) => {
                let v = self.eval_self(inner);
                fit(Value::concat(&vec![v; *n as usize]))
            }
            K::Time => fit(Value::new(e.width, self.time as u128)),
            K::Random => fit(Value::new(32, self.random() as u128).with_signed(e.signed)),
            K::Cast(a) => {
                let v = self.eval_self(a).with_signed(e.signed);
                fit(v)
            }
            K::Unary(op, a) => match op {
                UnOp::Plus => self.eval(a, w, s),
                UnOp::Neg => self.eval(a, w, s).neg(),
                UnOp::Not => self.eval(a, w, s).not(),
                _ => {
                    let v = self.eval_self(a);
                    let r = match op {
                        UnOp::LogNot => match v.truth() {
                            Some(t) => Value::bit(!t),
                            None => Value::x_bit(),
                        },
                        UnOp::RedAnd => v.reduce_and(),
                        UnOp::RedOr => v.reduce_or(),
                        UnOp::RedXor => v.reduce_xor(),
                        UnOp::RedNand => v.reduce_and().not(),
                        UnOp::RedNor => v.reduce_or().not(),
                        UnOp::RedXnor => v.reduce_xor().not(),
                        _ => unreachable!(),
                    };
                    r.resize(w, false).with_signed(s)
                }
            },
            K::Binary(op, a, b) => self.binary(*op, a, b, w, s),
            K::Ternary(c, a, b) => match self.eval_self(c).truth() {
                Some(true) => self.eval(a, w, s),
                Some(false) => self.eval(b, w, s),
                None => {
                    let x = self.eval(a, w, s);
                    let y = self.eval(b, w, s);
                    let differ = (x.val_plane() ^ y.val_plane()) | x.unk_plane() | y.unk_plane();
                    Value::from_planes(w, x.val_plane() & !differ, differ).with_signed(s)
                }
            },
        }
    }

    fn binary(&self, op: BinOp, a: &CE, b: &CE, w: u32, s: bool) -> Value {
        use BinOp::*;
        match op {
            Add | Sub | Mul | Div | Mod | And | Or | Xor | Xnor => {
                let x = self.eval(a, w, s);
                let y = self.eval(b, w, s);
                match op {
                    Add => x.add(&y),
                    Sub => x.sub(&y),
                    Mul => x.mul(&y),
                    Div => x.div(&y),
                    Mod => x.rem(&y),
                    And => x.and(&y).with_signed(s),
                    Or => x.or(&y).with_signed(s),
                    Xor => x.xor(&y).with_signed(s),
                    Xnor => x.xor(&y).not(),
                    _ => unreachable!(),
                }
            }
            Pow => {
                let x = self.eval(a, w, s);
                let y = self.eval_self(b);
                x.pow(&y.resize(w.max(y.width()), false))
            }
            Shl | AShl => self.eval(a, w, s).shl(&self.eval_self(b)),
            Shr => self.eval(a, w, s).shr(&self.eval_self(b), false),
            AShr => self.eval(a, w, s).shr(&self.eval_self(b), true),
            LogAnd | LogOr => {
                let x = self.eval_self(a).truth();
                let y = self.eval_self(b).truth();
                let r = match (op, x, y) {
                    (LogAnd, Some(false), _) | (LogAnd, _, Some(false)) => Value::bit(false),
                    (LogAnd, Some(true), Some(true)) => Value::bit(true),
                    (LogOr, Some(true), _) | (LogOr, _, Some(true)) => Value::bit(true),
                    (LogOr, Some(false), Some(false)) => Value::bit(false),
                    _ => Value::x_bit(),
                };
                r.resize(w, false).with_signed(s)
            }
            _ => {
                let cw = a.width.max(b.width);
                let cs = a.signed && b.signed;
                let x = self.eval(a, cw, cs);
                let y = self.eval(b, cw, cs);
                let r = match op {
                    Eq => x.logic_eq(&y),
                    Ne => x.logic_eq(&y).not(),
                    CaseEq => Value::bit(x.case_eq(&y)),
                    CaseNe => Value::bit(!x.case_eq(&y)),
                    Lt | Le | Gt | Ge => match x.compare(&y, cs) {
                        None => Value::x_bit(),
                        Some(o) => Value::bit(match op {
                            Lt => o.is_lt(),
                            Le => o.is_le(),
                            Gt => o.is_gt(),
                            _ => o.is_ge(),
                        }),
                    },
                    _ => unreachable!(),
                };
                r.resize(w, false).with_signed(s)
            }
        }
    }

    /// Value for assignment to a target `lw` bits wide.
    fn eval_for(&self, rhs: &CE, lw: u32) -> Value {
        self.eval(rhs, lw.max(rhs.width), rhs.signed).resize(lw, false)
    }

    fn resolve(&self, lv: &LV, value: Value, out: &mut Vec<Write>) {
        match lv {
            LV::Sig(id) => out.push(Write { sig: *id, word: 0, offset: 0, value: value.resize(self.sigs[*id].width, false) }),
            LV::Slice { sig, word, sel, width } => {
                let word = match word {
                    Some(idx) => match self.word_index(*sig, idx) {
                        Some(i) => i,
                        None => return,
                    },
                    None => 0,
                };
                let (offset, w) = match sel {
                    Some(sel) => match self.sel_offset(sel) {
                        Some(x) => x,
                        None => return,
                    },
                    None => (0, *width),
                };
                out.push(Write { sig: *sig, word, offset, value: value.resize(w, false) });
            }
            LV::Concat(parts) => {
                let mut lo = 0u32;
                for p in parts.iter().rev() {
                    let pw = lv_width(p, &self.sigs);
                    self.resolve(p, value.extract(lo, pw), out);
                    lo += pw;
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Write {
    sig: SigId,
    word: usize,
    offset: u32,
    value: Value,
}

enum Event {
    Resume(usize),
    Nba(Vec<Write>),
}

#[derive(Default)]
struct ProcState {
    pc: usize,
    counters: Vec<u64>,
    gen: u64,
    waiting: Option<Vec<Value>>,
    done: bool,
}

/// Bounds on a simulation run.
#[derive(Debug, Clone)]
pub struct Limits {
    /// Maximum number of executed statements.
    pub max_steps: u64,
    pub deadline: Option<Instant>,
    /// Stop (without error) once simulation time passes this value.
    pub max_time: Option<u64>,
    /// Output beyond this many bytes is dropped and the run stops.
    pub max_output: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_steps: 200_000_000, deadline: None, max_time: None, max_output: 16 << 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutput {
    pub output: String,
    pub end_time: u64,
    /// `$finish` or `$stop` was reached.
    pub finished: bool,
    /// `$fatal` was reached.
    pub fatal: bool,
    pub truncated: bool,
}

struct Kernel<'d> {
    design: &'d Design,
    store: Store,
    procs: Vec<ProcState>,
    waiters: Vec<Vec<(usize, u64)>>,
    active: VecDeque<usize>,
    inactive: Vec<usize>,
    nba: Vec<Vec<Write>>,
    wheel: BTreeMap<u64, Vec<Event>>,
    strobes: Vec<(usize, Vec<Arg>)>,
    monitor: Option<(usize, Vec<Arg>, Option<String>)>,
    out: RunOutput,
    steps: u64,
    limits: Limits,
    stop: bool,
}

pub fn run(design: &Design, limits: Limits) -> Result<RunOutput, RuntimeError> {
    let mut store = Store::new(&design.sigs);
    for (id, v) in &design.inits {
        store.vals[*id] = vec![*v; store.vals[*id].len()];
    }
    let procs = design.procs.iter().map(|p| ProcState { counters: vec![0; p.counters], ..Default::default() }).collect();
    let mut k = Kernel {
        design,
        store,
        procs,
        waiters: vec![Vec::new(); design.sigs.len()],
        active: (0..design.procs.len()).collect(),
        inactive: Vec::new(),
        nba: Vec::new(),
        wheel: BTreeMap::new(),
        strobes: Vec::new(),
        monitor: None,
        out: RunOutput { output: String::new(), end_time: 0, finished: false, fatal: false, truncated: false },
        steps: 0,
        limits,
        stop: false,
    };
    k.main()?;
    k.out.end_time = k.store.time;
    Ok(k.out)
}

impl Kernel<'_> {
    fn main(&mut self) -> Result<(), RuntimeError> {
        loop {
            self.time_step()?;
            if self.stop {
                return Ok(());
            }
            self.postponed();
            if self.stop {
                return Ok(());
            }
            let Some((t, events)) = self.wheel.pop_first() else { return Ok(()) };
            if self.limits.max_time.is_some_and(|m| t > m) {
                return Ok(());
            }
            self.store.time = t;
            for ev in events {
                match ev {
                    Event::Resume(p) => self.active.push_back(p),
                    Event::Nba(w) => self.nba.push(w),
                }
            }
        }
    }

    fn time_step(&mut self) -> Result<(), RuntimeError> {
        loop {
            while let Some(p) = self.active.pop_front() {
                self.exec(p)?;
                if self.stop {
                    return Ok(());
                }
            }
            if !self.inactive.is_empty() {
                self.active.extend(self.inactive.drain(..));
                continue;
            }
            if !self.nba.is_empty() {
                for batch in std::mem::take(&mut self.nba) {
                    for w in batch {
                        self.write(w);
                    }
                }
                continue;
            }
            return Ok(());
        }
    }

    fn postponed(&mut self) {
        for (p, args) in std::mem::take(&mut self.strobes) {
            let line = self.format(p, &args);
            self.emit(&line, true);
        }
        if let Some((p, args, last)) = self.monitor.take() {
            let line = self.format(p, &args);
            let changed = last.as_deref() != Some(line.as_str());
            if changed {
                self.emit(&line, true);
            }
            self.monitor = Some((p, args, Some(line)));
        }
    }

    fn format(&self, p: usize, args: &[Arg]) -> String {
        let vals: Vec<FmtArg> = args
            .iter()
            .map(|a| match a {
                Arg::Str(s) => FmtArg::Str(s.clone()),
                Arg::Expr(e) => FmtArg::Val(self.store.eval_self(e)),
            })
            .collect();
        format_args(&vals, self.store.time, &self.design.procs[p].scope)
    }

    fn emit(&mut self, s: &str, newline: bool) {
        if self.out.output.len() + s.len() + 1 > self.limits.max_output {
            self.out.truncated = true;
            self.stop = true;
            return;
        }
        self.out.output.push_str(s);
        if newline {
            self.out.output.push('\n');
        }
    }

    fn write(&mut self, w: Write) {
        let old = self.store.vals[w.sig][w.word];
        let new = old.insert(w.offset, &w.value);
        if new.case_eq(&old) {
            return;
        }
        self.store.vals[w.sig][w.word] = new;
        self.notify(w.sig);
    }

    fn notify(&mut self, sig: SigId) {
        let list = std::mem::take(&mut self.waiters[sig]);
        let mut keep = Vec::with_capacity(list.len());
        for (p, gen) in list {
            let st = &self.procs[p];
            if st.gen != gen || st.waiting.is_none() {
                continue;
            }
            let Op::Wait(items) = &self.design.procs[p].ops[st.pc] else { continue };
            let old = st.waiting.as_ref().unwrap();
            let mut fire = false;
            let mut now = Vec::with_capacity(items.len());
            for (item, prev) in items.iter().zip(old) {
                let cur = self.store.eval_self(&item.expr);
                fire |= triggered(item.edge, prev, &cur);
                now.push(cur);
            }
            if fire {
                let st = &mut self.procs[p];
                st.waiting = None;
                st.gen += 1;
                st.pc += 1;
                self.active.push_back(p);
            } else {
                self.procs[p].waiting = Some(now);
                keep.push((p, gen));
            }
        }
        // waiters registered while iterating were appended to the fresh list
        keep.append(&mut self.waiters[sig]);
        self.waiters[sig] = keep;
    }

    fn exec(&mut self, p: usize) -> Result<(), RuntimeError> {
        let code = &self.design.procs[p];
        if self.procs[p].done {
            return Ok(());
        }
        loop {
            self.steps += 1;
            if self.steps > self.limits.max_steps {
                return Err(RuntimeError::StepBudget(self.limits.max_steps));
            }
            if self.steps.is_multiple_of(4096) {
                if let Some(d) = self.limits.deadline {
                    if Instant::now() > d {
                        return Err(RuntimeError::Deadline(self.store.time));
                    }
                }
            }
            let pc = self.procs[p].pc;
            let Some(op) = code.ops.get(pc) else {
                self.procs[p].done = true;
                return Ok(());
            };
            match op {
                Op::Assign { lv, rhs } => {
                    let v = self.store.eval_for(rhs, lv_width(lv, &self.store.sigs));
                    let mut ws = Vec::new();
                    self.store.resolve(lv, v, &mut ws);
                    for w in ws {
                        self.write(w);
                    }
                    self.procs[p].pc += 1;
                }
                Op::NbAssign { lv, rhs, delay } => {
                    let v = self.store.eval_for(rhs, lv_width(lv, &self.store.sigs));
                    let mut ws = Vec::new();
                    self.store.resolve(lv, v, &mut ws);
                    match delay.as_ref().map(|d| self.store.eval_self(d).to_u64().unwrap_or(0)) {
                        Some(d) if d > 0 => {
                            let t = self.store.time + d;
                            self.wheel.entry(t).or_default().push(Event::Nba(ws));
                        }
                        _ => self.nba.push(ws),
                    }
                    self.procs[p].pc += 1;
                }
                Op::Jump(t) => self.procs[p].pc = *t,
                Op::JumpIfNot(c, t) => {
                    let taken = self.store.eval_self(c).truth() != Some(true);
                    self.procs[p].pc = if taken { *t } else { pc + 1 };
                }
                Op::Case { kind, subject, arms, default, width, signed } => {
                    let sv = self.store.eval(subject, *width, *signed);
                    let mut target = *default;
                    'arms: for (labels, t) in arms {
                        for l in labels {
                            let lv = self.store.eval(l, *width, *signed);
                            if case_match(*kind, &sv, &lv) {
                                target = *t;
                                break 'arms;
                            }
                        }
                    }
                    self.procs[p].pc = target;
                }
                Op::Delay(d) => {
                    let d = self.store.eval_self(d).to_u64().unwrap_or(0);
                    self.procs[p].pc += 1;
                    if d == 0 {
                        self.inactive.push(p);
                    } else {
                        let t = self.store.time + d;
                        self.wheel.entry(t).or_default().push(Event::Resume(p));
                    }
                    return Ok(());
                }
                Op::Wait(items) => {
                    self.suspend(p, items);
                    return Ok(());
                }
                Op::SetCounter(slot, e) => {
                    let n = self.store.eval_self(e).to_i128().unwrap_or(0).max(0) as u64;
                    self.procs[p].counters[*slot] = n;
                    self.procs[p].pc += 1;
                }
                Op::DecJumpIfZero(slot, t) => {
                    let st = &mut self.procs[p];
                    if st.counters[*slot] == 0 {
                        st.pc = *t;
                    } else {
                        st.counters[*slot] -= 1;
                        st.pc += 1;
                    }
                }
                Op::Print(kind, args) => {
                    self.procs[p].pc += 1;
                    match kind {
                        TaskKind::Display | TaskKind::Error => {
                            let line = self.format(p, args);
                            self.emit(&line, true);
                        }
                        TaskKind::Write => {
                            let line = self.format(p, args);
                            self.emit(&line, false);
                        }
                        TaskKind::Strobe => self.strobes.push((p, args.clone())),
                        TaskKind::Monitor => self.monitor = Some((p, args.clone(), None)),
                    }
                    if self.stop {
                        return Ok(());
                    }
                }
                Op::Finish => {
                    self.out.finished = true;
                    self.stop = true;
                    return Ok(());
                }
                Op::Fatal(args) => {
                    let line = self.format(p, args);
                    self.emit(&format!("FATAL: {line}"), true);
                    self.out.fatal = true;
                    self.out.finished = true;
                    self.stop = true;
                    return Ok(());
                }
                Op::Halt => {
                    self.procs[p].done = true;
                    return Ok(());
                }
            }
        }
    }

    fn suspend(&mut self, p: usize, items: &[WaitItem]) {
        let snapshot = items.iter().map(|i| self.store.eval_self(&i.expr)).collect();
        let st = &mut self.procs[p];
        st.gen += 1;
        st.waiting = Some(snapshot);
        let gen = st.gen;
        for item in items {
            for s in &item.sigs {
                let list = &mut self.waiters[*s];
                if list.len() >= 64 && list.len().is_power_of_two() {
                    let procs = &self.procs;
                    list.retain(|(q, g)| procs[*q].gen == *g);
                }
                list.push((p, gen));
            }
        }
    }
}

fn triggered(edge: Edge, prev: &Value, cur: &Value) -> bool {
    match edge {
        Edge::Any => !prev.case_eq(cur),
        Edge::Pos | Edge::Neg => {
            let level = |v: &Value| match v.get_bit(0) {
                (true, false) => 0u8,
                (true, true) => 2,
                _ => 1,
            };
            let (a, b) = (level(prev), level(cur));
            if edge == Edge::Pos {
                a < b
            } else {
                a > b
            }
        }
    }
}

fn case_match(kind: CaseKind, a: &Value, b: &Value) -> bool {
    let ignore = match kind {
        CaseKind::Case => 0,
        CaseKind::Casez => a.z_mask() | b.z_mask(),
        CaseKind::Casex => a.unk_plane() | b.unk_plane(),
    };
    (a.val_plane() & !ignore) == (b.val_plane() & !ignore) && (a.unk_plane() & !ignore) == (b.unk_plane() & !ignore)
}
