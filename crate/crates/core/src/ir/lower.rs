//! Deterministic IR to Verilog-2001 lowering.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::expr::base_name;
use super::minimize::minimize_kmap_cover;
use super::{condition, parse_bool, BoolExpr, FsmIr, IntermediateRep, IrError, KMapIr, MuxIr, MuxSource, TruthTableIr};
use crate::header::{parse_header, ModuleHeader, Port, PortDir};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lowered {
    pub verilog: String,
    pub warnings: Vec<String>,
}

/// Builds a complete module: `header_src` verbatim, a generated body, `endmodule`.
pub fn lower_to_verilog(ir: &IntermediateRep, header_src: &str) -> Result<Lowered, IrError> {
    let header = parse_header(header_src).map_err(|e| IrError::Lower(e.to_string()))?;
    let mut cx = Cx { header: &header, body: String::new(), warnings: Vec::new() };
    match ir {
        IntermediateRep::Fsm(f) => cx.fsm(f)?,
        IntermediateRep::TruthTable(t) => cx.table(t)?,
        IntermediateRep::Boolean(b) => {
            for o in &b.outputs {
                let text = b.expressions.get(o).ok_or_else(|| IrError::Lower(format!("output {o} has no expression")))?;
                let e = parse_bool(text).map_err(|error| IrError::Expr { context: format!("expression for {o}"), error })?;
                cx.comb_assign(o, &e)?;
            }
        }
        IntermediateRep::KMap(k) => cx.kmap(k)?,
        IntermediateRep::Mux(m) => cx.mux(m)?,
    }
    let mut verilog = header_src.trim_end().to_string();
    if !verilog.ends_with(';') {
        verilog.push(';');
    }
    verilog.push('\n');
    verilog.push_str(&cx.body);
    verilog.push_str("endmodule\n");
    Ok(Lowered { verilog, warnings: cx.warnings })
}

struct Cx<'a> {
    header: &'a ModuleHeader,
    body: String,
    warnings: Vec<String>,
}

fn lerr(m: impl Into<String>) -> IrError {
    IrError::Lower(m.into())
}

impl Cx<'_> {
    fn port(&self, name: &str, what: &str) -> Result<&Port, IrError> {
        self.header.port(base_name(name)).ok_or_else(|| lerr(format!("{what} '{name}' is not a port of module {}", self.header.name)))
    }

    fn output(&self, name: &str) -> Result<&Port, IrError> {
        let p = self.port(name, "output")?;
        if p.dir == PortDir::Input {
            return Err(lerr(format!("'{name}' is an input, not an output")));
        }
        Ok(p)
    }

    /// The output named by the IR, or the module's only output.
    fn sole_output(&self, named: Option<&str>) -> Result<&Port, IrError> {
        if let Some(n) = named {
            return self.output(n);
        }
        let outs: Vec<&Port> = self.header.outputs().collect();
        match outs.as_slice() {
            [one] => Ok(one),
            _ => Err(lerr("IR names no output and the module has more than one")),
        }
    }

    fn check_vars(&self, e: &BoolExpr, ctx: &str) -> Result<(), IrError> {
        for v in e.vars() {
            self.port(&v, &format!("{ctx}: signal"))?;
        }
        Ok(())
    }

    fn range(p: &Port) -> String {
        if p.width() == 1 && p.msb == p.lsb && p.msb == 0 {
            String::new()
        } else {
            format!("[{}:{}] ", p.msb, p.lsb)
        }
    }

    /// Name to assign inside an `always @(*)` block for output `p`,
    /// declaring a shadow register when the port is a net.
    fn procedural_target(&mut self, p: &Port) -> String {
        if p.is_reg {
            p.name.clone()
        } else {
            let r = format!("{}_r", p.name);
            let _ = writeln!(self.body, "  reg {}{};", Self::range(p), r);
            let _ = writeln!(self.body, "  assign {} = {};", p.name, r);
            r
        }
    }

    fn comb_assign(&mut self, out: &str, e: &BoolExpr) -> Result<(), IrError> {
        let p = self.output(out)?.clone();
        self.check_vars(e, &format!("expression for {out}"))?;
        if p.is_reg {
            let _ = writeln!(self.body, "  always @(*) {} = {};", out, e.to_verilog());
        } else {
            let _ = writeln!(self.body, "  assign {} = {};", out, e.to_verilog());
        }
        Ok(())
    }

    fn fsm(&mut self, f: &FsmIr) -> Result<(), IrError> {
        let n = f.states.len();
        if n == 0 {
            return Err(lerr("FSM has no states"));
        }
        let clk = self
            .header
            .inputs()
            .find(|p| matches!(p.name.to_ascii_lowercase().as_str(), "clk" | "clock"))
            .ok_or_else(|| lerr("FSM lowering needs a clk or clock input"))?
            .name
            .clone();
        let reset = self
            .header
            .inputs()
            .find(|p| {
                let l = p.name.to_ascii_lowercase();
                l.contains("reset") || l.contains("rst")
            })
            .ok_or_else(|| lerr("FSM lowering needs a reset input"))?
            .name
            .clone();
        let lreset = reset.to_ascii_lowercase();
        let active_low = lreset.ends_with('n');
        let asynchronous = lreset.starts_with('a');

        let idx: BTreeMap<&str, usize> = f.states.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let mut conds = Vec::new();
        let mut mentions_reset = false;
        for (i, t) in f.transitions.iter().enumerate() {
            let e = condition(&t.cond).map_err(|error| IrError::Expr { context: format!("transition {i} condition"), error })?;
            self.check_vars(&e, &format!("transition {i}"))?;
            mentions_reset |= e.vars().iter().any(|v| base_name(v) == reset);
            for s in [&t.from, &t.to] {
                if !idx.contains_key(s.as_str()) {
                    return Err(lerr(format!("undeclared state {s}")));
                }
            }
            conds.push(e);
        }

        let _ = writeln!(self.body, "  reg [{}:0] state;", n - 1);
        for (i, s) in f.states.iter().enumerate() {
            let _ = writeln!(self.body, "  localparam [{}:0] ST{i} = {n}'b{}; // {s}", n - 1, one_hot(n, i));
        }
        let edge = if active_low { "negedge" } else { "posedge" };
        if asynchronous {
            let _ = writeln!(self.body, "  always @(posedge {clk} or {edge} {reset}) begin");
        } else {
            let _ = writeln!(self.body, "  always @(posedge {clk}) begin");
        }
        let explicit = asynchronous || !mentions_reset;
        let indent = if explicit {
            let test = if active_low { format!("!{reset}") } else { reset.clone() };
            let _ = writeln!(self.body, "    if ({test}) state <= ST0;\n    else begin");
            "      "
        } else {
            "    "
        };
        let _ = writeln!(self.body, "{indent}case (state)");
        for (si, s) in f.states.iter().enumerate() {
            let ts: Vec<usize> = (0..f.transitions.len()).filter(|&i| &f.transitions[i].from == s).collect();
            if ts.is_empty() {
                // no way out: hold, rather than falling into the default arm
                let _ = writeln!(self.body, "{indent}  ST{si}: state <= ST{si};");
                continue;
            }
            let _ = writeln!(self.body, "{indent}  ST{si}: begin");
            for (k, &i) in ts.iter().enumerate() {
                let kw = if k == 0 { "if" } else { "else if" };
                let to = idx[f.transitions[i].to.as_str()];
                let _ = writeln!(self.body, "{indent}    {kw} ({}) state <= ST{to};", conds[i].to_verilog());
            }
            let _ = writeln!(self.body, "{indent}  end");
        }
        let _ = writeln!(self.body, "{indent}  default: state <= ST0;\n{indent}endcase");
        if explicit {
            let _ = writeln!(self.body, "    end");
        }
        let _ = writeln!(self.body, "  end");

        // Moore outputs, zero when a state assigns no value.
        let mut signals: Vec<&str> = Vec::new();
        for o in &f.outputs {
            if !signals.contains(&o.signal.as_str()) {
                signals.push(&o.signal);
            }
        }
        for sig in signals {
            let p = self.output(sig)?.clone();
            if sig != p.name {
                return Err(lerr(format!("FSM output '{sig}' must name a whole port")));
            }
            let target = self.procedural_target(&p);
            let _ = writeln!(self.body, "  always @(*) begin\n    {target} = 0;\n    case (state)");
            for (si, s) in f.states.iter().enumerate() {
                if let Some(o) = f.outputs.iter().rev().find(|o| o.signal == sig && &o.state == s) {
                    let _ = writeln!(self.body, "      ST{si}: {target} = {};", o.value);
                }
            }
            let _ = writeln!(self.body, "      default: {target} = 0;\n    endcase\n  end");
        }
        for p in self.header.outputs() {
            if !f.outputs.iter().any(|o| o.signal == p.name) {
                self.warnings.push(format!("output {} is not driven by the FSM", p.name));
            }
        }
        Ok(())
    }

    fn table(&mut self, t: &TruthTableIr) -> Result<(), IrError> {
        let p = self.output(&t.output)?.clone();
        if t.output != p.name && !t.output.contains('[') {
            return Err(lerr(format!("truth table output '{}' is not a port", t.output)));
        }
        for i in &t.inputs {
            let ip = self.port(i, "truth table input")?;
            if !i.contains('[') && ip.width() != 1 {
                return Err(lerr(format!("truth table input '{i}' is {} bits wide; list its bits individually", ip.width())));
            }
        }
        let n = t.inputs.len();
        let target = self.procedural_target(&p);
        let subject = if n == 1 { t.inputs[0].clone() } else { format!("{{{}}}", t.inputs.join(", ")) };
        let _ = writeln!(self.body, "  always @(*) begin\n    case ({subject})");
        let mut seen = 0usize;
        let mut rows: Vec<_> = t.rows.iter().collect();
        rows.sort_by(|a, b| a.inputs.cmp(&b.inputs));
        for r in rows {
            seen += 1;
            let ib: String = r.inputs.iter().map(|b| if *b { '1' } else { '0' }).collect();
            let ob: String = r.outputs.iter().map(|b| if *b { '1' } else { '0' }).collect();
            let _ = writeln!(self.body, "      {n}'b{ib}: {target} = {}'b{ob};", r.outputs.len());
        }
        let _ = writeln!(self.body, "      default: {target} = 0;\n    endcase\n  end");
        if n <= 16 && seen < 1 << n {
            self.warnings.push(format!("truth table has {seen} of {} rows; missing rows drive 0", 1usize << n));
        }
        Ok(())
    }

    fn kmap(&mut self, k: &KMapIr) -> Result<(), IrError> {
        let p = self.sole_output(k.output.as_deref())?.clone();
        let cover = minimize_kmap_cover(k);
        let e = cover.to_expr();
        let name = k.output.clone().unwrap_or(p.name);
        self.comb_assign(&name, &e)
    }

    fn mux(&mut self, m: &MuxIr) -> Result<(), IrError> {
        let p = self.sole_output(m.output.as_deref())?.clone();
        let sel = self.port(&m.select.name, "select")?;
        if !m.select.name.contains('[') && sel.width() != m.select.width {
            self.warnings.push(format!("select '{}' is {} bits in the header but {} in the IR", m.select.name, sel.width(), m.select.width));
        }
        for d in &m.data_inputs {
            self.port(d, "data input")?;
        }
        let target = self.procedural_target(&p);
        let _ = writeln!(self.body, "  always @(*) begin\n    case ({})", m.select.name);
        let mut entries: Vec<_> = m.mapping.iter().collect();
        entries.sort_by_key(|e| e.select);
        for e in entries {
            let src = match &e.input {
                MuxSource::Input(s) => s.clone(),
                MuxSource::Const(c) => c.to_string(),
            };
            let _ = writeln!(self.body, "      {}'d{}: {target} = {src};", m.select.width, e.select);
        }
        let _ = writeln!(self.body, "      default: {target} = 0;\n    endcase\n  end");
        if (m.select.width as usize) < 16 && m.mapping.len() < 1 << m.select.width {
            self.warnings.push("unmapped select values drive 0".to_string());
        }
        Ok(())
    }
}

fn one_hot(n: usize, i: usize) -> String {
    (0..n).rev().map(|b| if b == i { '1' } else { '0' }).collect()
}
