use crate::value::Value;

#[derive(Debug, Clone)]
pub struct Module {
    pub name: String,
    pub line: u32,
    /// Port names in declaration order.
    pub ports: Vec<String>,
    pub items: Vec<Item>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dir {
    Input,
    Output,
    Inout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetKind {
    Wire,
    Reg,
    Integer,
}

#[derive(Debug, Clone)]
pub struct Range {
    pub msb: Expr,
    pub lsb: Expr,
}

#[derive(Debug, Clone)]
pub struct Declarator {
    pub name: String,
    pub array: Option<Range>,
    pub init: Option<Expr>,
}

#[derive(Debug, Clone)]
pub struct Decl {
    pub line: u32,
    pub dir: Option<Dir>,
    /// `None` when only a direction was given (implicit wire).
    pub kind: Option<NetKind>,
    pub signed: bool,
    pub range: Option<Range>,
    pub names: Vec<Declarator>,
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub line: u32,
    pub module: String,
    pub name: String,
    pub params: Connections,
    pub conns: Connections,
}

#[derive(Debug, Clone)]
pub enum Connections {
    Positional(Vec<Option<Expr>>),
    Named(Vec<(String, Option<Expr>)>),
}

#[derive(Debug, Clone)]
pub enum Item {
    Decl(Decl),
    Param { line: u32, name: String, value: Expr, local: bool },
    Assign { line: u32, lhs: Expr, rhs: Expr },
    Always { line: u32, body: Stmt },
    Initial { line: u32, body: Stmt },
    Instance(Instance),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    Pos,
    Neg,
    Any,
}

#[derive(Debug, Clone)]
pub enum EventCtl {
    Star,
    List(Vec<(Edge, Expr)>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseKind {
    Case,
    Casez,
    Casex,
}

#[derive(Debug, Clone)]
pub enum Stmt {
    Null,
    Block(Vec<Stmt>),
    Assign { line: u32, lhs: Expr, rhs: Expr, nonblocking: bool, delay: Option<Expr> },
    If { cond: Expr, then: Box<Stmt>, els: Option<Box<Stmt>> },
    Case { kind: CaseKind, subject: Expr, arms: Vec<(Vec<Expr>, Stmt)>, default: Option<Box<Stmt>> },
    For { init: Box<Stmt>, cond: Expr, step: Box<Stmt>, body: Box<Stmt> },
    While { cond: Expr, body: Box<Stmt> },
    Repeat { count: Expr, body: Box<Stmt> },
    Forever(Box<Stmt>),
    Delay { amount: Expr, body: Box<Stmt> },
    Event { ctl: EventCtl, body: Box<Stmt> },
    Wait { cond: Expr, body: Box<Stmt> },
    SysTask { line: u32, name: String, args: Vec<Expr> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Plus,
    Neg,
    Not,
    LogNot,
    RedAnd,
    RedOr,
    RedXor,
    RedNand,
    RedNor,
    RedXnor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Pow,
    And,
    Or,
    Xor,
    Xnor,
    Shl,
    Shr,
    AShl,
    AShr,
    Eq,
    Ne,
    CaseEq,
    CaseNe,
    Lt,
    Le,
    Gt,
    Ge,
    LogAnd,
    LogOr,
}

#[derive(Debug, Clone)]
pub enum Expr {
    Num(Value),
    Str(String),
    Ident(String),
    /// `name[index]`: bit select or memory word.
    Index(String, Box<Expr>),
    /// `name[index][msb:lsb]` or `name[index][bit]` on a memory word.
    WordSelect(String, Box<Expr>, Box<Expr>, Option<Box<Expr>>),
    Part(String, Box<Expr>, Box<Expr>),
    IndexedPart {
        name: String,
        base: Box<Expr>,
        width: Box<Expr>,
        up: bool,
    },
    Concat(Vec<Expr>),
    Repl(Box<Expr>, Vec<Expr>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Ternary(Box<Expr>, Box<Expr>, Box<Expr>),
    SysCall(String, Vec<Expr>),
}

impl Expr {
    /// Identifiers read by this expression (not deduplicated).
    pub fn idents<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Num(_) | Expr::Str(_) => {}
            Expr::Ident(n) => out.push(n),
            Expr::Index(n, i) => {
                out.push(n);
                i.idents(out);
            }
            Expr::WordSelect(n, i, a, b) => {
                out.push(n);
                i.idents(out);
                a.idents(out);
                if let Some(b) = b {
                    b.idents(out);
                }
            }
            Expr::Part(n, a, b) => {
                out.push(n);
                a.idents(out);
                b.idents(out);
            }
            Expr::IndexedPart { name, base, width, .. } => {
                out.push(name);
                base.idents(out);
                width.idents(out);
            }
            Expr::Concat(v) => v.iter().for_each(|e| e.idents(out)),
            Expr::Repl(n, v) => {
                n.idents(out);
                v.iter().for_each(|e| e.idents(out));
            }
            Expr::Unary(_, e) => e.idents(out),
            Expr::Binary(_, a, b) => {
                a.idents(out);
                b.idents(out);
            }
            Expr::Ternary(c, a, b) => {
                c.idents(out);
                a.idents(out);
                b.idents(out);
            }
            Expr::SysCall(_, args) => args.iter().for_each(|e| e.idents(out)),
        }
    }
}
