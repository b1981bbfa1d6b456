use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::types::Type;

/// 1-based source position of a node's first token.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

/// Dense program-wide statement index, assigned in source order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StmtId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MethodRef {
    pub class: u32,
    pub index: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FieldRef {
    pub class: u32,
    pub index: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Program {
    pub externs: Vec<ExternDecl>,
    /// `classes[0]` is the implicit top-level class of the file.
    pub classes: Vec<ClassDecl>,
    /// Number of statement ids handed out; ids are `0..stmt_count`.
    pub stmt_count: u32,
}

impl Program {
    pub fn method(&self, r: MethodRef) -> &MethodDecl {
        &self.classes[r.class as usize].methods[r.index as usize]
    }

    pub fn field(&self, r: FieldRef) -> &FieldDecl {
        &self.classes[r.class as usize].fields[r.index as usize]
    }

    /// All methods with their references, in declaration order.
    pub fn methods(&self) -> impl Iterator<Item = (MethodRef, &MethodDecl)> {
        self.classes.iter().enumerate().flat_map(|(c, class)| {
            class.methods.iter().enumerate().map(move |(m, method)| (MethodRef { class: c as u32, index: m as u32 }, method))
        })
    }

    /// `Class.method` for named classes, bare `method` for the top-level class.
    pub fn qualified_method_name(&self, r: MethodRef) -> String {
        let class = &self.classes[r.class as usize];
        let method = &class.methods[r.index as usize];
        match &class.name {
            Some(name) => alloc::format!("{name}.{}", method.name),
            None => method.name.clone(),
        }
    }

    /// Looks up a top-level method by name (event handlers, `main`).
    pub fn top_level_method(&self, name: &str) -> Option<MethodRef> {
        self.classes.first()?.methods.iter().position(|m| m.name == name).map(|i| MethodRef { class: 0, index: i as u32 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternDecl {
    pub class: String,
    pub name: String,
    pub params: Vec<Type>,
    pub ret: Type,
    /// Value returned by the opaque implementation, when declared with `= literal`.
    pub default: Option<Literal>,
    pub span: Span,
}

impl ExternDecl {
    pub fn qualified_name(&self) -> String {
        alloc::format!("{}.{}", self.class, self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDecl {
    pub name: Option<String>,
    pub fields: Vec<FieldDecl>,
    pub methods: Vec<MethodDecl>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDecl {
    pub name: String,
    pub ty: Type,
    pub init: Option<Literal>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub ty: Type,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalInfo {
    pub name: String,
    pub ty: Type,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodDecl {
    pub name: String,
    pub params: Vec<Param>,
    pub ret: Type,
    pub body: Vec<Stmt>,
    pub span: Span,
    /// Frame layout filled in by the checker: parameters first, then every
    /// local declaration in source order.
    pub locals: Vec<LocalInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Literal {
    Int(i32),
    Float(f64),
    Char(u16),
    Bool(bool),
    Null,
}

impl Literal {
    pub fn ty(&self) -> Type {
        match self {
            Literal::Int(_) => Type::Int,
            Literal::Float(_) => Type::Float,
            Literal::Char(_) => Type::Char,
            Literal::Bool(_) => Type::Boolean,
            Literal::Null => Type::Null,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AssignOp {
    Set,
    Add,
    Sub,
    Mul,
    Div,
}

impl AssignOp {
    pub fn binop(self) -> Option<BinOp> {
        match self {
            AssignOp::Set => None,
            AssignOp::Add => Some(BinOp::Add),
            AssignOp::Sub => Some(BinOp::Sub),
            AssignOp::Mul => Some(BinOp::Mul),
            AssignOp::Div => Some(BinOp::Div),
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            AssignOp::Set => "=",
            AssignOp::Add => "+=",
            AssignOp::Sub => "-=",
            AssignOp::Mul => "*=",
            AssignOp::Div => "/=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stmt {
    pub id: StmtId,
    pub span: Span,
    pub kind: StmtKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchCase {
    pub label: Literal,
    pub span: Span,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StmtKind {
    Decl {
        name: String,
        ty: Type,
        init: Option<Expr>,
        /// Frame slot; `u32::MAX` until checked.
        slot: u32,
    },
    Assign {
        target: Expr,
        op: AssignOp,
        value: Expr,
    },
    IncDec {
        target: Expr,
        increment: bool,
    },
    /// Expression statement; only calls are accepted.
    Expr(Expr),
    If {
        cond: Expr,
        then_body: Vec<Stmt>,
        else_body: Option<Vec<Stmt>>,
    },
    For {
        init: Option<Box<Stmt>>,
        cond: Option<Expr>,
        update: Option<Box<Stmt>>,
        body: Vec<Stmt>,
    },
    While {
        cond: Expr,
        body: Vec<Stmt>,
    },
    Switch {
        selector: Expr,
        cases: Vec<SwitchCase>,
        default: Option<Vec<Stmt>>,
    },
    Return(Option<Expr>),
    Break,
    Continue,
    Block(Vec<Stmt>),
}

impl StmtKind {
    /// Statements that transfer control away from the rest of their list.
    pub fn is_terminator(&self) -> bool {
        matches!(self, StmtKind::Return(_) | StmtKind::Break | StmtKind::Continue)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum UnaryOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Gt,
    Le,
    Ge,
    Eq,
    Ne,
    And,
    Or,
    BitAnd,
    BitOr,
    Shl,
    Shr,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Lt => "<",
            BinOp::Gt => ">",
            BinOp::Le => "<=",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
            BinOp::BitAnd => "&",
            BinOp::BitOr => "|",
            BinOp::Shl => "<<",
            BinOp::Shr => ">>",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::BitOr => 3,
            BinOp::BitAnd => 4,
            BinOp::Eq | BinOp::Ne => 5,
            BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge => 6,
            BinOp::Shl | BinOp::Shr => 7,
            BinOp::Add | BinOp::Sub => 8,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expr {
    pub kind: ExprKind,
    pub ty: Type,
    pub span: Span,
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, ty: Type::Unresolved, span }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ExprKind {
    Lit(Literal),
    /// Unresolved identifier, replaced by `Local` or `Field`.
    Name(String),
    /// Unresolved `base.name`, replaced by `Field` or `Length`.
    Member {
        base: Box<Expr>,
        name: String,
    },
    /// Unresolved call, replaced by `Call` or `LibCall`.
    Invoke {
        base: Option<Box<Expr>>,
        name: String,
        args: Vec<Expr>,
    },
    Local {
        slot: u32,
        name: String,
    },
    Field {
        field: FieldRef,
        name: String,
    },
    Index {
        array: Box<Expr>,
        index: Box<Expr>,
    },
    Length(Box<Expr>),
    Unary {
        op: UnaryOp,
        operand: Box<Expr>,
    },
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Cast {
        to: Type,
        operand: Box<Expr>,
    },
    NewArray {
        elem: Type,
        len: Box<Expr>,
    },
    Call {
        method: MethodRef,
        args: Vec<Expr>,
    },
    LibCall {
        func: u32,
        receiver: Option<Box<Expr>>,
        args: Vec<Expr>,
    },
}

impl ExprKind {
    pub fn is_unresolved(&self) -> bool {
        matches!(self, ExprKind::Name(_) | ExprKind::Member { .. } | ExprKind::Invoke { .. })
    }
}

/// Pre-order visit of every expression below `stmt`, including nested statements.
pub fn walk_stmt_exprs<'a>(stmt: &'a Stmt, f: &mut dyn FnMut(&'a Expr)) {
    match &stmt.kind {
        StmtKind::Decl { init, .. } => {
            if let Some(e) = init {
                walk_expr(e, f);
            }
        }
        StmtKind::Assign { target, value, .. } => {
            walk_expr(target, f);
            walk_expr(value, f);
        }
        StmtKind::IncDec { target, .. } => walk_expr(target, f),
        StmtKind::Expr(e) => walk_expr(e, f),
        StmtKind::If { cond, then_body, else_body } => {
            walk_expr(cond, f);
            then_body.iter().for_each(|s| walk_stmt_exprs(s, f));
            if let Some(body) = else_body {
                body.iter().for_each(|s| walk_stmt_exprs(s, f));
            }
        }
        StmtKind::For { init, cond, update, body } => {
            if let Some(s) = init {
                walk_stmt_exprs(s, f);
            }
            if let Some(c) = cond {
                walk_expr(c, f);
            }
            if let Some(s) = update {
                walk_stmt_exprs(s, f);
            }
            body.iter().for_each(|s| walk_stmt_exprs(s, f));
        }
        StmtKind::While { cond, body } => {
            walk_expr(cond, f);
            body.iter().for_each(|s| walk_stmt_exprs(s, f));
        }
        StmtKind::Switch { selector, cases, default } => {
            walk_expr(selector, f);
            for case in cases {
                case.body.iter().for_each(|s| walk_stmt_exprs(s, f));
            }
            if let Some(body) = default {
                body.iter().for_each(|s| walk_stmt_exprs(s, f));
            }
        }
        StmtKind::Return(Some(e)) => walk_expr(e, f),
        StmtKind::Return(None) | StmtKind::Break | StmtKind::Continue => {}
        StmtKind::Block(body) => body.iter().for_each(|s| walk_stmt_exprs(s, f)),
    }
}

pub fn walk_expr<'a>(expr: &'a Expr, f: &mut dyn FnMut(&'a Expr)) {
    f(expr);
    match &expr.kind {
        ExprKind::Lit(_) | ExprKind::Name(_) | ExprKind::Local { .. } | ExprKind::Field { .. } => {}
        ExprKind::Member { base, .. } => walk_expr(base, f),
        ExprKind::Invoke { base, args, .. } => {
            if let Some(b) = base {
                walk_expr(b, f);
            }
            args.iter().for_each(|a| walk_expr(a, f));
        }
        ExprKind::Index { array, index } => {
            walk_expr(array, f);
            walk_expr(index, f);
        }
        ExprKind::Length(e) | ExprKind::Unary { operand: e, .. } | ExprKind::Cast { operand: e, .. } => walk_expr(e, f),
        ExprKind::NewArray { len, .. } => walk_expr(len, f),
        ExprKind::Binary { lhs, rhs, .. } => {
            walk_expr(lhs, f);
            walk_expr(rhs, f);
        }
        ExprKind::Call { args, .. } => args.iter().for_each(|a| walk_expr(a, f)),
        ExprKind::LibCall { receiver, args, .. } => {
            if let Some(r) = receiver {
                walk_expr(r, f);
            }
            args.iter().for_each(|a| walk_expr(a, f));
        }
    }
}

/// Visits `stmts` and every statement nested inside them, pre-order.
pub fn walk_stmts<'a>(stmts: &'a [Stmt], f: &mut dyn FnMut(&'a Stmt)) {
    for stmt in stmts {
        f(stmt);
        match &stmt.kind {
            StmtKind::If { then_body, else_body, .. } => {
                walk_stmts(then_body, f);
                if let Some(body) = else_body {
                    walk_stmts(body, f);
                }
            }
            StmtKind::For { init, update, body, .. } => {
                if let Some(s) = init {
                    walk_stmts(core::slice::from_ref(s), f);
                }
                if let Some(s) = update {
                    walk_stmts(core::slice::from_ref(s), f);
                }
                walk_stmts(body, f);
            }
            StmtKind::While { body, .. } | StmtKind::Block(body) => walk_stmts(body, f),
            StmtKind::Switch { cases, default, .. } => {
                for case in cases {
                    walk_stmts(&case.body, f);
                }
                if let Some(body) = default {
                    walk_stmts(body, f);
                }
            }
            _ => {}
        }
    }
}
