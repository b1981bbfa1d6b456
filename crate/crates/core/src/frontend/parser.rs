use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::ast::*;
use super::lexer::{Kw, Tok, Token};
use super::types::Type;
use super::FrontendError;

pub struct Parser {
    toks: Vec<Token>,
    pos: usize,
    next_stmt: u32,
}

type PResult<T> = Result<T, FrontendError>;

impl Parser {
    pub fn new(toks: Vec<Token>) -> Self {
        Parser { toks, pos: 0, next_stmt: 0 }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_kw(&self, kw: Kw) -> bool {
        matches!(self.peek(), Tok::Kw(k) if *k == kw)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{p}`")))
        }
    }

    fn expect_ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.advance();
                Ok(name)
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn unexpected(&self, wanted: &str) -> FrontendError {
        let found = match self.peek() {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(v) => format!("integer `{v}`"),
            Tok::Float(v) => format!("float `{v}`"),
            Tok::Char(_) => "char literal".into(),
            Tok::Kw(k) => format!("keyword `{}`", format!("{k:?}").to_lowercase()),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of file".into(),
        };
        FrontendError::syntax(self.span(), format!("expected {wanted}, found {found}"))
    }

    fn new_stmt_id(&mut self) -> StmtId {
        let id = StmtId(self.next_stmt);
        self.next_stmt += 1;
        id
    }

    pub fn parse_program(mut self) -> PResult<Program> {
        let mut externs = Vec::new();
        let mut top = ClassDecl { name: None, fields: Vec::new(), methods: Vec::new(), span: Span::new(1, 1) };
        let mut classes = Vec::new();
        while *self.peek() != Tok::Eof {
            if self.is_kw(Kw::Extern) {
                externs.push(self.parse_extern()?);
            } else if self.is_kw(Kw::Class) {
                let span = self.span();
                self.advance();
                let name = self.expect_ident()?;
                self.expect_punct("{")?;
                let mut class = ClassDecl { name: Some(name), fields: Vec::new(), methods: Vec::new(), span };
                while !self.eat_punct("}") {
                    if *self.peek() == Tok::Eof {
                        return Err(self.unexpected("`}`"));
                    }
                    self.parse_member(&mut class)?;
                }
                classes.push(class);
            } else {
                self.parse_member(&mut top)?;
            }
        }
        classes.insert(0, top);
        Ok(Program { externs, classes, stmt_count: self.next_stmt })
    }

    fn parse_extern(&mut self) -> PResult<ExternDecl> {
        let span = self.span();
        self.advance();
        let class = self.expect_ident()?;
        self.expect_punct(".")?;
        let name = self.expect_ident()?;
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.eat_punct(")") {
            loop {
                params.push(self.parse_type()?);
                if self.eat_punct(")") {
                    break;
                }
                self.expect_punct(",")?;
            }
        }
        self.expect_punct("->")?;
        let ret = self.parse_type()?;
        let default = if self.eat_punct("=") { Some(self.parse_literal()?) } else { None };
        self.expect_punct(";")?;
        Ok(ExternDecl { class, name, params, ret, default, span })
    }

    fn parse_member(&mut self, class: &mut ClassDecl) -> PResult<()> {
        let span = self.span();
        let ty = self.parse_type()?;
        let name = self.expect_ident()?;
        if self.eat_punct("(") {
            let mut params = Vec::new();
            if !self.eat_punct(")") {
                loop {
                    let pspan = self.span();
                    let pty = self.parse_type()?;
                    let pname = self.expect_ident()?;
                    params.push(Param { name: pname, ty: pty, span: pspan });
                    if self.eat_punct(")") {
                        break;
                    }
                    self.expect_punct(",")?;
                }
            }
            let body = self.parse_block()?;
            class.methods.push(MethodDecl { name, params, ret: ty, body, span, locals: Vec::new() });
        } else {
            let init = if self.eat_punct("=") { Some(self.parse_literal()?) } else { None };
            self.expect_punct(";")?;
            class.fields.push(FieldDecl { name, ty, init, span });
        }
        Ok(())
    }

    fn parse_literal(&mut self) -> PResult<Literal> {
        let negative = self.eat_punct("-");
        let lit = match self.peek().clone() {
            Tok::Int(v) => Literal::Int(if negative { v.wrapping_neg() } else { v }),
            Tok::Float(v) => Literal::Float(if negative { -v } else { v }),
            Tok::Char(c) if !negative => Literal::Char(c),
            Tok::Kw(Kw::True) if !negative => Literal::Bool(true),
            Tok::Kw(Kw::False) if !negative => Literal::Bool(false),
            Tok::Kw(Kw::Null) if !negative => Literal::Null,
            _ => return Err(self.unexpected("literal")),
        };
        self.advance();
        Ok(lit)
    }

    fn starts_type(&self) -> bool {
        matches!(self.peek(), Tok::Kw(Kw::Int | Kw::Float | Kw::Char | Kw::Boolean | Kw::Void | Kw::Object))
    }

    fn parse_type(&mut self) -> PResult<Type> {
        let base = match self.peek().clone() {
            Tok::Kw(Kw::Int) => Type::Int,
            Tok::Kw(Kw::Float) => Type::Float,
            Tok::Kw(Kw::Char) => Type::Char,
            Tok::Kw(Kw::Boolean) => Type::Boolean,
            Tok::Kw(Kw::Void) => Type::Void,
            Tok::Kw(Kw::Object) => Type::Object(None),
            Tok::Ident(name) => Type::Object(Some(name)),
            _ => return Err(self.unexpected("type")),
        };
        self.advance();
        if self.is_punct("[") && matches!(self.peek_at(1), Tok::Punct("]")) {
            self.advance();
            self.advance();
            if self.is_punct("[") {
                return Err(FrontendError::syntax(self.span(), "only one-dimensional arrays are supported"));
            }
            return Ok(Type::array_of(base));
        }
        Ok(base)
    }

    fn parse_block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect_punct("{")?;
        let mut out = Vec::new();
        while !self.eat_punct("}") {
            if *self.peek() == Tok::Eof {
                return Err(self.unexpected("`}`"));
            }
            out.push(self.parse_stmt()?);
        }
        Ok(out)
    }

    /// A loop or branch body: either a braced block or a single statement.
    fn parse_body(&mut self) -> PResult<Vec<Stmt>> {
        if self.is_punct("{") {
            self.parse_block()
        } else {
            Ok(alloc::vec![self.parse_stmt()?])
        }
    }

    fn looks_like_decl(&self) -> bool {
        if self.starts_type() {
            return true;
        }
        matches!(
            (self.peek(), self.peek_at(1), self.peek_at(2)),
            (Tok::Ident(_), Tok::Ident(_), _) | (Tok::Ident(_), Tok::Punct("["), Tok::Punct("]"))
        )
    }

    fn parse_stmt(&mut self) -> PResult<Stmt> {
        let span = self.span();
        match self.peek() {
            Tok::Punct("{") => {
                let id = self.new_stmt_id();
                let body = self.parse_block()?;
                Ok(Stmt { id, span, kind: StmtKind::Block(body) })
            }
            Tok::Kw(Kw::If) => {
                let id = self.new_stmt_id();
                self.advance();
                self.expect_punct("(")?;
                let cond = self.parse_expr()?;
                self.expect_punct(")")?;
                let then_body = self.parse_body()?;
                let else_body = if self.is_kw(Kw::Else) {
                    self.advance();
                    Some(self.parse_body()?)
                } else {
                    None
                };
                Ok(Stmt { id, span, kind: StmtKind::If { cond, then_body, else_body } })
            }
            Tok::Kw(Kw::For) => {
                let id = self.new_stmt_id();
                self.advance();
                self.expect_punct("(")?;
                let init = if self.is_punct(";") { None } else { Some(Box::new(self.parse_simple()?)) };
                self.expect_punct(";")?;
                let cond = if self.is_punct(";") { None } else { Some(self.parse_expr()?) };
                self.expect_punct(";")?;
                let update = if self.is_punct(")") { None } else { Some(Box::new(self.parse_simple()?)) };
                self.expect_punct(")")?;
                let body = self.parse_body()?;
                Ok(Stmt { id, span, kind: StmtKind::For { init, cond, update, body } })
            }
            Tok::Kw(Kw::While) => {
                let id = self.new_stmt_id();
                self.advance();
                self.expect_punct("(")?;
                let cond = self.parse_expr()?;
                self.expect_punct(")")?;
                let body = self.parse_body()?;
                Ok(Stmt { id, span, kind: StmtKind::While { cond, body } })
            }
            Tok::Kw(Kw::Switch) => self.parse_switch(),
            Tok::Kw(Kw::Return) => {
                let id = self.new_stmt_id();
                self.advance();
                let value = if self.is_punct(";") { None } else { Some(self.parse_expr()?) };
                self.expect_punct(";")?;
                Ok(Stmt { id, span, kind: StmtKind::Return(value) })
            }
            Tok::Kw(Kw::Break) => {
                let id = self.new_stmt_id();
                self.advance();
                self.expect_punct(";")?;
                Ok(Stmt { id, span, kind: StmtKind::Break })
            }
            Tok::Kw(Kw::Continue) => {
                let id = self.new_stmt_id();
                self.advance();
                self.expect_punct(";")?;
                Ok(Stmt { id, span, kind: StmtKind::Continue })
            }
            _ => {
                let stmt = self.parse_simple()?;
                self.expect_punct(";")?;
                Ok(stmt)
            }
        }
    }

    fn parse_switch(&mut self) -> PResult<Stmt> {
        let span = self.span();
        let id = self.new_stmt_id();
        self.advance();
        self.expect_punct("(")?;
        let selector = self.parse_expr()?;
        self.expect_punct(")")?;
        self.expect_punct("{")?;
        let mut cases = Vec::new();
        let mut default = None;
        loop {
            if self.eat_punct("}") {
                break;
            }
            let label_span = self.span();
            if self.is_kw(Kw::Case) {
                if default.is_some() {
                    return Err(FrontendError::syntax(label_span, "`case` after `default` is not supported"));
                }
                self.advance();
                let label = self.parse_literal()?;
                self.expect_punct(":")?;
                let body = self.parse_case_body()?;
                cases.push(SwitchCase { label, span: label_span, body });
            } else if self.is_kw(Kw::Default) {
                if default.is_some() {
                    return Err(FrontendError::syntax(label_span, "duplicate `default`"));
                }
                self.advance();
                self.expect_punct(":")?;
                default = Some(self.parse_case_body()?);
            } else {
                return Err(self.unexpected("`case`, `default` or `}`"));
            }
        }
        if cases.is_empty() {
            return Err(FrontendError::syntax(span, "switch needs at least one `case`"));
        }
        Ok(Stmt { id, span, kind: StmtKind::Switch { selector, cases, default } })
    }

    /// Statements up to the next label; a trailing `break;` ends the arm and is dropped.
    fn parse_case_body(&mut self) -> PResult<Vec<Stmt>> {
        let mut body = Vec::new();
        while !(self.is_kw(Kw::Case) || self.is_kw(Kw::Default) || self.is_punct("}")) {
            if *self.peek() == Tok::Eof {
                return Err(self.unexpected("`}`"));
            }
            body.push(self.parse_stmt()?);
        }
        if matches!(body.last(), Some(Stmt { kind: StmtKind::Break, .. })) {
            // The break was the last statement to receive an id; hand it back
            // so ids stay dense.
            let dropped = body.pop().expect("last statement");
            debug_assert_eq!(dropped.id.0 + 1, self.next_stmt);
            self.next_stmt -= 1;
        }
        Ok(body)
    }

    /// Declaration, assignment, increment/decrement or call, without the `;`.
    fn parse_simple(&mut self) -> PResult<Stmt> {
        let span = self.span();
        let id = self.new_stmt_id();
        if self.looks_like_decl() {
            let ty = self.parse_type()?;
            let name = self.expect_ident()?;
            let init = if self.eat_punct("=") { Some(self.parse_expr()?) } else { None };
            return Ok(Stmt { id, span, kind: StmtKind::Decl { name, ty, init, slot: u32::MAX } });
        }
        if self.is_punct("++") || self.is_punct("--") {
            let increment = self.is_punct("++");
            self.advance();
            let target = self.parse_postfix()?;
            return Ok(Stmt { id, span, kind: StmtKind::IncDec { target, increment } });
        }
        let target = self.parse_postfix()?;
        let op = match self.peek() {
            Tok::Punct("=") => Some(AssignOp::Set),
            Tok::Punct("+=") => Some(AssignOp::Add),
            Tok::Punct("-=") => Some(AssignOp::Sub),
            Tok::Punct("*=") => Some(AssignOp::Mul),
            Tok::Punct("/=") => Some(AssignOp::Div),
            _ => None,
        };
        if let Some(op) = op {
            self.advance();
            let value = self.parse_expr()?;
            return Ok(Stmt { id, span, kind: StmtKind::Assign { target, op, value } });
        }
        if self.is_punct("++") || self.is_punct("--") {
            let increment = self.is_punct("++");
            self.advance();
            return Ok(Stmt { id, span, kind: StmtKind::IncDec { target, increment } });
        }
        Ok(Stmt { id, span, kind: StmtKind::Expr(target) })
    }

    pub fn parse_expr(&mut self) -> PResult<Expr> {
        self.parse_binary(1)
    }

    fn peek_binop(&self) -> Option<BinOp> {
        let Tok::Punct(p) = self.peek() else { return None };
        Some(match *p {
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            "*" => BinOp::Mul,
            "/" => BinOp::Div,
            "%" => BinOp::Rem,
            "<" => BinOp::Lt,
            ">" => BinOp::Gt,
            "<=" => BinOp::Le,
            ">=" => BinOp::Ge,
            "==" => BinOp::Eq,
            "!=" => BinOp::Ne,
            "&&" => BinOp::And,
            "||" => BinOp::Or,
            "&" => BinOp::BitAnd,
            "|" => BinOp::BitOr,
            "<<" => BinOp::Shl,
            ">>" => BinOp::Shr,
            _ => return None,
        })
    }

    fn parse_binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.parse_unary()?;
        while let Some(op) = self.peek_binop() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            let span = self.span();
            self.advance();
            let rhs = self.parse_binary(prec + 1)?;
            lhs = Expr::new(ExprKind::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }, span);
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> PResult<Expr> {
        let span = self.span();
        if self.eat_punct("!") {
            let operand = self.parse_unary()?;
            return Ok(Expr::new(ExprKind::Unary { op: UnaryOp::Not, operand: Box::new(operand) }, span));
        }
        if self.is_punct("-") {
            match self.peek_at(1).clone() {
                Tok::Int(v) => {
                    self.advance();
                    self.advance();
                    return self.finish_postfix(Expr::new(ExprKind::Lit(Literal::Int(v.wrapping_neg())), span));
                }
                Tok::Float(v) => {
                    self.advance();
                    self.advance();
                    return self.finish_postfix(Expr::new(ExprKind::Lit(Literal::Float(-v)), span));
                }
                _ => {
                    self.advance();
                    let operand = self.parse_unary()?;
                    return Ok(Expr::new(ExprKind::Unary { op: UnaryOp::Neg, operand: Box::new(operand) }, span));
                }
            }
        }
        if self.is_punct("(")
            && matches!(self.peek_at(1), Tok::Kw(Kw::Int | Kw::Float | Kw::Char | Kw::Boolean))
            && matches!(self.peek_at(2), Tok::Punct(")"))
        {
            self.advance();
            let to = self.parse_type()?;
            self.expect_punct(")")?;
            let operand = self.parse_unary()?;
            return Ok(Expr::new(ExprKind::Cast { to, operand: Box::new(operand) }, span));
        }
        self.parse_postfix()
    }

    fn parse_postfix(&mut self) -> PResult<Expr> {
        let primary = self.parse_primary()?;
        self.finish_postfix(primary)
    }

    fn finish_postfix(&mut self, mut expr: Expr) -> PResult<Expr> {
        loop {
            let span = self.span();
            if self.eat_punct(".") {
                let name = self.expect_ident()?;
                if self.is_punct("(") {
                    let args = self.parse_args()?;
                    expr = Expr::new(ExprKind::Invoke { base: Some(Box::new(expr)), name, args }, span);
                } else {
                    expr = Expr::new(ExprKind::Member { base: Box::new(expr), name }, span);
                }
            } else if self.eat_punct("[") {
                let index = self.parse_expr()?;
                self.expect_punct("]")?;
                expr = Expr::new(ExprKind::Index { array: Box::new(expr), index: Box::new(index) }, span);
            } else {
                return Ok(expr);
            }
        }
    }

    fn parse_args(&mut self) -> PResult<Vec<Expr>> {
        self.expect_punct("(")?;
        let mut args = Vec::new();
        if self.eat_punct(")") {
            return Ok(args);
        }
        loop {
            args.push(self.parse_expr()?);
            if self.eat_punct(")") {
                return Ok(args);
            }
            self.expect_punct(",")?;
        }
    }

    fn parse_primary(&mut self) -> PResult<Expr> {
        let span = self.span();
        let kind = match self.peek().clone() {
            Tok::Int(v) => {
                self.advance();
                ExprKind::Lit(Literal::Int(v))
            }
            Tok::Float(v) => {
                self.advance();
                ExprKind::Lit(Literal::Float(v))
            }
            Tok::Char(c) => {
                self.advance();
                ExprKind::Lit(Literal::Char(c))
            }
            Tok::Kw(Kw::True) => {
                self.advance();
                ExprKind::Lit(Literal::Bool(true))
            }
            Tok::Kw(Kw::False) => {
                self.advance();
                ExprKind::Lit(Literal::Bool(false))
            }
            Tok::Kw(Kw::Null) => {
                self.advance();
                ExprKind::Lit(Literal::Null)
            }
            Tok::Kw(Kw::New) => {
                self.advance();
                let elem = match self.peek().clone() {
                    Tok::Kw(Kw::Int) => Type::Int,
                    Tok::Kw(Kw::Float) => Type::Float,
                    Tok::Kw(Kw::Char) => Type::Char,
                    Tok::Kw(Kw::Boolean) => Type::Boolean,
                    Tok::Kw(Kw::Object) => Type::Object(None),
                    Tok::Ident(name) => Type::Object(Some(name)),
                    _ => return Err(self.unexpected("array element type")),
                };
                self.advance();
                self.expect_punct("[")?;
                let len = self.parse_expr()?;
                self.expect_punct("]")?;
                ExprKind::NewArray { elem, len: Box::new(len) }
            }
            Tok::Ident(name) => {
                self.advance();
                if self.is_punct("(") {
                    let args = self.parse_args()?;
                    ExprKind::Invoke { base: None, name, args }
                } else {
                    ExprKind::Name(name)
                }
            }
            Tok::Punct("(") => {
                self.advance();
                let inner = self.parse_expr()?;
                self.expect_punct(")")?;
                return Ok(inner);
            }
            _ => return Err(self.unexpected("expression")),
        };
        Ok(Expr::new(kind, span))
    }
}
