//! Source printer. The output re-parses to the same AST up to spans.

use alloc::format;
use alloc::string::String;
use core::fmt::Write;

use super::ast::*;

pub fn print_program(program: &Program) -> String {
    let mut p = Printer { program, class: 0, out: String::new(), indent: 0 };
    for e in &program.externs {
        let params: alloc::vec::Vec<String> = e.params.iter().map(|t| format!("{t}")).collect();
        let _ = write!(p.out, "extern {}.{}({}) -> {}", e.class, e.name, params.join(", "), e.ret);
        if let Some(d) = &e.default {
            let _ = write!(p.out, " = {}", literal(d));
        }
        p.out.push_str(";\n");
    }
    for (c, class) in program.classes.iter().enumerate() {
        p.class = c as u32;
        match &class.name {
            None => p.members(class),
            Some(name) => {
                let _ = writeln!(p.out, "class {name} {{");
                p.indent += 1;
                p.members(class);
                p.indent -= 1;
                p.out.push_str("}\n");
            }
        }
    }
    p.out
}

pub fn print_expr(program: &Program, class: u32, expr: &Expr) -> String {
    let mut p = Printer { program, class, out: String::new(), indent: 0 };
    p.expr(expr);
    p.out
}

fn literal(lit: &Literal) -> String {
    match lit {
        Literal::Int(v) => format!("{v}"),
        Literal::Float(v) => {
            let mut s = format!("{v}");
            if !s.contains('.') {
                s.push_str(".0");
            }
            s
        }
        Literal::Char(c) => match *c {
            0x0a => "'\\n'".into(),
            0x09 => "'\\t'".into(),
            0x0d => "'\\r'".into(),
            0 => "'\\0'".into(),
            0x5c => "'\\\\'".into(),
            0x27 => "'\\''".into(),
            c => format!("'{}'", char::from_u32(c as u32).unwrap_or('?')),
        },
        Literal::Bool(b) => format!("{b}"),
        Literal::Null => "null".into(),
    }
}

struct Printer<'a> {
    program: &'a Program,
    class: u32,
    out: String,
    indent: usize,
}

impl<'a> Printer<'a> {
    fn line_start(&mut self) {
        for _ in 0..self.indent {
            self.out.push_str("    ");
        }
    }

    fn members(&mut self, class: &ClassDecl) {
        for f in &class.fields {
            self.line_start();
            let _ = write!(self.out, "{} {}", f.ty, f.name);
            if let Some(init) = &f.init {
                let _ = write!(self.out, " = {}", literal(init));
            }
            self.out.push_str(";\n");
        }
        for m in &class.methods {
            self.line_start();
            let params: alloc::vec::Vec<String> = m.params.iter().map(|p| format!("{} {}", p.ty, p.name)).collect();
            let _ = write!(self.out, "{} {}({}) ", m.ret, m.name, params.join(", "));
            self.block(&m.body);
            self.out.push('\n');
        }
    }

    fn block(&mut self, stmts: &[Stmt]) {
        self.out.push_str("{\n");
        self.indent += 1;
        for s in stmts {
            self.stmt(s);
        }
        self.indent -= 1;
        self.line_start();
        self.out.push('}');
    }

    fn stmt(&mut self, stmt: &Stmt) {
        self.line_start();
        match &stmt.kind {
            StmtKind::If { cond, then_body, else_body } => {
                self.out.push_str("if (");
                self.expr(cond);
                self.out.push_str(") ");
                self.block(then_body);
                if let Some(body) = else_body {
                    self.out.push_str(" else ");
                    self.block(body);
                }
            }
            StmtKind::For { init, cond, update, body } => {
                self.out.push_str("for (");
                if let Some(s) = init {
                    self.simple(s);
                }
                self.out.push_str("; ");
                if let Some(c) = cond {
                    self.expr(c);
                }
                self.out.push_str("; ");
                if let Some(s) = update {
                    self.simple(s);
                }
                self.out.push_str(") ");
                self.block(body);
            }
            StmtKind::While { cond, body } => {
                self.out.push_str("while (");
                self.expr(cond);
                self.out.push_str(") ");
                self.block(body);
            }
            StmtKind::Switch { selector, cases, default } => {
                self.out.push_str("switch (");
                self.expr(selector);
                self.out.push_str(") {\n");
                let arms = cases.iter().map(|c| (Some(&c.label), &c.body));
                for (label, body) in arms.chain(default.iter().map(|d| (None, d))) {
                    self.line_start();
                    match label {
                        Some(l) => {
                            let _ = writeln!(self.out, "case {}:", literal(l));
                        }
                        None => self.out.push_str("default:\n"),
                    }
                    self.indent += 1;
                    for s in body {
                        self.stmt(s);
                    }
                    self.line_start();
                    self.out.push_str("break;\n");
                    self.indent -= 1;
                }
                self.line_start();
                self.out.push('}');
            }
            StmtKind::Block(body) => self.block(body),
            StmtKind::Return(value) => {
                self.out.push_str("return");
                if let Some(e) = value {
                    self.out.push(' ');
                    self.expr(e);
                }
                self.out.push(';');
            }
            StmtKind::Break => self.out.push_str("break;"),
            StmtKind::Continue => self.out.push_str("continue;"),
            _ => {
                self.simple(stmt);
                self.out.push(';');
            }
        }
        self.out.push('\n');
    }

    fn simple(&mut self, stmt: &Stmt) {
        match &stmt.kind {
            StmtKind::Decl { name, ty, init, .. } => {
                let _ = write!(self.out, "{ty} {name}");
                if let Some(e) = init {
                    self.out.push_str(" = ");
                    self.expr(e);
                }
            }
            StmtKind::Assign { target, op, value } => {
                self.expr(target);
                let _ = write!(self.out, " {} ", op.symbol());
                self.expr(value);
            }
            StmtKind::IncDec { target, increment } => {
                self.expr(target);
                self.out.push_str(if *increment { "++" } else { "--" });
            }
            StmtKind::Expr(e) => self.expr(e),
            _ => unreachable!("not a simple statement"),
        }
    }

    fn qualifier(&self, class: u32) -> Option<&'a str> {
        if class == self.class {
            return None;
        }
        self.program.classes[class as usize].name.as_deref()
    }

    fn args(&mut self, args: &[Expr]) {
        self.out.push('(');
        for (i, a) in args.iter().enumerate() {
            if i > 0 {
                self.out.push_str(", ");
            }
            self.expr(a);
        }
        self.out.push(')');
    }

    /// Prints `e` as the base of a postfix `.`/`[]` or as a unary operand.
    fn atom(&mut self, e: &Expr) {
        let simple =
            !matches!(e.kind, ExprKind::Binary { .. } | ExprKind::Unary { .. } | ExprKind::Cast { .. } | ExprKind::NewArray { .. });
        if simple {
            self.expr(e);
        } else {
            self.out.push('(');
            self.expr(e);
            self.out.push(')');
        }
    }

    fn operand(&mut self, e: &Expr, min_prec: u8) {
        match &e.kind {
            ExprKind::Binary { op, .. } if op.precedence() < min_prec => {
                self.out.push('(');
                self.expr(e);
                self.out.push(')');
            }
            _ => self.expr(e),
        }
    }

    fn expr(&mut self, e: &Expr) {
        match &e.kind {
            ExprKind::Lit(l) => self.out.push_str(&literal(l)),
            ExprKind::Name(n) | ExprKind::Local { name: n, .. } => self.out.push_str(n),
            ExprKind::Field { field, name } => {
                if let Some(q) = self.qualifier(field.class) {
                    let _ = write!(self.out, "{q}.");
                }
                self.out.push_str(name);
            }
            ExprKind::Member { base, name } => {
                self.atom(base);
                let _ = write!(self.out, ".{name}");
            }
            ExprKind::Length(base) => {
                self.atom(base);
                self.out.push_str(".length");
            }
            ExprKind::Invoke { base, name, args } => {
                if let Some(b) = base {
                    self.atom(b);
                    self.out.push('.');
                }
                self.out.push_str(name);
                self.args(args);
            }
            ExprKind::Call { method, args } => {
                if let Some(q) = self.qualifier(method.class) {
                    let _ = write!(self.out, "{q}.");
                }
                let name = self.program.method(*method).name.clone();
                self.out.push_str(&name);
                self.args(args);
            }
            ExprKind::LibCall { func, receiver, args } => {
                let ext = &self.program.externs[*func as usize];
                match receiver {
                    Some(r) => self.atom(r),
                    None => self.out.push_str(&ext.class),
                }
                let _ = write!(self.out, ".{}", ext.name);
                self.args(args);
            }
            ExprKind::Index { array, index } => {
                self.atom(array);
                self.out.push('[');
                self.expr(index);
                self.out.push(']');
            }
            ExprKind::Unary { op: UnaryOp::Not, operand } => {
                self.out.push('!');
                self.atom(operand);
            }
            ExprKind::Unary { op: UnaryOp::Neg, operand } => {
                // Parenthesised so that `-(1)` does not re-parse as the literal `-1`.
                self.out.push_str("-(");
                self.expr(operand);
                self.out.push(')');
            }
            ExprKind::Binary { op, lhs, rhs } => {
                let prec = op.precedence();
                self.operand(lhs, prec);
                let _ = write!(self.out, " {} ", op.symbol());
                self.operand(rhs, prec + 1);
            }
            ExprKind::Cast { to, operand } => {
                let _ = write!(self.out, "({to}) ");
                self.atom(operand);
            }
            ExprKind::NewArray { elem, len } => {
                let _ = write!(self.out, "new {elem}[");
                self.expr(len);
                self.out.push(']');
            }
        }
    }
}

/// Resets every span to the default so that ASTs can be compared structurally.
pub fn erase_spans(program: &mut Program) {
    for e in &mut program.externs {
        e.span = Span::default();
    }
    for class in &mut program.classes {
        class.span = Span::default();
        for f in &mut class.fields {
            f.span = Span::default();
        }
        for m in &mut class.methods {
            m.span = Span::default();
            for p in &mut m.params {
                p.span = Span::default();
            }
            erase_stmts(&mut m.body);
        }
    }
}

fn erase_stmts(stmts: &mut [Stmt]) {
    for s in stmts {
        erase_stmt(s);
    }
}

fn erase_stmt(stmt: &mut Stmt) {
    stmt.span = Span::default();
    match &mut stmt.kind {
        StmtKind::Decl { init, .. } => {
            if let Some(e) = init {
                erase_expr(e);
            }
        }
        StmtKind::Assign { target, value, .. } => {
            erase_expr(target);
            erase_expr(value);
        }
        StmtKind::IncDec { target, .. } => erase_expr(target),
        StmtKind::Expr(e) => erase_expr(e),
        StmtKind::If { cond, then_body, else_body } => {
            erase_expr(cond);
            erase_stmts(then_body);
            if let Some(b) = else_body {
                erase_stmts(b);
            }
        }
        StmtKind::For { init, cond, update, body } => {
            if let Some(s) = init {
                erase_stmt(s);
            }
            if let Some(c) = cond {
                erase_expr(c);
            }
            if let Some(s) = update {
                erase_stmt(s);
            }
            erase_stmts(body);
        }
        StmtKind::While { cond, body } => {
            erase_expr(cond);
            erase_stmts(body);
        }
        StmtKind::Switch { selector, cases, default } => {
            erase_expr(selector);
            for c in cases {
                c.span = Span::default();
                erase_stmts(&mut c.body);
            }
            if let Some(b) = default {
                erase_stmts(b);
            }
        }
        StmtKind::Return(Some(e)) => erase_expr(e),
        StmtKind::Return(None) | StmtKind::Break | StmtKind::Continue => {}
        StmtKind::Block(body) => erase_stmts(body),
    }
}

fn erase_expr(e: &mut Expr) {
    e.span = Span::default();
    match &mut e.kind {
        ExprKind::Lit(_) | ExprKind::Name(_) | ExprKind::Local { .. } | ExprKind::Field { .. } => {}
        ExprKind::Member { base, .. } | ExprKind::Length(base) => erase_expr(base),
        ExprKind::Invoke { base, args, .. } => {
            if let Some(b) = base {
                erase_expr(b);
            }
            args.iter_mut().for_each(erase_expr);
        }
        ExprKind::Index { array, index } => {
            erase_expr(array);
            erase_expr(index);
        }
        ExprKind::Unary { operand, .. } | ExprKind::Cast { operand, .. } => erase_expr(operand),
        ExprKind::Binary { lhs, rhs, .. } => {
            erase_expr(lhs);
            erase_expr(rhs);
        }
        ExprKind::NewArray { len, .. } => erase_expr(len),
        ExprKind::Call { args, .. } => args.iter_mut().for_each(erase_expr),
        ExprKind::LibCall { receiver, args, .. } => {
            if let Some(r) = receiver {
                erase_expr(r);
            }
            args.iter_mut().for_each(erase_expr);
        }
    }
}
