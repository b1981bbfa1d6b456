//! Name resolution and type checking.
//!
//! Rewrites the parser's `Name`/`Member`/`Invoke` nodes into resolved forms,
//! assigns frame slots and annotates every expression with its static type.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::ast::*;
use super::types::Type;
use super::FrontendError;

type CResult<T> = Result<T, FrontendError>;

struct Globals {
    externs: BTreeMap<String, u32>,
    extern_classes: BTreeSet<String>,
    classes: BTreeMap<String, u32>,
    fields: Vec<BTreeMap<String, u32>>,
    methods: Vec<BTreeMap<String, u32>>,
    field_types: Vec<Vec<Type>>,
    signatures: Vec<Vec<(Vec<Type>, Type)>>,
    extern_sigs: Vec<(Vec<Type>, Type)>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Breakable {
    Loop,
    Switch,
}

struct MethodCx<'g> {
    g: &'g Globals,
    class: u32,
    ret: Type,
    scopes: Vec<BTreeMap<String, u32>>,
    locals: Vec<LocalInfo>,
    breakables: Vec<Breakable>,
}

pub fn check(program: &mut Program) -> CResult<()> {
    let globals = collect_globals(program)?;
    for c in 0..program.classes.len() {
        for m in 0..program.classes[c].methods.len() {
            let method = &mut program.classes[c].methods[m];
            let mut cx = MethodCx {
                g: &globals,
                class: c as u32,
                ret: method.ret.clone(),
                scopes: alloc::vec![BTreeMap::new()],
                locals: Vec::new(),
                breakables: Vec::new(),
            };
            for p in &method.params {
                cx.check_value_type(&p.ty, p.span)?;
                cx.declare(&p.name, p.ty.clone(), p.span)?;
            }
            cx.check_list(&mut method.body)?;
            if method.ret != Type::Void && can_complete(&method.body) {
                return Err(FrontendError::type_error(
                    method.span,
                    format!("method `{}` can finish without returning a `{}`", method.name, method.ret),
                ));
            }
            method.locals = cx.locals;
        }
    }
    Ok(())
}

fn collect_globals(program: &Program) -> CResult<Globals> {
    let mut externs = BTreeMap::new();
    let mut extern_classes = BTreeSet::new();
    for (i, e) in program.externs.iter().enumerate() {
        if externs.insert(e.qualified_name(), i as u32).is_some() {
            return Err(FrontendError::type_error(
                e.span,
                format!("duplicate extern `{}` (overloading is not supported)", e.qualified_name()),
            ));
        }
        extern_classes.insert(e.class.clone());
    }
    let mut classes = BTreeMap::new();
    let mut fields = Vec::new();
    let mut methods = Vec::new();
    let mut field_types = Vec::new();
    let mut signatures = Vec::new();
    for (c, class) in program.classes.iter().enumerate() {
        if let Some(name) = &class.name {
            if extern_classes.contains(name) || classes.insert(name.clone(), c as u32).is_some() {
                return Err(FrontendError::type_error(class.span, format!("duplicate class name `{name}`")));
            }
        }
        let mut fmap = BTreeMap::new();
        for (i, f) in class.fields.iter().enumerate() {
            if fmap.insert(f.name.clone(), i as u32).is_some() {
                return Err(FrontendError::type_error(f.span, format!("duplicate field `{}`", f.name)));
            }
        }
        let mut mmap = BTreeMap::new();
        for (i, m) in class.methods.iter().enumerate() {
            if mmap.insert(m.name.clone(), i as u32).is_some() {
                return Err(FrontendError::type_error(m.span, format!("duplicate method `{}`", m.name)));
            }
        }
        fields.push(fmap);
        methods.push(mmap);
        field_types.push(class.fields.iter().map(|f| f.ty.clone()).collect());
        signatures.push(class.methods.iter().map(|m| (m.params.iter().map(|p| p.ty.clone()).collect(), m.ret.clone())).collect());
    }
    // Unqualified names must resolve unambiguously from inside any class.
    for c in 1..program.classes.len() {
        for f in &program.classes[c].fields {
            if fields[0].contains_key(&f.name) {
                return Err(FrontendError::type_error(f.span, format!("field `{}` shadows a top-level field", f.name)));
            }
        }
        for m in &program.classes[c].methods {
            if methods[0].contains_key(&m.name) {
                return Err(FrontendError::type_error(m.span, format!("method `{}` shadows a top-level method", m.name)));
            }
        }
    }
    let extern_sigs = program.externs.iter().map(|e| (e.params.clone(), e.ret.clone())).collect();
    let g = Globals { externs, extern_classes, classes, fields, methods, field_types, signatures, extern_sigs };

    for e in &program.externs {
        for p in &e.params {
            g.check_value_type(p, e.span)?;
        }
        if e.ret != Type::Void {
            g.check_value_type(&e.ret, e.span)?;
        }
        if let Some(d) = &e.default {
            if e.ret == Type::Void || !e.ret.accepts(&d.ty()) {
                return Err(FrontendError::type_error(
                    e.span,
                    format!("default value of type {} does not fit return type {}", d.ty(), e.ret),
                ));
            }
        }
    }
    for class in &program.classes {
        for f in &class.fields {
            g.check_value_type(&f.ty, f.span)?;
            if let Some(init) = &f.init {
                if !f.ty.accepts(&init.ty()) {
                    return Err(FrontendError::type_error(f.span, format!("cannot initialise field of type {} with {}", f.ty, init.ty())));
                }
            }
        }
        for m in &class.methods {
            if m.ret != Type::Void {
                g.check_value_type(&m.ret, m.span)?;
            }
        }
    }
    Ok(g)
}

impl Globals {
    fn check_value_type(&self, ty: &Type, span: Span) -> CResult<()> {
        match ty {
            Type::Void => Err(FrontendError::type_error(span, "`void` is not a value type")),
            Type::Object(Some(class)) if !self.extern_classes.contains(class) => {
                Err(FrontendError::unresolved(span, format!("unknown type `{class}`")))
            }
            Type::Array(elem) => self.check_value_type(elem, span),
            _ => Ok(()),
        }
    }
}

/// Whether control can fall off the end of `stmts`.
pub(crate) fn can_complete(stmts: &[Stmt]) -> bool {
    stmts.last().is_none_or(stmt_can_complete)
}

fn stmt_can_complete(stmt: &Stmt) -> bool {
    match &stmt.kind {
        StmtKind::Return(_) | StmtKind::Break | StmtKind::Continue => false,
        StmtKind::If { then_body, else_body: Some(else_body), .. } => can_complete(then_body) || can_complete(else_body),
        StmtKind::Switch { cases, default: Some(default), .. } => cases.iter().any(|c| can_complete(&c.body)) || can_complete(default),
        StmtKind::Block(body) => can_complete(body),
        _ => true,
    }
}

impl<'g> MethodCx<'g> {
    fn check_value_type(&self, ty: &Type, span: Span) -> CResult<()> {
        self.g.check_value_type(ty, span)
    }

    fn visible_field(&self, name: &str) -> Option<FieldRef> {
        if let Some(&i) = self.g.fields[self.class as usize].get(name) {
            return Some(FieldRef { class: self.class, index: i });
        }
        self.g.fields[0].get(name).map(|&i| FieldRef { class: 0, index: i })
    }

    fn lookup_local(&self, name: &str) -> Option<u32> {
        self.scopes.iter().rev().find_map(|s| s.get(name).copied())
    }

    fn declare(&mut self, name: &str, ty: Type, span: Span) -> CResult<u32> {
        if self.lookup_local(name).is_some() {
            return Err(FrontendError::type_error(span, format!("variable `{name}` is already defined")));
        }
        if self.visible_field(name).is_some() {
            return Err(FrontendError::type_error(span, format!("local `{name}` shadows a field")));
        }
        let slot = self.locals.len() as u32;
        self.locals.push(LocalInfo { name: name.into(), ty });
        self.scopes.last_mut().expect("scope").insert(name.into(), slot);
        Ok(slot)
    }

    fn check_list(&mut self, stmts: &mut [Stmt]) -> CResult<()> {
        self.scopes.push(BTreeMap::new());
        let n = stmts.len();
        for i in 0..n {
            self.check_stmt(&mut stmts[i])?;
            if i + 1 < n && !stmt_can_complete(&stmts[i]) {
                return Err(FrontendError::type_error(stmts[i + 1].span, "unreachable statement"));
            }
        }
        self.scopes.pop();
        Ok(())
    }

    fn check_cond(&mut self, cond: &mut Expr, what: &str) -> CResult<()> {
        self.check_expr(cond)?;
        if cond.ty != Type::Boolean {
            return Err(FrontendError::type_error(cond.span, format!("{what} condition must be boolean, found {}", cond.ty)));
        }
        Ok(())
    }

    fn check_stmt(&mut self, stmt: &mut Stmt) -> CResult<()> {
        let span = stmt.span;
        match &mut stmt.kind {
            StmtKind::Decl { name, ty, init, slot } => {
                self.check_value_type(ty, span)?;
                if let Some(e) = init {
                    self.check_expr(e)?;
                    if !ty.accepts(&e.ty) {
                        return Err(FrontendError::type_error(e.span, format!("cannot assign {} to variable of type {}", e.ty, ty)));
                    }
                }
                *slot = self.declare(name, ty.clone(), span)?;
            }
            StmtKind::Assign { target, op, value } => {
                self.check_lvalue(target)?;
                self.check_expr(value)?;
                match op.binop() {
                    None => {
                        if !target.ty.accepts(&value.ty) {
                            return Err(FrontendError::type_error(value.span, format!("cannot assign {} to {}", value.ty, target.ty)));
                        }
                    }
                    Some(_) => {
                        if !target.ty.is_numeric() || !value.ty.is_numeric() {
                            return Err(FrontendError::type_error(
                                span,
                                format!("`{}` needs numeric operands, found ({},{})", op.symbol(), target.ty, value.ty),
                            ));
                        }
                        let result = Type::promote(&target.ty, &value.ty);
                        if !target.ty.accepts(&result) {
                            return Err(FrontendError::type_error(
                                span,
                                format!("`{}` would narrow {} into {}", op.symbol(), result, target.ty),
                            ));
                        }
                    }
                }
            }
            StmtKind::IncDec { target, increment } => {
                self.check_lvalue(target)?;
                if target.ty != Type::Int {
                    let sym = if *increment { "++" } else { "--" };
                    return Err(FrontendError::type_error(span, format!("`{sym}` needs an int, found {}", target.ty)));
                }
            }
            StmtKind::Expr(e) => {
                if !matches!(e.kind, ExprKind::Invoke { .. }) {
                    return Err(FrontendError::type_error(span, "only calls may be used as statements"));
                }
                self.check_expr(e)?;
            }
            StmtKind::If { cond, then_body, else_body } => {
                self.check_cond(cond, "if")?;
                self.check_list(then_body)?;
                if let Some(body) = else_body {
                    self.check_list(body)?;
                }
            }
            StmtKind::For { init, cond, update, body } => {
                self.scopes.push(BTreeMap::new());
                if let Some(s) = init {
                    if !matches!(s.kind, StmtKind::Decl { .. } | StmtKind::Assign { .. }) {
                        return Err(FrontendError::type_error(s.span, "for-init must be a declaration or assignment"));
                    }
                    self.check_stmt(s)?;
                }
                if let Some(c) = cond {
                    self.check_cond(c, "for")?;
                }
                if let Some(s) = update {
                    if matches!(s.kind, StmtKind::Decl { .. }) {
                        return Err(FrontendError::type_error(s.span, "for-update cannot declare variables"));
                    }
                    self.check_stmt(s)?;
                }
                self.breakables.push(Breakable::Loop);
                self.check_list(body)?;
                self.breakables.pop();
                self.scopes.pop();
            }
            StmtKind::While { cond, body } => {
                self.check_cond(cond, "while")?;
                self.breakables.push(Breakable::Loop);
                self.check_list(body)?;
                self.breakables.pop();
            }
            StmtKind::Switch { selector, cases, default } => {
                self.check_expr(selector)?;
                if !selector.ty.is_integral() {
                    return Err(FrontendError::type_error(
                        selector.span,
                        format!("switch selector must be int or char, found {}", selector.ty),
                    ));
                }
                let mut seen = BTreeSet::new();
                for case in cases.iter_mut() {
                    let key = match case.label {
                        Literal::Int(v) => v as i64,
                        Literal::Char(c) => c as i64,
                        _ => {
                            return Err(FrontendError::type_error(
                                case.span,
                                format!("case label must be an int or char literal, found {}", case.label.ty()),
                            ))
                        }
                    };
                    if !seen.insert(key) {
                        return Err(FrontendError::type_error(case.span, "duplicate case label"));
                    }
                    self.breakables.push(Breakable::Switch);
                    self.check_list(&mut case.body)?;
                    self.breakables.pop();
                }
                if let Some(body) = default {
                    self.breakables.push(Breakable::Switch);
                    self.check_list(body)?;
                    self.breakables.pop();
                }
            }
            StmtKind::Return(value) => match (value, self.ret.clone()) {
                (None, Type::Void) => {}
                (None, ret) => return Err(FrontendError::type_error(span, format!("missing return value of type {ret}"))),
                (Some(e), ret) => {
                    self.check_expr(e)?;
                    if ret == Type::Void {
                        return Err(FrontendError::type_error(e.span, "void method cannot return a value"));
                    }
                    if !ret.accepts(&e.ty) {
                        return Err(FrontendError::type_error(e.span, format!("cannot return {} from method returning {}", e.ty, ret)));
                    }
                }
            },
            StmtKind::Break | StmtKind::Continue => {
                let is_break = matches!(stmt.kind, StmtKind::Break);
                match self.breakables.last() {
                    None => return Err(FrontendError::type_error(span, "`break`/`continue` outside of a loop")),
                    Some(Breakable::Switch) if is_break => {
                        return Err(FrontendError::type_error(span, "`break` inside a switch arm must be the arm's last statement"))
                    }
                    Some(_) if !is_break && !self.breakables.contains(&Breakable::Loop) => {
                        return Err(FrontendError::type_error(span, "`continue` outside of a loop"))
                    }
                    _ => {}
                }
            }
            StmtKind::Block(body) => self.check_list(body)?,
        }
        Ok(())
    }

    fn check_lvalue(&mut self, target: &mut Expr) -> CResult<()> {
        self.check_expr(target)?;
        match target.kind {
            ExprKind::Local { .. } | ExprKind::Field { .. } | ExprKind::Index { .. } => Ok(()),
            _ => Err(FrontendError::type_error(target.span, "left-hand side is not assignable")),
        }
    }

    /// `name` used as a qualifier: a variable shadows class names.
    fn is_variable(&self, name: &str) -> bool {
        self.lookup_local(name).is_some() || self.visible_field(name).is_some()
    }

    fn check_args(&mut self, args: &mut [Expr], params: &[Type], what: &str, span: Span) -> CResult<()> {
        if args.len() != params.len() {
            return Err(FrontendError::type_error(span, format!("`{what}` expects {} argument(s), got {}", params.len(), args.len())));
        }
        for (arg, param) in args.iter_mut().zip(params) {
            self.check_expr(arg)?;
            if !param.accepts(&arg.ty) {
                return Err(FrontendError::type_error(
                    arg.span,
                    format!("argument of type {} does not match parameter type {} of `{what}`", arg.ty, param),
                ));
            }
        }
        Ok(())
    }

    fn check_expr(&mut self, expr: &mut Expr) -> CResult<()> {
        let span = expr.span;
        let placeholder = ExprKind::Lit(Literal::Null);
        let kind = core::mem::replace(&mut expr.kind, placeholder);
        let (kind, ty) = self.resolve(kind, span)?;
        expr.kind = kind;
        expr.ty = ty;
        Ok(())
    }

    fn resolve(&mut self, kind: ExprKind, span: Span) -> CResult<(ExprKind, Type)> {
        Ok(match kind {
            ExprKind::Lit(lit) => {
                let ty = lit.ty();
                (ExprKind::Lit(lit), ty)
            }
            ExprKind::Name(name) => {
                if let Some(slot) = self.lookup_local(&name) {
                    let ty = self.locals[slot as usize].ty.clone();
                    (ExprKind::Local { slot, name }, ty)
                } else if let Some(field) = self.visible_field(&name) {
                    let ty = self.g.field_types[field.class as usize][field.index as usize].clone();
                    (ExprKind::Field { field, name }, ty)
                } else {
                    return Err(FrontendError::unresolved(span, format!("unresolved identifier `{name}`")));
                }
            }
            ExprKind::Member { base, name } => {
                if let ExprKind::Name(qual) = &base.kind {
                    if !self.is_variable(qual) {
                        if let Some(&class) = self.g.classes.get(qual) {
                            let Some(&index) = self.g.fields[class as usize].get(&name) else {
                                return Err(FrontendError::unresolved(span, format!("class `{qual}` has no field `{name}`")));
                            };
                            let ty = self.g.field_types[class as usize][index as usize].clone();
                            return Ok((ExprKind::Field { field: FieldRef { class, index }, name }, ty));
                        }
                        return Err(FrontendError::unresolved(base.span, format!("unresolved identifier `{qual}`")));
                    }
                }
                let mut base = base;
                self.check_expr(&mut base)?;
                match (&base.ty, name.as_str()) {
                    (Type::Array(_), "length") => (ExprKind::Length(base), Type::Int),
                    (ty, _) => return Err(FrontendError::unresolved(span, format!("type {ty} has no member `{name}`"))),
                }
            }
            ExprKind::Invoke { base, name, mut args } => match base {
                None => {
                    let own = self.g.methods[self.class as usize].get(&name).map(|&i| (self.class, i));
                    let Some((class, index)) = own.or_else(|| self.g.methods[0].get(&name).map(|&i| (0, i))) else {
                        return Err(FrontendError::unresolved(span, format!("unresolved method `{name}`")));
                    };
                    let (params, ret) = self.g.signatures[class as usize][index as usize].clone();
                    self.check_args(&mut args, &params, &name, span)?;
                    (ExprKind::Call { method: MethodRef { class, index }, args }, ret)
                }
                Some(base) => {
                    if let ExprKind::Name(qual) = &base.kind {
                        if !self.is_variable(qual) {
                            if let Some(&class) = self.g.classes.get(qual) {
                                let Some(&index) = self.g.methods[class as usize].get(&name) else {
                                    return Err(FrontendError::unresolved(span, format!("class `{qual}` has no method `{name}`")));
                                };
                                let (params, ret) = self.g.signatures[class as usize][index as usize].clone();
                                self.check_args(&mut args, &params, &name, span)?;
                                return Ok((ExprKind::Call { method: MethodRef { class, index }, args }, ret));
                            }
                            let qualified = format!("{qual}.{name}");
                            let Some(&func) = self.g.externs.get(&qualified) else {
                                return Err(FrontendError::unresolved(
                                    span,
                                    format!("unresolved method `{qualified}` (library functions need an extern declaration)"),
                                ));
                            };
                            let (params, ret) = self.g.extern_sigs[func as usize].clone();
                            self.check_args(&mut args, &params, &qualified, span)?;
                            return Ok((ExprKind::LibCall { func, receiver: None, args }, ret));
                        }
                    }
                    let mut receiver = base;
                    self.check_expr(&mut receiver)?;
                    let Type::Object(Some(class)) = &receiver.ty else {
                        return Err(FrontendError::type_error(
                            receiver.span,
                            format!("cannot call `{name}` on a value of type {}", receiver.ty),
                        ));
                    };
                    let qualified = format!("{class}.{name}");
                    let Some(&func) = self.g.externs.get(&qualified) else {
                        return Err(FrontendError::unresolved(span, format!("unresolved method `{qualified}`")));
                    };
                    let (params, ret) = self.g.extern_sigs[func as usize].clone();
                    self.check_args(&mut args, &params, &qualified, span)?;
                    (ExprKind::LibCall { func, receiver: Some(receiver), args }, ret)
                }
            },
            ExprKind::Index { mut array, mut index } => {
                self.check_expr(&mut array)?;
                self.check_expr(&mut index)?;
                let Type::Array(elem) = &array.ty else {
                    return Err(FrontendError::type_error(array.span, format!("cannot index a value of type {}", array.ty)));
                };
                if !index.ty.is_integral() {
                    return Err(FrontendError::type_error(index.span, format!("array index must be int, found {}", index.ty)));
                }
                let ty = (**elem).clone();
                (ExprKind::Index { array, index }, ty)
            }
            ExprKind::Unary { op, mut operand } => {
                self.check_expr(&mut operand)?;
                let ty = match op {
                    UnaryOp::Not if operand.ty == Type::Boolean => Type::Boolean,
                    UnaryOp::Neg if operand.ty.is_numeric() => Type::promote(&operand.ty, &Type::Int),
                    _ => {
                        let sym = if op == UnaryOp::Not { "!" } else { "-" };
                        return Err(FrontendError::type_error(span, format!("`{sym}` cannot apply to {}", operand.ty)));
                    }
                };
                (ExprKind::Unary { op, operand }, ty)
            }
            ExprKind::Binary { op, mut lhs, mut rhs } => {
                self.check_expr(&mut lhs)?;
                self.check_expr(&mut rhs)?;
                let ty = binary_type(op, &lhs.ty, &rhs.ty).ok_or_else(|| {
                    FrontendError::type_error(
                        span,
                        format!("operator `{}` cannot apply to operand types ({},{})", op.symbol(), lhs.ty, rhs.ty),
                    )
                })?;
                (ExprKind::Binary { op, lhs, rhs }, ty)
            }
            ExprKind::Cast { to, mut operand } => {
                self.check_expr(&mut operand)?;
                let ok = match to {
                    Type::Boolean => operand.ty == Type::Boolean,
                    Type::Int | Type::Float | Type::Char => operand.ty.is_numeric(),
                    _ => false,
                };
                if !ok {
                    return Err(FrontendError::type_error(span, format!("cannot cast {} to {}", operand.ty, to)));
                }
                let ty = to.clone();
                (ExprKind::Cast { to, operand }, ty)
            }
            ExprKind::NewArray { elem, mut len } => {
                self.check_value_type(&elem, span)?;
                self.check_expr(&mut len)?;
                if !len.ty.is_integral() {
                    return Err(FrontendError::type_error(len.span, format!("array length must be int, found {}", len.ty)));
                }
                let ty = Type::array_of(elem.clone());
                (ExprKind::NewArray { elem, len }, ty)
            }
            resolved @ (ExprKind::Local { .. }
            | ExprKind::Field { .. }
            | ExprKind::Length(_)
            | ExprKind::Call { .. }
            | ExprKind::LibCall { .. }) => {
                return Err(FrontendError::type_error(span, format!("expression already resolved: {resolved:?}")))
            }
        })
    }
}

/// Result type of `lhs op rhs`, or `None` when the operand types are rejected.
pub fn binary_type(op: BinOp, lhs: &Type, rhs: &Type) -> Option<Type> {
    use BinOp::*;
    match op {
        Add | Sub | Mul | Div | Rem if lhs.is_numeric() && rhs.is_numeric() => Some(Type::promote(lhs, rhs)),
        Lt | Gt | Le | Ge if lhs.is_numeric() && rhs.is_numeric() => Some(Type::Boolean),
        Eq | Ne => {
            let ok = (lhs.is_numeric() && rhs.is_numeric()) || (*lhs == Type::Boolean && *rhs == Type::Boolean) || ref_comparable(lhs, rhs);
            ok.then_some(Type::Boolean)
        }
        And | Or if *lhs == Type::Boolean && *rhs == Type::Boolean => Some(Type::Boolean),
        BitAnd | BitOr if lhs.is_integral() && rhs.is_integral() => Some(Type::Int),
        BitAnd | BitOr if *lhs == Type::Boolean && *rhs == Type::Boolean => Some(Type::Boolean),
        Shl | Shr if lhs.is_integral() && rhs.is_integral() => Some(Type::Int),
        _ => None,
    }
}

fn ref_comparable(a: &Type, b: &Type) -> bool {
    match (a, b) {
        (Type::Null, t) | (t, Type::Null) => t.is_reference(),
        (Type::Object(_), Type::Object(_)) => true,
        (Type::Array(x), Type::Array(y)) => x == y,
        _ => false,
    }
}
