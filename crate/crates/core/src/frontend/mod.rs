//! MiniJ: lexer, parser, name resolution and type checking.

pub mod ast;
mod check;
mod lexer;
mod parser;
pub mod pretty;
pub mod types;

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub use ast::*;
pub use check::binary_type;
pub use types::Type;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Syntax,
    Type,
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrontendError {
    pub kind: ErrorKind,
    pub span: Span,
    pub message: String,
}

impl FrontendError {
    pub fn syntax(span: Span, message: impl Into<String>) -> Self {
        FrontendError { kind: ErrorKind::Syntax, span, message: message.into() }
    }

    pub fn type_error(span: Span, message: impl Into<String>) -> Self {
        FrontendError { kind: ErrorKind::Type, span, message: message.into() }
    }

    pub fn unresolved(span: Span, message: impl Into<String>) -> Self {
        FrontendError { kind: ErrorKind::Unresolved, span, message: message.into() }
    }
}

impl fmt::Display for FrontendError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ErrorKind::Syntax => "syntax error",
            ErrorKind::Type => "type error",
            ErrorKind::Unresolved => "unresolved name",
        };
        write!(f, "{}:{}: {}: {}", self.span.line, self.span.col, kind, self.message)
    }
}

impl core::error::Error for FrontendError {}

/// Parses, resolves and type-checks a MiniJ source file.
pub fn parse(source: &str) -> Result<Program, FrontendError> {
    let mut program = parse_untyped(source)?;
    check::check(&mut program)?;
    Ok(program)
}

/// Syntax only: identifiers stay unresolved and expressions untyped.
pub fn parse_untyped(source: &str) -> Result<Program, FrontendError> {
    let tokens = lexer::tokenize(source)?;
    parser::Parser::new(tokens).parse_program()
}

/// Distinct extern functions called anywhere in `program`, sorted.
pub fn list_library_functions(program: &Program) -> Vec<String> {
    let mut called = BTreeSet::new();
    for (_, method) in program.methods() {
        walk_stmts(&method.body, &mut |stmt| {
            walk_stmt_exprs(stmt, &mut |e| {
                if let ExprKind::LibCall { func, .. } = &e.kind {
                    called.insert(*func);
                }
            });
        });
    }
    let mut names: Vec<String> = called.into_iter().map(|f| program.externs[f as usize].qualified_name()).collect();
    names.sort();
    names
}

/// Whether every expression in `program` carries a resolved node and type.
pub fn is_fully_typed(program: &Program) -> bool {
    let mut ok = true;
    for (_, method) in program.methods() {
        for stmt in &method.body {
            walk_stmt_exprs(stmt, &mut |e| {
                if e.ty == Type::Unresolved || e.kind.is_unresolved() {
                    ok = false;
                }
            });
        }
    }
    ok
}
