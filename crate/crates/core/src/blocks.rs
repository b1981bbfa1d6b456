//! Basic-block division and instrumentation points.
//!
//! A block is a run of consecutive statements without branches or loop
//! headers. `if` and `switch` heads stay in the block that precedes them;
//! every arm is a block of its own. A `for` loop contributes init, header,
//! update and body blocks, a `while` loop a header and a body block. After a
//! compound statement, the next statement opens a fresh plain block.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::frontend::{walk_expr, walk_stmt_exprs, walk_stmts, Expr, ExprKind, FieldRef, MethodRef, Program, Span, Stmt, StmtId, StmtKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockKind {
    Entry,
    Plain,
    IfBody,
    ElseBody,
    CaseBody,
    ForInit,
    ForHeader,
    ForUpdate,
    WhileHeader,
    LoopBody,
}

impl BlockKind {
    pub fn name(self) -> &'static str {
        match self {
            BlockKind::Entry => "entry",
            BlockKind::Plain => "plain",
            BlockKind::IfBody => "if-body",
            BlockKind::ElseBody => "else-body",
            BlockKind::CaseBody => "case-body",
            BlockKind::ForInit => "for-init",
            BlockKind::ForHeader => "for-header",
            BlockKind::ForUpdate => "for-update",
            BlockKind::WhileHeader => "while-header",
            BlockKind::LoopBody => "loop-body",
        }
    }

    pub fn is_header(self) -> bool {
        matches!(self, BlockKind::ForInit | BlockKind::ForHeader | BlockKind::ForUpdate | BlockKind::WhileHeader)
    }
}

/// Construct whose body entry is charged a `BlockGoto_*` operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GotoKind {
    If,
    For,
    While,
}

impl GotoKind {
    pub fn name(self) -> &'static str {
        match self {
            GotoKind::If => "if",
            GotoKind::For => "for",
            GotoKind::While => "while",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub id: u32,
    pub method: MethodRef,
    pub kind: BlockKind,
    pub goto: Option<GotoKind>,
    /// Instrumentation point: the first statement, or the construct for empty blocks.
    pub span: Span,
    pub first_line: u32,
    pub last_line: u32,
    /// Statements owned by this block, in execution order. Compound
    /// statements appear in the block that evaluates their head.
    pub stmts: Vec<StmtId>,
    pub succ: Vec<u32>,
    /// Control can leave the method from this block.
    pub exit: bool,
    pub removable: bool,
}

/// Blocks introduced by one compound statement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Construct {
    If { then_block: u32, else_block: Option<u32> },
    Switch { arms: Vec<u32>, default: Option<u32> },
    For { init: u32, header: u32, body: u32, update: u32 },
    While { header: u32, body: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockTable {
    pub blocks: Vec<Block>,
    /// Entry block of every method, indexed `[class][method]`.
    pub entries: Vec<Vec<u32>>,
    /// Block owning each statement, indexed by statement id.
    pub owner: Vec<u32>,
    /// Plain block that is entered right before the statement executes.
    pub starts: Vec<Option<u32>>,
    pub constructs: Vec<Option<Construct>>,
}

impl BlockTable {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn entry(&self, method: MethodRef) -> u32 {
        self.entries[method.class as usize][method.index as usize]
    }

    pub fn removable(&self) -> Vec<u32> {
        self.blocks.iter().filter(|b| b.removable).map(|b| b.id).collect()
    }

    pub fn construct(&self, stmt: StmtId) -> Option<&Construct> {
        self.constructs.get(stmt.0 as usize).and_then(|c| c.as_ref())
    }
}

/// One log point per block, placed at the block's first statement.
pub fn instrumentation_points(table: &BlockTable) -> Vec<(u32, Span)> {
    table.blocks.iter().map(|b| (b.id, b.span)).collect()
}

#[derive(Default)]
struct Flow {
    current: Option<u32>,
    pending: Vec<u32>,
}

impl Flow {
    fn open(block: u32) -> Self {
        Flow { current: Some(block), pending: Vec::new() }
    }

    fn dangling(self) -> Vec<u32> {
        let mut out = self.pending;
        out.extend(self.current);
        out
    }
}

struct LoopCx {
    continue_to: u32,
    breaks: Vec<u32>,
}

struct Builder {
    blocks: Vec<Block>,
    owner: Vec<u32>,
    starts: Vec<Option<u32>>,
    constructs: Vec<Option<Construct>>,
    method: MethodRef,
    loops: Vec<LoopCx>,
}

pub fn divide_blocks(program: &Program) -> BlockTable {
    let n = program.stmt_count as usize;
    let mut b = Builder {
        blocks: Vec::new(),
        owner: vec![u32::MAX; n],
        starts: vec![None; n],
        constructs: vec![None; n],
        method: MethodRef { class: 0, index: 0 },
        loops: Vec::new(),
    };
    let mut entries = Vec::new();
    for (c, class) in program.classes.iter().enumerate() {
        let mut ids = Vec::new();
        for (m, method) in class.methods.iter().enumerate() {
            b.method = MethodRef { class: c as u32, index: m as u32 };
            let entry = b.new_block(BlockKind::Entry, None, method.span);
            ids.push(entry);
            let mut flow = Flow::open(entry);
            b.list(&method.body, &mut flow);
            for d in flow.dangling() {
                b.blocks[d as usize].exit = true;
            }
        }
        entries.push(ids);
    }
    let mut table = BlockTable { blocks: b.blocks, entries, owner: b.owner, starts: b.starts, constructs: b.constructs };
    fill_lines(program, &mut table);
    mark_removable(program, &mut table);
    table
}

impl Builder {
    fn new_block(&mut self, kind: BlockKind, goto: Option<GotoKind>, span: Span) -> u32 {
        let id = self.blocks.len() as u32;
        self.blocks.push(Block {
            id,
            method: self.method,
            kind,
            goto,
            span,
            first_line: span.line,
            last_line: span.line,
            stmts: Vec::new(),
            succ: Vec::new(),
            exit: false,
            removable: false,
        });
        id
    }

    fn edge(&mut self, from: u32, to: u32) {
        let succ = &mut self.blocks[from as usize].succ;
        if !succ.contains(&to) {
            succ.push(to);
        }
    }

    fn own(&mut self, block: u32, stmt: &Stmt) {
        self.owner[stmt.id.0 as usize] = block;
        let b = &mut self.blocks[block as usize];
        if b.stmts.is_empty() {
            b.span = stmt.span;
        }
        b.stmts.push(stmt.id);
    }

    /// Routes everything flowing out of `flow` into `target`.
    fn connect(&mut self, flow: &mut Flow, target: u32) {
        for p in flow.dangling_take() {
            self.edge(p, target);
        }
    }

    fn ensure_open(&mut self, flow: &mut Flow, stmt: &Stmt) -> u32 {
        if let Some(c) = flow.current {
            return c;
        }
        let b = self.new_block(BlockKind::Plain, None, stmt.span);
        self.connect(flow, b);
        self.starts[stmt.id.0 as usize] = Some(b);
        flow.current = Some(b);
        b
    }

    fn arm(&mut self, from: u32, kind: BlockKind, goto: GotoKind, span: Span, body: &[Stmt]) -> (u32, Vec<u32>) {
        let block = self.new_block(kind, Some(goto), span);
        self.edge(from, block);
        let mut flow = Flow::open(block);
        self.list(body, &mut flow);
        (block, flow.dangling())
    }

    fn list(&mut self, stmts: &[Stmt], flow: &mut Flow) {
        for stmt in stmts {
            self.stmt(stmt, flow);
        }
    }

    fn stmt(&mut self, stmt: &Stmt, flow: &mut Flow) {
        match &stmt.kind {
            StmtKind::Decl { .. } | StmtKind::Assign { .. } | StmtKind::IncDec { .. } | StmtKind::Expr(_) => {
                let b = self.ensure_open(flow, stmt);
                self.own(b, stmt);
            }
            StmtKind::Block(body) => {
                let b = self.ensure_open(flow, stmt);
                self.own(b, stmt);
                self.list(body, flow);
            }
            StmtKind::Return(_) => {
                let b = self.ensure_open(flow, stmt);
                self.own(b, stmt);
                self.blocks[b as usize].exit = true;
                *flow = Flow::default();
            }
            StmtKind::Break => {
                let b = self.ensure_open(flow, stmt);
                self.own(b, stmt);
                self.loops.last_mut().expect("break outside loop").breaks.push(b);
                *flow = Flow::default();
            }
            StmtKind::Continue => {
                let b = self.ensure_open(flow, stmt);
                self.own(b, stmt);
                let target = self.loops.last().expect("continue outside loop").continue_to;
                self.edge(b, target);
                *flow = Flow::default();
            }
            StmtKind::If { then_body, else_body, .. } => {
                let head = self.ensure_open(flow, stmt);
                self.own(head, stmt);
                let (then_block, mut dangling) = self.arm(head, BlockKind::IfBody, GotoKind::If, stmt.span, then_body);
                let else_block = match else_body {
                    Some(body) => {
                        let (e, d) = self.arm(head, BlockKind::ElseBody, GotoKind::If, stmt.span, body);
                        dangling.extend(d);
                        Some(e)
                    }
                    None => {
                        dangling.push(head);
                        None
                    }
                };
                self.constructs[stmt.id.0 as usize] = Some(Construct::If { then_block, else_block });
                *flow = Flow { current: None, pending: dangling };
            }
            StmtKind::Switch { cases, default, .. } => {
                let head = self.ensure_open(flow, stmt);
                self.own(head, stmt);
                let mut dangling = Vec::new();
                let mut arms = Vec::new();
                for case in cases {
                    let (a, d) = self.arm(head, BlockKind::CaseBody, GotoKind::If, case.span, &case.body);
                    arms.push(a);
                    dangling.extend(d);
                }
                let default = match default {
                    Some(body) => {
                        let (a, d) = self.arm(head, BlockKind::CaseBody, GotoKind::If, stmt.span, body);
                        dangling.extend(d);
                        Some(a)
                    }
                    None => {
                        dangling.push(head);
                        None
                    }
                };
                self.constructs[stmt.id.0 as usize] = Some(Construct::Switch { arms, default });
                *flow = Flow { current: None, pending: dangling };
            }
            StmtKind::For { init, update, body, .. } => {
                let init_block = self.new_block(BlockKind::ForInit, None, stmt.span);
                self.connect(flow, init_block);
                self.own(init_block, stmt);
                if let Some(s) = init {
                    self.own(init_block, s);
                }
                let header = self.new_block(BlockKind::ForHeader, None, stmt.span);
                self.edge(init_block, header);
                let body_block = self.new_block(BlockKind::LoopBody, Some(GotoKind::For), stmt.span);
                self.edge(header, body_block);
                let update_block = self.new_block(BlockKind::ForUpdate, None, stmt.span);
                if let Some(s) = update {
                    self.own(update_block, s);
                }
                self.loops.push(LoopCx { continue_to: update_block, breaks: Vec::new() });
                let mut inner = Flow::open(body_block);
                self.list(body, &mut inner);
                for d in inner.dangling() {
                    self.edge(d, update_block);
                }
                let cx = self.loops.pop().expect("loop context");
                self.edge(update_block, header);
                self.constructs[stmt.id.0 as usize] =
                    Some(Construct::For { init: init_block, header, body: body_block, update: update_block });
                let mut pending = vec![header];
                pending.extend(cx.breaks);
                *flow = Flow { current: None, pending };
            }
            StmtKind::While { body, .. } => {
                let header = self.new_block(BlockKind::WhileHeader, None, stmt.span);
                self.connect(flow, header);
                self.own(header, stmt);
                let body_block = self.new_block(BlockKind::LoopBody, Some(GotoKind::While), stmt.span);
                self.edge(header, body_block);
                self.loops.push(LoopCx { continue_to: header, breaks: Vec::new() });
                let mut inner = Flow::open(body_block);
                self.list(body, &mut inner);
                for d in inner.dangling() {
                    self.edge(d, header);
                }
                let cx = self.loops.pop().expect("loop context");
                self.constructs[stmt.id.0 as usize] = Some(Construct::While { header, body: body_block });
                let mut pending = vec![header];
                pending.extend(cx.breaks);
                *flow = Flow { current: None, pending };
            }
        }
    }
}

impl Flow {
    fn dangling_take(&mut self) -> Vec<u32> {
        core::mem::take(self).dangling()
    }
}

/// Statements whose execution is decided by block `b`: its own statements
/// plus everything nested under the `if`/`switch`/`{}` heads it evaluates.
fn controlled<'a>(table: &BlockTable, b: u32, index: &[&'a Stmt]) -> Vec<&'a Stmt> {
    let mut out = Vec::new();
    for id in &table.blocks[b as usize].stmts {
        let stmt = index[id.0 as usize];
        match &stmt.kind {
            StmtKind::If { .. } | StmtKind::Switch { .. } | StmtKind::Block(_) => {
                walk_stmts(core::slice::from_ref(stmt), &mut |s| out.push(s));
            }
            StmtKind::For { .. } | StmtKind::While { .. } => {}
            _ => out.push(stmt),
        }
    }
    out
}

/// Statement lookup by id.
pub fn stmt_index(program: &Program) -> Vec<&Stmt> {
    let mut slots: Vec<Option<&Stmt>> = vec![None; program.stmt_count as usize];
    for (_, method) in program.methods() {
        walk_stmts(&method.body, &mut |s| slots[s.id.0 as usize] = Some(s));
    }
    slots.into_iter().map(|s| s.expect("statement ids are dense")).collect()
}

fn fill_lines(program: &Program, table: &mut BlockTable) {
    let index = stmt_index(program);
    for block in &mut table.blocks {
        if block.stmts.is_empty() {
            continue;
        }
        let mut first = u32::MAX;
        let mut last = 0;
        for id in &block.stmts {
            let stmt = index[id.0 as usize];
            first = first.min(stmt.span.line);
            last = last.max(stmt.span.line);
            let heads_only = !matches!(
                stmt.kind,
                StmtKind::Decl { .. } | StmtKind::Assign { .. } | StmtKind::IncDec { .. } | StmtKind::Expr(_) | StmtKind::Return(_)
            );
            if heads_only {
                continue;
            }
            walk_stmt_exprs(stmt, &mut |e| last = last.max(e.span.line));
        }
        block.first_line = first;
        block.last_line = last;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Var {
    Local(MethodRef, u32),
    Field(FieldRef),
}

fn reads(method: MethodRef, e: &Expr, out: &mut BTreeSet<Var>) {
    walk_expr(e, &mut |x| match &x.kind {
        ExprKind::Local { slot, .. } => {
            out.insert(Var::Local(method, *slot));
        }
        ExprKind::Field { field, .. } => {
            out.insert(Var::Field(*field));
        }
        _ => {}
    });
}

fn written(method: MethodRef, stmt: &Stmt) -> Option<Var> {
    fn base(method: MethodRef, e: &Expr) -> Option<Var> {
        match &e.kind {
            ExprKind::Local { slot, .. } => Some(Var::Local(method, *slot)),
            ExprKind::Field { field, .. } => Some(Var::Field(*field)),
            ExprKind::Index { array, .. } => base(method, array),
            _ => None,
        }
    }
    match &stmt.kind {
        StmtKind::Decl { slot, .. } => Some(Var::Local(method, *slot)),
        StmtKind::Assign { target, .. } | StmtKind::IncDec { target, .. } => base(method, target),
        _ => None,
    }
}

/// Variables that loop termination may depend on: everything read by a loop
/// condition or update, closed under the assignments that feed them.
pub fn loop_control_vars(program: &Program) -> BTreeSet<Var> {
    let mut control = BTreeSet::new();
    let mut writes: Vec<(Var, BTreeSet<Var>)> = Vec::new();
    for (mref, method) in program.methods() {
        walk_stmts(&method.body, &mut |s| {
            match &s.kind {
                StmtKind::For { cond, update, .. } => {
                    if let Some(c) = cond {
                        reads(mref, c, &mut control);
                    }
                    if let Some(u) = update {
                        walk_stmt_exprs(u, &mut |e| reads(mref, e, &mut control));
                        if let Some(v) = written(mref, u) {
                            control.insert(v);
                        }
                    }
                }
                StmtKind::While { cond, .. } => reads(mref, cond, &mut control),
                _ => {}
            }
            if let Some(v) = written(mref, s) {
                let mut r = BTreeSet::new();
                walk_stmt_exprs(s, &mut |e| reads(mref, e, &mut r));
                writes.push((v, r));
            }
        });
    }
    loop {
        let before = control.len();
        for (v, r) in &writes {
            if control.contains(v) {
                control.extend(r.iter().copied());
            }
        }
        if control.len() == before {
            return control;
        }
    }
}

fn mark_removable(program: &Program, table: &mut BlockTable) {
    let index = stmt_index(program);
    let control = loop_control_vars(program);
    for b in 0..table.blocks.len() {
        let block = &table.blocks[b];
        if matches!(block.kind, BlockKind::Entry) || block.kind.is_header() {
            continue;
        }
        let method = block.method;
        let ok = controlled(table, b as u32, &index)
            .iter()
            .all(|s| !s.kind.is_terminator() && written(method, s).is_none_or(|v| !control.contains(&v)));
        table.blocks[b].removable = ok;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;

    fn table(src: &str) -> BlockTable {
        divide_blocks(&parse(src).unwrap())
    }

    fn kinds(t: &BlockTable) -> Vec<BlockKind> {
        t.blocks.iter().map(|b| b.kind).collect()
    }

    #[test]
    fn straight_line_method_is_one_block() {
        let t = table("void f() { int a = 1; int b = 2; a = a + b; b = b * 2; a = b; }");
        assert_eq!(t.len(), 1);
        assert_eq!(t.blocks[0].stmts.len(), 5);
        assert!(t.blocks[0].exit);
        assert_eq!(instrumentation_points(&t).len(), 1);
    }

    #[test]
    fn for_loop_divides_into_six_blocks() {
        let t = table(
            "void f(float[] v) {
                float s = 0.0;
                for (int i = 0; i < 3; i++) { s = s + v[i]; }
                s = s * 2.0;
            }",
        );
        use BlockKind::*;
        assert_eq!(kinds(&t), [Entry, ForInit, ForHeader, LoopBody, ForUpdate, Plain]);
        let succ: Vec<Vec<u32>> = t.blocks.iter().map(|b| b.succ.clone()).collect();
        assert_eq!(succ, [vec![1], vec![2], vec![3, 5], vec![4], vec![2], vec![]]);
        assert!(t.blocks[5].exit);
        assert_eq!(t.blocks[3].goto, Some(GotoKind::For));
        assert_eq!(instrumentation_points(&t).len(), 6);
    }

    #[test]
    fn while_loop_has_header_and_body() {
        let t = table("void f() { int i = 0; while (i < 3) { i++; } i = 5; }");
        use BlockKind::*;
        assert_eq!(kinds(&t), [Entry, WhileHeader, LoopBody, Plain]);
        assert_eq!(t.blocks[1].succ, [2, 3]);
        assert_eq!(t.blocks[2].succ, [1]);
    }

    #[test]
    fn if_condition_stays_in_predecessor() {
        let t = table("int f(int a) { int b = a; if (a > 0) { b = 1; } else { b = 2; } return b; }");
        use BlockKind::*;
        assert_eq!(kinds(&t), [Entry, IfBody, ElseBody, Plain]);
        assert_eq!(t.blocks[0].stmts.len(), 2);
        assert_eq!(t.blocks[0].succ, [1, 2]);
        assert_eq!(t.blocks[1].succ, [3]);
        assert!(t.blocks[1].removable && t.blocks[2].removable);
        assert!(!t.blocks[3].removable, "block with a return");
    }

    #[test]
    fn loop_counter_writers_are_not_removable() {
        let t = table("void f() { int i = 0; int step = 1; int x = 0; while (i < 9) { i += step; } x = 2; if (x > 1) { x = 3; } }");
        let body = t.blocks.iter().find(|b| b.kind == BlockKind::LoopBody).unwrap();
        assert!(!body.removable);
        let plain = t.blocks.iter().find(|b| b.kind == BlockKind::Plain).unwrap();
        assert!(plain.removable);
        assert!(t.blocks.iter().any(|b| b.kind == BlockKind::IfBody && b.removable));
    }

    #[test]
    fn partition_and_loop_header_degree() {
        let src = "int g;
            void f(int n) {
                for (int i = 0; i < n; i++) { if (i == 2) { continue; } g = g + i; }
                while (n > 0) { n--; if (n == 3) { break; } }
                switch (n) { case 1: g = 1; break; case 2: g = 2; default: g = 0; }
            }";
        let p = parse(src).unwrap();
        let t = divide_blocks(&p);
        assert!(t.owner.iter().all(|&o| (o as usize) < t.len()));
        let total: usize = t.blocks.iter().map(|b| b.stmts.len()).sum();
        assert_eq!(total, p.stmt_count as usize);
        for b in &t.blocks {
            if matches!(b.kind, BlockKind::ForHeader | BlockKind::WhileHeader) {
                assert_eq!(b.succ.len() + b.exit as usize, 2, "{b:?}");
            } else if !b.exit {
                assert!(!b.succ.is_empty(), "{b:?}");
            }
        }
    }
}
