//! Energy operations, the block × operation occurrence dictionary and the
//! per-case execution counts `n_j = Σ_i B_i · O[i][j]`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::blocks::{BlockTable, Construct, GotoKind};
use crate::frontend::{BinOp, Expr, ExprKind, Program, Stmt, StmtKind, Type, UnaryOp};

/// Operand type as it appears inside an operation id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tag {
    Int,
    Float,
    Char,
    Boolean,
    Void,
    Object,
    Null,
    IntArray,
    FloatArray,
    CharArray,
    BooleanArray,
    ObjectArray,
}

impl Tag {
    pub fn of(ty: &Type) -> Tag {
        match ty {
            Type::Int => Tag::Int,
            Type::Float => Tag::Float,
            Type::Char => Tag::Char,
            Type::Boolean => Tag::Boolean,
            Type::Void | Type::Unresolved => Tag::Void,
            Type::Object(_) => Tag::Object,
            Type::Null => Tag::Null,
            Type::Array(elem) => match **elem {
                Type::Int => Tag::IntArray,
                Type::Float => Tag::FloatArray,
                Type::Char => Tag::CharArray,
                Type::Boolean => Tag::BooleanArray,
                _ => Tag::ObjectArray,
            },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Tag::Int => "int",
            Tag::Float => "float",
            Tag::Char => "char",
            Tag::Boolean => "boolean",
            Tag::Void => "void",
            Tag::Object => "Object",
            Tag::Null => "null",
            Tag::IntArray => "int[]",
            Tag::FloatArray => "float[]",
            Tag::CharArray => "char[]",
            Tag::BooleanArray => "boolean[]",
            Tag::ObjectArray => "Object[]",
        }
    }
}

/// The eight reporting classes of operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OpClass {
    Control,
    Function,
    Boolean,
    Arithmetic,
    Assignment,
    ArrayReference,
    LibFunction,
    Other,
}

impl OpClass {
    pub const ALL: [OpClass; 8] = [
        OpClass::Control,
        OpClass::Function,
        OpClass::Boolean,
        OpClass::Arithmetic,
        OpClass::Assignment,
        OpClass::ArrayReference,
        OpClass::LibFunction,
        OpClass::Other,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpClass::Control => "Control Ops",
            OpClass::Function => "Function Ops",
            OpClass::Boolean => "Boolean Ops",
            OpClass::Arithmetic => "Arithmetic Ops",
            OpClass::Assignment => "Assignments",
            OpClass::ArrayReference => "Array Reference",
            OpClass::LibFunction => "Lib Functions",
            OpClass::Other => "Other",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Compact operation key; [`OpKey::id`] renders the stable string id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OpKey {
    Binary(BinOp, Tag, Tag),
    Not,
    Negation(Tag),
    Increment,
    Decrement,
    Assign(Tag, Tag),
    Declaration(Tag),
    Parameter(Tag),
    Return(Tag),
    MethodInvocation,
    FieldReference,
    ArrayReference,
    ArrayLength,
    NewArray(Tag),
    TypeConversion(Tag, Tag),
    BlockGoto(GotoKind),
    /// Extern function, by index into `Program::externs`.
    Lib(u32),
    /// Garbage collection, modeled as one more library function.
    Gc,
}

fn binop_name(op: BinOp) -> &'static str {
    match op {
        BinOp::Add => "Addition",
        BinOp::Sub => "Subtraction",
        BinOp::Mul => "Multi",
        BinOp::Div => "Division",
        BinOp::Rem => "Remainder",
        BinOp::Lt => "Less",
        BinOp::Gt => "Greater",
        BinOp::Le => "LessEqual",
        BinOp::Ge => "GreaterEqual",
        BinOp::Eq => "Equal",
        BinOp::Ne => "NotEqual",
        BinOp::And => "And",
        BinOp::Or => "Or",
        BinOp::BitAnd => "BitAnd",
        BinOp::BitOr => "BitOr",
        BinOp::Shl => "SignedBitShiftLeft",
        BinOp::Shr => "SignedBitShiftRight",
    }
}

impl OpKey {
    pub fn binary(op: BinOp, lhs: &Type, rhs: &Type) -> OpKey {
        match op {
            BinOp::And | BinOp::Or => OpKey::Binary(op, Tag::Boolean, Tag::Boolean),
            _ => OpKey::Binary(op, Tag::of(lhs), Tag::of(rhs)),
        }
    }

    pub fn id(&self, program: &Program) -> String {
        match *self {
            OpKey::Binary(op @ (BinOp::And | BinOp::Or), _, _) => binop_name(op).into(),
            OpKey::Binary(op, a, b) => format!("{}_{}_{}", binop_name(op), a.name(), b.name()),
            OpKey::Not => "Not".into(),
            OpKey::Negation(t) => format!("Negation_{}", t.name()),
            OpKey::Increment => "Increment".into(),
            OpKey::Decrement => "Decrement".into(),
            OpKey::Assign(a, b) => format!("Assign_{}_{}", a.name(), b.name()),
            OpKey::Declaration(t) => format!("Declaration_{}", t.name()),
            OpKey::Parameter(t) => format!("Parameter_{}", t.name()),
            OpKey::Return(t) => format!("Return_{}", t.name()),
            OpKey::MethodInvocation => "MethodInvocation".into(),
            OpKey::FieldReference => "FieldReference".into(),
            OpKey::ArrayReference => "ArrayReference".into(),
            OpKey::ArrayLength => "ArrayLength".into(),
            OpKey::NewArray(t) => format!("NewArray_{}", t.name()),
            OpKey::TypeConversion(a, b) => format!("TypeConversion_{}_{}", a.name(), b.name()),
            OpKey::BlockGoto(g) => format!("BlockGoto_{}", g.name()),
            OpKey::Lib(f) => format!("Lib:{}", program.externs[f as usize].qualified_name()),
            OpKey::Gc => GC_OP_ID.into(),
        }
    }

    pub fn class(&self) -> OpClass {
        match *self {
            OpKey::BlockGoto(_) | OpKey::MethodInvocation | OpKey::FieldReference => OpClass::Control,
            OpKey::Parameter(_) | OpKey::Return(_) => OpClass::Function,
            OpKey::Not => OpClass::Boolean,
            OpKey::Binary(op, a, _) => match op {
                BinOp::And | BinOp::Or | BinOp::Lt | BinOp::Gt | BinOp::Le | BinOp::Ge | BinOp::Eq | BinOp::Ne => OpClass::Boolean,
                BinOp::BitAnd | BinOp::BitOr if a == Tag::Boolean => OpClass::Boolean,
                _ => OpClass::Arithmetic,
            },
            OpKey::Negation(_) | OpKey::Increment | OpKey::Decrement => OpClass::Arithmetic,
            OpKey::Assign(..) => OpClass::Assignment,
            OpKey::ArrayReference => OpClass::ArrayReference,
            OpKey::Lib(_) | OpKey::Gc => OpClass::LibFunction,
            OpKey::Declaration(_) | OpKey::TypeConversion(..) | OpKey::NewArray(_) | OpKey::ArrayLength => OpClass::Other,
        }
    }
}

pub const GC_OP_ID: &str = "Lib:GC";

/// Class of an operation given only its id string.
pub fn class_of_id(id: &str) -> OpClass {
    let kind = id.split('_').next().unwrap_or(id);
    if id.starts_with("Lib:") {
        return OpClass::LibFunction;
    }
    match kind {
        "BlockGoto" | "MethodInvocation" | "FieldReference" => OpClass::Control,
        "Parameter" | "Return" => OpClass::Function,
        "And" | "Or" | "Not" | "Less" | "Greater" | "LessEqual" | "GreaterEqual" | "Equal" | "NotEqual" => OpClass::Boolean,
        "BitAnd" | "BitOr" if id.ends_with("_boolean_boolean") => OpClass::Boolean,
        "Addition"
        | "Subtraction"
        | "Multi"
        | "Division"
        | "Remainder"
        | "Increment"
        | "Decrement"
        | "Negation"
        | "BitAnd"
        | "BitOr"
        | "SignedBitShiftLeft"
        | "SignedBitShiftRight" => OpClass::Arithmetic,
        "Assign" => OpClass::Assignment,
        "ArrayReference" => OpClass::ArrayReference,
        _ => OpClass::Other,
    }
}

/// Emits the operations performed by one evaluation of `e`.
pub fn expr_ops(program: &Program, e: &Expr, sink: &mut dyn FnMut(OpKey)) {
    match &e.kind {
        ExprKind::Lit(_) | ExprKind::Local { .. } => {}
        ExprKind::Field { .. } => sink(OpKey::FieldReference),
        ExprKind::Index { array, index } => {
            expr_ops(program, array, sink);
            expr_ops(program, index, sink);
            sink(OpKey::ArrayReference);
        }
        ExprKind::Length(base) => {
            expr_ops(program, base, sink);
            sink(OpKey::ArrayLength);
        }
        ExprKind::Unary { op, operand } => {
            expr_ops(program, operand, sink);
            sink(match op {
                UnaryOp::Not => OpKey::Not,
                UnaryOp::Neg => OpKey::Negation(Tag::of(&operand.ty)),
            });
        }
        ExprKind::Binary { op, lhs, rhs } => {
            expr_ops(program, lhs, sink);
            expr_ops(program, rhs, sink);
            sink(OpKey::binary(*op, &lhs.ty, &rhs.ty));
        }
        ExprKind::Cast { to, operand } => {
            expr_ops(program, operand, sink);
            sink(OpKey::TypeConversion(Tag::of(&operand.ty), Tag::of(to)));
        }
        ExprKind::NewArray { elem, len } => {
            expr_ops(program, len, sink);
            sink(OpKey::NewArray(Tag::of(elem)));
        }
        ExprKind::Call { method, args } => {
            let params = &program.method(*method).params;
            for (a, p) in args.iter().zip(params) {
                expr_ops(program, a, sink);
                sink(OpKey::Parameter(Tag::of(&p.ty)));
            }
            sink(OpKey::MethodInvocation);
        }
        ExprKind::LibCall { func, receiver, args } => {
            if let Some(r) = receiver {
                expr_ops(program, r, sink);
            }
            let params = &program.externs[*func as usize].params;
            for (a, p) in args.iter().zip(params) {
                expr_ops(program, a, sink);
                sink(OpKey::Parameter(Tag::of(p)));
            }
            sink(OpKey::Lib(*func));
        }
        ExprKind::Name(_) | ExprKind::Member { .. } | ExprKind::Invoke { .. } => {
            unreachable!("unresolved expression in a checked program")
        }
    }
}

/// Operations of evaluating an assignment target's location (not its value).
pub fn lvalue_ops(program: &Program, target: &Expr, sink: &mut dyn FnMut(OpKey)) {
    match &target.kind {
        ExprKind::Local { .. } => {}
        ExprKind::Field { .. } => sink(OpKey::FieldReference),
        ExprKind::Index { array, index } => {
            expr_ops(program, array, sink);
            expr_ops(program, index, sink);
            sink(OpKey::ArrayReference);
        }
        _ => unreachable!("checked assignment target"),
    }
}

/// Operations a statement contributes to the block that owns it. For
/// compound statements that is only the head (condition or selector); `for`
/// loops contribute through their own init/header/update blocks.
pub fn stmt_ops(program: &Program, ret: &Type, stmt: &Stmt, sink: &mut dyn FnMut(OpKey)) {
    match &stmt.kind {
        StmtKind::Decl { ty, init, .. } => {
            sink(OpKey::Declaration(Tag::of(ty)));
            if let Some(e) = init {
                expr_ops(program, e, sink);
                sink(OpKey::Assign(Tag::of(ty), Tag::of(&e.ty)));
            }
        }
        StmtKind::Assign { target, op, value } => {
            lvalue_ops(program, target, sink);
            expr_ops(program, value, sink);
            match op.binop() {
                None => sink(OpKey::Assign(Tag::of(&target.ty), Tag::of(&value.ty))),
                Some(b) => {
                    sink(OpKey::binary(b, &target.ty, &value.ty));
                    let result = Type::promote(&target.ty, &value.ty);
                    sink(OpKey::Assign(Tag::of(&target.ty), Tag::of(&result)));
                }
            }
        }
        StmtKind::IncDec { target, increment } => {
            lvalue_ops(program, target, sink);
            sink(if *increment { OpKey::Increment } else { OpKey::Decrement });
        }
        StmtKind::Expr(e) => expr_ops(program, e, sink),
        StmtKind::Return(Some(e)) => {
            expr_ops(program, e, sink);
            sink(OpKey::Return(Tag::of(ret)));
        }
        StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => expr_ops(program, cond, sink),
        StmtKind::Switch { selector, .. } => expr_ops(program, selector, sink),
        StmtKind::Return(None) | StmtKind::Break | StmtKind::Continue | StmtKind::For { .. } | StmtKind::Block(_) => {}
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpInfo {
    pub key: OpKey,
    pub id: String,
    pub class: OpClass,
}

/// Occurrence counts `O[i][j]`: rows are blocks, columns operations in
/// lexicographic id order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpDictionary {
    pub ops: Vec<OpInfo>,
    pub blocks: usize,
    /// Row-major, `blocks × ops.len()`.
    pub counts: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OpDictError {
    #[error("block log has {got} entries but the dictionary has {expected} blocks")]
    LogLength { expected: usize, got: usize },
    #[error("block {0} does not exist")]
    UnknownBlock(u32),
}

impl OpDictionary {
    pub fn num_ops(&self) -> usize {
        self.ops.len()
    }

    pub fn get(&self, block: usize, op: usize) -> u32 {
        self.counts[block * self.ops.len() + op]
    }

    pub fn row(&self, block: usize) -> &[u32] {
        let l = self.ops.len();
        &self.counts[block * l..(block + 1) * l]
    }

    pub fn column_of(&self, id: &str) -> Option<usize> {
        self.ops.binary_search_by(|o| o.id.as_str().cmp(id)).ok()
    }

    pub fn column_of_key(&self, key: OpKey) -> Option<usize> {
        self.ops.iter().position(|o| o.key == key)
    }

    pub fn op_ids(&self) -> Vec<String> {
        self.ops.iter().map(|o| o.id.clone()).collect()
    }

    /// Dictionary of the program with the statements of `removed` blocks
    /// commented out: their rows keep only the `BlockGoto` charged on entry.
    pub fn with_removed(&self, removed: &[u32]) -> Result<OpDictionary, OpDictError> {
        let mut out = self.clone();
        let l = self.ops.len();
        for &b in removed {
            if b as usize >= self.blocks {
                return Err(OpDictError::UnknownBlock(b));
            }
            for j in 0..l {
                if !matches!(self.ops[j].key, OpKey::BlockGoto(_)) {
                    out.counts[b as usize * l + j] = 0;
                }
            }
        }
        Ok(out)
    }

    /// Adds an all-zero column for `key` (no-op if present), keeping id order.
    pub fn with_column(&self, key: OpKey, program: &Program) -> OpDictionary {
        if self.column_of_key(key).is_some() {
            return self.clone();
        }
        let mut keys: Vec<OpKey> = self.ops.iter().map(|o| o.key).collect();
        keys.push(key);
        let mut rows = vec![BTreeMap::new(); self.blocks];
        for (b, row) in rows.iter_mut().enumerate() {
            for (j, o) in self.ops.iter().enumerate() {
                let c = self.get(b, j);
                if c > 0 {
                    row.insert(o.key, c);
                }
            }
        }
        assemble(program, keys.into_iter().collect(), &rows)
    }
}

fn assemble(program: &Program, keys: BTreeSet<OpKey>, rows: &[BTreeMap<OpKey, u32>]) -> OpDictionary {
    let mut ops: Vec<OpInfo> = keys.into_iter().map(|key| OpInfo { key, id: key.id(program), class: key.class() }).collect();
    ops.sort_by(|a, b| a.id.cmp(&b.id));
    let l = ops.len();
    let mut counts = vec![0u32; rows.len() * l];
    for (i, row) in rows.iter().enumerate() {
        for (j, op) in ops.iter().enumerate() {
            counts[i * l + j] = row.get(&op.key).copied().unwrap_or(0);
        }
    }
    OpDictionary { ops, blocks: rows.len(), counts }
}

/// Static occurrence counts of every operation in every block.
pub fn build_dictionary(program: &Program, table: &BlockTable) -> OpDictionary {
    let index = crate::blocks::stmt_index(program);
    let mut rows: Vec<BTreeMap<OpKey, u32>> = vec![BTreeMap::new(); table.len()];
    for block in &table.blocks {
        let ret = &program.method(block.method).ret;
        let row = &mut rows[block.id as usize];
        let mut add = |k: OpKey| *row.entry(k).or_insert(0) += 1;
        if let Some(g) = block.goto {
            add(OpKey::BlockGoto(g));
        }
        for id in &block.stmts {
            let stmt = index[id.0 as usize];
            stmt_ops(program, ret, stmt, &mut add);
        }
    }
    // `for` conditions live in the header block, which owns no statement.
    for (i, c) in table.constructs.iter().enumerate() {
        if let Some(Construct::For { header, .. }) = c {
            if let StmtKind::For { cond: Some(cond), .. } = &index[i].kind {
                let row = &mut rows[*header as usize];
                expr_ops(program, cond, &mut |k| *row.entry(k).or_insert(0) += 1);
            }
        }
    }
    let keys: BTreeSet<OpKey> = rows.iter().flat_map(|r| r.keys().copied()).collect();
    assemble(program, keys, &rows)
}

/// Per-block entry counts `B_i` for one execution case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockLog {
    pub case_id: u32,
    pub counts: Vec<u64>,
}

/// `n_j = Σ_i B_i · O[i][j]`.
pub fn case_op_counts(dict: &OpDictionary, log: &BlockLog) -> Result<Vec<u64>, OpDictError> {
    if log.counts.len() != dict.blocks {
        return Err(OpDictError::LogLength { expected: dict.blocks, got: log.counts.len() });
    }
    let l = dict.ops.len();
    let mut n = vec![0u64; l];
    for (i, &b) in log.counts.iter().enumerate() {
        if b == 0 {
            continue;
        }
        for (j, &o) in dict.row(i).iter().enumerate() {
            n[j] += b * o as u64;
        }
    }
    debug_assert_eq!(n.len(), l);
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::divide_blocks;
    use crate::frontend::parse;

    fn row_of(src: &str, block: usize) -> BTreeMap<String, u32> {
        let p = parse(src).unwrap();
        let t = divide_blocks(&p);
        let d = build_dictionary(&p, &t);
        d.ops.iter().enumerate().filter(|(j, _)| d.get(block, *j) > 0).map(|(j, o)| (o.id.clone(), d.get(block, j))).collect()
    }

    fn map(pairs: &[(&str, u32)]) -> BTreeMap<String, u32> {
        pairs.iter().map(|(k, v)| (String::from(*k), *v)).collect()
    }

    #[test]
    fn assignment_of_sum() {
        let r = row_of("void f(int a, int b) { int x; x = a + b; }", 0);
        assert_eq!(r, map(&[("Assign_int_int", 1), ("Addition_int_int", 1), ("Declaration_int", 1)]));
    }

    #[test]
    fn for_body_with_array_sum() {
        let src = "float f(float[] v) { float s = 0.0; for (int i = 0; i < 3; i++) { s = s + v[i]; } return s; }";
        assert_eq!(
            row_of(src, 3),
            map(&[("Assign_float_float", 1), ("Addition_float_float", 1), ("ArrayReference", 1), ("BlockGoto_for", 1)])
        );
        assert_eq!(row_of(src, 2), map(&[("Less_int_int", 1)]));
        assert_eq!(row_of(src, 4), map(&[("Increment", 1)]));
        assert_eq!(row_of(src, 1), map(&[("Declaration_int", 1), ("Assign_int_int", 1)]));
    }

    #[test]
    fn blit_loop_body() {
        let src = "extern FloatBuffer.put(float) -> FloatBuffer;
            extern FloatBuffer.get(int) -> float;
            extern FloatBuffer.limit() -> int = 2112;
            void blit(FloatBuffer vertices, FloatBuffer mVertexBuffer) {
                for (int i = 0; i < vertices.limit(); i = i + 3) {
                    mVertexBuffer.put(vertices.get(i));
                    mVertexBuffer.put(vertices.get(i + 1));
                    mVertexBuffer.put(vertices.get(i + 2));
                }
            }";
        assert_eq!(
            row_of(src, 3),
            map(&[
                ("Lib:FloatBuffer.put", 3),
                ("Lib:FloatBuffer.get", 3),
                ("Parameter_float", 3),
                ("Parameter_int", 3),
                ("Addition_int_int", 2),
                ("BlockGoto_for", 1),
            ])
        );
    }

    #[test]
    fn ids_follow_the_naming_scheme() {
        let src = "char[] buf; Object o;
            Object g(Object p) { return p; }
            void f(int i, float x) {
                boolean b = i < x && o == null;
                o = null;
                buf = buf;
                i++;
                Object q = g(o);
            }";
        let p = parse(src).unwrap();
        let d = build_dictionary(&p, &divide_blocks(&p));
        for id in [
            "Less_int_float",
            "And",
            "Equal_Object_null",
            "Assign_Object_null",
            "Assign_char[]_char[]",
            "Increment",
            "Declaration_boolean",
            "MethodInvocation",
            "Parameter_Object",
            "Return_Object",
            "FieldReference",
        ] {
            let j = d.column_of(id).unwrap_or_else(|| panic!("missing {id}: {:?}", d.op_ids()));
            assert_eq!(d.ops[j].class, class_of_id(id));
        }
        let ids = d.op_ids();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
    }

    #[test]
    fn compound_assignment_counts_arith_and_assign() {
        let r = row_of("void f(float[] a, int i) { a[i] += i; }", 0);
        assert_eq!(r, map(&[("ArrayReference", 1), ("Addition_float_int", 1), ("Assign_float_float", 1)]));
    }

    #[test]
    fn counts_formula() {
        let d = OpDictionary {
            ops: vec![OpInfo { key: OpKey::Increment, id: "Increment".into(), class: OpClass::Arithmetic }],
            blocks: 2,
            counts: vec![1, 4],
        };
        let n = case_op_counts(&d, &BlockLog { case_id: 0, counts: vec![2, 3] }).unwrap();
        assert_eq!(n, [14]);
        let z = case_op_counts(&d, &BlockLog { case_id: 0, counts: vec![0, 0] }).unwrap();
        assert_eq!(z, [0]);
        assert!(case_op_counts(&d, &BlockLog { case_id: 0, counts: vec![1] }).is_err());
    }

    #[test]
    fn removed_rows_keep_only_goto() {
        let src = "void f(int a) { if (a > 0) { a = a + 1; } }";
        let p = parse(src).unwrap();
        let d = build_dictionary(&p, &divide_blocks(&p));
        let r = d.with_removed(&[1]).unwrap();
        let goto = r.column_of("BlockGoto_if").unwrap();
        for j in 0..r.num_ops() {
            assert_eq!(r.get(1, j), (j == goto) as u32);
        }
        assert_eq!(r.row(0), d.row(0));
        assert!(d.with_removed(&[9]).is_err());
    }

    #[test]
    fn adding_a_statement_never_decreases_counts() {
        let a = "void f(int x) { x = x + 1; if (x > 2) { x = 0; } }";
        let b = "void f(int x) { x = x + 1; x = x * 2; if (x > 2) { x = 0; x--; } }";
        let pa = parse(a).unwrap();
        let pb = parse(b).unwrap();
        let da = build_dictionary(&pa, &divide_blocks(&pa));
        let db = build_dictionary(&pb, &divide_blocks(&pb));
        for (j, op) in da.ops.iter().enumerate() {
            let jb = db.column_of(&op.id).unwrap();
            for i in 0..da.blocks {
                assert!(db.get(i, jb) >= da.get(i, j));
            }
        }
    }

    #[test]
    fn gc_column_is_inserted_in_order() {
        let p = parse("extern Math.sqrt(float) -> float; void f() { float y = Math.sqrt(2.0); }").unwrap();
        let d = build_dictionary(&p, &divide_blocks(&p)).with_column(OpKey::Gc, &p);
        let ids = d.op_ids();
        assert!(ids.contains(&String::from("Lib:GC")));
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
        assert_eq!(d.get(0, d.column_of("Lib:Math.sqrt").unwrap()), 1);
    }
}
