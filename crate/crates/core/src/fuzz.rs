//! Random well-typed MiniJ programs and execution cases, for property tests
//! of the counting pipeline and the pretty-printer.
//!
//! Generated programs always terminate: loops are bounded by counters the
//! body cannot write, and helpers only call helpers declared before them.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::blocks::BlockTable;
use crate::planner::{ExecutionCase, InputEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ty {
    Int,
    Float,
    Bool,
    Char,
    Buf,
}

impl Ty {
    fn name(self) -> &'static str {
        match self {
            Ty::Int => "int",
            Ty::Float => "float",
            Ty::Bool => "boolean",
            Ty::Char => "char",
            Ty::Buf => "Buf",
        }
    }
}

#[derive(Clone)]
struct Var {
    name: String,
    ty: Ty,
    writable: bool,
}

#[derive(Clone, Copy)]
struct Helper {
    ret: Option<Ty>,
    /// Parameter types; `Int` or `Float`.
    params: &'static [Ty],
}

const SIGNATURES: [Helper; 4] = [
    Helper { ret: Some(Ty::Int), params: &[Ty::Int, Ty::Float] },
    Helper { ret: Some(Ty::Float), params: &[Ty::Int] },
    Helper { ret: None, params: &[Ty::Int] },
    Helper { ret: Some(Ty::Bool), params: &[Ty::Float, Ty::Float] },
];

const PRELUDE: &str = "extern Math.sqrt(float) -> float;
extern Math.abs(float) -> float;
extern Sys.rand(int) -> int = 7;
extern Sys.log(int) -> void;
extern Sys.now() -> float = 2.5;
extern Sys.buffer() -> Buf;
extern Buf.put(float) -> Buf;
extern Buf.get(int) -> float = 0.25;
int g0 = 3;
int g1;
float g2 = 1.5;
boolean g3;
char g4 = 'q';
int[] ga;
float[] gf;
";

struct Gen {
    rng: ChaCha8Rng,
    out: String,
    indent: usize,
    scopes: Vec<Vec<Var>>,
    next_local: u32,
    /// Helpers callable from the method being generated.
    callable: Vec<(usize, Helper)>,
    loop_depth: u32,
    ret: Option<Ty>,
    budget: u32,
}

impl Gen {
    fn chance(&mut self, p: f64) -> bool {
        self.rng.random_bool(p)
    }

    fn pick<'a, T>(&mut self, xs: &'a [T]) -> &'a T {
        &xs[self.rng.random_range(0..xs.len())]
    }

    fn line(&mut self, s: &str) {
        for _ in 0..self.indent {
            self.out.push_str("    ");
        }
        self.out.push_str(s);
        self.out.push('\n');
    }

    fn fresh(&mut self, prefix: &str) -> String {
        self.next_local += 1;
        format!("{prefix}{}", self.next_local)
    }

    fn declare(&mut self, name: &str, ty: Ty, writable: bool) {
        self.scopes.last_mut().expect("scope").push(Var { name: name.into(), ty, writable });
    }

    fn vars(&self, ty: Ty, writable: bool) -> Vec<String> {
        let mut v: Vec<String> =
            self.scopes.iter().flatten().filter(|x| x.ty == ty && (!writable || x.writable)).map(|x| x.name.clone()).collect();
        let fields: &[&str] = match ty {
            Ty::Int => &["g0", "g1"],
            Ty::Float => &["g2"],
            Ty::Bool => &["g3"],
            Ty::Char => &["g4"],
            Ty::Buf => &[],
        };
        v.extend(fields.iter().map(|f| String::from(*f)));
        v
    }

    fn buffers(&self) -> Vec<String> {
        self.vars(Ty::Buf, false)
    }

    fn helper_call(&mut self, ret: Option<Ty>, depth: u32) -> Option<String> {
        let options: Vec<(usize, Helper)> = self.callable.iter().copied().filter(|(_, h)| h.ret == ret).collect();
        if options.is_empty() {
            return None;
        }
        let (k, h) = *self.pick(&options);
        let args: Vec<String> = h.params.iter().map(|&t| self.expr(t, depth + 1)).collect();
        Some(format!("h{k}({})", args.join(", ")))
    }

    fn expr(&mut self, ty: Ty, depth: u32) -> String {
        let leaf = depth >= 3 || self.chance(0.3);
        match ty {
            Ty::Int if leaf => {
                if self.chance(0.5) {
                    let v = self.vars(Ty::Int, false);
                    self.pick(&v).clone()
                } else {
                    format!("{}", self.rng.random_range(-3..12))
                }
            }
            Ty::Int => match self.rng.random_range(0..10) {
                0..=3 => {
                    let op = *self.pick(&["+", "-", "*", "/", "%", "&", "|", "<<", ">>"]);
                    let (a, b) = (self.expr(Ty::Int, depth + 1), self.expr(Ty::Int, depth + 1));
                    format!("({a} {op} {b})")
                }
                4 => format!("ga[{}]", self.expr(Ty::Int, depth + 1)),
                5 => String::from("ga.length"),
                6 => format!("(int) {}", self.expr(Ty::Float, depth + 1)),
                7 => format!("Sys.rand({})", self.expr(Ty::Int, depth + 1)),
                8 => {
                    let c = self.vars(Ty::Char, false);
                    format!("({} + {})", self.pick(&c).clone(), self.expr(Ty::Int, depth + 1))
                }
                _ => self.helper_call(Some(Ty::Int), depth).unwrap_or_else(|| format!("-({})", self.expr(Ty::Int, depth + 1))),
            },
            Ty::Float if leaf => {
                if self.chance(0.5) {
                    let v = self.vars(Ty::Float, false);
                    self.pick(&v).clone()
                } else {
                    format!("{}.{}", self.rng.random_range(0..9), self.rng.random_range(0..100))
                }
            }
            Ty::Float => match self.rng.random_range(0..10) {
                0..=3 => {
                    let op = *self.pick(&["+", "-", "*", "/"]);
                    let a = self.expr(Ty::Float, depth + 1);
                    let b = if self.chance(0.3) { self.expr(Ty::Int, depth + 1) } else { self.expr(Ty::Float, depth + 1) };
                    format!("({a} {op} {b})")
                }
                4 => format!("Math.sqrt({})", self.expr(Ty::Float, depth + 1)),
                5 => format!("Math.abs({})", self.expr(Ty::Float, depth + 1)),
                6 => format!("gf[{}]", self.expr(Ty::Int, depth + 1)),
                7 => match self.buffers().first() {
                    Some(b) => format!("{b}.get({})", self.expr(Ty::Int, depth + 1)),
                    None => String::from("Sys.now()"),
                },
                8 => format!("(float) {}", self.expr(Ty::Int, depth + 1)),
                _ => self.helper_call(Some(Ty::Float), depth).unwrap_or_else(|| format!("-({})", self.expr(Ty::Float, depth + 1))),
            },
            Ty::Bool if leaf => {
                if self.chance(0.5) {
                    let v = self.vars(Ty::Bool, false);
                    self.pick(&v).clone()
                } else {
                    String::from(*self.pick(&["true", "false"]))
                }
            }
            Ty::Bool => match self.rng.random_range(0..8) {
                0..=2 => {
                    let op = *self.pick(&["<", ">", "<=", ">=", "==", "!="]);
                    let t = if self.chance(0.6) { Ty::Int } else { Ty::Float };
                    let (a, b) = (self.expr(t, depth + 1), self.expr(t, depth + 1));
                    format!("({a} {op} {b})")
                }
                3 | 4 => {
                    let op = *self.pick(&["&&", "||"]);
                    let (a, b) = (self.expr(Ty::Bool, depth + 1), self.expr(Ty::Bool, depth + 1));
                    format!("({a} {op} {b})")
                }
                5 => format!("!{}", self.expr(Ty::Bool, depth + 1)),
                _ => self.helper_call(Some(Ty::Bool), depth).unwrap_or_else(|| String::from("g3")),
            },
            Ty::Buf => self.vars(Ty::Buf, false).pop().unwrap_or_else(|| String::from("null")),
            Ty::Char => {
                let v = self.vars(Ty::Char, false);
                if self.chance(0.5) {
                    self.pick(&v).clone()
                } else {
                    format!("'{}'", (b'a' + self.rng.random_range(0..26u8)) as char)
                }
            }
        }
    }

    /// A statement list; the last statement may leave the list.
    fn block(&mut self, max: u32, depth: u32) {
        self.scopes.push(Vec::new());
        let n = self.rng.random_range(0..=max);
        for _ in 0..n {
            if self.budget == 0 {
                break;
            }
            self.budget -= 1;
            self.stmt(depth);
        }
        if self.loop_depth > 0 && self.chance(0.15) {
            let c = self.expr(Ty::Bool, 1);
            let jump = if self.chance(0.5) { "break;" } else { "continue;" };
            self.line(&format!("if ({c}) {{"));
            self.indent += 1;
            self.line(jump);
            self.indent -= 1;
            self.line("}");
        } else if self.ret.is_some() && self.chance(0.1) {
            let c = self.expr(Ty::Bool, 1);
            let v = self.expr(self.ret.expect("value"), 1);
            self.line(&format!("if ({c}) {{"));
            self.indent += 1;
            self.line(&format!("return {v};"));
            self.indent -= 1;
            self.line("}");
        }
        self.scopes.pop();
    }

    fn nested(&mut self, header: &str, max: u32, depth: u32, prologue: Option<String>, counter: Option<(&str, Ty)>) {
        self.line(&format!("{header} {{"));
        self.indent += 1;
        self.scopes.push(Vec::new());
        if let Some((c, t)) = counter {
            self.declare(c, t, false);
        }
        if let Some(p) = prologue {
            self.line(&p);
        }
        self.block(max, depth + 1);
        self.scopes.pop();
        self.indent -= 1;
    }

    fn stmt(&mut self, depth: u32) {
        let compound = depth < 3;
        let roll = self.rng.random_range(0..20);
        match roll {
            0..=3 => {
                let ty = *self.pick(&[Ty::Int, Ty::Int, Ty::Float, Ty::Bool, Ty::Char]);
                let name = self.fresh("v");
                if self.chance(0.85) {
                    let e = self.expr(ty, 0);
                    self.line(&format!("{} {name} = {e};", ty.name()));
                } else {
                    self.line(&format!("{} {name};", ty.name()));
                }
                self.declare(&name, ty, true);
            }
            4..=7 => {
                let ty = *self.pick(&[Ty::Int, Ty::Float, Ty::Bool, Ty::Char]);
                let targets = self.vars(ty, true);
                let t = self.pick(&targets).clone();
                let e = self.expr(ty, 0);
                self.line(&format!("{t} = {e};"));
            }
            8 => {
                let i = self.expr(Ty::Int, 2);
                if self.chance(0.5) {
                    let e = self.expr(Ty::Int, 1);
                    self.line(&format!("ga[{i}] = {e};"));
                } else {
                    let e = self.expr(Ty::Float, 1);
                    self.line(&format!("gf[{i}] = {e};"));
                }
            }
            9 => {
                let (ty, op) = if self.chance(0.5) {
                    (Ty::Int, *self.pick(&["+=", "-=", "*=", "/="]))
                } else {
                    (Ty::Float, *self.pick(&["+=", "-=", "*="]))
                };
                let targets = self.vars(ty, true);
                let t = self.pick(&targets).clone();
                let vt = if ty == Ty::Float && self.chance(0.4) { Ty::Int } else { ty };
                let e = self.expr(vt, 1);
                self.line(&format!("{t} {op} {e};"));
            }
            10 => {
                let targets = self.vars(Ty::Int, true);
                let t = self.pick(&targets).clone();
                let op = if self.chance(0.5) { "++" } else { "--" };
                self.line(&format!("{t}{op};"));
            }
            11 => {
                let call = match self.rng.random_range(0..3) {
                    0 => Some(format!("Sys.log({})", self.expr(Ty::Int, 1))),
                    1 => self.buffers().first().map(|b| format!("{b}.put({})", self.expr(Ty::Float, 1))),
                    _ => self.helper_call(None, 0),
                };
                let call = call.unwrap_or_else(|| format!("Sys.log({})", self.expr(Ty::Int, 1)));
                self.line(&format!("{call};"));
            }
            12 if self.buffers().is_empty() => {
                let b = self.fresh("buf");
                self.line(&format!("Buf {b} = Sys.buffer();"));
                self.declare(&b, Ty::Buf, false);
            }
            13 | 14 if compound => {
                let c = self.expr(Ty::Bool, 0);
                self.nested(&format!("if ({c})"), 3, depth, None, None);
                if self.chance(0.5) {
                    self.line("} else {");
                    self.indent += 1;
                    self.block(3, depth + 1);
                    self.indent -= 1;
                }
                self.line("}");
            }
            15 if compound && self.loop_depth < 2 => {
                let i = self.fresh("i");
                let bound =
                    if self.chance(0.5) { format!("{}", self.rng.random_range(0..5)) } else { format!("({}) % 4", self.expr(Ty::Int, 2)) };
                let update = *self.pick(&["{i}++", "{i} = {i} + 1", "{i} += 2"]);
                let update = update.replace("{i}", &i);
                self.loop_depth += 1;
                self.nested(&format!("for (int {i} = 0; {i} < {bound}; {update})"), 3, depth, None, Some((&i, Ty::Int)));
                self.loop_depth -= 1;
                self.line("}");
            }
            16 if compound && self.loop_depth < 2 => {
                let w = self.fresh("w");
                let start = self.rng.random_range(0..5);
                self.line(&format!("int {w} = {start};"));
                self.declare(&w, Ty::Int, false);
                self.loop_depth += 1;
                self.nested(&format!("while ({w} > 0)"), 3, depth, Some(format!("{w} = {w} - 1;")), None);
                self.loop_depth -= 1;
                self.line("}");
            }
            17 if compound => {
                let sel = if self.chance(0.7) { format!("({}) % 3", self.expr(Ty::Int, 1)) } else { self.vars(Ty::Char, false)[0].clone() };
                let char_sel = !sel.starts_with('(');
                self.line(&format!("switch ({sel}) {{"));
                let arms = self.rng.random_range(1..4);
                let saved = self.loop_depth;
                self.loop_depth = 0;
                for a in 0..arms {
                    let label = if char_sel { format!("'{}'", (b'o' + a as u8) as char) } else { format!("{}", a - 1) };
                    self.line(&format!("case {label}:"));
                    self.indent += 1;
                    self.block_simple(2);
                    self.line("break;");
                    self.indent -= 1;
                }
                if self.chance(0.5) {
                    self.line("default:");
                    self.indent += 1;
                    self.block_simple(2);
                    self.line("break;");
                    self.indent -= 1;
                }
                self.loop_depth = saved;
                self.line("}");
            }
            _ => {
                let targets = self.vars(Ty::Int, true);
                let t = self.pick(&targets).clone();
                let e = self.expr(Ty::Int, 0);
                self.line(&format!("{t} = {e};"));
            }
        }
    }

    /// Switch arm body: no nested control flow, so no stray `break`.
    fn block_simple(&mut self, max: u32) {
        self.scopes.push(Vec::new());
        for _ in 0..self.rng.random_range(0..=max) {
            self.stmt(3);
        }
        self.scopes.pop();
    }

    fn method(&mut self, header: &str, params: &[(&str, Ty)], ret: Option<Ty>, prologue: &[&str]) {
        self.line(&format!("{header} {{"));
        self.indent += 1;
        self.scopes = alloc::vec![params.iter().map(|(n, t)| Var { name: (*n).into(), ty: *t, writable: true }).collect()];
        self.ret = ret;
        self.budget = 14;
        for p in prologue {
            self.line(p);
        }
        self.block(6, 0);
        if let Some(t) = ret {
            let e = self.expr(t, 0);
            self.line(&format!("return {e};"));
        }
        self.indent -= 1;
        self.line("}");
    }
}

/// A random program with handlers `onTick(int)` and `onTap(int, int)` and
/// a `main()` that allocates the array fields.
pub fn gen_program(seed: u64) -> String {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        out: String::from(PRELUDE),
        indent: 0,
        scopes: Vec::new(),
        next_local: 0,
        callable: Vec::new(),
        loop_depth: 0,
        ret: None,
        budget: 0,
    };
    let helpers = g.rng.random_range(0..4);
    for k in 0..helpers {
        let h = *g.pick(&SIGNATURES);
        let names = ["a", "b"];
        let params: Vec<(&str, Ty)> = h.params.iter().enumerate().map(|(i, t)| (names[i], *t)).collect();
        let plist: Vec<String> = params.iter().map(|(n, t)| format!("{} {n}", t.name())).collect();
        let ret = h.ret.map_or("void", |t| t.name());
        g.method(&format!("{ret} h{k}({})", plist.join(", ")), &params, h.ret, &[]);
        g.callable.push((k, h));
    }
    g.method("void main()", &[], None, &["ga = new int[6];", "gf = new float[5];"]);
    g.method("void onTick(int k)", &[("k", Ty::Int)], None, &[]);
    g.method("void onTap(int x, int y)", &[("x", Ty::Int), ("y", Ty::Int)], None, &[]);
    g.out
}

/// A random case for a program from [`gen_program`]: a few ticks and taps,
/// and each removable block removed with probability 0.3.
pub fn gen_case(table: &BlockTable, id: u32, seed: u64) -> ExecutionCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::new();
    let mut t = 0;
    for _ in 0..rng.random_range(0..6) {
        t += rng.random_range(1..50);
        if rng.random_bool(0.6) {
            inputs.push(InputEvent { t_ms: t, kind: "tick".into(), payload: alloc::vec![rng.random_range(0..10)] });
        } else {
            let payload = alloc::vec![rng.random_range(-5..20), rng.random_range(-5..20)];
            inputs.push(InputEvent { t_ms: t, kind: "tap".into(), payload });
        }
    }
    let removed = table.removable().into_iter().filter(|_| rng.random_bool(0.3)).collect();
    ExecutionCase { id, scenario: "fuzz".into(), inputs, removed, duration_s: 1.0 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::divide_blocks;
    use crate::frontend::parse;
    use crate::opdict::{build_dictionary, case_op_counts};
    use crate::runner::{run, RunError, RunMode, RunOptions};

    #[test]
    fn generated_programs_type_check() {
        for seed in 0..200 {
            let src = gen_program(seed);
            if let Err(e) = parse(&src) {
                panic!("seed {seed}: {e}\n{src}");
            }
        }
    }

    #[test]
    fn counting_formula_matches_tally() {
        let opts = RunOptions { mode: RunMode::TallyOracle, step_limit: 1_000_000, ..RunOptions::default() };
        let mut checked = 0;
        for seed in 0..120 {
            let p = parse(&gen_program(seed)).unwrap();
            let t = divide_blocks(&p);
            let case = gen_case(&t, seed as u32, seed ^ 0xabc);
            let r = match run(&p, &t, &case, &opts) {
                Ok(r) => r,
                Err(RunError::StepLimit(_)) => continue,
                Err(e) => panic!("seed {seed}: {e}"),
            };
            let d = build_dictionary(&p, &t).with_removed(&case.removed).unwrap();
            let tally = r.tally_vector(&d, &p).unwrap().unwrap();
            assert_eq!(case_op_counts(&d, &r.log).unwrap(), tally, "seed {seed}");
            checked += 1;
        }
        assert!(checked >= 110, "{checked}");
    }
}
