//! Random but always-valid Python programs for the mutation property suite.
//! Comment and docstring lines are recorded so tests can check that no
//! mutation lands on them.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct FuzzProgram {
    pub source: String,
    /// 1-based lines holding only a comment or a docstring.
    pub inert_lines: Vec<usize>,
}

struct Gen {
    rng: ChaCha8Rng,
    lines: Vec<String>,
    inert: Vec<usize>,
}

const VARS: [&str; 6] = ["a", "b", "total", "count", "value", "acc"];
const CMP: [&str; 6] = ["==", "!=", "<", ">", "<=", ">="];
const ARITH: [&str; 5] = ["+", "-", "*", "//", "/"];

impl Gen {
    fn push(&mut self, depth: usize, text: impl AsRef<str>) {
        self.lines.push(format!("{}{}", "    ".repeat(depth), text.as_ref()));
    }

    fn push_inert(&mut self, depth: usize, text: impl AsRef<str>) {
        self.push(depth, text);
        self.inert.push(self.lines.len());
    }

    fn var(&mut self) -> &'static str {
        VARS.choose(&mut self.rng).unwrap()
    }

    fn num(&mut self) -> i32 {
        self.rng.gen_range(0..10)
    }

    fn expr(&mut self) -> String {
        match self.rng.gen_range(0..4) {
            0 => format!("{} {} {}", self.var(), ARITH.choose(&mut self.rng).unwrap(), self.num()),
            1 => format!("{} {} {}", self.var(), ARITH.choose(&mut self.rng).unwrap(), self.var()),
            2 => format!("items[{}]", if self.rng.gen_bool(0.5) { 0 } else { -1 }),
            _ => self.num().to_string(),
        }
    }

    fn cond(&mut self) -> String {
        let c = format!("{} {} {}", self.var(), CMP.choose(&mut self.rng).unwrap(), self.num());
        if self.rng.gen_bool(0.3) {
            let op = if self.rng.gen_bool(0.5) { "and" } else { "or" };
            format!("{c} {op} {} {} {}", self.var(), CMP.choose(&mut self.rng).unwrap(), self.var())
        } else {
            c
        }
    }

    fn block(&mut self, depth: usize, budget: usize) {
        let n = self.rng.gen_range(1..=budget.max(1));
        let (lines, inert) = (self.lines.len(), self.inert.len());
        for _ in 0..n {
            self.statement(depth, budget.saturating_sub(1));
        }
        // A block of nothing but comments is not valid Python.
        if self.lines.len() - lines == self.inert.len() - inert {
            self.push(depth, "pass");
        }
    }

    fn statement(&mut self, depth: usize, budget: usize) {
        let nested = budget > 0 && depth < 4;
        match self.rng.gen_range(0..9) {
            0 | 1 => {
                let (v, e) = (self.var(), self.expr());
                self.push(depth, format!("{v} = {e}"));
            }
            2 => {
                let (v, op, e) = (self.var(), ["+=", "-=", "*="].choose(&mut self.rng).unwrap().to_string(), self.expr());
                self.push(depth, format!("{v} {op} {e}"));
            }
            3 if nested => {
                let c = self.cond();
                self.push(depth, format!("if {c}:"));
                self.block(depth + 1, budget);
                if self.rng.gen_bool(0.4) {
                    self.push(depth, "else:");
                    self.block(depth + 1, budget);
                }
            }
            4 if nested => {
                let (v, n) = (self.var(), self.rng.gen_range(1..6));
                self.push(depth, format!("for {v} in range({n}):"));
                self.block(depth + 1, budget);
            }
            5 => {
                let text = format!("# note: {} {} {}", self.var(), CMP.choose(&mut self.rng).unwrap(), self.num());
                self.push_inert(depth, text);
            }
            6 => {
                let flag = if self.rng.gen_bool(0.5) { "True" } else { "False" };
                let v = self.var();
                self.push(depth, format!("{v} = {flag}"));
            }
            7 => {
                let e = self.expr();
                self.push(depth, format!("items.append({e})"));
            }
            _ => {
                let (v, e) = (self.var(), self.expr());
                self.push(depth, format!("{v} = {e}"));
            }
        }
    }

    fn function(&mut self, depth: usize, name: &str, method: bool) {
        let default = self.num();
        let params = if method {
            format!("self, items, a=0, b={default}")
        } else {
            format!("items, a=0, b={default}")
        };
        self.push(depth, format!("def {name}({params}):"));
        let doc = format!("\"\"\"Returns {} when {} > {}.\"\"\"", self.var(), self.var(), self.num());
        self.push_inert(depth + 1, doc);
        for v in VARS {
            if v != "a" && v != "b" {
                let n = self.num();
                self.push(depth + 1, format!("{v} = {n}"));
            }
        }
        self.block(depth + 1, 4);
        let e = self.expr();
        self.push(depth + 1, format!("return {e}"));
    }
}

pub fn program(seed: u64) -> FuzzProgram {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        lines: Vec::new(),
        inert: Vec::new(),
    };
    let functions = g.rng.gen_range(1..=3);
    let in_class = g.rng.gen_bool(0.3);
    if in_class {
        g.push(0, "class Worker:");
    }
    for i in 0..functions {
        if i > 0 {
            g.lines.push(String::new());
        }
        let depth = usize::from(in_class);
        g.function(depth, &format!("step_{i}"), in_class);
    }
    let mut source = g.lines.join("\n");
    source.push('\n');
    FuzzProgram {
        source,
        inert_lines: g.inert,
    }
}
