//! Clause databases, DIMACS/WCNF text, and the flip-path encodings.

mod encode;

pub use encode::{
    add_last_step_minimization, build_insertion_formula, build_path_formula, build_solution_formula, decode_path,
    decode_solution, EdgeKey, EncodeOptions, FlipKey, InsertionBound, Proximity, VarInfo, VarMap,
};

use std::fmt::Write as _;

use crate::error::FormatError;

/// A literal: `v` or `-v` for a variable `v >= 1`.
pub type Lit = i32;
pub type Clause = Vec<Lit>;

/// Hard clauses plus weighted soft clauses over variables `1..=num_vars`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Cnf {
    pub num_vars: u32,
    pub hard: Vec<Clause>,
    pub soft: Vec<(u64, Clause)>,
}

impl Cnf {
    pub fn new(num_vars: u32) -> Self {
        Self { num_vars, hard: Vec::new(), soft: Vec::new() }
    }

    pub fn new_var(&mut self) -> Lit {
        self.num_vars += 1;
        self.num_vars as Lit
    }

    pub fn add(&mut self, clause: Clause) {
        debug_assert!(clause.iter().all(|&l| l != 0 && l.unsigned_abs() <= self.num_vars));
        self.hard.push(clause);
    }

    pub fn add_soft(&mut self, weight: u64, clause: Clause) {
        assert!(weight > 0, "soft clause weights are positive");
        self.soft.push((weight, clause));
    }

    /// A formula with a single empty clause.
    pub fn unsatisfiable() -> Self {
        Self { num_vars: 0, hard: vec![Vec::new()], soft: Vec::new() }
    }

    pub fn has_empty_clause(&self) -> bool {
        self.hard.iter().any(Vec::is_empty)
    }

    /// Index of the first hard clause `model` falsifies. `model[v]` is the
    /// value of variable `v`; index 0 is unused.
    pub fn first_violated(&self, model: &[bool]) -> Option<usize> {
        self.hard.iter().position(|c| !clause_satisfied(c, model))
    }

    /// Total weight of the soft clauses `model` falsifies.
    pub fn cost(&self, model: &[bool]) -> u64 {
        self.soft.iter().filter(|(_, c)| !clause_satisfied(c, model)).map(|(w, _)| w).sum()
    }

    pub fn top(&self) -> u64 {
        1 + self.soft.iter().map(|(w, _)| w).sum::<u64>()
    }

    /// `p cnf V C` followed by zero-terminated clauses.
    pub fn emit_dimacs(&self) -> String {
        let mut s = String::with_capacity(16 * self.hard.len() + 32);
        let _ = writeln!(s, "p cnf {} {}", self.num_vars, self.hard.len());
        for c in &self.hard {
            write_clause(&mut s, None, c);
        }
        s
    }

    /// Classic `p wcnf V C TOP` with `TOP = 1 + sum of soft weights`; hard
    /// clauses carry weight `TOP`.
    pub fn emit_wcnf(&self) -> String {
        let top = self.top();
        let mut s = String::with_capacity(16 * (self.hard.len() + self.soft.len()) + 32);
        let _ = writeln!(s, "p wcnf {} {} {}", self.num_vars, self.hard.len() + self.soft.len(), top);
        for c in &self.hard {
            write_clause(&mut s, Some(top), c);
        }
        for (w, c) in &self.soft {
            write_clause(&mut s, Some(*w), c);
        }
        s
    }

    pub fn parse_dimacs(text: &str) -> Result<Self, FormatError> {
        let (header, clauses) = parse_body(text, false)?;
        let mut cnf = Cnf::new(header.vars);
        cnf.hard = clauses.into_iter().map(|c| c.lits).collect();
        Ok(cnf)
    }

    pub fn parse_wcnf(text: &str) -> Result<Self, FormatError> {
        let (header, clauses) = parse_body(text, true)?;
        let top = header.top.expect("wcnf header has a top weight");
        let mut cnf = Cnf::new(header.vars);
        for c in clauses {
            let w = c.weight.expect("wcnf clauses carry weights");
            if w >= top {
                cnf.hard.push(c.lits);
            } else {
                cnf.soft.push((w, c.lits));
            }
        }
        Ok(cnf)
    }
}

fn clause_satisfied(c: &[Lit], model: &[bool]) -> bool {
    c.iter().any(|&l| model.get(l.unsigned_abs() as usize).copied().unwrap_or(false) == (l > 0))
}

fn write_clause(s: &mut String, weight: Option<u64>, c: &[Lit]) {
    if let Some(w) = weight {
        let _ = write!(s, "{w} ");
    }
    for l in c {
        let _ = write!(s, "{l} ");
    }
    s.push_str("0\n");
}

struct Header {
    vars: u32,
    clauses: usize,
    top: Option<u64>,
}

struct RawClause {
    weight: Option<u64>,
    lits: Clause,
}

/// Splits a DIMACS-style body into zero-terminated clauses, each with its
/// leading weight when `weighted`.
fn parse_body(text: &str, weighted: bool) -> Result<(Header, Vec<RawClause>), FormatError> {
    let kind = if weighted { "wcnf" } else { "cnf" };
    let mut header: Option<Header> = None;
    let mut clauses = Vec::new();
    let mut weight: Option<u64> = None;
    let mut lits: Clause = Vec::new();
    let mut open_line = 0;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |msg: String| FormatError::Text { line: line_no, msg };
        let t = line.trim();
        if t.is_empty() || t.starts_with('c') {
            continue;
        }
        if t.starts_with('p') {
            if header.is_some() {
                return Err(err("second header line".into()));
            }
            let f: Vec<&str> = t.split_whitespace().collect();
            let want = if weighted { 5 } else { 4 };
            if f.len() != want || f[0] != "p" || f[1] != kind {
                return Err(err(format!("expected `p {kind} ...` header")));
            }
            let vars: u32 = f[2].parse().map_err(|_| err(format!("bad variable count {:?}", f[2])))?;
            if vars > i32::MAX as u32 {
                return Err(err("variable count out of range".into()));
            }
            let clauses: usize = f[3].parse().map_err(|_| err(format!("bad clause count {:?}", f[3])))?;
            let top = if weighted {
                let top: u64 = f[4].parse().map_err(|_| err(format!("bad top weight {:?}", f[4])))?;
                if top == 0 {
                    return Err(err("top weight must be positive".into()));
                }
                Some(top)
            } else {
                None
            };
            header = Some(Header { vars, clauses, top });
            continue;
        }
        let Some(h) = &header else {
            return Err(err("clause before header".into()));
        };
        for tok in t.split_whitespace() {
            if weighted && weight.is_none() {
                let w: u64 = tok.parse().map_err(|_| err(format!("bad weight {tok:?}")))?;
                if w == 0 {
                    return Err(err("weight 0".into()));
                }
                weight = Some(w);
                open_line = line_no;
                continue;
            }
            if lits.is_empty() && !weighted {
                open_line = line_no;
            }
            let v: i64 = tok.parse().map_err(|_| err(format!("bad literal {tok:?}")))?;
            if v == 0 {
                clauses.push(RawClause { weight: weight.take(), lits: std::mem::take(&mut lits) });
                continue;
            }
            if v.unsigned_abs() > u64::from(h.vars) {
                return Err(err(format!("literal {v} outside 1..={}", h.vars)));
            }
            lits.push(v as Lit);
        }
    }
    let h = header.ok_or(FormatError::Text { line: 0, msg: "missing header".into() })?;
    if !lits.is_empty() || weight.is_some() {
        return Err(FormatError::Text { line: open_line, msg: "unterminated clause".into() });
    }
    if clauses.len() != h.clauses {
        return Err(FormatError::Text {
            line: 0,
            msg: format!("header announces {} clauses, found {}", h.clauses, clauses.len()),
        });
    }
    Ok((h, clauses))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(mut v: Vec<Clause>) -> Vec<Clause> {
        v.sort();
        v
    }

    #[test]
    fn dimacs_examples() {
        let mut cnf = Cnf::new(1);
        cnf.add(vec![1]);
        assert_eq!(cnf.emit_dimacs(), "p cnf 1 1\n1 0\n");
        let mut cnf = Cnf::new(2);
        cnf.add(vec![]);
        cnf.add(vec![-2, 1]);
        let text = cnf.emit_dimacs();
        assert_eq!(text, "p cnf 2 2\n0\n-2 1 0\n");
        assert_eq!(Cnf::parse_dimacs(&text).unwrap(), cnf);
    }

    #[test]
    fn dimacs_parse_errors() {
        for bad in ["1 0", "p cnf 1 1\n2 0\n", "p cnf 1 2\n1 0\n", "p cnf 1 1\n1", "p cnf x 1\n", "p cnf 1 1\np cnf 1 1\n"] {
            assert!(Cnf::parse_dimacs(bad).is_err(), "{bad:?}");
        }
        let c = Cnf::parse_dimacs("c comment\np cnf 3 2\n1 -2\n 3 0 -1 0\n").unwrap();
        assert_eq!(c.hard, vec![vec![1, -2, 3], vec![-1]]);
    }

    #[test]
    fn wcnf_round_trip() {
        let mut cnf = Cnf::new(3);
        cnf.add(vec![1, 2]);
        cnf.add(vec![-3]);
        cnf.add_soft(2, vec![-1]);
        cnf.add_soft(5, vec![3, 2]);
        let text = cnf.emit_wcnf();
        assert!(text.starts_with("p wcnf 3 4 8\n8 1 2 0\n"));
        let back = Cnf::parse_wcnf(&text).unwrap();
        assert_eq!(sorted(back.hard.clone()), sorted(cnf.hard.clone()));
        assert_eq!(back.soft, cnf.soft);
        assert!(Cnf::parse_wcnf("p wcnf 1 1 3\n0 1 0\n").is_err());
    }

    #[test]
    fn model_checks() {
        let mut cnf = Cnf::new(2);
        cnf.add(vec![1, 2]);
        cnf.add(vec![-1]);
        cnf.add_soft(3, vec![1]);
        assert_eq!(cnf.first_violated(&[false, false, true]), None);
        assert_eq!(cnf.first_violated(&[false, true, false]), Some(1));
        assert_eq!(cnf.cost(&[false, false, true]), 3);
        assert_eq!(cnf.top(), 4);
    }
}
