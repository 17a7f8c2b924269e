//! A small conflict-driven clause-learning solver: two watched literals,
//! first-UIP learning, non-chronological backjumping. Branches on the lowest
//! unassigned variable, positive phase first, so results are reproducible.

use std::time::Instant;

use crate::cnf::{Cnf, Lit};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Sat(Vec<bool>),
    Unsat,
    /// Deadline reached.
    Interrupted,
}

const UNDEF: u8 = 2;

/// Literal code: `2 * (v - 1) + sign`.
fn code(l: Lit) -> usize {
    2 * (l.unsigned_abs() as usize - 1) + usize::from(l < 0)
}

struct Solver {
    clauses: Vec<Vec<usize>>,
    watches: Vec<Vec<usize>>,
    /// Per variable: 1 true, 0 false, `UNDEF`.
    value: Vec<u8>,
    level: Vec<usize>,
    reason: Vec<Option<usize>>,
    trail: Vec<usize>,
    trail_lim: Vec<usize>,
    qhead: usize,
    seen: Vec<bool>,
    /// Lowest variable that may still be unassigned.
    next_var: usize,
}

impl Solver {
    fn lit_value(&self, c: usize) -> u8 {
        let v = self.value[c >> 1];
        if v == UNDEF {
            UNDEF
        } else {
            v ^ (c as u8 & 1)
        }
    }

    fn assign(&mut self, c: usize, reason: Option<usize>) {
        let v = c >> 1;
        self.value[v] = 1 ^ (c as u8 & 1);
        self.level[v] = self.trail_lim.len();
        self.reason[v] = reason;
        self.trail.push(c);
    }

    /// Unit propagation; returns a conflicting clause index.
    fn propagate(&mut self) -> Option<usize> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let false_lit = p ^ 1;
            let mut ws = std::mem::take(&mut self.watches[false_lit]);
            let mut i = 0;
            let mut conflict = None;
            while i < ws.len() {
                let ci = ws[i];
                let clause = &mut self.clauses[ci];
                if clause[0] == false_lit {
                    clause.swap(0, 1);
                }
                let first = clause[0];
                let first_val = {
                    let v = self.value[first >> 1];
                    if v == UNDEF {
                        UNDEF
                    } else {
                        v ^ (first as u8 & 1)
                    }
                };
                if first_val == 1 {
                    i += 1;
                    continue;
                }
                let mut moved = false;
                for k in 2..clause.len() {
                    let l = clause[k];
                    let v = self.value[l >> 1];
                    if v == UNDEF || v ^ (l as u8 & 1) == 1 {
                        clause.swap(1, k);
                        self.watches[clause[1]].push(ci);
                        ws.swap_remove(i);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                if first_val == 0 {
                    conflict = Some(ci);
                    break;
                }
                self.assign(first, Some(ci));
                i += 1;
            }
            let rest = std::mem::replace(&mut self.watches[false_lit], ws);
            self.watches[false_lit].extend(rest);
            if conflict.is_some() {
                self.qhead = self.trail.len();
                return conflict;
            }
        }
        None
    }

    /// First-UIP conflict analysis: learnt clause (asserting literal
    /// first) and the backjump level.
    fn analyze(&mut self, mut confl: usize) -> (Vec<usize>, usize) {
        let mut learnt = vec![0];
        let mut counter = 0;
        let mut p: Option<usize> = None;
        let mut idx = self.trail.len();
        let cur = self.trail_lim.len();
        loop {
            let clause = self.clauses[confl].clone();
            let start = usize::from(p.is_some());
            for &q in &clause[start..] {
                let v = q >> 1;
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    if self.level[v] >= cur {
                        counter += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                idx -= 1;
                if self.seen[self.trail[idx] >> 1] {
                    break;
                }
            }
            let lit = self.trail[idx];
            p = Some(lit);
            self.seen[lit >> 1] = false;
            counter -= 1;
            if counter == 0 {
                learnt[0] = lit ^ 1;
                break;
            }
            confl = self.reason[lit >> 1].expect("implied literal has a reason");
        }
        for &q in &learnt[1..] {
            self.seen[q >> 1] = false;
        }
        let mut back = 0;
        if learnt.len() > 1 {
            let mut max_i = 1;
            for i in 2..learnt.len() {
                if self.level[learnt[i] >> 1] > self.level[learnt[max_i] >> 1] {
                    max_i = i;
                }
            }
            learnt.swap(1, max_i);
            back = self.level[learnt[1] >> 1];
        }
        (learnt, back)
    }

    fn backtrack(&mut self, level: usize) {
        if self.trail_lim.len() <= level {
            return;
        }
        let lim = self.trail_lim[level];
        for &c in &self.trail[lim..] {
            let v = c >> 1;
            self.value[v] = UNDEF;
            self.reason[v] = None;
            self.next_var = self.next_var.min(v);
        }
        self.trail.truncate(lim);
        self.trail_lim.truncate(level);
        self.qhead = lim;
    }

    fn add_clause(&mut self, lits: Vec<usize>) -> Option<usize> {
        let ci = self.clauses.len();
        self.watches[lits[0]].push(ci);
        self.watches[lits[1]].push(ci);
        self.clauses.push(lits);
        Some(ci)
    }
}

/// Decides `cnf` (soft clauses are ignored). The returned model has index 0
/// unused and one entry per variable.
pub fn solve(cnf: &Cnf, deadline: Option<Instant>) -> Outcome {
    let nv = cnf.num_vars as usize;
    let mut s = Solver {
        clauses: Vec::with_capacity(cnf.hard.len()),
        watches: vec![Vec::new(); 2 * nv],
        value: vec![UNDEF; nv],
        level: vec![0; nv],
        reason: vec![None; nv],
        trail: Vec::with_capacity(nv),
        trail_lim: Vec::new(),
        qhead: 0,
        seen: vec![false; nv],
        next_var: 0,
    };
    let mut units = Vec::new();
    for c in &cnf.hard {
        let mut lits: Vec<usize> = c.iter().map(|&l| code(l)).collect();
        lits.sort_unstable();
        lits.dedup();
        if lits.windows(2).any(|w| w[0] ^ 1 == w[1]) {
            continue;
        }
        match lits.len() {
            0 => return Outcome::Unsat,
            1 => units.push(lits[0]),
            _ => {
                s.add_clause(lits);
            }
        }
    }
    for u in units {
        match s.lit_value(u) {
            0 => return Outcome::Unsat,
            1 => {}
            _ => s.assign(u, None),
        }
    }
    if s.propagate().is_some() {
        return Outcome::Unsat;
    }
    let mut conflicts: u64 = 0;
    loop {
        if let Some(confl) = s.propagate() {
            conflicts += 1;
            if s.trail_lim.is_empty() {
                return Outcome::Unsat;
            }
            if conflicts % 1024 == 0 && deadline.map_or(false, |d| Instant::now() >= d) {
                return Outcome::Interrupted;
            }
            let (learnt, back) = s.analyze(confl);
            s.backtrack(back);
            if learnt.len() == 1 {
                s.assign(learnt[0], None);
            } else {
                let asserting = learnt[0];
                let ci = s.add_clause(learnt);
                s.assign(asserting, ci);
            }
            continue;
        }
        while s.next_var < nv && s.value[s.next_var] != UNDEF {
            s.next_var += 1;
        }
        if s.next_var == nv {
            let mut model = vec![false; nv + 1];
            for v in 0..nv {
                model[v + 1] = s.value[v] == 1;
            }
            return Outcome::Sat(model);
        }
        s.trail_lim.push(s.trail.len());
        let v = s.next_var;
        s.assign(2 * v, None);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn cnf(nv: u32, clauses: &[&[Lit]]) -> Cnf {
        let mut c = Cnf::new(nv);
        for cl in clauses {
            c.add(cl.to_vec());
        }
        c
    }

    fn brute(c: &Cnf) -> bool {
        let nv = c.num_vars as usize;
        (0..1u64 << nv).any(|m| {
            let model: Vec<bool> = std::iter::once(false).chain((0..nv).map(|i| m >> i & 1 == 1)).collect();
            c.first_violated(&model).is_none()
        })
    }

    #[test]
    fn small_examples() {
        assert_eq!(solve(&cnf(1, &[&[1], &[-1]]), None), Outcome::Unsat);
        match solve(&cnf(2, &[&[1, 2], &[-1]]), None) {
            Outcome::Sat(m) => assert!(m[2] && !m[1]),
            o => panic!("{o:?}"),
        }
        assert_eq!(solve(&Cnf::new(0), None), Outcome::Sat(vec![false]));
        assert_eq!(solve(&cnf(1, &[&[]]), None), Outcome::Unsat);
    }

    #[test]
    fn pigeonhole_is_unsat() {
        // 4 pigeons, 3 holes; x(p, h) = 3p + h + 1.
        let x = |p: i32, h: i32| 3 * p + h + 1;
        let mut c = Cnf::new(12);
        for p in 0..4 {
            c.add((0..3).map(|h| x(p, h)).collect());
        }
        for h in 0..3 {
            for p in 0..4 {
                for q in p + 1..4 {
                    c.add(vec![-x(p, h), -x(q, h)]);
                }
            }
        }
        assert_eq!(solve(&c, None), Outcome::Unsat);
    }

    #[test]
    fn random_3cnf_agrees_with_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let nv = rng.gen_range(1..=12);
            let nc = rng.gen_range(0..=(5 * nv));
            let mut c = Cnf::new(nv);
            for _ in 0..nc {
                let w = rng.gen_range(1..=3);
                c.add((0..w).map(|_| rng.gen_range(1..=nv as i32) * if rng.gen() { 1 } else { -1 }).collect());
            }
            match solve(&c, None) {
                Outcome::Sat(m) => assert_eq!(c.first_violated(&m), None),
                Outcome::Unsat => assert!(!brute(&c)),
                Outcome::Interrupted => unreachable!(),
            }
        }
    }
}
