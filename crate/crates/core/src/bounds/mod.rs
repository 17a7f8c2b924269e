//! Pairwise distances, the cycle-packing lower bound, and insertion bounds.

mod rewrite;

pub use rewrite::{
    all_exact_bounds, all_rewritings, extract_crossing_string, flip_insertion_lb, log2_ceil, precompute_bound_table,
    rewrite_bound_estimate, rewrite_bound_exact, rewrite_bound_exact_with_limit, BoundTable, Sym, TriString,
    DEFAULT_EXACT_LIMIT,
};

use rayon::prelude::*;

use crate::cnf::{build_path_formula, decode_path, Cnf, InsertionBound, Lit};
use crate::error::Error;
use crate::heuristics::best_heuristic_path;
use crate::instance::Instance;
use crate::sat::{solve_maxsat, solve_sat, SatOptions, SolverConfig, Status};
use crate::triangulation::{Path, Triangulation};

/// Symmetric matrix of distances between the inputs of an instance. An
/// entry is exact when it was proven optimal, otherwise it is an upper
/// bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistanceMatrix {
    d: Vec<Vec<usize>>,
    exact: Vec<Vec<bool>>,
}

impl DistanceMatrix {
    /// All entries exact. Panics unless `d` is square, symmetric and zero
    /// on the diagonal.
    pub fn from_exact(d: Vec<Vec<usize>>) -> Self {
        let m = d.len();
        for i in 0..m {
            assert_eq!(d[i].len(), m, "distance matrix must be square");
            assert_eq!(d[i][i], 0, "zero diagonal");
            for j in 0..m {
                assert_eq!(d[i][j], d[j][i], "symmetric");
            }
        }
        Self { exact: vec![vec![true; m]; m], d }
    }

    pub fn new(m: usize) -> Self {
        let mut exact = vec![vec![false; m]; m];
        for (i, row) in exact.iter_mut().enumerate() {
            row[i] = true;
        }
        Self { d: vec![vec![0; m]; m], exact }
    }

    pub fn set(&mut self, i: usize, j: usize, d: usize, exact: bool) {
        self.d[i][j] = d;
        self.d[j][i] = d;
        self.exact[i][j] = exact;
        self.exact[j][i] = exact;
    }

    pub fn m(&self) -> usize {
        self.d.len()
    }

    pub fn get(&self, i: usize, j: usize) -> usize {
        self.d[i][j]
    }

    pub fn is_exact(&self, i: usize, j: usize) -> bool {
        self.exact[i][j]
    }

    pub fn all_exact(&self) -> bool {
        self.exact.iter().flatten().all(|&e| e)
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.d
    }
}

/// A distance with a witness path and whether it is proven optimal.
#[derive(Clone, Debug)]
pub struct Distance {
    pub length: usize,
    pub path: Path,
    pub exact: bool,
}

/// Largest insertion bound of a missing target edge: no path from `t` to
/// `target` is shorter.
pub fn path_lower_bound(t: &Triangulation, target: &Triangulation, bound: &InsertionBound) -> usize {
    target
        .edges()
        .filter(|&e| !t.contains(e))
        .map(|e| match bound {
            InsertionBound::Log2 => log2_ceil(t.crossing_count(e) + 1),
            InsertionBound::String(table) => flip_insertion_lb(e, t, table),
        } as usize)
        .max()
        .unwrap_or(0)
}

/// Shortest parallel-flip path from `t` to `t2`: a heuristic upper bound
/// first, then SAT queries for ever shorter lengths until one is refuted or
/// the insertion lower bound is met. A backend `UNKNOWN` stops the descent
/// and leaves the result flagged inexact.
pub fn pairwise_distance(t: &Triangulation, t2: &Triangulation, opts: &SatOptions) -> Result<Distance, Error> {
    if t == t2 {
        return Ok(Distance { length: 0, path: Path::empty(t.clone()), exact: true });
    }
    let mut best = best_heuristic_path(t, t2);
    let lb = path_lower_bound(t, t2, &opts.encode.insertion_bound).max(1);
    let mut exact = best.len() <= lb;
    while !exact && best.len() > lb {
        let l = best.len() - 1;
        let (cnf, vm) = build_path_formula(t, t2, l, &opts.encode)?;
        let r = solve_sat(&cnf, &opts.solver)?;
        match r.status {
            Status::Sat => {
                let model = r.model.expect("SAT carries a model");
                best = decode_path(&model, &vm, 0)?.compress();
                exact = best.len() <= lb;
            }
            Status::Unsat => exact = true,
            Status::Unknown => break,
        }
    }
    Ok(Distance { length: best.len(), path: best, exact })
}

/// All pairwise distances of an instance, computed in parallel. The
/// witness paths are returned alongside, indexed by `(i, j)` with `i < j`.
pub fn distance_matrix(inst: &Instance, opts: &SatOptions) -> Result<(DistanceMatrix, Vec<((usize, usize), Path)>), Error> {
    let m = inst.m();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
    let results: Vec<Distance> = pairs
        .par_iter()
        .map(|&(i, j)| pairwise_distance(&inst.inputs[i], &inst.inputs[j], opts))
        .collect::<Result<_, _>>()?;
    let mut dm = DistanceMatrix::new(m);
    let mut paths = Vec::with_capacity(pairs.len());
    for (&(i, j), r) in pairs.iter().zip(results) {
        dm.set(i, j, r.length, r.exact);
        paths.push(((i, j), r.path));
    }
    Ok((dm, paths))
}

/// Maximum-weight perfect matching in a complete bipartite graph
/// (Hungarian algorithm with potentials, O(m^3)). Returns `assign[i] = j`
/// and the total weight.
pub fn max_weight_assignment(w: &[Vec<i64>]) -> (Vec<usize>, i64) {
    let n = w.len();
    if n == 0 {
        return (Vec::new(), 0);
    }
    // Minimise -w. Rows and columns are 1-based inside; 0 is a sentinel.
    let cost = |i: usize, j: usize| -w[i - 1][j - 1];
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        assign[p[j] - 1] = j - 1;
    }
    let total = (0..n).map(|i| w[i][assign[i]]).sum();
    (assign, total)
}

/// Length of a longest cycle packing of the complete directed graph over
/// the inputs. A permutation is exactly a cycle packing plus fixed points,
/// so this is a maximum-weight assignment with zero diagonal.
pub fn cycle_packing_value(d: &DistanceMatrix) -> u64 {
    let w: Vec<Vec<i64>> = d.rows().iter().map(|r| r.iter().map(|&x| x as i64).collect()).collect();
    max_weight_assignment(&w).1 as u64
}

/// Half the longest cycle packing, rounded up: every solution has at least
/// this objective when the entries are exact.
pub fn cycle_packing_lb(d: &DistanceMatrix) -> usize {
    cycle_packing_value(d).div_ceil(2) as usize
}

/// Variable of arc `i -> j` in the packing formula.
fn arc_var(m: usize, i: usize, j: usize) -> Lit {
    (i * (m - 1) + if j > i { j - 1 } else { j } + 1) as Lit
}

/// Longest cycle packing as weighted MaxSAT: arc variables, at most one
/// outgoing and one incoming arc per vertex, and every chosen arc `i -> j`
/// forces an arc out of `j`, so chosen arcs close into cycles. Each arc is a
/// soft unit clause weighted by its length; zero-length arcs are omitted.
pub fn cycle_packing_cnf(d: &DistanceMatrix) -> Cnf {
    let m = d.m();
    let mut cnf = Cnf::new(if m > 1 { (m * (m - 1)) as u32 } else { 0 });
    for i in 0..m {
        let outs: Vec<Lit> = (0..m).filter(|&j| j != i).map(|j| arc_var(m, i, j)).collect();
        let ins: Vec<Lit> = (0..m).filter(|&j| j != i).map(|j| arc_var(m, j, i)).collect();
        for group in [&outs, &ins] {
            for a in 0..group.len() {
                for b in a + 1..group.len() {
                    cnf.add(vec![-group[a], -group[b]]);
                }
            }
        }
    }
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let mut c = vec![-arc_var(m, i, j)];
            c.extend((0..m).filter(|&k| k != j).map(|k| arc_var(m, j, k)));
            cnf.add(c);
        }
    }
    for i in 0..m {
        for j in 0..m {
            if i != j && d.get(i, j) > 0 {
                cnf.add_soft(d.get(i, j) as u64, vec![arc_var(m, i, j)]);
            }
        }
    }
    cnf
}

pub fn cycle_packing_wcnf(d: &DistanceMatrix) -> String {
    cycle_packing_cnf(d).emit_wcnf()
}

/// Solves the packing formula with a MaxSAT back end; returns the packing
/// length, or `None` if the back end gave no optimum.
pub fn cycle_packing_maxsat(d: &DistanceMatrix, cfg: &SolverConfig) -> Result<Option<u64>, Error> {
    let cnf = cycle_packing_cnf(d);
    if cnf.soft.is_empty() {
        return Ok(Some(0));
    }
    let total: u64 = cnf.soft.iter().map(|(w, _)| w).sum();
    let r = solve_maxsat(&cnf, cfg)?;
    Ok(match (r.status, r.cost) {
        (Status::Sat, Some(cost)) => Some(total - cost),
        _ => None,
    })
}
