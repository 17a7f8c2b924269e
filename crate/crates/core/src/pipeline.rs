//! End-to-end solvers: candidate centers and the heuristic solution pool,
//! the exact optimality loop, and SAT-based improvement of a solution.

use std::collections::HashSet;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{cycle_packing_lb, distance_matrix, DistanceMatrix};
use crate::cnf::{
    add_last_step_minimization, build_path_formula, build_solution_formula, decode_path, decode_solution, Proximity,
};
use crate::error::Error;
use crate::heuristics::best_heuristic_path;
use crate::instance::{Instance, Solution};
use crate::sat::{solve_maxsat, solve_sat, SatOptions, Status};
use crate::triangulation::{delaunay, Edge, ParallelFlip, Path, Triangulation};

/// Default exponents for the power-weighted candidate centers.
pub const DEFAULT_POWERS: [f64; 4] = [0.5, 1.0, 2.0, 3.0];

/// One line of machine-readable progress.
#[derive(Clone, Debug, Serialize)]
pub struct ProgressEvent {
    /// Seconds since the Unix epoch.
    pub timestamp: f64,
    pub phase: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<usize>,
}

/// Receives progress events; must be cheap and thread-safe.
pub type ProgressSink = Arc<dyn Fn(&ProgressEvent) + Send + Sync>;

fn report(sink: &Option<ProgressSink>, phase: &str, objective: Option<usize>, bound: Option<usize>) {
    if let Some(f) = sink {
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64());
        f(&ProgressEvent { timestamp, phase: phase.to_string(), objective, bound });
    }
}

fn expired(opts: &SatOptions) -> bool {
    opts.solver.deadline.map_or(false, |d| Instant::now() >= d)
}

/// Delaunay plus, for every exponent `p`, the triangulation reached from
/// Delaunay by repeatedly taking the unit flip `e -> e'` that maximises
/// `sum over inputs of chi(e)^p - chi(e')^p` while that sum is positive.
/// Duplicates are dropped; the order is deterministic.
pub fn candidate_centers(inst: &Instance, powers: &[f64]) -> Result<Vec<Triangulation>, Error> {
    let d = delaunay(inst.points.clone())?;
    let climbed: Vec<Triangulation> = powers.par_iter().map(|&p| hill_climb(inst, d.clone(), p)).collect();
    let mut seen = HashSet::new();
    Ok(std::iter::once(d).chain(climbed).filter(|t| seen.insert(t.clone())).collect())
}

fn hill_climb(inst: &Instance, mut t: Triangulation, p: f64) -> Triangulation {
    let potential = |e: Edge| -> f64 { inst.inputs.iter().map(|x| (x.crossing_count(e) as f64).powf(p)).sum() };
    loop {
        let best = t
            .unit_flip_candidates()
            .into_iter()
            .map(|(r, a)| (potential(r) - potential(a), r))
            .filter(|&(gain, _)| gain > 1e-9)
            .max_by(|x, y| x.0.total_cmp(&y.0).then(y.1.cmp(&x.1)));
        match best {
            Some((_, r)) => t = t.flip(r).expect("candidate flips are valid"),
            None => return t,
        }
    }
}

/// Heuristic paths from every input to `center`.
pub fn solution_for_center(inst: &Instance, center: &Triangulation) -> Solution {
    let paths = inst.inputs.par_iter().map(|t| best_heuristic_path(t, center)).collect();
    Solution { instance_name: inst.name.clone(), center: center.clone(), paths }
}

/// Heuristic solutions, one per candidate center, and the best of them.
#[derive(Clone, Debug)]
pub struct SolutionPool {
    pub entries: Vec<Solution>,
    pub best: usize,
}

impl SolutionPool {
    fn new(entries: Vec<Solution>) -> Self {
        let best = (0..entries.len()).min_by_key(|&i| (entries[i].objective(), i)).expect("non-empty pool");
        Self { entries, best }
    }

    pub fn best(&self) -> &Solution {
        &self.entries[self.best]
    }

    pub fn into_best(mut self) -> Solution {
        self.entries.swap_remove(self.best)
    }
}

/// Pool over the candidate centers, refined once: the triangulations one
/// step before the center on the paths of the best entry become centers
/// of their own.
pub fn build_initial_solution(inst: &Instance, powers: &[f64]) -> Result<SolutionPool, Error> {
    let centers = candidate_centers(inst, powers)?;
    let mut seen: HashSet<Triangulation> = centers.iter().cloned().collect();
    let mut entries: Vec<Solution> = centers.iter().map(|c| solution_for_center(inst, c)).collect();
    let best = SolutionPool::new(entries.clone()).into_best();
    let mut refined = Vec::new();
    for p in &best.paths {
        if p.is_empty() {
            continue;
        }
        let seq = p.triangulations()?;
        let prev = seq[seq.len() - 2].clone();
        if seen.insert(prev.clone()) {
            refined.push(prev);
        }
    }
    entries.extend(refined.iter().map(|c| solution_for_center(inst, c)));
    Ok(SolutionPool::new(entries))
}

/// All `(l_1, ..., l_m)` with sum `b` and `l_i + l_j >= d(i, j)`, in
/// lexicographic order.
pub fn enumerate_length_vectors(b: usize, d: &DistanceMatrix) -> Vec<Vec<usize>> {
    let m = d.m();
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(m);
    fn min_demand(i: usize, cur: &[usize], d: &DistanceMatrix) -> usize {
        cur.iter().enumerate().map(|(j, &l)| d.get(i, j).saturating_sub(l)).max().unwrap_or(0)
    }
    fn rec(b: usize, used: usize, cur: &mut Vec<usize>, d: &DistanceMatrix, out: &mut Vec<Vec<usize>>) {
        let m = d.m();
        let i = cur.len();
        if i == m {
            if used == b {
                out.push(cur.clone());
            }
            return;
        }
        let left = b - used;
        let lo = min_demand(i, cur, d);
        for l in lo..=left {
            cur.push(l);
            // Every later vertex needs at least its demand from the prefix,
            // and every later pair needs its distance between the two.
            let rest = left - l;
            let demands: usize = (i + 1..m).map(|k| min_demand(k, cur, d)).sum();
            let pair = (i + 1..m).flat_map(|a| (a + 1..m).map(move |c| (a, c))).map(|(a, c)| d.get(a, c)).max().unwrap_or(0);
            let last_ok = i + 1 < m || rest == 0;
            if demands <= rest && pair <= rest && last_ok {
                rec(b, used + l, cur, d, out);
            }
            cur.pop();
        }
    }
    if m > 0 {
        rec(b, 0, &mut cur, d, &mut out);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SolveStatus {
    /// Proven optimal.
    Optimal,
    /// Valid, with a proven lower bound that it does not meet.
    Feasible,
    /// Valid, but no proven lower bound beyond single distances.
    Unknown,
}

#[derive(Clone, Debug)]
pub struct ExactResult {
    pub solution: Solution,
    pub status: SolveStatus,
    pub lower_bound: usize,
    pub distances: DistanceMatrix,
}

/// Best lower bound a matrix proves: the cycle-packing bound when every
/// entry is exact, otherwise the largest exact entry.
pub fn proven_lower_bound(d: &DistanceMatrix) -> usize {
    if d.all_exact() {
        return cycle_packing_lb(d);
    }
    let m = d.m();
    (0..m).flat_map(|i| (0..m).map(move |j| (i, j))).filter(|&(i, j)| d.is_exact(i, j)).map(|(i, j)| d.get(i, j)).max().unwrap_or(0)
}

#[derive(Clone, Default)]
pub struct ExactOptions {
    pub sat: SatOptions,
    pub powers: Option<Vec<f64>>,
    pub progress: Option<ProgressSink>,
}

fn checked(inst: &Instance, sol: Solution) -> Result<Solution, Error> {
    let sol = sol.compress();
    let report = sol.verify(inst, true);
    if !report.valid {
        return Err(Error::Invalid(format!(
            "internal error: produced an invalid solution: {}",
            report.first_violation.unwrap_or_default()
        )));
    }
    Ok(sol)
}

/// Minimum objective over all solutions: exact distances give the bound
/// `b`, then every length vector with sum `b` is tested until one is
/// satisfiable, raising `b` otherwise. A heuristic solution meeting `b`
/// ends the search early. A backend `UNKNOWN` or the deadline downgrades
/// the status and returns the best solution known.
pub fn exact_solve(inst: &Instance, opts: &ExactOptions) -> Result<ExactResult, Error> {
    let powers = opts.powers.as_deref().unwrap_or(&DEFAULT_POWERS);
    let best = checked(inst, build_initial_solution(inst, powers)?.into_best())?;
    report(&opts.progress, "heuristic", Some(best.objective()), None);
    let (distances, _) = distance_matrix(inst, &opts.sat)?;
    let lb = proven_lower_bound(&distances);
    report(&opts.progress, "distances", Some(best.objective()), Some(lb));
    if !distances.all_exact() {
        let status = if best.objective() <= lb { SolveStatus::Optimal } else { SolveStatus::Unknown };
        return Ok(ExactResult { solution: best, status, lower_bound: lb, distances });
    }
    let mut b = lb;
    loop {
        if best.objective() <= b {
            return Ok(ExactResult { solution: best, status: SolveStatus::Optimal, lower_bound: b, distances });
        }
        if expired(&opts.sat) {
            return Ok(ExactResult { solution: best, status: SolveStatus::Feasible, lower_bound: b, distances });
        }
        let vectors = enumerate_length_vectors(b, &distances);
        let unknown = AtomicBool::new(false);
        let found = vectors
            .par_iter()
            .map(|lengths| -> Result<Option<Solution>, Error> {
                let (cnf, vm) = build_solution_formula(inst, lengths, &opts.sat.encode)?;
                let r = solve_sat(&cnf, &opts.sat.solver)?;
                match r.status {
                    Status::Sat => Ok(Some(decode_solution(r.model.as_deref().expect("SAT carries a model"), &vm, inst)?)),
                    Status::Unsat => Ok(None),
                    Status::Unknown => {
                        unknown.store(true, Ordering::Relaxed);
                        Ok(None)
                    }
                }
            })
            .find_map_first(|r| match r {
                Ok(None) => None,
                other => Some(other),
            });
        match found {
            Some(Err(e)) => return Err(e),
            Some(Ok(Some(sol))) => {
                let sol = checked(inst, sol)?;
                // Lengths are upper bounds; b is a lower bound, so the
                // compressed objective is exactly b.
                assert_eq!(sol.objective(), b, "a solution below the proven lower bound");
                report(&opts.progress, "exact", Some(b), Some(b));
                return Ok(ExactResult { solution: sol, status: SolveStatus::Optimal, lower_bound: b, distances });
            }
            _ => {}
        }
        if unknown.load(Ordering::Relaxed) {
            return Ok(ExactResult { solution: best, status: SolveStatus::Feasible, lower_bound: b, distances });
        }
        b += 1;
        report(&opts.progress, "bound", Some(best.objective()), Some(b));
    }
}

/// Tries to shorten path `path_id` by one while every other path keeps at
/// most its length. Returns the improved, verified solution, or `None`.
pub fn improve_decrement(inst: &Instance, sol: &Solution, path_id: usize, opts: &SatOptions) -> Result<Option<Solution>, Error> {
    let mut lengths = sol.lengths();
    if lengths[path_id] == 0 {
        return Ok(None);
    }
    lengths[path_id] -= 1;
    let (cnf, vm) = build_solution_formula(inst, &lengths, &opts.encode)?;
    if vm.conflict().is_some() {
        return Ok(None);
    }
    let r = solve_sat(&cnf, &opts.solver)?;
    if r.status != Status::Sat {
        return Ok(None);
    }
    let new = checked(inst, decode_solution(r.model.as_deref().expect("SAT carries a model"), &vm, inst)?)?;
    debug_assert!(new.lengths().iter().zip(&lengths).all(|(a, b)| a <= b));
    Ok((new.objective() < sol.objective()).then_some(new))
}

/// Rebuilds the last `r` steps of one path, back to front, so that each
/// step flips as few edges as possible. Same length and endpoints.
fn sweep_path(path: &Path, r: usize, opts: &SatOptions) -> Result<Path, Error> {
    let seq = path.triangulations()?;
    let len = path.len();
    let start = &seq[0];
    let mut target = seq[len].clone();
    let mut prefix = Path::from_triangulations(&seq);
    let mut tail: Vec<ParallelFlip> = Vec::new();
    for step in 0..r.min(len) {
        if expired(opts) {
            break;
        }
        let l = len - step;
        let (cnf, vm) = build_path_formula(start, &target, l, &opts.encode)?;
        if vm.conflict().is_some() {
            break;
        }
        let cnf = add_last_step_minimization(cnf, &vm, 0, l);
        let res = if cnf.soft.is_empty() { solve_sat(&cnf, &opts.solver)? } else { solve_maxsat(&cnf, &opts.solver)? };
        if res.status != Status::Sat {
            break;
        }
        let p = decode_path(res.model.as_deref().expect("SAT carries a model"), &vm, 0)?;
        let mut flips = p.flips.clone();
        let last = flips.pop().expect("l >= 1");
        tail.push(last);
        target = Path { start: start.clone(), flips: flips.clone() }.end()?;
        prefix = Path { start: start.clone(), flips };
    }
    tail.reverse();
    let mut flips = prefix.flips;
    flips.extend(tail);
    Ok(Path { start: path.start.clone(), flips })
}

/// Trimming: sweeps the last `r` steps of every path towards fewer flips
/// near the center, then re-solves the sub-instance formed by the
/// triangulations `min(r, l_i)` steps before the center and splices the
/// sub-solution in. Never returns a worse solution.
pub fn trim_improve(inst: &Instance, sol: &Solution, r: usize, opts: &ExactOptions) -> Result<Solution, Error> {
    if r == 0 {
        return Err(Error::Invalid("trim radius must be at least 1".into()));
    }
    let swept: Vec<Path> = sol.paths.iter().map(|p| sweep_path(p, r, &opts.sat)).collect::<Result<_, _>>()?;
    let swept = Solution { paths: swept, ..sol.clone() };
    let current = match checked(inst, swept) {
        Ok(s) if s.objective() <= sol.objective() => s,
        _ => sol.clone(),
    };

    let seqs: Vec<Vec<Triangulation>> = current.paths.iter().map(Path::triangulations).collect::<Result<_, _>>()?;
    let cuts: Vec<usize> = seqs.iter().map(|s| (s.len() - 1).saturating_sub(r)).collect();
    let sub_inputs: Vec<Triangulation> = seqs.iter().zip(&cuts).map(|(s, &c)| s[c].clone()).collect();
    let sub = Instance::new(format!("{}-trim", inst.name), inst.points.clone(), sub_inputs)?;
    let res = exact_solve(&sub, opts)?;
    let sub_objective: usize = seqs.iter().zip(&cuts).map(|(s, &c)| s.len() - 1 - c).sum();
    if res.solution.objective() >= sub_objective {
        return Ok(current);
    }
    let paths = seqs
        .iter()
        .zip(&cuts)
        .zip(&res.solution.paths)
        .map(|((s, &c), inner)| {
            let mut p = Path::from_triangulations(&s[..=c]);
            p.flips.extend(inner.flips.iter().cloned());
            p
        })
        .collect();
    let spliced = Solution { instance_name: inst.name.clone(), center: res.solution.center.clone(), paths };
    let spliced = checked(inst, spliced)?;
    Ok(if spliced.objective() < current.objective() { spliced } else { current })
}

#[derive(Clone, Default)]
pub struct ImproveOptions {
    pub exact: ExactOptions,
    /// Restrict new edges to those crossing at most this many edges of the
    /// previous solution at the same position.
    pub proximity_k: Option<usize>,
    /// Trim radius; trimming runs when no single path can be shortened.
    pub trim_r: Option<usize>,
    pub seed: u64,
    /// Stop after this many successful improvements.
    pub max_rounds: Option<usize>,
}

/// Improvement loop: try to shorten paths in a seeded random order, then
/// trim, until nothing helps or the deadline passes.
pub fn improve(inst: &Instance, sol: Solution, opts: &ImproveOptions) -> Result<Solution, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best = checked(inst, sol)?;
    let mut rounds = 0;
    let progress = &opts.exact.progress;
    report(progress, "improve", Some(best.objective()), None);
    'outer: while opts.max_rounds.map_or(true, |m| rounds < m) && !expired(&opts.exact.sat) {
        let mut sat = opts.exact.sat.clone();
        if let Some(k) = opts.proximity_k {
            sat.encode.proximity = Some(Proximity::from_solution(&best, k)?);
        }
        let mut order: Vec<usize> = (0..best.paths.len()).collect();
        order.shuffle(&mut rng);
        for i in order {
            if expired(&sat) {
                break 'outer;
            }
            if let Some(better) = improve_decrement(inst, &best, i, &sat)? {
                best = better;
                rounds += 1;
                report(progress, "decrement", Some(best.objective()), None);
                continue 'outer;
            }
        }
        if let Some(r) = opts.trim_r {
            let trimmed = trim_improve(inst, &best, r, &ExactOptions { sat, ..opts.exact.clone() })?;
            if trimmed.objective() < best.objective() {
                best = trimmed;
                rounds += 1;
                report(progress, "trim", Some(best.objective()), None);
                continue;
            }
        }
        break;
    }
    Ok(best)
}

/// Heuristic pool followed by the improvement loop; also reports the best
/// lower bound the distance matrix proves.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub solution: Solution,
    pub lower_bound: usize,
    pub optimal: bool,
}

pub fn solve(inst: &Instance, opts: &ImproveOptions) -> Result<SolveReport, Error> {
    let powers = opts.exact.powers.as_deref().unwrap_or(&DEFAULT_POWERS);
    let initial = build_initial_solution(inst, powers)?.into_best();
    report(&opts.exact.progress, "heuristic", Some(initial.objective()), None);
    let (distances, _) = distance_matrix(inst, &opts.exact.sat)?;
    let lower_bound = proven_lower_bound(&distances);
    report(&opts.exact.progress, "distances", Some(initial.objective()), Some(lower_bound));
    let solution = if initial.objective() > lower_bound { improve(inst, initial, opts)? } else { checked(inst, initial)? };
    let optimal = solution.objective() == lower_bound;
    report(&opts.exact.progress, "done", Some(solution.objective()), Some(lower_bound));
    Ok(SolveReport { solution, lower_bound, optimal })
}
