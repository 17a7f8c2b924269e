//! SAT-free short paths between two triangulations.
//!
//! Each step builds the conflict graph of the improving unit flips (two
//! flips conflict when their removed edges bound a common triangle) and
//! takes a greedy maximal independent set of it as one parallel flip.

use std::collections::HashMap;

use crate::error::Error;
use crate::triangulation::{Edge, ParallelFlip, Path, Triangulation};

/// Penalty per target edge; missing entries count as 1.
pub type EdgePenalty = HashMap<Edge, u64>;

/// Default number of squeaky-wheel rounds.
pub const DEFAULT_SQUEAKY_ITERS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FlipVertex {
    pub removed: Edge,
    pub added: Edge,
    pub weight: i64,
}

/// Improving unit flips and the pairs of them that share a triangle.
#[derive(Clone, Debug, Default)]
pub struct FlipConflictGraph {
    pub vertices: Vec<FlipVertex>,
    pub adj: Vec<Vec<usize>>,
}

fn penalised_crossings(seg: Edge, target: &Triangulation, pen: &EdgePenalty) -> i64 {
    let mut total = 0;
    target.walk(seg, |e, _| total += pen.get(&e).copied().unwrap_or(1) as i64);
    total
}

/// `sum over e' in target of pen(e') * chi(e', t)`; zero iff `t == target`.
pub fn crossing_potential(t: &Triangulation, target: &Triangulation, pen: &EdgePenalty) -> i64 {
    t.edges().map(|e| penalised_crossings(e, target, pen)).sum()
}

/// Conflict graph of the unit flips of `t` with positive weight, where the
/// weight is the penalised crossings with `target` of the removed edge minus
/// those of the added edge.
pub fn flip_conflict_graph(t: &Triangulation, target: &Triangulation, pen: &EdgePenalty) -> FlipConflictGraph {
    let vertices: Vec<FlipVertex> = t
        .unit_flip_candidates()
        .into_iter()
        .filter_map(|(removed, added)| {
            let weight = penalised_crossings(removed, target, pen) - penalised_crossings(added, target, pen);
            (weight > 0).then_some(FlipVertex { removed, added, weight })
        })
        .collect();
    let k = vertices.len();
    let mut adj = vec![Vec::new(); k];
    for i in 0..k {
        for j in i + 1..k {
            if t.share_triangle(vertices[i].removed, vertices[j].removed) {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    FlipConflictGraph { vertices, adj }
}

/// Greedy maximal independent set: highest weight first, then lowest
/// degree, then smallest removed edge.
pub fn greedy_independent_set(g: &FlipConflictGraph) -> Vec<usize> {
    let mut order: Vec<usize> = (0..g.vertices.len()).collect();
    order.sort_by_key(|&i| (-g.vertices[i].weight, g.adj[i].len(), g.vertices[i].removed));
    let mut marked = vec![false; order.len()];
    let mut chosen = Vec::new();
    for i in order {
        if marked[i] {
            continue;
        }
        chosen.push(i);
        marked[i] = true;
        for &j in &g.adj[i] {
            marked[j] = true;
        }
    }
    chosen
}

/// The unit flip whose removed edge crosses the most more edges of
/// `target` than its added edge, ties to the smallest removed edge.
fn best_unit_flip(t: &Triangulation, target: &Triangulation) -> Option<ParallelFlip> {
    let unit = EdgePenalty::new();
    t.unit_flip_candidates()
        .into_iter()
        .map(|(r, a)| (penalised_crossings(r, target, &unit) - penalised_crossings(a, target, &unit), r, a))
        .filter(|&(w, _, _)| w > 0)
        .min_by_key(|&(w, r, _)| (-w, r))
        .map(|(_, r, a)| ParallelFlip::new(vec![r], vec![a]))
}

/// One step and whether it had to fall back to a single unweighted flip.
fn step(t: &Triangulation, target: &Triangulation, pen: &EdgePenalty) -> Result<(ParallelFlip, bool), Error> {
    if t == target {
        return Err(Error::Invalid("triangulation already equals the target".into()));
    }
    let g = flip_conflict_graph(t, target, pen);
    let chosen = greedy_independent_set(&g);
    if chosen.is_empty() {
        // Some unit flip always reduces the unweighted crossing count.
        let pf = best_unit_flip(t, target).ok_or_else(|| Error::Invalid("no improving unit flip".into()))?;
        return Ok((pf, true));
    }
    let removed = chosen.iter().map(|&i| g.vertices[i].removed).collect();
    let added = chosen.iter().map(|&i| g.vertices[i].added).collect();
    Ok((ParallelFlip::new(removed, added), false))
}

/// One greedy parallel flip from `t` towards `target`.
pub fn greedy_parallel_step(t: &Triangulation, target: &Triangulation, pen: &EdgePenalty) -> Result<ParallelFlip, Error> {
    step(t, target, pen).map(|(pf, _)| pf)
}

/// Greedy steps under `pen` until `target` is reached. A fallback step
/// switches the rest of the run to unit penalties, under which every step
/// lowers the crossing potential.
fn greedy_path_with(t0: &Triangulation, target: &Triangulation, pen: &EdgePenalty) -> Path {
    let unit = EdgePenalty::new();
    let mut pen = pen;
    let mut t = t0.clone();
    let mut flips = Vec::new();
    while t != *target {
        let (pf, fell_back) = step(&t, target, pen).expect("an improving flip exists while t != target");
        if fell_back {
            pen = &unit;
        }
        t = t.apply_parallel_flip(&pf, true).expect("independent improving flips form a parallel flip");
        flips.push(pf);
    }
    Path { start: t0.clone(), flips }
}

pub fn greedy_parallel_path(t0: &Triangulation, target: &Triangulation) -> Path {
    greedy_path_with(t0, target, &EdgePenalty::new())
}

/// Repeated greedy runs; after each run the target edges inserted in its
/// last step get their penalty raised. Stops after `max_iters` runs or as
/// soon as a run is longer than the previous one. Returns the shortest run.
pub fn squeaky_wheel_path(t0: &Triangulation, target: &Triangulation, max_iters: usize) -> Path {
    let mut pen: EdgePenalty = target.edges().map(|e| (e, 1)).collect();
    let mut best: Option<Path> = None;
    let mut prev_len = usize::MAX;
    for _ in 0..max_iters.max(1) {
        let path = greedy_path_with(t0, target, &pen);
        let len = path.len();
        if best.as_ref().map_or(true, |b| len < b.len()) {
            best = Some(path.clone());
        }
        if len == 0 || len > prev_len {
            break;
        }
        prev_len = len;
        let seq = path.triangulations().expect("greedy paths are valid");
        let penultimate = &seq[seq.len() - 2];
        for e in target.edges() {
            if !penultimate.contains(e) {
                *pen.get_mut(&e).expect("penalties cover the target") += 1;
            }
        }
    }
    best.expect("at least one run")
}

/// Shortest of greedy and squeaky wheel, each run forwards and backwards.
/// Ties go to the earlier of greedy forward, greedy backward, squeaky
/// forward, squeaky backward.
pub fn best_heuristic_path(t0: &Triangulation, target: &Triangulation) -> Path {
    let back = |p: Path| p.reversed().expect("greedy paths are valid");
    let ((gf, gb), (sf, sb)) = rayon::join(
        || rayon::join(|| greedy_parallel_path(t0, target), || back(greedy_parallel_path(target, t0))),
        || {
            rayon::join(
                || squeaky_wheel_path(t0, target, DEFAULT_SQUEAKY_ITERS),
                || back(squeaky_wheel_path(target, t0, DEFAULT_SQUEAKY_ITERS)),
            )
        },
    );
    [gf, gb, sf, sb].into_iter().min_by_key(Path::len).expect("four runs")
}
