//! Random and hand-built inputs shared by the generator, tests and benches.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::geometry::{Point, PointSet};
use crate::triangulation::{delaunay, Edge, ParallelFlip, Triangulation};

/// Attempts per point before giving up on a grid that is too crowded.
const MAX_POINT_RETRIES: usize = 10_000;

/// `n` points in general position on the grid `[0, 10n]^2`.
pub fn try_random_point_set<R: Rng>(rng: &mut R, n: usize) -> Option<Arc<PointSet>> {
    let side = 10 * n.max(1) as i64;
    let mut pts: Vec<Point> = Vec::with_capacity(n);
    let collinear = |pts: &[Point], q: Point| {
        pts.iter().enumerate().any(|(i, &a)| {
            a == q || pts[i + 1..].iter().any(|&b| crate::geometry::orient(a, b, q) == 0)
        })
    };
    while pts.len() < n {
        let mut placed = false;
        for _ in 0..MAX_POINT_RETRIES {
            let q = Point::new(rng.gen_range(0..=side), rng.gen_range(0..=side));
            if !collinear(&pts, q) {
                pts.push(q);
                placed = true;
                break;
            }
        }
        if !placed {
            return None;
        }
    }
    Some(Arc::new(PointSet::new(pts).expect("sampled points are in general position")))
}

pub fn random_point_set<R: Rng>(rng: &mut R, n: usize) -> Arc<PointSet> {
    try_random_point_set(rng, n).expect("grid too small for general position")
}

/// Delaunay triangulation scrambled by `flips` random unit flips.
pub fn random_triangulation<R: Rng>(points: &Arc<PointSet>, rng: &mut R, flips: usize) -> Triangulation {
    let mut t = delaunay(points.clone()).expect("at least 3 points");
    for _ in 0..flips {
        t = random_unit_flip(&t, rng);
    }
    t
}

/// Applies one uniformly chosen unit flip (identity if none exists).
pub fn random_unit_flip<R: Rng>(t: &Triangulation, rng: &mut R) -> Triangulation {
    let cands = t.unit_flip_candidates();
    match cands.choose(rng) {
        Some(&(e, _)) => t.flip(e).expect("candidate flips are valid"),
        None => t.clone(),
    }
}

/// A random non-empty parallel flip (empty only when no unit flip exists).
pub fn random_parallel_flip<R: Rng>(t: &Triangulation, rng: &mut R) -> ParallelFlip {
    let mut cands = t.unit_flip_candidates();
    cands.shuffle(rng);
    let mut removed: Vec<Edge> = Vec::new();
    let mut added = Vec::new();
    for (e, f) in cands {
        if removed.iter().all(|&r| !t.share_triangle(r, e)) && (removed.is_empty() || rng.gen_bool(0.6)) {
            removed.push(e);
            added.push(f);
        }
    }
    ParallelFlip::new(removed, added)
}

/// A convex polygon triangulated as a fan from its top vertex, together with
/// the missing segment `u v` that crosses all `k` interior fan edges.
///
/// Vertex 0 is `u`, `k + 1` is `v`, `1..=k` lie below `u v` and `k + 2` is the
/// fan apex above it.
pub fn fan_instance(k: usize) -> (Triangulation, Edge) {
    assert!(k >= 1);
    let span = 10 * (k as i64 + 1);
    // Lower chain on a parabola through u and v; strictly convex.
    let m = k as i64 + 1;
    let mut pts: Vec<Point> = (0..=m).map(|i| Point::new(10 * i, -10 * i * (m - i))).collect();
    let mut apex_y = span / 2;
    let points = loop {
        let mut cand = pts.clone();
        cand.push(Point::new(span / 2, apex_y));
        if let Ok(ps) = PointSet::new(cand) {
            break Arc::new(ps);
        }
        apex_y += 1;
    };
    pts.clear();
    let w = k as u32 + 2;
    let mut edges: Vec<Edge> = (0..=k as u32).map(|i| Edge::new(i, i + 1)).collect();
    for i in 0..=k as u32 + 1 {
        edges.push(Edge::new(i, w));
    }
    let t = Triangulation::new(points, edges).expect("fan is a triangulation");
    (t, Edge::new(0, k as u32 + 1))
}
