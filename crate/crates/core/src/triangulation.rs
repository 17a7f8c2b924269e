//! Triangulations of a fixed point set, unit and parallel flips.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use crate::error::{FlipError, TriangulationError};
use crate::geometry::{angle_cmp, incircle, PointSet, Vid};

/// Undirected edge, normalized so that `a < b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub a: Vid,
    pub b: Vid,
}

impl Edge {
    /// Normalizes the endpoint order. Panics on a loop.
    pub fn new(x: Vid, y: Vid) -> Self {
        assert_ne!(x, y, "edge endpoints must differ");
        if x < y {
            Edge { a: x, b: y }
        } else {
            Edge { a: y, b: x }
        }
    }

    pub fn has(&self, v: Vid) -> bool {
        self.a == v || self.b == v
    }

    pub fn other(&self, v: Vid) -> Vid {
        if self.a == v {
            self.b
        } else {
            self.a
        }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.a, self.b)
    }
}

/// Apexes of the triangles on either side of an edge `a -> b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
struct Adj {
    left: Option<Vid>,
    right: Option<Vid>,
}

impl Adj {
    fn replace(&mut self, old: Vid, new: Vid) {
        if self.left == Some(old) {
            self.left = Some(new);
        } else {
            debug_assert_eq!(self.right, Some(old));
            self.right = Some(new);
        }
    }
}

/// Edges above this count skip the quadratic crossing scan during
/// validation unless the face check fails.
const CROSS_SCAN_LIMIT: usize = 4096;

#[derive(Clone)]
pub struct Triangulation {
    points: Arc<PointSet>,
    adj: BTreeMap<Edge, Adj>,
    nbrs: Vec<Vec<Vid>>,
}

impl PartialEq for Triangulation {
    fn eq(&self, other: &Self) -> bool {
        self.adj.len() == other.adj.len() && self.adj.keys().eq(other.adj.keys())
    }
}

impl Eq for Triangulation {}

impl std::hash::Hash for Triangulation {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        for e in self.adj.keys() {
            e.hash(state);
        }
    }
}

impl fmt::Debug for Triangulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.adj.keys().map(|e| (e.a, e.b))).finish()
    }
}

/// Checks every triangulation invariant and builds the adjacency structure.
pub fn validate_triangulation(
    points: &Arc<PointSet>,
    edges: &[Edge],
) -> Result<Triangulation, TriangulationError> {
    Triangulation::new(points.clone(), edges.iter().copied())
}

impl Triangulation {
    pub fn new(
        points: Arc<PointSet>,
        edges: impl IntoIterator<Item = Edge>,
    ) -> Result<Self, TriangulationError> {
        let n = points.len();
        if n < 3 {
            return Err(TriangulationError::TooFewPoints(n));
        }
        let mut list: Vec<Edge> = Vec::new();
        let mut seen = HashSet::new();
        for e in edges {
            if e.a as usize >= n || e.b as usize >= n {
                return Err(TriangulationError::InvalidVertex(e.a, e.b));
            }
            if e.a == e.b {
                return Err(TriangulationError::Loop(e.a));
            }
            if !seen.insert(e) {
                return Err(TriangulationError::DuplicateEdge(e));
            }
            list.push(e);
        }
        list.sort_unstable();

        let scanned = list.len() <= CROSS_SCAN_LIMIT;
        if scanned {
            if let Some((e, f)) = find_crossing(&points, &list) {
                return Err(TriangulationError::Crossing(e, f));
            }
        }
        let hull = points.hull();
        let h = hull.len();
        let expected = 3 * n - 3 - h;
        if list.len() != expected {
            return Err(TriangulationError::EdgeCount { expected, found: list.len() });
        }
        for i in 0..h {
            let e = Edge::new(hull[i], hull[(i + 1) % h]);
            if !seen.contains(&e) {
                return Err(TriangulationError::MissingHullEdge(e));
            }
        }
        match build_faces(&points, &list, &hull) {
            Ok((adj, nbrs)) => Ok(Self { points, adj, nbrs }),
            Err(msg) => {
                if !scanned {
                    if let Some((e, f)) = find_crossing(&points, &list) {
                        return Err(TriangulationError::Crossing(e, f));
                    }
                }
                Err(TriangulationError::Face(msg))
            }
        }
    }

    pub fn points(&self) -> &Arc<PointSet> {
        &self.points
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.len()
    }

    /// Edges in sorted order.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.adj.keys().copied()
    }

    pub fn edge_vec(&self) -> Vec<Edge> {
        self.adj.keys().copied().collect()
    }

    pub fn contains(&self, e: Edge) -> bool {
        self.adj.contains_key(&e)
    }

    pub fn neighbors(&self, v: Vid) -> &[Vid] {
        &self.nbrs[v as usize]
    }

    pub fn is_hull_edge(&self, e: Edge) -> bool {
        self.adj.get(&e).map_or(false, |a| a.left.is_none() || a.right.is_none())
    }

    /// Triangles as sorted vertex triples, sorted.
    pub fn triangles(&self) -> Vec<[Vid; 3]> {
        let mut out = Vec::with_capacity(2 * self.adj.len() / 3 + 1);
        for (e, adj) in &self.adj {
            for c in [adj.left, adj.right].into_iter().flatten() {
                // Report each triangle from its smallest edge only.
                if c > e.b {
                    out.push([e.a, e.b, c]);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// The (one or two) triangles incident to `e`, as sorted triples.
    pub fn triangles_of(&self, e: Edge) -> Vec<[Vid; 3]> {
        let Some(adj) = self.adj.get(&e) else { return Vec::new() };
        [adj.left, adj.right]
            .into_iter()
            .flatten()
            .map(|c| {
                let mut t = [e.a, e.b, c];
                t.sort_unstable();
                t
            })
            .collect()
    }

    /// Apexes `(left, right)` of the triangles beside `e`, relative to the
    /// direction `e.a -> e.b`.
    pub fn apexes(&self, e: Edge) -> Option<(Option<Vid>, Option<Vid>)> {
        self.adj.get(&e).map(|a| (a.left, a.right))
    }

    /// The other diagonal of the quad around `e`, if `e` is flippable.
    pub fn flip_target(&self, e: Edge) -> Option<Edge> {
        let adj = self.adj.get(&e)?;
        let (c, d) = (adj.left?, adj.right?);
        let ps = &self.points;
        if ps.orient(c, d, e.a) * ps.orient(c, d, e.b) < 0 {
            Some(Edge::new(c, d))
        } else {
            None
        }
    }

    /// All unit flips: `(removed, added)` for every flippable edge, in edge
    /// order.
    pub fn unit_flip_candidates(&self) -> Vec<(Edge, Edge)> {
        self.adj
            .keys()
            .filter_map(|&e| self.flip_target(e).map(|t| (e, t)))
            .collect()
    }

    /// True iff the two edges bound a common triangle.
    pub fn share_triangle(&self, e: Edge, f: Edge) -> bool {
        if e == f {
            return true;
        }
        let w = if f.has(e.a) {
            e.a
        } else if f.has(e.b) {
            e.b
        } else {
            return false;
        };
        let y = f.other(w);
        self.adj
            .get(&e)
            .map_or(false, |a| a.left == Some(y) || a.right == Some(y))
    }

    fn set_directed(&mut self, x: Vid, y: Vid, left: Option<Vid>, right: Option<Vid>) {
        let e = Edge::new(x, y);
        let adj = if x < y { Adj { left, right } } else { Adj { left: right, right: left } };
        self.adj.insert(e, adj);
    }

    /// Flips a flippable edge in place, returning the inserted edge.
    fn flip_in_place(&mut self, e: Edge) -> Edge {
        let adj = self.adj.remove(&e).expect("flip of absent edge");
        let (a, b) = (e.a, e.b);
        let (c, d) = (adj.left.unwrap(), adj.right.unwrap());
        // Counter-clockwise quad a, d, b, c becomes triangles (a, d, c) and
        // (d, b, c).
        self.set_directed(d, c, Some(a), Some(b));
        self.adj.get_mut(&Edge::new(a, d)).unwrap().replace(b, c);
        self.adj.get_mut(&Edge::new(d, b)).unwrap().replace(a, c);
        self.adj.get_mut(&Edge::new(b, c)).unwrap().replace(a, d);
        self.adj.get_mut(&Edge::new(c, a)).unwrap().replace(b, d);
        self.nbrs[a as usize].retain(|&x| x != b);
        self.nbrs[b as usize].retain(|&x| x != a);
        self.nbrs[c as usize].push(d);
        self.nbrs[d as usize].push(c);
        Edge::new(c, d)
    }

    /// Applies a single unit flip, checking that it is valid.
    pub fn flip(&self, e: Edge) -> Result<Triangulation, FlipError> {
        let target = self.check_flippable(e)?;
        self.apply_parallel_flip(&ParallelFlip::new(vec![e], vec![target]), true)
    }

    fn check_flippable(&self, e: Edge) -> Result<Edge, FlipError> {
        let adj = self.adj.get(&e).ok_or(FlipError::EdgeAbsent(e))?;
        if adj.left.is_none() || adj.right.is_none() {
            return Err(FlipError::HullEdge(e));
        }
        self.flip_target(e).ok_or(FlipError::NotConvex(e))
    }

    /// Applies a parallel flip. `strict` rejects the empty flip.
    pub fn apply_parallel_flip(&self, pf: &ParallelFlip, strict: bool) -> Result<Triangulation, FlipError> {
        if pf.removed.is_empty() && pf.added.is_empty() {
            return if strict { Err(FlipError::Empty) } else { Ok(self.clone()) };
        }
        if pf.removed.len() != pf.added.len() {
            return Err(FlipError::SizeMismatch { removed: pf.removed.len(), added: pf.added.len() });
        }
        let mut seen = HashSet::new();
        for &e in pf.removed.iter().chain(&pf.added) {
            if !seen.insert(e) {
                return Err(FlipError::Duplicate(e));
            }
        }
        let mut owner: HashMap<[Vid; 3], Edge> = HashMap::new();
        let mut expected = Vec::with_capacity(pf.removed.len());
        for &e in &pf.removed {
            expected.push(self.check_flippable(e)?);
            for t in self.triangles_of(e) {
                if let Some(&f) = owner.get(&t) {
                    return Err(FlipError::SharedTriangle(f, e));
                }
                owner.insert(t, e);
            }
        }
        expected.sort_unstable();
        let mut found = pf.added.clone();
        found.sort_unstable();
        if expected != found {
            return Err(FlipError::AddedMismatch { expected, found });
        }
        let mut out = self.clone();
        for &e in &pf.removed {
            out.flip_in_place(e);
        }
        Ok(out)
    }

    /// Edges of `self` properly crossed by the segment `seg`, ordered from
    /// `seg.a` towards `seg.b`.
    pub fn crossing_edges(&self, seg: Edge) -> Vec<Edge> {
        let mut out = Vec::new();
        self.walk(seg, |e, _| out.push(e));
        out
    }

    /// Number of edges crossed by `seg`.
    pub fn crossing_count(&self, seg: Edge) -> usize {
        let mut k = 0;
        self.walk(seg, |_, _| k += 1);
        k
    }

    /// Walks the triangles crossed by `seg` from `seg.a` to `seg.b`. For each
    /// crossed edge calls `visit(edge, left_endpoint)` where `left_endpoint`
    /// is the endpoint strictly left of the directed segment.
    pub(crate) fn walk(&self, seg: Edge, mut visit: impl FnMut(Edge, Vid)) {
        if self.contains(seg) {
            return;
        }
        let ps = &self.points;
        let (u, v) = (seg.a, seg.b);
        // Find the triangle at u whose opposite edge the segment crosses.
        let mut start = None;
        for &w in self.neighbors(u) {
            let adj = self.adj[&Edge::new(u, w)];
            for x in [adj.left, adj.right].into_iter().flatten() {
                if x != v && w != v && ps.cross(u, v, w, x) {
                    start = Some((w, x));
                    break;
                }
            }
            if start.is_some() {
                break;
            }
        }
        let Some((w, x)) = start else { return };
        let (mut l, mut r) = if ps.orient(u, v, w) > 0 { (w, x) } else { (x, w) };
        let mut prev = u;
        loop {
            let e = Edge::new(l, r);
            visit(e, l);
            let adj = self.adj[&e];
            let y = match (adj.left, adj.right) {
                (Some(p), Some(q)) => {
                    if p == prev {
                        q
                    } else {
                        p
                    }
                }
                _ => unreachable!("segment between points of S cannot leave the hull"),
            };
            if y == v {
                return;
            }
            prev = if ps.orient(u, v, y) > 0 {
                std::mem::replace(&mut l, y)
            } else {
                std::mem::replace(&mut r, y)
            };
        }
    }

    /// Edges present in both triangulations.
    pub fn common_edges(&self, other: &Triangulation) -> Vec<Edge> {
        self.adj.keys().filter(|e| other.contains(**e)).copied().collect()
    }
}

fn find_crossing(ps: &PointSet, edges: &[Edge]) -> Option<(Edge, Edge)> {
    for (i, e) in edges.iter().enumerate() {
        for f in &edges[i + 1..] {
            if ps.cross(e.a, e.b, f.a, f.b) {
                return Some((*e, *f));
            }
        }
    }
    None
}

type Faces = (BTreeMap<Edge, Adj>, Vec<Vec<Vid>>);

/// Traces the faces of the rotation system induced by the straight-line
/// embedding. Valid iff every bounded face is a counter-clockwise triangle
/// and the single unbounded face is the hull.
fn build_faces(ps: &PointSet, edges: &[Edge], hull: &[Vid]) -> Result<Faces, String> {
    let n = ps.len();
    let mut nbrs: Vec<Vec<Vid>> = vec![Vec::new(); n];
    for e in edges {
        nbrs[e.a as usize].push(e.b);
        nbrs[e.b as usize].push(e.a);
    }
    let mut pos: HashMap<(Vid, Vid), usize> = HashMap::with_capacity(2 * edges.len());
    for (v, list) in nbrs.iter_mut().enumerate() {
        if list.is_empty() {
            return Err(format!("vertex {v} is isolated"));
        }
        let o = ps.point(v as Vid);
        list.sort_by(|&x, &y| angle_cmp(o, ps.point(x), ps.point(y)));
        for (i, &w) in list.iter().enumerate() {
            pos.insert((v as Vid, w), i);
        }
    }
    // Next half-edge on the face left of x -> y: from y, turn to the
    // neighbour immediately clockwise of x.
    let next = |x: Vid, y: Vid| -> Vid {
        let list = &nbrs[y as usize];
        let i = pos[&(y, x)];
        list[(i + list.len() - 1) % list.len()]
    };
    let mut adj: BTreeMap<Edge, Adj> = edges.iter().map(|&e| (e, Adj::default())).collect();
    let mut visited: HashSet<(Vid, Vid)> = HashSet::with_capacity(2 * edges.len());
    let mut outer = 0usize;
    let mut triangles = 0usize;
    for e in edges {
        for (x, y) in [(e.a, e.b), (e.b, e.a)] {
            if visited.contains(&(x, y)) {
                continue;
            }
            let mut face = Vec::with_capacity(3);
            let (mut p, mut q) = (x, y);
            loop {
                visited.insert((p, q));
                face.push(p);
                let r = next(p, q);
                p = q;
                q = r;
                if (p, q) == (x, y) {
                    break;
                }
                if face.len() > n {
                    return Err("face walk does not close".into());
                }
            }
            if face.len() == 3 && ps.orient(face[0], face[1], face[2]) > 0 {
                triangles += 1;
                for i in 0..3 {
                    let (s, t, apex) = (face[i], face[(i + 1) % 3], face[(i + 2) % 3]);
                    let slot = adj.get_mut(&Edge::new(s, t)).unwrap();
                    let side = if s < t { &mut slot.left } else { &mut slot.right };
                    if side.replace(apex).is_some() {
                        return Err(format!("edge ({s}, {t}) has two faces on one side"));
                    }
                }
            } else {
                outer += 1;
                if outer > 1 || face.len() != hull.len() {
                    return Err(format!("non-triangular face through {:?}", &face[..face.len().min(8)]));
                }
            }
        }
    }
    let h = hull.len();
    if outer != 1 || triangles != 2 * n - h - 2 {
        return Err(format!("{triangles} triangles, expected {}", 2 * n - h - 2));
    }
    Ok((adj, nbrs))
}

/// Simultaneous unit flips. Both lists are kept sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct ParallelFlip {
    pub removed: Vec<Edge>,
    pub added: Vec<Edge>,
}

impl ParallelFlip {
    pub fn new(mut removed: Vec<Edge>, mut added: Vec<Edge>) -> Self {
        removed.sort_unstable();
        added.sort_unstable();
        Self { removed, added }
    }

    /// The step from `from` to `to`, read off the edge difference.
    pub fn between(from: &Triangulation, to: &Triangulation) -> Self {
        let removed = from.edges().filter(|e| !to.contains(*e)).collect();
        let added = to.edges().filter(|e| !from.contains(*e)).collect();
        Self { removed, added }
    }

    pub fn is_empty(&self) -> bool {
        self.removed.is_empty() && self.added.is_empty()
    }

    pub fn len(&self) -> usize {
        self.removed.len()
    }

    pub fn reversed(&self) -> Self {
        Self { removed: self.added.clone(), added: self.removed.clone() }
    }
}

/// A start triangulation and a sequence of parallel flips.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Path {
    pub start: Triangulation,
    pub flips: Vec<ParallelFlip>,
}

impl Path {
    pub fn empty(start: Triangulation) -> Self {
        Self { start, flips: Vec::new() }
    }

    /// Number of steps, stationary ones included.
    pub fn len(&self) -> usize {
        self.flips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flips.is_empty()
    }

    /// All intermediate triangulations, start and end included.
    pub fn triangulations(&self) -> Result<Vec<Triangulation>, FlipError> {
        let mut out = Vec::with_capacity(self.flips.len() + 1);
        out.push(self.start.clone());
        for f in &self.flips {
            let next = out.last().unwrap().apply_parallel_flip(f, false)?;
            out.push(next);
        }
        Ok(out)
    }

    pub fn end(&self) -> Result<Triangulation, FlipError> {
        let mut t = self.start.clone();
        for f in &self.flips {
            t = t.apply_parallel_flip(f, false)?;
        }
        Ok(t)
    }

    /// Drops stationary steps.
    pub fn compress(mut self) -> Self {
        self.flips.retain(|f| !f.is_empty());
        self
    }

    /// The same path walked backwards.
    pub fn reversed(&self) -> Result<Self, FlipError> {
        let end = self.end()?;
        Ok(Self { start: end, flips: self.flips.iter().rev().map(ParallelFlip::reversed).collect() })
    }

    /// Builds a path from consecutive triangulations.
    pub fn from_triangulations(seq: &[Triangulation]) -> Self {
        let flips = seq.windows(2).map(|w| ParallelFlip::between(&w[0], &w[1])).collect();
        Self { start: seq[0].clone(), flips }
    }
}

/// Any triangulation, by a sweep over the lexicographically sorted points.
pub fn sweep_triangulation(points: Arc<PointSet>) -> Result<Triangulation, TriangulationError> {
    let n = points.len();
    if n < 3 {
        return Err(TriangulationError::TooFewPoints(n));
    }
    let ps = &points;
    let mut ids: Vec<Vid> = (0..n as Vid).collect();
    ids.sort_by_key(|&v| ps.point(v));
    let mut edges = Vec::with_capacity(3 * n);
    let (a, b, c) = (ids[0], ids[1], ids[2]);
    edges.extend([Edge::new(a, b), Edge::new(b, c), Edge::new(a, c)]);
    // Counter-clockwise hull cycle.
    let mut hull = if ps.orient(a, b, c) > 0 { vec![a, b, c] } else { vec![a, c, b] };
    for &p in &ids[3..] {
        let k = hull.len();
        let visible: Vec<bool> = (0..k).map(|i| ps.orient(hull[i], hull[(i + 1) % k], p) < 0).collect();
        // Visible edges form one cyclic run; find where it starts.
        let first = (0..k).find(|&i| visible[i] && !visible[(i + k - 1) % k]).expect("new point sees the hull");
        let mut last = first;
        while visible[(last + 1) % k] {
            last = (last + 1) % k;
        }
        // Chain vertices hull[first] ..= hull[last + 1].
        let mut i = first;
        loop {
            edges.push(Edge::new(hull[i], p));
            if i == (last + 1) % k {
                break;
            }
            i = (i + 1) % k;
        }
        let mut new_hull = Vec::with_capacity(k + 1);
        let mut j = (last + 1) % k;
        loop {
            new_hull.push(hull[j]);
            if j == first {
                break;
            }
            j = (j + 1) % k;
        }
        new_hull.push(p);
        hull = new_hull;
    }
    Triangulation::new(points.clone(), edges)
}

/// The Delaunay triangulation. Cocircular quads take the diagonal with the
/// smaller `(min id, max id)` pair.
pub fn delaunay(points: Arc<PointSet>) -> Result<Triangulation, TriangulationError> {
    let mut t = sweep_triangulation(points)?;
    let mut stack: Vec<Edge> = t.edges().collect();
    while let Some(e) = stack.pop() {
        if !t.contains(e) || !is_illegal(&t, e) {
            continue;
        }
        let adj = t.adj[&e];
        let (c, d) = (adj.left.unwrap(), adj.right.unwrap());
        t.flip_in_place(e);
        stack.extend([Edge::new(e.a, c), Edge::new(c, e.b), Edge::new(e.b, d), Edge::new(d, e.a)]);
    }
    Ok(t)
}

fn is_illegal(t: &Triangulation, e: Edge) -> bool {
    let Some(target) = t.flip_target(e) else { return false };
    let adj = t.adj[&e];
    let ps = &t.points;
    let (c, d) = (adj.left.unwrap(), adj.right.unwrap());
    // (a, b, c) is counter-clockwise since c is left of a -> b.
    match incircle(ps.point(e.a), ps.point(e.b), ps.point(c), ps.point(d)) {
        1 => true,
        0 => target < e,
        _ => false,
    }
}

/// True iff no point lies strictly inside the circumcircle of any triangle.
pub fn is_delaunay(t: &Triangulation) -> bool {
    let ps = t.points();
    t.triangles().iter().all(|&[a, b, c]| {
        let (a, b, c) = if ps.orient(a, b, c) > 0 { (a, b, c) } else { (a, c, b) };
        (0..ps.len() as Vid)
            .filter(|&p| p != a && p != b && p != c)
            .all(|p| incircle(ps.point(a), ps.point(b), ps.point(c), ps.point(p)) <= 0)
    })
}
