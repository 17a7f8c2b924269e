//! Exact integer geometric predicates.
//!
//! All predicates work on `i64` coordinates and never round. Small inputs
//! take an `i128` fast path; anything that could overflow falls back to
//! arbitrary precision integers.

use std::cmp::Ordering;
use std::collections::HashSet;

use num_bigint::BigInt;
use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// Vertex id: an index into a [`PointSet`].
pub type Vid = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Point {
    pub x: i64,
    pub y: i64,
}

impl Point {
    pub const fn new(x: i64, y: i64) -> Self {
        Self { x, y }
    }
}

impl From<(i64, i64)> for Point {
    fn from((x, y): (i64, i64)) -> Self {
        Point::new(x, y)
    }
}

const ORIENT_FAST_LIMIT: i64 = 1 << 62;
const INCIRCLE_FAST_LIMIT: i64 = 1 << 29;

fn within(limit: i64, pts: &[Point]) -> bool {
    pts.iter()
        .all(|p| p.x > -limit && p.x < limit && p.y > -limit && p.y < limit)
}

fn sign_of(v: i128) -> i8 {
    v.signum() as i8
}

fn big_sign(v: &BigInt) -> i8 {
    if v.is_positive() {
        1
    } else if v.is_negative() {
        -1
    } else {
        0
    }
}

/// Orientation of `r` relative to the directed line `p -> q`.
///
/// `+1` when `r` is strictly to the left, `-1` strictly to the right and `0`
/// when the three points are collinear.
pub fn orient(p: Point, q: Point, r: Point) -> i8 {
    if within(ORIENT_FAST_LIMIT, &[p, q, r]) {
        let (px, py) = (p.x as i128, p.y as i128);
        let det = (q.x as i128 - px) * (r.y as i128 - py) - (q.y as i128 - py) * (r.x as i128 - px);
        sign_of(det)
    } else {
        let b = |v: i64| BigInt::from(v);
        let det = (b(q.x) - b(p.x)) * (b(r.y) - b(p.y)) - (b(q.y) - b(p.y)) * (b(r.x) - b(p.x));
        big_sign(&det)
    }
}

/// In-circle test. For a counter-clockwise triangle `a, b, c` returns `+1`
/// when `d` lies strictly inside the circumcircle, `0` on it, `-1` outside.
pub fn incircle(a: Point, b: Point, c: Point, d: Point) -> i8 {
    if within(INCIRCLE_FAST_LIMIT, &[a, b, c, d]) {
        let row = |p: Point| {
            let dx = (p.x - d.x) as i128;
            let dy = (p.y - d.y) as i128;
            (dx, dy, dx * dx + dy * dy)
        };
        let (ax, ay, al) = row(a);
        let (bx, by, bl) = row(b);
        let (cx, cy, cl) = row(c);
        let det = al * (bx * cy - cx * by) - bl * (ax * cy - cx * ay) + cl * (ax * by - bx * ay);
        sign_of(det)
    } else {
        let row = |p: Point| {
            let dx = BigInt::from(p.x) - BigInt::from(d.x);
            let dy = BigInt::from(p.y) - BigInt::from(d.y);
            let l = &dx * &dx + &dy * &dy;
            (dx, dy, l)
        };
        let (ax, ay, al) = row(a);
        let (bx, by, bl) = row(b);
        let (cx, cy, cl) = row(c);
        let det = al * (&bx * &cy - &cx * &by) - bl * (&ax * &cy - &cx * &ay)
            + cl * (&ax * &by - &bx * &ay);
        big_sign(&det)
    }
}

/// True iff the open segments `ab` and `cd` share a point.
///
/// Touching at an endpoint is not a crossing. Collinear segments that overlap
/// in more than a point do cross.
pub fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0 {
        return o1 != o2 && o3 != o4;
    }
    if o1 == 0 && o2 == 0 {
        // Collinear: compare along the dominant axis.
        let key = |p: Point| if a.x != b.x { p.x } else { p.y };
        let (lo1, hi1) = (key(a).min(key(b)), key(a).max(key(b)));
        let (lo2, hi2) = (key(c).min(key(d)), key(c).max(key(d)));
        return lo1.max(lo2) < hi1.min(hi2);
    }
    // Exactly one endpoint on the other segment's line: any common point is
    // that endpoint, which is not on its own open segment.
    false
}

/// Counter-clockwise angular order of `a` and `b` around `o`, starting at the
/// direction of the positive x axis.
pub(crate) fn angle_cmp(o: Point, a: Point, b: Point) -> Ordering {
    let half = |p: Point| if p.y > o.y || (p.y == o.y && p.x > o.x) { 0 } else { 1 };
    half(a).cmp(&half(b)).then_with(|| 0.cmp(&orient(o, a, b)))
}

/// An ordered set of points in general position. Index = vertex id.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PointSet {
    points: Vec<Point>,
}

impl PointSet {
    /// Validates distinctness and general position (no three collinear).
    pub fn new(points: Vec<Point>) -> Result<Self, GeometryError> {
        if points.len() > u32::MAX as usize {
            return Err(GeometryError::TooManyPoints(points.len()));
        }
        let mut seen = HashSet::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            if !seen.insert(*p) {
                let j = points.iter().position(|q| q == p).unwrap();
                return Err(GeometryError::DuplicatePoint(j as Vid, i as Vid));
            }
        }
        // Collinear triples: from each point, two others in the same or
        // opposite direction share a reduced direction vector.
        for (i, p) in points.iter().enumerate() {
            let mut dirs: std::collections::HashMap<(i128, i128), usize> = Default::default();
            for (j, q) in points.iter().enumerate() {
                if i == j {
                    continue;
                }
                let mut dx = q.x as i128 - p.x as i128;
                let mut dy = q.y as i128 - p.y as i128;
                let g = gcd(dx.unsigned_abs(), dy.unsigned_abs()) as i128;
                dx /= g;
                dy /= g;
                if dx < 0 || (dx == 0 && dy < 0) {
                    dx = -dx;
                    dy = -dy;
                }
                if let Some(&k) = dirs.get(&(dx, dy)) {
                    let mut t = [i as Vid, k as Vid, j as Vid];
                    t.sort_unstable();
                    return Err(GeometryError::Collinear(t[0], t[1], t[2]));
                }
                dirs.insert((dx, dy), j);
            }
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn point(&self, v: Vid) -> Point {
        self.points[v as usize]
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    #[inline]
    pub fn orient(&self, a: Vid, b: Vid, c: Vid) -> i8 {
        orient(self.point(a), self.point(b), self.point(c))
    }

    #[inline]
    pub fn cross(&self, a: Vid, b: Vid, c: Vid, d: Vid) -> bool {
        segments_cross(self.point(a), self.point(b), self.point(c), self.point(d))
    }

    /// Convex hull vertices in counter-clockwise order, starting from the
    /// lexicographically smallest point.
    pub fn hull(&self) -> Vec<Vid> {
        let mut ids: Vec<Vid> = (0..self.points.len() as Vid).collect();
        ids.sort_by_key(|&v| self.point(v));
        if ids.len() < 3 {
            return ids;
        }
        let mut lower: Vec<Vid> = Vec::new();
        for &v in &ids {
            while lower.len() >= 2 && self.orient(lower[lower.len() - 2], lower[lower.len() - 1], v) <= 0 {
                lower.pop();
            }
            lower.push(v);
        }
        let mut upper: Vec<Vid> = Vec::new();
        for &v in ids.iter().rev() {
            while upper.len() >= 2 && self.orient(upper[upper.len() - 2], upper[upper.len() - 1], v) <= 0 {
                upper.pop();
            }
            upper.push(v);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        lower
    }

    /// True iff `p` lies strictly inside triangle `a b c` (any orientation).
    pub fn in_triangle(&self, a: Vid, b: Vid, c: Vid, p: Vid) -> bool {
        let o = self.orient(a, b, c);
        o != 0 && self.orient(a, b, p) == o && self.orient(b, c, p) == o && self.orient(c, a, p) == o
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.max(1)
}

/// An empty strictly convex quadrilateral `u, u2, v, v2` (cyclic order).
///
/// Canonical form: `u` is the smallest id of the four, `v` is the vertex
/// opposite to `u`, and `u2 < v2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Quad {
    pub u: Vid,
    pub u2: Vid,
    pub v: Vid,
    pub v2: Vid,
}

impl Quad {
    /// Builds the canonical quad from a diagonal `(a, b)` and the two
    /// vertices on either side of it.
    pub fn from_diagonal(a: Vid, b: Vid, c: Vid, d: Vid) -> Self {
        // The two diagonals are {a, b} and {c, d}.
        let (mut u, mut v, mut x, mut y) = (a, b, c, d);
        if c.min(d) < a.min(b) {
            std::mem::swap(&mut u, &mut x);
            std::mem::swap(&mut v, &mut y);
        }
        if v < u {
            std::mem::swap(&mut u, &mut v);
        }
        let (u2, v2) = if x < y { (x, y) } else { (y, x) };
        Quad { u, u2, v, v2 }
    }

    /// The diagonal through `u`.
    pub fn diagonal(&self) -> (Vid, Vid) {
        (self.u.min(self.v), self.u.max(self.v))
    }

    /// The diagonal through `u2`.
    pub fn other_diagonal(&self) -> (Vid, Vid) {
        (self.u2, self.v2)
    }

    pub fn vertices(&self) -> [Vid; 4] {
        [self.u, self.u2, self.v, self.v2]
    }
}

/// Every empty convex quadrilateral of `ps`, each reported once in canonical
/// form and sorted.
///
/// For each candidate diagonal the empty triangles on either side are
/// collected; a pair of them forms a convex quad iff the opposite apexes are
/// separated by the diagonal line and the other diagonal crosses it.
pub fn enumerate_empty_convex_quads(ps: &PointSet) -> Vec<Quad> {
    let n = ps.len() as Vid;
    let mut out = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            let mut left = Vec::new();
            let mut right = Vec::new();
            for w in 0..n {
                if w == a || w == b {
                    continue;
                }
                match ps.orient(a, b, w) {
                    1 => left.push(w),
                    -1 => right.push(w),
                    _ => {}
                }
            }
            let empty = |side: &[Vid], w: Vid| side.iter().all(|&p| p == w || !ps.in_triangle(a, b, w, p));
            let left_ok: Vec<Vid> = left.iter().copied().filter(|&w| empty(&left, w)).collect();
            let right_ok: Vec<Vid> = right.iter().copied().filter(|&w| empty(&right, w)).collect();
            for &c in &left_ok {
                for &d in &right_ok {
                    if !ps.cross(a, b, c, d) {
                        continue;
                    }
                    // Each quad is seen from both diagonals; keep the one
                    // through its smallest vertex.
                    let q = Quad::from_diagonal(a, b, c, d);
                    if q.diagonal() == (a, b) {
                        out.push(q);
                    }
                }
            }
        }
    }
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: i64, y: i64) -> Point {
        Point::new(x, y)
    }

    #[test]
    fn orient_examples() {
        assert_eq!(orient(p(0, 0), p(1, 0), p(0, 1)), 1);
        assert_eq!(orient(p(0, 0), p(1, 0), p(2, 0)), 0);
        assert_eq!(orient(p(0, 0), p(0, 1), p(1, 0)), -1);
    }

    #[test]
    fn orient_large_coordinates_exact() {
        let big = i64::MAX;
        assert_eq!(orient(p(-big, -big), p(big, big), p(0, 0)), 0);
        assert_eq!(orient(p(-big, -big), p(big, big), p(0, 1)), 1);
        assert_eq!(orient(p(-big, -big), p(big, big), p(1, 0)), -1);
    }

    #[test]
    fn incircle_square() {
        // Cocircular corners and a strictly inside centre.
        assert_eq!(incircle(p(0, 0), p(10, 0), p(10, 10), p(0, 10)), 0);
        assert_eq!(incircle(p(0, 0), p(10, 0), p(10, 10), p(5, 5)), 1);
        assert_eq!(incircle(p(0, 0), p(10, 0), p(10, 10), p(20, 20)), -1);
        let s = 1i64 << 40;
        assert_eq!(incircle(p(0, 0), p(s, 0), p(s, s), p(0, s)), 0);
        assert_eq!(incircle(p(0, 0), p(s, 0), p(s, s), p(1, s)), 1);
    }

    #[test]
    fn crossing_examples() {
        assert!(segments_cross(p(0, 0), p(2, 2), p(0, 2), p(2, 0)));
        assert!(!segments_cross(p(0, 0), p(1, 1), p(1, 1), p(2, 0)));
        assert!(!segments_cross(p(0, 0), p(1, 0), p(0, 1), p(1, 1)));
        assert!(segments_cross(p(0, 0), p(4, 0), p(2, 0), p(6, 0)));
        assert!(!segments_cross(p(0, 0), p(2, 0), p(2, 0), p(6, 0)));
        // T-junction: touching point is an endpoint of the second segment.
        assert!(!segments_cross(p(0, 0), p(4, 0), p(2, 0), p(2, 3)));
    }

    #[test]
    fn point_set_rejects_degenerate_input() {
        assert!(matches!(
            PointSet::new(vec![p(0, 0), p(1, 0), p(0, 0)]),
            Err(GeometryError::DuplicatePoint(0, 2))
        ));
        assert!(matches!(
            PointSet::new(vec![p(0, 0), p(5, 1), p(2, 2), p(4, 4)]),
            Err(GeometryError::Collinear(0, 2, 3))
        ));
        assert!(PointSet::new(vec![p(0, 0), p(1, 0), p(0, 1), p(3, 5)]).is_ok());
    }

    #[test]
    fn hull_ccw() {
        let ps = PointSet::new(vec![p(0, 0), p(10, 0), p(10, 10), p(0, 10), p(5, 4)]).unwrap();
        assert_eq!(ps.hull(), vec![0, 1, 2, 3]);
    }

    fn brute_quads(ps: &PointSet) -> Vec<[Vid; 4]> {
        let n = ps.len() as Vid;
        let mut out = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                for c in b + 1..n {
                    for d in c + 1..n {
                        let set = [a, b, c, d];
                        // Convex iff some pairing of diagonals crosses.
                        let convex = ps.cross(a, b, c, d) || ps.cross(a, c, b, d) || ps.cross(a, d, b, c);
                        if !convex {
                            continue;
                        }
                        let empty = (0..n).filter(|w| !set.contains(w)).all(|w| {
                            !(ps.in_triangle(a, b, c, w)
                                || ps.in_triangle(a, b, d, w)
                                || ps.in_triangle(a, c, d, w)
                                || ps.in_triangle(b, c, d, w))
                        });
                        if empty {
                            out.push(set);
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn quads_small_examples() {
        let convex4 = PointSet::new(vec![p(0, 0), p(4, 0), p(4, 4), p(0, 4)]).unwrap();
        assert_eq!(enumerate_empty_convex_quads(&convex4).len(), 1);
        let inner = PointSet::new(vec![p(0, 0), p(10, 0), p(0, 10), p(2, 3)]).unwrap();
        assert!(enumerate_empty_convex_quads(&inner).is_empty());
        let pentagon = PointSet::new(vec![p(0, 0), p(10, 0), p(13, 8), p(5, 14), p(-3, 8)]).unwrap();
        let qs = enumerate_empty_convex_quads(&pentagon);
        assert_eq!(qs.len(), brute_quads(&pentagon).len());
        assert_eq!(qs.len(), 5);
    }

    #[test]
    fn quad_canonical_form() {
        let q = Quad::from_diagonal(3, 1, 4, 2);
        assert_eq!(q, Quad { u: 1, u2: 2, v: 3, v2: 4 });
        let q2 = Quad::from_diagonal(4, 2, 1, 3);
        assert_eq!(q, q2);
    }

    #[test]
    fn quads_match_brute_force_random() {
        use rand::{Rng, SeedableRng};
        for seed in 0..20u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut pts = Vec::new();
            while pts.len() < 8 {
                let q = p(rng.gen_range(0..40), rng.gen_range(0..40));
                let mut cand = pts.clone();
                cand.push(q);
                if PointSet::new(cand.clone()).is_ok() {
                    pts = cand;
                }
            }
            let ps = PointSet::new(pts).unwrap();
            let qs = enumerate_empty_convex_quads(&ps);
            let mut got: Vec<[Vid; 4]> = qs
                .iter()
                .map(|q| {
                    let mut v = q.vertices();
                    v.sort_unstable();
                    v
                })
                .collect();
            got.sort_unstable();
            let mut want = brute_quads(&ps);
            want.sort_unstable();
            assert_eq!(got, want, "seed {seed}");
            for q in qs {
                assert!(ps.cross(q.u, q.v, q.u2, q.v2));
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn orient_antisymmetric(ax in -1000i64..1000, ay in -1000i64..1000, bx in -1000i64..1000,
                                by in -1000i64..1000, cx in -1000i64..1000, cy in -1000i64..1000) {
            let (a, b, c) = (p(ax, ay), p(bx, by), p(cx, cy));
            let o = orient(a, b, c);
            proptest::prop_assert_eq!(orient(b, a, c), -o);
            proptest::prop_assert_eq!(orient(a, c, b), -o);
            proptest::prop_assert_eq!(orient(c, b, a), -o);
        }

        #[test]
        fn crossing_symmetric(c in proptest::collection::vec(-20i64..20, 8)) {
            let (a, b, x, y) = (p(c[0], c[1]), p(c[2], c[3]), p(c[4], c[5]), p(c[6], c[7]));
            proptest::prop_assume!(a != b && x != y);
            let r = segments_cross(a, b, x, y);
            proptest::prop_assert_eq!(segments_cross(x, y, a, b), r);
            proptest::prop_assert_eq!(segments_cross(b, a, x, y), r);
            proptest::prop_assert_eq!(segments_cross(a, b, y, x), r);
        }
    }
}
