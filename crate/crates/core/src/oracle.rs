//! Breadth-first search over the parallel-flip graph. Ground truth for
//! tiny instances; exponential in the number of simultaneous flips.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use crate::error::Error;
use crate::geometry::PointSet;
use crate::instance::Instance;
use crate::triangulation::{delaunay, Edge, ParallelFlip, Path, Triangulation};

#[derive(Clone, Copy, Debug)]
pub struct OracleLimits {
    pub max_points: usize,
    pub max_nodes: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self { max_points: 9, max_nodes: 50_000 }
    }
}

/// Every triangulation reachable from `t` by one non-empty parallel flip.
pub fn parallel_neighbors(t: &Triangulation) -> Vec<Triangulation> {
    let cands = t.unit_flip_candidates();
    let k = cands.len();
    let conflict: Vec<Vec<bool>> = (0..k)
        .map(|i| (0..k).map(|j| i != j && t.share_triangle(cands[i].0, cands[j].0)).collect())
        .collect();
    let mut out = Vec::new();
    let mut chosen: Vec<usize> = Vec::new();
    fn rec(
        i: usize,
        t: &Triangulation,
        cands: &[(Edge, Edge)],
        conflict: &[Vec<bool>],
        chosen: &mut Vec<usize>,
        out: &mut Vec<Triangulation>,
    ) {
        if i == cands.len() {
            if !chosen.is_empty() {
                let pf = ParallelFlip::new(
                    chosen.iter().map(|&c| cands[c].0).collect(),
                    chosen.iter().map(|&c| cands[c].1).collect(),
                );
                out.push(t.apply_parallel_flip(&pf, true).expect("independent unit flips form a parallel flip"));
            }
            return;
        }
        rec(i + 1, t, cands, conflict, chosen, out);
        if chosen.iter().all(|&c| !conflict[c][i]) {
            chosen.push(i);
            rec(i + 1, t, cands, conflict, chosen, out);
            chosen.pop();
        }
    }
    rec(0, t, &cands, &conflict, &mut chosen, &mut out);
    out
}

/// The explored flip graph: nodes in discovery order and adjacency lists.
pub struct FlipGraph {
    pub nodes: Vec<Triangulation>,
    pub index: HashMap<Triangulation, usize>,
    pub adj: Vec<Vec<usize>>,
}

impl FlipGraph {
    /// Explores the whole parallel-flip graph component of `start`.
    pub fn explore(start: &Triangulation, max_nodes: usize) -> Result<Self, Error> {
        Self::explore_with(start, max_nodes, parallel_neighbors)
    }

    /// Explores with unit-flip adjacency only.
    pub fn explore_unit(start: &Triangulation, max_nodes: usize) -> Result<Self, Error> {
        Self::explore_with(start, max_nodes, |t| {
            t.unit_flip_candidates().into_iter().map(|(e, _)| t.flip(e).unwrap()).collect()
        })
    }

    fn explore_with(
        start: &Triangulation,
        max_nodes: usize,
        nbrs: impl Fn(&Triangulation) -> Vec<Triangulation>,
    ) -> Result<Self, Error> {
        let mut g = FlipGraph { nodes: vec![start.clone()], index: HashMap::new(), adj: vec![Vec::new()] };
        g.index.insert(start.clone(), 0);
        let mut i = 0;
        while i < g.nodes.len() {
            let next = nbrs(&g.nodes[i]);
            for t in next {
                let j = match g.index.get(&t) {
                    Some(&j) => j,
                    None => {
                        if g.nodes.len() >= max_nodes {
                            return Err(Error::Limit(format!("flip graph exceeds {max_nodes} nodes")));
                        }
                        let j = g.nodes.len();
                        g.index.insert(t.clone(), j);
                        g.nodes.push(t);
                        g.adj.push(Vec::new());
                        j
                    }
                };
                g.adj[i].push(j);
            }
            i += 1;
        }
        Ok(g)
    }

    pub fn distances_from(&self, src: usize) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.nodes.len()];
        dist[src] = 0;
        let mut q = VecDeque::from([src]);
        while let Some(v) = q.pop_front() {
            for &w in &self.adj[v] {
                if dist[w] == u32::MAX {
                    dist[w] = dist[v] + 1;
                    q.push_back(w);
                }
            }
        }
        dist
    }
}

/// All triangulations of `points`, found through unit flips from Delaunay.
pub fn all_triangulations(points: &Arc<PointSet>, max_nodes: usize) -> Result<Vec<Triangulation>, Error> {
    let start = delaunay(points.clone())?;
    Ok(FlipGraph::explore_unit(&start, max_nodes)?.nodes)
}

/// Breadth-first search from `from` until `goal` accepts a triangulation.
/// Returns the shortest path found.
pub fn bfs_until(
    from: &Triangulation,
    max_nodes: usize,
    goal: impl Fn(&Triangulation) -> bool,
) -> Result<Path, Error> {
    let mut parent: HashMap<Triangulation, Option<Triangulation>> = HashMap::new();
    parent.insert(from.clone(), None);
    let mut q = VecDeque::from([from.clone()]);
    while let Some(t) = q.pop_front() {
        if goal(&t) {
            let mut seq = vec![t.clone()];
            let mut cur = t;
            while let Some(Some(p)) = parent.get(&cur) {
                seq.push(p.clone());
                cur = p.clone();
            }
            seq.reverse();
            return Ok(Path::from_triangulations(&seq));
        }
        for nb in parallel_neighbors(&t) {
            if !parent.contains_key(&nb) {
                if parent.len() >= max_nodes {
                    return Err(Error::Limit(format!("search exceeds {max_nodes} nodes")));
                }
                parent.insert(nb.clone(), Some(t.clone()));
                q.push_back(nb);
            }
        }
    }
    Err(Error::Invalid("goal unreachable".into()))
}

/// Parallel-flip distance with a shortest path.
pub fn bfs_distance(a: &Triangulation, b: &Triangulation, max_nodes: usize) -> Result<(usize, Path), Error> {
    let p = bfs_until(a, max_nodes, |t| t == b)?;
    Ok((p.len(), p))
}

/// Fewest parallel flips after which `uv` is an edge.
pub fn insertion_distance(t: &Triangulation, uv: Edge, max_nodes: usize) -> Result<usize, Error> {
    Ok(bfs_until(t, max_nodes, |x| x.contains(uv))?.len())
}

#[derive(Clone, Debug)]
pub struct OracleResult {
    pub objective: usize,
    pub center: Triangulation,
    /// `distances[i][j]`: distance between inputs `i` and `j`.
    pub distances: Vec<Vec<usize>>,
}

/// Optimal objective by exhaustive search: the minimum over every
/// triangulation `C` of the summed distances from the inputs to `C`.
pub fn brute_force_oracle(inst: &Instance, limits: OracleLimits) -> Result<OracleResult, Error> {
    if inst.n() > limits.max_points {
        return Err(Error::Limit(format!("{} points exceed the oracle limit {}", inst.n(), limits.max_points)));
    }
    let g = FlipGraph::explore(&inst.inputs[0], limits.max_nodes)?;
    let srcs: Vec<usize> = inst.inputs.iter().map(|t| g.index[t]).collect();
    let dist: Vec<Vec<u32>> = srcs.iter().map(|&s| g.distances_from(s)).collect();
    let (best, objective) = (0..g.nodes.len())
        .map(|c| (c, dist.iter().map(|d| d[c] as usize).sum::<usize>()))
        .min_by_key(|&(c, s)| (s, c))
        .expect("graph has a node");
    let distances = dist.iter().map(|d| srcs.iter().map(|&t| d[t] as usize).collect()).collect();
    Ok(OracleResult { objective, center: g.nodes[best].clone(), distances })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::generate_random_instance;

    #[test]
    fn oracle_examples() {
        let inst = generate_random_instance(7, 2, 0, 1).unwrap();
        let r = brute_force_oracle(&inst, OracleLimits::default()).unwrap();
        assert_eq!(r.objective, 0);
        assert_eq!(r.center, inst.inputs[0]);

        let mut inst = generate_random_instance(7, 2, 0, 2).unwrap();
        let (e, _) = inst.inputs[0].unit_flip_candidates()[0];
        inst.inputs[1] = inst.inputs[0].flip(e).unwrap();
        let r = brute_force_oracle(&inst, OracleLimits::default()).unwrap();
        assert_eq!(r.objective, 1);
        assert!(r.center == inst.inputs[0] || r.center == inst.inputs[1]);
        assert_eq!(r.distances[0][1], 1);
    }

    #[test]
    fn convex_counts_are_catalan() {
        // Convex hexagon: Catalan(4) = 14 triangulations.
        let pts = [(0, 0), (10, 0), (16, 8), (10, 16), (0, 16), (-6, 8)];
        let ps = Arc::new(PointSet::new(pts.iter().map(|&p| p.into()).collect()).unwrap());
        assert_eq!(all_triangulations(&ps, 1000).unwrap().len(), 14);
    }

    #[test]
    fn fan_insertion_takes_three() {
        let (t, uv) = crate::fixtures::fan_instance(6);
        assert_eq!(insertion_distance(&t, uv, 100_000).unwrap(), 3);
    }

    #[test]
    fn bfs_path_is_valid() {
        let inst = generate_random_instance(8, 2, 4, 9).unwrap();
        let (d, p) = bfs_distance(&inst.inputs[0], &inst.inputs[1], 100_000).unwrap();
        assert_eq!(p.len(), d);
        assert_eq!(p.end().unwrap(), inst.inputs[1]);
        for f in &p.flips {
            assert!(!f.is_empty());
        }
    }
}
