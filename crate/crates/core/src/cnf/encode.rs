use std::collections::BTreeSet;
use std::sync::Arc;

use super::{Cnf, Lit};
use crate::bounds::{flip_insertion_lb, log2_ceil, BoundTable};
use crate::error::{Error, SolverError};
use crate::geometry::{enumerate_empty_convex_quads, PointSet, Vid};
use crate::instance::{Instance, Solution};
use crate::triangulation::{Edge, ParallelFlip, Path, Triangulation};

/// How the earliest layer at which an edge may appear is bounded.
#[derive(Clone, Debug, Default)]
pub enum InsertionBound {
    /// `ceil(log2(chi + 1))` from the crossing count.
    #[default]
    Log2,
    /// The crossing-string rewriting bound.
    String(Arc<BoundTable>),
}

/// Keeps edge variables close to a reference solution: an edge may appear
/// at a layer only if it crosses at most `k` edges of the reference
/// triangulation at that position.
#[derive(Clone, Debug)]
pub struct Proximity {
    /// Per path, the reference triangulations from its input to the center.
    pub reference: Vec<Vec<Triangulation>>,
    pub k: usize,
}

impl Proximity {
    pub fn from_solution(sol: &Solution, k: usize) -> Result<Self, Error> {
        let reference = sol.paths.iter().map(|p| p.triangulations()).collect::<Result<Vec<_>, _>>()?;
        Ok(Self { reference, k })
    }
}

#[derive(Clone, Debug, Default)]
pub struct EncodeOptions {
    /// Assume shortest paths keep common edges. Common edges are fixed at
    /// every layer, pairs crossing them get no variables, and no flip
    /// removes an edge of the target or re-inserts an edge of the start.
    pub happy_edges: bool,
    pub insertion_bound: InsertionBound,
    pub proximity: Option<Proximity>,
    /// Maximum number of edge variables in any single layer.
    pub layer_budget: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeKey {
    pub path: usize,
    pub layer: usize,
    pub edge: Edge,
}

/// A unit flip from layer `layer` to `layer + 1` of `path`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlipKey {
    pub path: usize,
    pub layer: usize,
    pub removed: Edge,
    pub added: Edge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarInfo {
    Edge(EdgeKey),
    /// An edge of the shared final triangulation of a solution formula.
    Center(Edge),
    Flip(FlipKey),
}

/// Registry of the variables of one formula.
#[derive(Clone, Debug)]
pub struct VarMap {
    points: Arc<PointSet>,
    lengths: Vec<usize>,
    /// `layers[p][i][pair]`: variable of the edge with that pair index at
    /// layer `i` of path `p`, 0 if eliminated. A shared center appears as
    /// the last layer of every path.
    layers: Vec<Vec<Vec<Lit>>>,
    /// `flips[p][i]`: flip variables from layer `i` to `i + 1`, sorted.
    flips: Vec<Vec<Vec<(FlipKey, Lit)>>>,
    info: Vec<VarInfo>,
    conflict: Option<String>,
}

impl VarMap {
    fn pair(&self, e: Edge) -> usize {
        e.a as usize * self.points.len() + e.b as usize
    }

    pub fn points(&self) -> &Arc<PointSet> {
        &self.points
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn num_paths(&self) -> usize {
        self.lengths.len()
    }

    /// Why the formula is trivially unsatisfiable, if it is.
    pub fn conflict(&self) -> Option<&str> {
        self.conflict.as_deref()
    }

    pub fn edge_var(&self, path: usize, layer: usize, e: Edge) -> Option<Lit> {
        let v = *self.layers.get(path)?.get(layer)?.get(self.pair(e))?;
        (v != 0).then_some(v)
    }

    /// Defined edge variables of one layer in edge order.
    pub fn edge_vars_at(&self, path: usize, layer: usize) -> Vec<(Edge, Lit)> {
        let n = self.points.len();
        self.layers[path][layer]
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(|(i, &v)| (Edge::new((i / n) as Vid, (i % n) as Vid), v))
            .collect()
    }

    pub fn flip_vars_at(&self, path: usize, layer: usize) -> &[(FlipKey, Lit)] {
        &self.flips[path][layer]
    }

    pub fn info(&self, var: Lit) -> Option<VarInfo> {
        self.info.get(var.unsigned_abs() as usize - 1).copied()
    }

    pub fn num_vars(&self) -> usize {
        self.info.len()
    }

    pub fn num_edge_vars(&self) -> usize {
        self.info.iter().filter(|i| !matches!(i, VarInfo::Flip(_))).count()
    }

    pub fn num_flip_vars(&self) -> usize {
        self.info.iter().filter(|i| matches!(i, VarInfo::Flip(_))).count()
    }
}

/// What the last layer of a path must satisfy.
enum End<'a> {
    /// Exactly this triangulation.
    Fixed(&'a Triangulation),
    /// Contains this edge.
    Insert(Edge),
    /// The shared center of a solution formula.
    Center,
}

struct PathSpec<'a> {
    start: &'a Triangulation,
    len: usize,
    end: End<'a>,
    /// Earliest layer per pair index, from the start.
    fwd: Vec<u32>,
    /// Earliest distance from the end per pair index, when the end is fixed.
    bwd: Option<Vec<u32>>,
    /// Edges whose insertion flips are eliminated (happy edges).
    no_insert: Option<&'a Triangulation>,
    /// Edges whose removal flips are eliminated (happy edges).
    no_remove: Option<&'a Triangulation>,
}

fn pairs(n: usize) -> impl Iterator<Item = Edge> {
    (0..n as Vid).flat_map(move |a| (a + 1..n as Vid).map(move |b| Edge::new(a, b)))
}

/// Earliest layer at which each pair can be an edge, starting from `t`.
fn insertion_bounds(t: &Triangulation, bound: &InsertionBound) -> Vec<u32> {
    let n = t.n();
    let mut out = vec![u32::MAX; n * n];
    for e in pairs(n) {
        out[e.a as usize * n + e.b as usize] = match bound {
            InsertionBound::Log2 => log2_ceil(t.crossing_count(e) + 1),
            InsertionBound::String(table) => flip_insertion_lb(e, t, table),
        };
    }
    out
}

struct Builder<'a> {
    points: Arc<PointSet>,
    n: usize,
    opts: &'a EncodeOptions,
    cnf: Cnf,
    info: Vec<VarInfo>,
    /// Pairs crossing a forced (happy) edge.
    blocked: Vec<bool>,
    forced: Vec<Edge>,
}

impl<'a> Builder<'a> {
    fn new(points: Arc<PointSet>, opts: &'a EncodeOptions, forced: Vec<Edge>) -> Self {
        let n = points.len();
        let mut blocked = vec![false; n * n];
        for e in pairs(n) {
            blocked[e.a as usize * n + e.b as usize] = forced.iter().any(|&f| f != e && points.cross(e.a, e.b, f.a, f.b));
        }
        Self { points, n, opts, cnf: Cnf::new(0), info: Vec::new(), blocked, forced }
    }

    fn idx(&self, e: Edge) -> usize {
        e.a as usize * self.n + e.b as usize
    }

    fn proximity_ok(&self, path: usize, layer: usize, center: bool, e: Edge) -> bool {
        let Some(p) = &self.opts.proximity else { return true };
        let reference = if center {
            p.reference.first().and_then(|r| r.last())
        } else {
            p.reference.get(path).and_then(|r| r.get(layer.min(r.len().saturating_sub(1))))
        };
        match reference {
            Some(t) => t.contains(e) || t.crossing_count(e) <= p.k,
            None => true,
        }
    }

    fn check_budget(&self, count: usize) -> Result<(), Error> {
        match self.opts.layer_budget {
            Some(b) if count > b => Err(Error::Limit(format!("{count} edge variables in one layer exceed the budget {b}"))),
            _ => Ok(()),
        }
    }

    /// Allocates one layer of edge variables for the pairs accepted by `keep`.
    fn alloc_layer(&mut self, mut keep: impl FnMut(&Self, Edge) -> bool, info: impl Fn(Edge) -> VarInfo) -> Result<Vec<Lit>, Error> {
        let mut layer = vec![0; self.n * self.n];
        let mut count = 0;
        for e in pairs(self.n) {
            if !self.blocked[self.idx(e)] && keep(self, e) {
                layer[self.idx(e)] = self.cnf.new_var();
                self.info.push(info(e));
                count += 1;
            }
        }
        self.check_budget(count)?;
        Ok(layer)
    }

    /// Builds the formula for `specs`; `center` (if any) is the final layer
    /// of every path.
    fn build(mut self, specs: &[PathSpec<'_>], with_center: bool) -> Result<(Cnf, VarMap), Error> {
        let n = self.n;
        let m = specs.len();
        // Edge variables, sorted by (path, layer, edge), center last.
        let mut layers: Vec<Vec<Vec<Lit>>> = Vec::with_capacity(m);
        for (p, s) in specs.iter().enumerate() {
            let own = if with_center { s.len } else { s.len + 1 };
            let mut ls = Vec::with_capacity(s.len + 1);
            for i in 0..own {
                let layer = self.alloc_layer(
                    |b, e| {
                        let k = b.idx(e);
                        s.fwd[k] as usize <= i
                            && s.bwd.as_ref().map_or(true, |bw| bw[k] as usize <= s.len - i)
                            && b.proximity_ok(p, i, false, e)
                    },
                    |edge| VarInfo::Edge(EdgeKey { path: p, layer: i, edge }),
                )?;
                ls.push(layer);
            }
            layers.push(ls);
        }
        if with_center {
            let center = self.alloc_layer(
                |b, e| {
                    let k = b.idx(e);
                    specs.iter().all(|s| s.fwd[k] as usize <= s.len) && b.proximity_ok(0, 0, true, e)
                },
                VarInfo::Center,
            )?;
            for ls in &mut layers {
                ls.push(center.clone());
            }
        }

        let mut vm = VarMap {
            points: self.points.clone(),
            lengths: specs.iter().map(|s| s.len).collect(),
            layers,
            flips: Vec::new(),
            info: Vec::new(),
            conflict: None,
        };
        let conflict = |msg: String, vm: VarMap| -> Result<(Cnf, VarMap), Error> {
            Ok((Cnf::unsatisfiable(), VarMap { conflict: Some(msg), info: Vec::new(), ..vm }))
        };

        // Unit clauses: starts, fixed ends, inserted edges, happy edges.
        let mut units: Vec<Lit> = Vec::new();
        for (p, s) in specs.iter().enumerate() {
            for e in s.start.edges() {
                match vm.edge_var(p, 0, e) {
                    Some(v) => units.push(v),
                    None => return conflict(format!("edge {e} of the start of path {p} has no variable at layer 0"), vm),
                }
            }
            for (e, v) in vm.edge_vars_at(p, 0) {
                if !s.start.contains(e) {
                    units.push(-v);
                }
            }
            match s.end {
                End::Fixed(t) => {
                    for e in t.edges() {
                        match vm.edge_var(p, s.len, e) {
                            Some(v) => units.push(v),
                            None => {
                                return conflict(
                                    format!("target edge {e} of path {p} has no variable at layer {}", s.len),
                                    vm,
                                )
                            }
                        }
                    }
                    for (e, v) in vm.edge_vars_at(p, s.len) {
                        if !t.contains(e) {
                            units.push(-v);
                        }
                    }
                }
                End::Insert(e) => match vm.edge_var(p, s.len, e) {
                    Some(v) => units.push(v),
                    None => return conflict(format!("edge {e} cannot be inserted within {} steps", s.len), vm),
                },
                End::Center => {}
            }
            for &e in &self.forced {
                for i in 0..=s.len {
                    match vm.edge_var(p, i, e) {
                        Some(v) => units.push(v),
                        None => return conflict(format!("happy edge {e} has no variable at layer {i} of path {p}"), vm),
                    }
                }
            }
        }
        let mut seen = BTreeSet::new();
        for u in units {
            if seen.insert(u) {
                self.cnf.add(vec![u]);
            }
        }

        // Flip variables, sorted by (path, layer, removed, added).
        let quads = enumerate_empty_convex_quads(&self.points);
        let mut moves: Vec<(Edge, Edge, [Edge; 4])> = Vec::with_capacity(2 * quads.len());
        for q in &quads {
            let (a, b) = q.diagonal();
            let (c, d) = q.other_diagonal();
            let sides = [Edge::new(a, c), Edge::new(c, b), Edge::new(b, d), Edge::new(d, a)];
            moves.push((Edge::new(a, b), Edge::new(c, d), sides));
            moves.push((Edge::new(c, d), Edge::new(a, b), sides));
        }
        moves.sort_unstable_by_key(|&(r, a, _)| (r, a));
        let mut flips: Vec<Vec<Vec<(FlipKey, Lit)>>> = Vec::with_capacity(m);
        let mut flip_support: Vec<[Lit; 10]> = Vec::new();
        for (p, s) in specs.iter().enumerate() {
            let mut per_layer = Vec::with_capacity(s.len);
            for i in 0..s.len {
                let mut here = Vec::new();
                for &(removed, added, sides) in &moves {
                    if s.no_remove.is_some_and(|t| t.contains(removed)) || s.no_insert.is_some_and(|t| t.contains(added)) {
                        continue;
                    }
                    let mut support = [0; 10];
                    let need = std::iter::once(removed).chain(sides).map(|e| vm.edge_var(p, i, e));
                    let keep = sides.into_iter().chain(std::iter::once(added)).map(|e| vm.edge_var(p, i + 1, e));
                    let mut ok = true;
                    for (slot, v) in support.iter_mut().zip(need.chain(keep)) {
                        match v {
                            Some(v) => *slot = v,
                            None => {
                                ok = false;
                                break;
                            }
                        }
                    }
                    if !ok {
                        continue;
                    }
                    let f = self.cnf.new_var();
                    let key = FlipKey { path: p, layer: i, removed, added };
                    self.info.push(VarInfo::Flip(key));
                    here.push((key, f));
                    flip_support.push(support);
                }
                per_layer.push(here);
            }
            flips.push(per_layer);
        }

        // Need and keep clauses, then the flip clause.
        let mut next = 0;
        for (p, per_layer) in flips.iter().enumerate() {
            for (i, here) in per_layer.iter().enumerate() {
                for &(key, f) in here {
                    for &v in &flip_support[next] {
                        self.cnf.add(vec![-f, v]);
                    }
                    next += 1;
                    if let Some(v) = vm.edge_var(p, i + 1, key.removed) {
                        self.cnf.add(vec![-f, -v]);
                    }
                }
            }
        }

        // Edge changes require flips.
        for (p, per_layer) in flips.iter().enumerate() {
            for (i, here) in per_layer.iter().enumerate() {
                let mut removers: Vec<Vec<Lit>> = vec![Vec::new(); n * n];
                let mut inserters: Vec<Vec<Lit>> = vec![Vec::new(); n * n];
                for &(key, f) in here {
                    removers[self.idx(key.removed)].push(f);
                    inserters[self.idx(key.added)].push(f);
                }
                for e in pairs(n) {
                    let k = self.idx(e);
                    let x = vm.edge_var(p, i, e);
                    let y = vm.edge_var(p, i + 1, e);
                    if let Some(x) = x {
                        let mut c = vec![-x];
                        c.extend(y);
                        c.extend(&removers[k]);
                        self.cnf.add(c);
                    }
                    if let Some(y) = y {
                        let mut c = vec![-y];
                        c.extend(x);
                        c.extend(&inserters[k]);
                        self.cnf.add(c);
                    }
                }
            }
        }

        vm.flips = flips;
        vm.info = self.info;
        debug_assert_eq!(vm.info.len(), self.cnf.num_vars as usize);
        Ok((self.cnf, vm))
    }
}

fn forced_edges(ts: &[&Triangulation]) -> Vec<Edge> {
    ts[0].edges().filter(|&e| ts[1..].iter().all(|t| t.contains(e))).collect()
}

/// Formula satisfiable iff a path of at most `l` parallel flips leads from
/// `t0` to `tt`. Stationary layers are allowed.
pub fn build_path_formula(
    t0: &Triangulation,
    tt: &Triangulation,
    l: usize,
    opts: &EncodeOptions,
) -> Result<(Cnf, VarMap), Error> {
    if t0.points() != tt.points() {
        return Err(Error::Invalid("triangulations of different point sets".into()));
    }
    let forced = if opts.happy_edges { forced_edges(&[t0, tt]) } else { Vec::new() };
    let spec = PathSpec {
        start: t0,
        len: l,
        end: End::Fixed(tt),
        fwd: insertion_bounds(t0, &opts.insertion_bound),
        bwd: Some(insertion_bounds(tt, &opts.insertion_bound)),
        no_insert: opts.happy_edges.then_some(t0),
        no_remove: opts.happy_edges.then_some(tt),
    };
    Builder::new(t0.points().clone(), opts, forced).build(&[spec], false)
}

/// Formula satisfiable iff `uv` can be made an edge of `t` within `l`
/// parallel flips. Happy-edge options are ignored.
pub fn build_insertion_formula(
    t: &Triangulation,
    uv: Edge,
    l: usize,
    opts: &EncodeOptions,
) -> Result<(Cnf, VarMap), Error> {
    let spec = PathSpec {
        start: t,
        len: l,
        end: End::Insert(uv),
        fwd: insertion_bounds(t, &opts.insertion_bound),
        bwd: None,
        no_insert: None,
        no_remove: None,
    };
    Builder::new(t.points().clone(), opts, Vec::new()).build(&[spec], false)
}

/// Formula satisfiable iff a solution exists whose path `i` has at most
/// `lengths[i]` steps. All paths share the variables of the final layer.
pub fn build_solution_formula(inst: &Instance, lengths: &[usize], opts: &EncodeOptions) -> Result<(Cnf, VarMap), Error> {
    if lengths.len() != inst.m() {
        return Err(Error::Invalid(format!("{} lengths for {} inputs", lengths.len(), inst.m())));
    }
    let refs: Vec<&Triangulation> = inst.inputs.iter().collect();
    let forced = if opts.happy_edges { forced_edges(&refs) } else { Vec::new() };
    let specs: Vec<PathSpec<'_>> = inst
        .inputs
        .iter()
        .zip(lengths)
        .map(|(t, &len)| PathSpec {
            start: t,
            len,
            end: End::Center,
            fwd: insertion_bounds(t, &opts.insertion_bound),
            bwd: None,
            // Per path the start-edge rule still applies; the center end is free.
            no_insert: opts.happy_edges.then_some(t),
            no_remove: None,
        })
        .collect();
    Builder::new(inst.points.clone(), opts, forced).build(&specs, true)
}

/// Adds a weight-1 soft clause `-f` for every flip variable of `path_id`
/// going into `last_layer`.
pub fn add_last_step_minimization(mut cnf: Cnf, vm: &VarMap, path_id: usize, last_layer: usize) -> Cnf {
    if last_layer == 0 || vm.conflict().is_some() {
        return cnf;
    }
    for &(_, f) in vm.flip_vars_at(path_id, last_layer - 1) {
        cnf.add_soft(1, vec![-f]);
    }
    cnf
}

fn decode_layer(model: &[bool], vm: &VarMap, path: usize, layer: usize) -> Result<Triangulation, Error> {
    let edges: Vec<Edge> = vm
        .edge_vars_at(path, layer)
        .into_iter()
        .filter(|&(_, v)| model.get(v as usize).copied().unwrap_or(false))
        .map(|(e, _)| e)
        .collect();
    Triangulation::new(vm.points.clone(), edges).map_err(|source| SolverError::Decode { path, layer, source }.into())
}

/// Reads path `path_id` off a model, one triangulation per layer.
/// Stationary steps are kept as empty flips.
pub fn decode_path(model: &[bool], vm: &VarMap, path_id: usize) -> Result<Path, Error> {
    let len = vm.lengths[path_id];
    let mut seq = Vec::with_capacity(len + 1);
    for i in 0..=len {
        seq.push(decode_layer(model, vm, path_id, i)?);
    }
    let mut flips = Vec::with_capacity(len);
    for (i, w) in seq.windows(2).enumerate() {
        let pf = ParallelFlip::between(&w[0], &w[1]);
        if !pf.is_empty() {
            w[0].apply_parallel_flip(&pf, true)
                .map_err(|source| SolverError::DecodeFlip { path: path_id, layer: i, source })?;
        }
        flips.push(pf);
    }
    Ok(Path { start: seq.swap_remove(0), flips })
}

/// Decodes every path of a solution formula.
pub fn decode_solution(model: &[bool], vm: &VarMap, inst: &Instance) -> Result<Solution, Error> {
    let paths = (0..vm.num_paths()).map(|p| decode_path(model, vm, p)).collect::<Result<Vec<_>, _>>()?;
    let center = paths[0].end()?;
    Ok(Solution { instance_name: inst.name.clone(), center, paths })
}
