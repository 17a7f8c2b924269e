//! Instance and solution files, verification, random instances and SVG.
//!
//! Instance JSON:
//! `{"name": str, "points": [[x, y], ...], "triangulations": [[[i, j], ...], ...]}`
//!
//! Solution JSON:
//! `{"instance": str, "center": [[i, j], ...], "paths": [{"flips": [{"remove": [[i, j], ...], "add": [[i, j], ...]}, ...]}, ...]}`
//!
//! Edges are written with the smaller index first and edge lists sorted.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, FormatError, TriangulationError};
use crate::fixtures::{random_unit_flip, try_random_point_set};
use crate::geometry::{Point, PointSet};
use crate::triangulation::{delaunay, Edge, ParallelFlip, Path, Triangulation};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub name: String,
    pub points: Arc<PointSet>,
    pub inputs: Vec<Triangulation>,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    name: String,
    points: Vec<[i64; 2]>,
    triangulations: Vec<Vec<[u32; 2]>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlipFile {
    pub remove: Vec<[u32; 2]>,
    pub add: Vec<[u32; 2]>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathFile {
    pub flips: Vec<FlipFile>,
}

/// A solution as stored on disk. Unverified.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub instance: String,
    pub center: Vec<[u32; 2]>,
    pub paths: Vec<PathFile>,
}

fn edge_list(edges: impl IntoIterator<Item = Edge>) -> Vec<[u32; 2]> {
    let mut v: Vec<[u32; 2]> = edges.into_iter().map(|e| [e.a, e.b]).collect();
    v.sort_unstable();
    v
}

fn to_edges(raw: &[[u32; 2]]) -> Result<Vec<Edge>, TriangulationError> {
    raw.iter()
        .map(|&[i, j]| if i == j { Err(TriangulationError::Loop(i)) } else { Ok(Edge::new(i, j)) })
        .collect()
}

impl Instance {
    pub fn new(name: impl Into<String>, points: Arc<PointSet>, inputs: Vec<Triangulation>) -> Result<Self, FormatError> {
        if inputs.len() < 2 {
            return Err(FormatError::TooFewTriangulations(inputs.len()));
        }
        Ok(Self { name: name.into(), points, inputs })
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn m(&self) -> usize {
        self.inputs.len()
    }

    pub fn to_json(&self) -> String {
        let file = InstanceFile {
            name: self.name.clone(),
            points: self.points.points().iter().map(|p| [p.x, p.y]).collect(),
            triangulations: self.inputs.iter().map(|t| edge_list(t.edges())).collect(),
        };
        serde_json::to_string(&file).expect("instance serializes")
    }
}

/// Parses and validates an instance file.
pub fn parse_instance(text: &str) -> Result<Instance, FormatError> {
    let file: InstanceFile = serde_json::from_str(text)?;
    let points = Arc::new(PointSet::new(file.points.iter().map(|&[x, y]| Point::new(x, y)).collect())?);
    if file.triangulations.len() < 2 {
        return Err(FormatError::TooFewTriangulations(file.triangulations.len()));
    }
    let inputs = file
        .triangulations
        .iter()
        .enumerate()
        .map(|(index, raw)| {
            to_edges(raw)
                .and_then(|edges| Triangulation::new(points.clone(), edges))
                .map_err(|source| FormatError::Triangulation { index, source })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Instance::new(file.name, points, inputs)
}

/// A verified-by-construction solution: one path per input, all ending at
/// `center`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solution {
    pub instance_name: String,
    pub center: Triangulation,
    pub paths: Vec<Path>,
}

impl Solution {
    pub fn objective(&self) -> usize {
        self.paths.iter().map(Path::len).sum()
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.paths.iter().map(Path::len).collect()
    }

    /// Removes stationary steps from every path.
    pub fn compress(mut self) -> Self {
        self.paths = self.paths.into_iter().map(Path::compress).collect();
        self
    }

    /// The file form, with stationary steps dropped.
    pub fn to_file(&self) -> SolutionFile {
        SolutionFile {
            instance: self.instance_name.clone(),
            center: edge_list(self.center.edges()),
            paths: self
                .paths
                .iter()
                .map(|p| PathFile {
                    flips: p
                        .flips
                        .iter()
                        .filter(|f| !f.is_empty())
                        .map(|f| FlipFile { remove: edge_list(f.removed.clone()), add: edge_list(f.added.clone()) })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        self.to_file().to_json()
    }

    /// Checks the solution against `inst` and reports the first violation.
    pub fn verify(&self, inst: &Instance, strict: bool) -> VerifyReport {
        verify_solution(inst, &self.to_file(), strict)
    }

    /// Rebuilds a typed solution from a file, verifying it along the way.
    pub fn from_file(inst: &Instance, file: &SolutionFile, strict: bool) -> Result<Self, Error> {
        let report = verify_solution(inst, file, strict);
        if !report.valid {
            return Err(Error::Invalid(report.first_violation.unwrap_or_default()));
        }
        let center = Triangulation::new(inst.points.clone(), to_edges(&file.center)?)?;
        let paths = inst
            .inputs
            .iter()
            .zip(&file.paths)
            .map(|(start, p)| {
                let flips = p
                    .flips
                    .iter()
                    .map(|f| Ok(ParallelFlip::new(to_edges(&f.remove)?, to_edges(&f.add)?)))
                    .collect::<Result<Vec<_>, TriangulationError>>()?;
                Ok(Path { start: start.clone(), flips })
            })
            .collect::<Result<Vec<_>, Error>>()?;
        Ok(Self { instance_name: file.instance.clone(), center, paths })
    }
}

impl SolutionFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("solution serializes")
    }

    pub fn objective(&self) -> usize {
        self.paths.iter().map(|p| p.flips.len()).sum()
    }
}

pub fn parse_solution(text: &str) -> Result<SolutionFile, FormatError> {
    Ok(serde_json::from_str(text)?)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub valid: bool,
    pub objective: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_violation: Option<String>,
}

/// Checks every flip of every path, the starts and the common end.
/// `strict` additionally rejects empty flips.
pub fn verify_solution(inst: &Instance, sol: &SolutionFile, strict: bool) -> VerifyReport {
    let objective = sol.objective();
    let fail = |msg: String| VerifyReport { valid: false, objective, first_violation: Some(msg) };
    if sol.instance != inst.name {
        return fail(format!("solution is for instance {:?}, not {:?}", sol.instance, inst.name));
    }
    if sol.paths.len() != inst.inputs.len() {
        return fail(format!("{} paths for {} input triangulations", sol.paths.len(), inst.inputs.len()));
    }
    let center = match to_edges(&sol.center).and_then(|e| Triangulation::new(inst.points.clone(), e)) {
        Ok(c) => c,
        Err(e) => return fail(format!("center: {e}")),
    };
    for (i, (start, path)) in inst.inputs.iter().zip(&sol.paths).enumerate() {
        let mut t = start.clone();
        for (j, f) in path.flips.iter().enumerate() {
            let pf = match (to_edges(&f.remove), to_edges(&f.add)) {
                (Ok(r), Ok(a)) => ParallelFlip::new(r, a),
                (Err(e), _) | (_, Err(e)) => return fail(format!("path {i}, flip {j}: {e}")),
            };
            t = match t.apply_parallel_flip(&pf, strict) {
                Ok(next) => next,
                Err(e) => return fail(format!("path {i}, flip {j}: {e}")),
            };
        }
        if t != center {
            return fail(format!("path {i} does not end at the center"));
        }
    }
    VerifyReport { valid: true, objective, first_violation: None }
}

/// Sampling attempts for a point set before giving up.
const GENERATOR_RETRIES: usize = 16;

/// `m` copies of the Delaunay triangulation of `n` random grid points, each
/// scrambled by `k` random unit flips. Deterministic in `seed`.
pub fn generate_random_instance(n: usize, m: usize, k: usize, seed: u64) -> Result<Instance, Error> {
    if n < 4 || m < 2 {
        return Err(Error::Invalid(format!("need n >= 4 and m >= 2, got n = {n}, m = {m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..GENERATOR_RETRIES)
        .find_map(|_| try_random_point_set(&mut rng, n))
        .ok_or_else(|| Error::Limit(format!("could not sample {n} points in general position")))?;
    let base = delaunay(points.clone())?;
    let inputs = (0..m)
        .map(|_| {
            let mut t = base.clone();
            for _ in 0..k {
                t = random_unit_flip(&t, &mut rng);
            }
            t
        })
        .collect();
    Ok(Instance::new(format!("random-n{n}-m{m}-k{k}-s{seed}"), points, inputs)?)
}

/// SVG 1.1 drawing: one `line` per edge, one `circle` per point.
pub fn export_svg(t: &Triangulation) -> String {
    let pts = t.points().points();
    let (mut x0, mut y0, mut x1, mut y1) = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
    for p in pts {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    let w = (x1 - x0).max(1) as f64;
    let h = (y1 - y0).max(1) as f64;
    let margin = 0.05 * w.max(h);
    let stroke = 0.004 * w.max(h);
    // Flip y so the drawing matches the usual orientation.
    let fy = |y: i64| (y1 - y) as f64;
    let fx = |x: i64| (x - x0) as f64;
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" viewBox="{} {} {} {}">"#,
        -margin,
        -margin,
        w + 2.0 * margin,
        h + 2.0 * margin
    );
    let _ = writeln!(s, r#"<g stroke="black" stroke-width="{stroke}">"#);
    for e in t.edges() {
        let (a, b) = (pts[e.a as usize], pts[e.b as usize]);
        let _ = writeln!(s, r#"<line x1="{}" y1="{}" x2="{}" y2="{}"/>"#, fx(a.x), fy(a.y), fx(b.x), fy(b.y));
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g fill="red">"#);
    for p in pts {
        let _ = writeln!(s, r#"<circle cx="{}" cy="{}" r="{}"/>"#, fx(p.x), fy(p.y), 2.5 * stroke);
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}
