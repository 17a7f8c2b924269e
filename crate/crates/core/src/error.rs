use thiserror::Error;

use crate::geometry::Vid;
use crate::triangulation::Edge;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("points {0} and {1} coincide")]
    DuplicatePoint(Vid, Vid),
    #[error("points {0}, {1} and {2} are collinear")]
    Collinear(Vid, Vid, Vid),
    #[error("too many points ({0})")]
    TooManyPoints(usize),
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
}

/// The first violated triangulation invariant, with a witness.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TriangulationError {
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("edge ({0}, {1}) references a vertex outside the point set")]
    InvalidVertex(Vid, Vid),
    #[error("edge ({0}, {0}) is a loop")]
    Loop(Vid),
    #[error("edge {0} listed twice")]
    DuplicateEdge(Edge),
    #[error("edges {0} and {1} cross")]
    Crossing(Edge, Edge),
    #[error("edge count {found} != {expected} (3n - 3 - h)")]
    EdgeCount { expected: usize, found: usize },
    #[error("hull edge {0} missing")]
    MissingHullEdge(Edge),
    #[error("invalid face structure: {0}")]
    Face(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FlipError {
    #[error("empty parallel flip")]
    Empty,
    #[error("{removed} edges removed but {added} added")]
    SizeMismatch { removed: usize, added: usize },
    #[error("edge {0} listed twice in the flip")]
    Duplicate(Edge),
    #[error("removed edge {0} is not in the triangulation")]
    EdgeAbsent(Edge),
    #[error("removed edge {0} is a hull edge")]
    HullEdge(Edge),
    #[error("quadrilateral around {0} is not convex")]
    NotConvex(Edge),
    #[error("removed edges {0} and {1} share a triangle")]
    SharedTriangle(Edge, Edge),
    #[error("added edges do not match the flipped diagonals: expected {expected:?}, got {found:?}")]
    AddedMismatch { expected: Vec<Edge>, found: Vec<Edge> },
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("triangulation {index}: {source}")]
    Triangulation {
        index: usize,
        #[source]
        source: TriangulationError,
    },
    #[error("an instance needs at least 2 triangulations, got {0}")]
    TooFewTriangulations(usize),
    #[error("line {line}: {msg}")]
    Text { line: usize, msg: String },
    #[error("invalid crossing string {0:?}")]
    TriString(String),
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("formula has {vars} variables, built-in limit is {limit}")]
    LimitExceeded { vars: usize, limit: usize },
    #[error("soft clauses given to a plain SAT call")]
    UnexpectedSoft,
    #[error("MaxSAT call without soft clauses")]
    NoSoft,
    #[error("solver returned a model violating clause {0}")]
    BadModel(usize),
    #[error("decoded layer {layer} of path {path} is not a triangulation: {source}")]
    Decode {
        path: usize,
        layer: usize,
        #[source]
        source: TriangulationError,
    },
    #[error("decoded step {layer} of path {path} is not a parallel flip: {source}")]
    DecodeFlip {
        path: usize,
        layer: usize,
        #[source]
        source: FlipError,
    },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Triangulation(#[from] TriangulationError),
    #[error(transparent)]
    Flip(#[from] FlipError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("limit exceeded: {0}")]
    Limit(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
