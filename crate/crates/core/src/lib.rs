//! Parallel flip reconfiguration of planar triangulations.
//!
//! Given several triangulations of one point set, find a center
//! triangulation and short parallel-flip paths from every input to it. The
//! crate provides exact geometric predicates, SAT encodings of bounded
//! length paths and solutions, lower bounds, SAT-free heuristics, and a
//! verifier for solution files.

pub mod bounds;
pub mod cnf;
pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod heuristics;
pub mod instance;
pub mod oracle;
pub mod pipeline;
pub mod sat;
pub mod triangulation;

pub use error::{Error, Result};
pub use geometry::{Point, PointSet, Quad, Vid};
pub use instance::{Instance, Solution, SolutionFile};
pub use triangulation::{Edge, ParallelFlip, Path, Triangulation};
