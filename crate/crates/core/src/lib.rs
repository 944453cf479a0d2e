//! Solver library for large-scale 2-D Euclidean TSP.
//!
//! The pipeline runs five stages: sparse heatmap-graph construction,
//! bridge-deletion clustering into supernodes with a hyper tour over them,
//! hyper-tour-guided initialization, scored destroy-and-repair neighborhood
//! search, and sub-tour optimization. All repair and optimization steps are
//! backed by a Lin–Kernighan kernel with fixed-edge support.

pub mod heatmap;
pub mod hypertour;
pub mod init;
pub mod instance;
pub mod lk;
pub mod pipeline;
pub mod subtour;
pub mod tns;
pub mod tour;

pub use instance::Instance;
pub use pipeline::{Config, RunReport, SolveResult};
pub use tour::Tour;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("tsplib parse error at line {line}: {msg}")]
    TsplibParse { line: usize, msg: String },
    #[error("unsupported EDGE_WEIGHT_TYPE {0:?} (only EUC_2D is supported)")]
    UnsupportedEdgeWeightType(String),
    #[error("duplicate point at indices {first} and {second}")]
    DuplicatePoint { first: usize, second: usize },
    #[error("non-finite coordinate at index {0}")]
    NonFiniteCoordinate(usize),
    #[error("instance has {0} points, need at least {1}")]
    TooFewPoints(usize, usize),
    #[error("heatmap file line {line}: {msg}")]
    HeatmapParse { line: usize, msg: String },
    #[error("heatmap file contains no edges")]
    EmptyHeatmap,
    #[error("vertex id {id} out of range for n={n}")]
    VertexOutOfRange { id: usize, n: usize },
    #[error("infeasible fixed edges: {0}")]
    InfeasibleFixedEdges(String),
    #[error("exact solver limited to {max} points, got {n}")]
    ExactSolverTooLarge { n: usize, max: usize },
    #[error("invalid tour: {0}")]
    InvalidTour(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("stage {stage} violated invariant: {detail}")]
    StageValidation { stage: &'static str, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
