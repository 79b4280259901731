use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("time {t} does not lie on a grid time level")]
    OffGridTime { t: f64 },

    #[error("field has {got} values but the grid has {expected} nodes")]
    NodeCountMismatch { expected: usize, got: usize },

    #[error("non-finite value {value} at node {node}")]
    NonFinite { node: usize, value: f64 },

    #[error("axis {axis} has {nodes} nodes, stencils need at least 3")]
    TooFewNodes { axis: usize, nodes: usize },

    #[error("node {node} is not an interior node")]
    NotInterior { node: usize },

    #[error("time level {level} has no predecessor for a backward difference")]
    NoPreviousLevel { level: usize },

    #[error("cylinder of radius {r} contains no grid nodes")]
    EmptyCylinder { r: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("coefficient is singular: {0}")]
    Singular(&'static str),

    #[error("operation requires a {expected} family")]
    WrongFamily { expected: &'static str },

    #[error("matrix is not symmetric")]
    NotSymmetric,

    #[error("numerical divergence at node {node} (x = {point:?}, t = {t}): value {value}")]
    Divergence {
        node: usize,
        point: Vec<f64>,
        t: f64,
        value: f64,
    },

    #[error("observed gradient {observed} exceeds twice the gradient cap {cap} at t = {t}")]
    CflViolation { observed: f64, cap: f64, t: f64 },

    #[error("point {point:?} at t = {t} lies outside the source cylinder")]
    OutsideCylinder { point: Vec<f64>, t: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("barrier search failed: {condition} (best defect {best})")]
    BarrierSearchFailed { condition: &'static str, best: f64 },

    #[error("no delta in the ladder passes; best margin {best_margin}")]
    NoPassingDelta { best_margin: f64 },

    #[error("jet time derivative {given} disagrees with the equation value {expected}")]
    InconsistentJet { given: f64, expected: f64 },
}
