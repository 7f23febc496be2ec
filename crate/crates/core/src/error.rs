use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid mesh parameter: {0}")]
    InvalidParameter(String),
    #[error("triangle {triangle} has nonpositive area {area:e}")]
    NonpositiveArea { triangle: usize, area: f64 },
    #[error("triangle {triangle} references vertex {vertex}, but the mesh has {count} vertices")]
    VertexOutOfRange {
        triangle: usize,
        vertex: usize,
        count: usize,
    },
    #[error("vertex {0} does not belong to any triangle")]
    DanglingVertex(usize),
    #[error("mesh has no triangles")]
    Empty,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("negative reaction coefficient {value:e} on element {element}")]
    NegativeReaction { element: usize, value: f64 },
    #[error("non-finite coefficient on element {element}")]
    NonFinite { element: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilizationError {
    #[error("mesh not strictly acute (theta = {theta:e})")]
    NotStrictlyAcute { theta: f64 },
    #[error("explicit operator of pair {pair} has positive off-diagonal {value:e} at ({row}, {col})")]
    PositiveOffDiagonal {
        pair: usize,
        row: usize,
        col: usize,
        value: f64,
    },
    #[error("negative natural diffusion {value:e} at node {node}")]
    NegativeDiffusion { node: usize, value: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinearSolveError {
    #[error("sparse factorization failed: {0}")]
    Factorization(String),
    #[error("linear solve residual {residual:e} above tolerance {tolerance:e}")]
    Residual { residual: f64, tolerance: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectionError {
    #[error("interior stiffness matrix is singular or indefinite: {0}")]
    Singular(String),
    #[error(transparent)]
    Linear(#[from] LinearSolveError),
    #[error("projection built for {expected} vertices, mesh has {got}")]
    MeshMismatch { expected: usize, got: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid scheme configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Linear(#[from] LinearSolveError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Stabilization(#[from] StabilizationError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error("time step {h:e} violates the monotonicity bound {h_max:e} at t = {time}")]
    TimeStepTooLarge { h: f64, h_max: f64, time: f64 },
    #[error("stability bound violated at t = {time}: |v| = {norm:e} > {bound:e}")]
    StabilityViolated { time: f64, norm: f64, bound: f64 },
    #[error("Howard iteration did not converge at t = {time}: residual {residual:e}")]
    NotConverged { time: f64, residual: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("expression error at offset {offset}: {message}")]
    Expression { offset: usize, message: String },
    #[error("problem config: {0}")]
    Config(String),
    #[error("unknown problem '{0}'")]
    Unknown(String),
}

/// Top-level error for the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Stabilization(#[from] StabilizationError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
