use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported element type {0}")]
    UnsupportedElement(u32),

    #[error("mixed element types: {0}")]
    MixedElements(String),

    #[error("untagged boundary facets: {0}")]
    UntaggedFacets(String),

    #[error("facet {0} is not a boundary facet")]
    InteriorFacet(String),

    #[error("unknown boundary tag {0}")]
    UnknownTag(i32),

    #[error("point ({x}, {y}, {z}) could not be located in the source mesh")]
    PointLocation { x: f64, y: f64, z: f64 },

    #[error("singular matrix: zero pivot at row {0}")]
    Singular(usize),

    #[error("linear solve failed: {reason} (relative residual {residual:e})")]
    LinearSolve { reason: String, residual: f64 },

    #[error("time step {step} (t = {time} s) failed: {source}")]
    StepFailed {
        step: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("particle {particle} (beta = {beta:?}) failed: {source}")]
    ParticleFailed {
        particle: usize,
        beta: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
