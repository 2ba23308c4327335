use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid box: {0}")]
    InvalidRect(String),

    #[error("grid configuration error: {0}")]
    Grid(String),

    #[error("cell out of range: {index} >= {len}")]
    CellOutOfRange { index: usize, len: usize },

    #[error("invalid system definition: {0}")]
    System(String),

    #[error("unknown builtin system `{0}`")]
    UnknownSystem(String),

    #[error("integration diverged")]
    IntegrationDiverged,

    #[error("invalid abstraction request: {0}")]
    Abstraction(String),

    #[error("Q contains no grid cell")]
    EmptySafeSet,

    #[error("forward/backward iteration did not stabilise after {iterations} alternations (last domain sizes {previous} and {last})")]
    NoFixedPoint {
        iterations: usize,
        previous: usize,
        last: usize,
    },

    #[error("controller is empty")]
    EmptyController,

    #[error("partition not invariant: cell {cell} has a successor outside the controller domain")]
    PartitionNotInvariant { cell: usize },

    #[error("component has no edges")]
    NoEdges,

    #[error("subset construction exceeded {limit} nodes")]
    SubsetLimit { limit: usize },

    #[error("power iteration did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("oracle guard exceeded: {0}")]
    Guard(String),

    #[error("graph error: {0}")]
    Graph(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed controller file: {0}")]
    Format(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }

    /// Strips stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}
