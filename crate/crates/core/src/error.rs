use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("edge {edge} end {end} is used by more than one junction or endpoint record")]
    DuplicateIncidence { edge: usize, end: u8 },
    #[error("edge {edge} end {end} is not attached to any junction or endpoint record")]
    UnattachedEnd { edge: usize, end: u8 },
    #[error("junction {junction} is not a triple of distinct edges")]
    JunctionOrder { junction: usize },
    #[error("graph is not connected")]
    Disconnected,
    #[error("endpoint on edge {edge} uses parameter end 0; endpoints must sit at end 1")]
    EndpointConvention { edge: usize },
    #[error("record references edge {edge} but the graph has {n_edges} edges")]
    EdgeOutOfRange { edge: usize, n_edges: usize },
    #[error("invalid loop topology: {0}")]
    InvalidLoop(String),
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("edge {edge} is degenerate near sample {sample}")]
    DegenerateEdge { edge: usize, sample: usize },
    #[error("network geometry invalid: {0}")]
    InvalidNetwork(String),
    #[error("field does not match the network grids: {0}")]
    GridMismatch(String),
    #[error("argument outside domain: {0}")]
    DomainError(String),
    #[error("junction constraint violated at junction {junction} (residual {residual:e})")]
    ConstraintViolation { junction: usize, residual: f64 },
    #[error("perturbation too large: C1 norm {norm:e} exceeds bound {bound:e}")]
    PerturbationTooLarge { norm: f64, bound: f64 },
    #[error("representation did not converge after {iterations} iterations (last update {last_update:e})")]
    NoConvergence { iterations: usize, last_update: f64 },
    #[error("candidate leaves the tube around the reference on edge {edge} (distance {distance:e}, radius {radius:e})")]
    TubeExit { edge: usize, distance: f64, radius: f64 },
    #[error("junction Newton solve failed after {iterations} iterations (residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },
    #[error("time {t} is not before the reference time {big_t}")]
    TimeBeyondT { t: f64, big_t: f64 },
    #[error("time {0} is outside the stored trajectory")]
    TimeOutOfRange(f64),
    #[error("trajectory too sparse to interpolate time {0}")]
    SparseTrajectory(f64),
    #[error("no singularity was detected")]
    NoSingularity,
    #[error("rank deficiency: {0}")]
    RankDeficiency(String),
    #[error("reference is not a shrinker (gradient norm {0:e})")]
    NotAShrinker(f64),
    #[error("finite-difference step underflow")]
    StepUnderflow,
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("degenerate samples: {0}")]
    DegenerateSamples(String),
    #[error("shrinker search stalled after {iterations} iterations (gradient norm {gradient_norm:e})")]
    Stalled { iterations: usize, gradient_norm: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
