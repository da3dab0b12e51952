use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("coordinate {value} outside [0,1) (axis {axis})")]
    Domain { axis: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported dimension {0}; only d = 1 and d = 2 are supported")]
    UnsupportedDimension(usize),

    #[error("restriction has zero mass")]
    EmptyRestriction,

    #[error("point is not in the dyadic support of the measure at depth {depth}")]
    NotInSupport { depth: u32 },

    #[error("depth {requested} exceeds the available budget {available}")]
    DepthExhausted { requested: u32, available: u32 },

    #[error("resolution {requested} exceeds measure depth {depth}")]
    ResolutionExceeded { requested: u32, depth: u32 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("pattern keeps no cells")]
    EmptyPattern,

    #[error("empty point set")]
    EmptySet,

    #[error("random generator cannot stay inside the band at depth {depth}: target {target:.3}, candidates {candidates:?}, band factor {band}")]
    GenerationInfeasible {
        depth: u32,
        target: f64,
        candidates: Vec<f64>,
        band: f64,
    },

    #[error("degenerate pair: the two points coincide")]
    DegeneratePair,

    #[error("scale mismatch: {0} vs {1}")]
    ScaleMismatch(u32, u32),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("missing calibration constants at {0}; run `lab-cli calibrate` first")]
    MissingCalibration(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LabError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        LabError::InvalidArgument(msg.into())
    }
}
